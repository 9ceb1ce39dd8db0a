//! Evaluation of language-model uncertainty scores when the correctness
//! labels themselves come from an imperfect metric.
//!
//! The scoring side covers lexical and external correctness metrics, an
//! LM judge, the uncertainty estimators and rank statistics. The `biaslab`
//! module simulates how label errors distort the estimated AUROC.

pub mod biaslab;
pub mod commands;
pub mod correctness;
pub mod error;
pub mod judge;
pub mod records;
pub mod stats;
pub mod stub_judge;
pub mod toy;
pub mod uq;

pub use error::{Error, Result};
