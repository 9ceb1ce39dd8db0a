//! The operations behind each command-line subcommand. Every function here
//! returns a serializable value; the binary only parses flags and writes
//! files.

mod agree;
mod config;
mod evaluate;
mod scoring;
mod simulate;

pub use agree::{
    cmd_agree, cmd_sweep, default_sweep_grid, human_majority, inter_annotator, write_sweep_csv,
    HumanMajority, InterAnnotator, KappaOutcome, KappaRow, KappaTable, PairKappa, SweepPoint,
};
pub use config::{EvalConfig, Equivalence, ProbeSettings, SemanticSettings};
pub use evaluate::{
    cmd_correlate, cmd_evaluate, AurocCell, AurocOutcome, CorrelationCell, CorrelationTable,
    DatasetReport, EvaluationReport, LengthCorrelation, MeanCell, RunMetadata, TOOL_NAME,
    TOOL_VERSION,
};
pub use scoring::{short_reason, Dataset, MetricColumn, ProbeSummary, ScoreColumn, Scorer};
pub use simulate::{cmd_simulate, cmd_verify, write_trials_csv, SimulateConfig, VerifyConfig};
