//! Simulation laboratory for label-noise bias in AUROC estimation.
//!
//! When correctness labels are noisy but their errors are independent of
//! the uncertainty score given the true label, the estimated AUROC is an
//! affine shrinkage of the true AUROC toward 0.5 ([`predicted_auroc_independent`]),
//! so method rankings survive in expectation. When label errors correlate
//! with the score (directly, or through a shared confounder such as answer
//! length) the estimate is pushed up or down in a method-dependent way and
//! rankings can invert. The simulators here generate all three regimes.

mod confounded;
mod sim;
mod verify;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::stats::ConfusionRates;

pub use confounded::{
    ranking_trials, simulate_confounded, ConfoundedDraws, ConfoundedScenario, ConfounderConfig,
    RankingSummary,
};
pub use sim::{simulate_correlated, simulate_independent, simulate_trial, SimDraw, SimDraws, TrialRow};
pub use verify::{default_grid, verify_closed_form, GridPoint, GridPointResult, VerifyReport};

/// Expected AUROC against noisy labels whose errors are independent of the
/// score given the true label:
///
/// `0.5·FPR·TNR + 0.5·TPR·FNR + A·TPR·TNR + (1 − A)·FPR·FNR`.
pub fn predicted_auroc_independent(true_auroc: f64, rates: &ConfusionRates) -> f64 {
    let ConfusionRates { tpr, fpr, tnr, fnr } = *rates;
    0.5 * fpr * tnr + 0.5 * tpr * fnr + true_auroc * tpr * tnr + (1.0 - true_auroc) * fpr * fnr
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Class-conditional score distributions. Correct items (h = 1) are
/// stochastically less uncertain than incorrect ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreModel {
    /// Unit-variance Gaussians whose mean gap yields this true AUROC.
    TargetAuroc(f64),
    Gaussian {
        correct_mean: f64,
        incorrect_mean: f64,
        correct_sd: f64,
        incorrect_sd: f64,
    },
}

impl ScoreModel {
    pub fn gaussian_params(&self) -> Result<(f64, f64, f64, f64)> {
        match *self {
            ScoreModel::TargetAuroc(a) => {
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::Config(format!("target AUROC {a} must lie in (0, 1)")));
                }
                let gap = std::f64::consts::SQRT_2 * standard_normal().inverse_cdf(a);
                Ok((0.0, 1.0, gap, 1.0))
            }
            ScoreModel::Gaussian {
                correct_mean,
                incorrect_mean,
                correct_sd,
                incorrect_sd,
            } => {
                if !(correct_sd > 0.0 && incorrect_sd > 0.0) {
                    return Err(Error::Config("score standard deviations must be > 0".into()));
                }
                Ok((correct_mean, correct_sd, incorrect_mean, incorrect_sd))
            }
        }
    }

    /// Population AUROC, `Φ((μ₀ − μ₁) / √(σ₀² + σ₁²))`.
    pub fn true_auroc(&self) -> Result<f64> {
        let (m1, s1, m0, s0) = self.gaussian_params()?;
        Ok(standard_normal().cdf((m0 - m1) / (s0 * s0 + s1 * s1).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_items: usize,
    /// P(h = 1).
    pub prevalence: f64,
    pub score_model: ScoreModel,
    /// Target P(h=1 | ĥ=1).
    pub tpr: f64,
    /// Target P(h=0 | ĥ=0).
    pub tnr: f64,
    /// Error–score coupling in [-1, 1]. Negative: confidently scored
    /// incorrect answers tend to be marked correct (and hesitantly scored
    /// correct answers marked incorrect), inflating the estimate.
    pub rho: f64,
    /// Logistic slope per unit of `rho` on the standardized score.
    pub coupling_scale: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n_items: 100_000,
            prevalence: 0.5,
            score_model: ScoreModel::TargetAuroc(0.75),
            tpr: 0.9,
            tnr: 0.9,
            rho: 0.0,
            coupling_scale: 4.0,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(Error::Config(format!(
                "prevalence {} must lie in (0, 1)",
                self.prevalence
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho {} must lie in [-1, 1]", self.rho)));
        }
        if self.n_items == 0 {
            return Err(Error::Config("n_items must be positive".into()));
        }
        self.score_model.gaussian_params()?;
        ConfusionRates::new(self.tpr, self.tnr)?;
        Ok(())
    }

    pub fn rates(&self) -> Result<ConfusionRates> {
        ConfusionRates::new(self.tpr, self.tnr)
    }
}

/// Per-class label-flip probabilities that realise target estimated-label
/// conditioned rates at a given prevalence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipProbabilities {
    /// P(ĥ = 0 | h = 1).
    pub correct_flip: f64,
    /// P(ĥ = 1 | h = 0).
    pub incorrect_flip: f64,
    /// Implied P(ĥ = 1).
    pub estimated_positive_rate: f64,
}

/// Bayes inversion from `(π, TPR, TNR)` to sensitivity and specificity.
///
/// With `q = P(ĥ=1)`: `π = TPR·q + FNR·(1−q)`, so
/// `q = (π − FNR) / (TPR − FNR)`, then `P(ĥ=1|h=1) = TPR·q/π` and
/// `P(ĥ=0|h=0) = TNR·(1−q)/(1−π)`.
pub fn calibrate_flips(prevalence: f64, rates: &ConfusionRates) -> Result<FlipProbabilities> {
    let denom = rates.tpr - rates.fnr;
    if denom.abs() < 1e-12 {
        return Err(Error::Calibration(
            "tpr + tnr = 1 leaves the estimated-positive rate unidentified".into(),
        ));
    }
    let q = (prevalence - rates.fnr) / denom;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Calibration(format!(
            "implied P(ĥ=1) = {q:.4} outside [0, 1] for prevalence {prevalence}"
        )));
    }
    let sensitivity = rates.tpr * q / prevalence;
    let specificity = rates.tnr * (1.0 - q) / (1.0 - prevalence);
    let tol = 1e-12;
    if !(-tol..=1.0 + tol).contains(&sensitivity) || !(-tol..=1.0 + tol).contains(&specificity) {
        return Err(Error::Calibration(format!(
            "implied sensitivity {sensitivity:.4} / specificity {specificity:.4} outside [0, 1]"
        )));
    }
    Ok(FlipProbabilities {
        correct_flip: (1.0 - sensitivity).clamp(0.0, 1.0),
        incorrect_flip: (1.0 - specificity).clamp(0.0, 1.0),
        estimated_positive_rate: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(tpr: f64, tnr: f64) -> ConfusionRates {
        ConfusionRates::new(tpr, tnr).unwrap()
    }

    #[test]
    fn noiseless_labels_return_true_auroc() {
        for a in [0.0, 0.3, 0.5, 0.77, 1.0] {
            assert_eq!(predicted_auroc_independent(a, &rates(1.0, 1.0)), a);
        }
    }

    #[test]
    fn uninformative_labels_return_half() {
        for a in [0.0, 0.3, 0.77, 1.0] {
            assert!((predicted_auroc_independent(a, &rates(0.5, 0.5)) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn worked_value() {
        // 0.045 + 0.045 + 0.648 + 0.002
        let v = predicted_auroc_independent(0.8, &rates(0.9, 0.9));
        assert!((v - 0.740).abs() < 1e-12);
    }

    #[test]
    fn target_auroc_round_trips() {
        for a in [0.55, 0.6, 0.75, 0.9, 0.99] {
            let got = ScoreModel::TargetAuroc(a).true_auroc().unwrap();
            assert!((got - a).abs() < 1e-9, "{a} -> {got}");
        }
        assert!(ScoreModel::TargetAuroc(1.0).true_auroc().is_err());
    }

    #[test]
    fn calibration_symmetric_closed_form() {
        // π = 0.5 and tpr = tnr = r gives q = 0.5 and sensitivity = specificity = r
        let f = calibrate_flips(0.5, &rates(0.8, 0.8)).unwrap();
        assert!((f.estimated_positive_rate - 0.5).abs() < 1e-15);
        assert!((f.correct_flip - 0.2).abs() < 1e-12);
        assert!((f.incorrect_flip - 0.2).abs() < 1e-12);
        let exact = calibrate_flips(0.3, &rates(1.0, 1.0)).unwrap();
        assert_eq!((exact.correct_flip, exact.incorrect_flip), (0.0, 0.0));
    }

    #[test]
    fn infeasible_targets_fail() {
        assert!(matches!(calibrate_flips(0.05, &rates(0.9, 0.7)), Err(Error::Calibration(_))));
        assert!(matches!(calibrate_flips(0.5, &rates(0.6, 0.4)), Err(Error::Calibration(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = SimulationConfig::default();
        assert!(c.validate().is_ok());
        c.prevalence = 1.0;
        assert!(c.validate().is_err());
        c.prevalence = 0.5;
        c.rho = 1.5;
        assert!(c.validate().is_err());
    }
}
