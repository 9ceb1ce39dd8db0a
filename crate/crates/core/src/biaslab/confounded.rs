use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::auroc;

use super::sim::shifted;
use super::{calibrate_flips, ScoreModel, SimulationConfig};

/// Shared confounder `z` (think: answer length) acting on one method's
/// score and on the correctness function's errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfounderConfig {
    /// Logistic slope of label errors on `z`. Zero makes label errors
    /// independent of every score.
    pub strength: f64,
    /// +1: high-z answers tend to be marked correct (incorrect high-z items
    /// flip to ĥ=1, correct low-z items flip to ĥ=0). -1 mirrors this.
    pub error_sign: f64,
    /// Weight of `-z` in method B's unit-variance noise; B's uncertainty
    /// falls as `z` grows.
    pub b_loading: f64,
    /// True AUROC of method A minus that of method B.
    pub auroc_gap: f64,
}

/// Full parameterisation of the two-method confounded experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundedScenario {
    pub n_items: usize,
    pub prevalence: f64,
    pub method_a_auroc: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub confounder: ConfounderConfig,
}

const PINNED: &str = include_str!("../../data/confounded_scenario.json");

impl ConfoundedScenario {
    /// The committed scenario under which the estimated ranking of the two
    /// methods inverts.
    pub fn pinned() -> Self {
        serde_json::from_str(PINNED).expect("bundled confounded scenario parses")
    }

    pub fn with_strength(&self, strength: f64) -> Self {
        let mut s = self.clone();
        s.confounder.strength = strength;
        s
    }

    pub fn method_b_auroc(&self) -> f64 {
        self.method_a_auroc - self.confounder.auroc_gap
    }

    fn validate(&self) -> Result<()> {
        let c = &self.confounder;
        if !(c.strength >= 0.0) {
            return Err(Error::Config("confounder strength must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&c.b_loading.abs()) {
            return Err(Error::Config("b_loading must lie in (-1, 1)".into()));
        }
        if c.error_sign.abs() != 1.0 {
            return Err(Error::Config("error_sign must be +1 or -1".into()));
        }
        SimulationConfig {
            n_items: self.n_items,
            prevalence: self.prevalence,
            score_model: ScoreModel::TargetAuroc(self.method_b_auroc()),
            tpr: self.tpr,
            tnr: self.tnr,
            ..Default::default()
        }
        .validate()?;
        ScoreModel::TargetAuroc(self.method_a_auroc).gaussian_params()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundedDraws {
    pub z: Vec<f64>,
    pub h: Vec<u8>,
    pub h_hat: Vec<u8>,
    pub g_a: Vec<f64>,
    pub g_b: Vec<f64>,
}

impl ConfoundedDraws {
    fn auroc_of(scores: &[f64], labels: &[u8]) -> Result<f64> {
        let pairs: Vec<(f64, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
        Ok(auroc(&pairs)?.value)
    }

    pub fn true_auroc_a(&self) -> Result<f64> {
        Self::auroc_of(&self.g_a, &self.h)
    }

    pub fn true_auroc_b(&self) -> Result<f64> {
        Self::auroc_of(&self.g_b, &self.h)
    }

    pub fn estimated_auroc_a(&self) -> Result<f64> {
        Self::auroc_of(&self.g_a, &self.h_hat)
    }

    pub fn estimated_auroc_b(&self) -> Result<f64> {
        Self::auroc_of(&self.g_b, &self.h_hat)
    }
}

/// Draws one confounded dataset scored by two methods.
///
/// Method A: `g = μ_A(h) + ε`, independent of `z`. Method B:
/// `g = μ_B(h) − λ·z + √(1−λ²)·ε`, so its true AUROC is set by its mean gap
/// alone while its ranking within a class tracks `z`.
pub fn simulate_confounded(scenario: &ConfoundedScenario, seed: u64) -> Result<ConfoundedDraws> {
    scenario.validate()?;
    let rates = crate::stats::ConfusionRates::new(scenario.tpr, scenario.tnr)?;
    let flips = calibrate_flips(scenario.prevalence, &rates)?;
    let (_, _, gap_a, _) = ScoreModel::TargetAuroc(scenario.method_a_auroc).gaussian_params()?;
    let (_, _, gap_b, _) = ScoreModel::TargetAuroc(scenario.method_b_auroc()).gaussian_params()?;
    let c = scenario.confounder;
    let residual = (1.0 - c.b_loading * c.b_loading).sqrt();

    let n = scenario.n_items;
    let mut out = ConfoundedDraws {
        z: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        h_hat: Vec::with_capacity(n),
        g_a: Vec::with_capacity(n),
        g_b: Vec::with_capacity(n),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let h = u8::from(rng.random::<f64>() < scenario.prevalence);
        let eps_a: f64 = rng.sample(StandardNormal);
        let eps_b: f64 = rng.sample(StandardNormal);
        let incorrect = f64::from(1 - h);
        let g_a = gap_a * incorrect + eps_a;
        let g_b = gap_b * incorrect - c.b_loading * z + residual * eps_b;

        let (base, direction) = if h == 1 {
            (flips.correct_flip, -1.0)
        } else {
            (flips.incorrect_flip, 1.0)
        };
        let p_flip = shifted(base, c.strength * c.error_sign * direction * z);
        let h_hat = if rng.random::<f64>() < p_flip { 1 - h } else { h };

        out.z.push(z);
        out.h.push(h);
        out.h_hat.push(h_hat);
        out.g_a.push(g_a);
        out.g_b.push(g_b);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSummary {
    pub trials: usize,
    pub strength: f64,
    /// Trials where method A's true AUROC exceeds B's.
    pub true_a_over_b: usize,
    /// Trials where method B's estimated AUROC exceeds A's.
    pub estimated_b_over_a: usize,
    /// Trials where the estimated ranking agrees with the true ranking.
    pub ranking_preserved: usize,
    pub mean_true_a: f64,
    pub mean_true_b: f64,
    pub mean_estimated_a: f64,
    pub mean_estimated_b: f64,
}

/// Runs the confounded experiment over consecutive seeds starting at
/// `first_seed`.
pub fn ranking_trials(
    scenario: &ConfoundedScenario,
    first_seed: u64,
    trials: usize,
) -> Result<RankingSummary> {
    use rayon::prelude::*;
    let rows: Vec<(f64, f64, f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let d = simulate_confounded(scenario, first_seed + i)?;
            Ok((
                d.true_auroc_a()?,
                d.true_auroc_b()?,
                d.estimated_auroc_a()?,
                d.estimated_auroc_b()?,
            ))
        })
        .collect::<Result<_>>()?;
    let count = |f: &dyn Fn(&(f64, f64, f64, f64)) -> bool| rows.iter().filter(|r| f(r)).count();
    let mean = |f: &dyn Fn(&(f64, f64, f64, f64)) -> f64| {
        rows.iter().map(f).sum::<f64>() / rows.len().max(1) as f64
    };
    Ok(RankingSummary {
        trials,
        strength: scenario.confounder.strength,
        true_a_over_b: count(&|r| r.0 > r.1),
        estimated_b_over_a: count(&|r| r.3 > r.2),
        ranking_preserved: count(&|r| (r.0 > r.1) == (r.2 > r.3)),
        mean_true_a: mean(&|r| r.0),
        mean_true_b: mean(&|r| r.1),
        mean_estimated_a: mean(&|r| r.2),
        mean_estimated_b: mean(&|r| r.3),
    })
}
