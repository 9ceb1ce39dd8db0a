use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::{auroc, confusion_rates, ConfusionRates};

use super::{calibrate_flips, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimDraw {
    pub g: f64,
    pub h: u8,
    pub h_hat: u8,
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDraws {
    pub items: Vec<SimDraw>,
}

impl SimDraws {
    pub fn true_labels(&self) -> Vec<u8> {
        self.items.iter().map(|d| d.h).collect()
    }

    pub fn estimated_labels(&self) -> Vec<u8> {
        self.items.iter().map(|d| d.h_hat).collect()
    }

    pub fn true_auroc(&self) -> Result<f64> {
        let pairs: Vec<(f64, u8)> = self.items.iter().map(|d| (d.g, d.h)).collect();
        Ok(auroc(&pairs)?.value)
    }

    pub fn estimated_auroc(&self) -> Result<f64> {
        let pairs: Vec<(f64, u8)> = self.items.iter().map(|d| (d.g, d.h_hat)).collect();
        Ok(auroc(&pairs)?.value)
    }

    /// Empirical rates conditioned on the estimated label.
    pub fn rates(&self) -> Result<ConfusionRates> {
        confusion_rates(&self.true_labels(), &self.estimated_labels())
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Flip probability shifted on the logit scale. Probabilities pinned at 0
/// or 1 stay there.
pub(super) fn shifted(base: f64, shift: f64) -> f64 {
    if shift == 0.0 || base <= 0.0 || base >= 1.0 {
        base
    } else {
        sigmoid(logit(base) + shift)
    }
}

fn simulate(config: &SimulationConfig, rho: f64) -> Result<SimDraws> {
    config.validate()?;
    let flips = calibrate_flips(config.prevalence, &config.rates()?)?;
    let (m1, s1, m0, s0) = config.score_model.gaussian_params()?;
    let pi = config.prevalence;
    let mix_mean = pi * m1 + (1.0 - pi) * m0;
    let mix_sd = (pi * (s1 * s1 + m1 * m1) + (1.0 - pi) * (s0 * s0 + m0 * m0) - mix_mean * mix_mean)
        .sqrt();
    let slope = config.coupling_scale * rho;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let items = (0..config.n_items)
        .map(|_| {
            let h = u8::from(rng.random::<f64>() < pi);
            let eps: f64 = rng.sample(StandardNormal);
            let g = if h == 1 { m1 + s1 * eps } else { m0 + s0 * eps };
            let std_score = (g - mix_mean) / mix_sd;
            // Signed so that rho < 0 sends low-score incorrect items to ĥ=1
            // and high-score correct items to ĥ=0.
            let (base, direction) = if h == 1 {
                (flips.correct_flip, -1.0)
            } else {
                (flips.incorrect_flip, 1.0)
            };
            let p_flip = shifted(base, slope * direction * std_score);
            let flipped = rng.random::<f64>() < p_flip;
            let h_hat = if flipped { 1 - h } else { h };
            SimDraw {
                g,
                h,
                h_hat,
                z: None,
            }
        })
        .collect();
    Ok(SimDraws { items })
}

/// Label errors depend on the true label only (`rho` is ignored).
pub fn simulate_independent(config: &SimulationConfig) -> Result<SimDraws> {
    simulate(config, 0.0)
}

/// Label-flip probability is a logistic function of the standardized
/// score, with slope `coupling_scale · rho`.
pub fn simulate_correlated(config: &SimulationConfig) -> Result<SimDraws> {
    simulate(config, config.rho)
}

/// One row of the `simulate` CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    pub rho: f64,
    pub true_auroc: f64,
    pub estimated_auroc: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub n: usize,
}

pub fn simulate_trial(config: &SimulationConfig) -> Result<TrialRow> {
    let draws = simulate_correlated(config)?;
    let rates = draws.rates()?;
    Ok(TrialRow {
        seed: config.seed,
        rho: config.rho,
        true_auroc: draws.true_auroc()?,
        estimated_auroc: draws.estimated_auroc()?,
        tpr: rates.tpr,
        tnr: rates.tnr,
        n: config.n_items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biaslab::ScoreModel;

    fn config(seed: u64) -> SimulationConfig {
        SimulationConfig {
            n_items: 20_000,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn perfect_rates_copy_labels() {
        let c = SimulationConfig {
            tpr: 1.0,
            tnr: 1.0,
            ..config(4)
        };
        let d = simulate_independent(&c).unwrap();
        assert!(d.items.iter().all(|i| i.h == i.h_hat));
    }

    #[test]
    fn same_seed_same_draws() {
        let a = simulate_correlated(&SimulationConfig { rho: -0.5, ..config(9) }).unwrap();
        let b = simulate_correlated(&SimulationConfig { rho: -0.5, ..config(9) }).unwrap();
        assert_eq!(a, b);
        let c = simulate_correlated(&SimulationConfig { rho: -0.5, ..config(10) }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn symmetric_rates_are_recovered() {
        let c = SimulationConfig {
            n_items: 200_000,
            tpr: 0.8,
            tnr: 0.8,
            ..config(1)
        };
        let r = simulate_independent(&c).unwrap().rates().unwrap();
        assert!((r.tpr - 0.8).abs() < 0.005, "{r:?}");
        assert!((r.tnr - 0.8).abs() < 0.005, "{r:?}");
    }

    #[test]
    fn asymmetric_rates_are_recovered() {
        let c = SimulationConfig {
            n_items: 200_000,
            prevalence: 0.4,
            tpr: 0.7,
            tnr: 0.9,
            score_model: ScoreModel::TargetAuroc(0.8),
            ..config(2)
        };
        let r = simulate_independent(&c).unwrap().rates().unwrap();
        assert!((r.tpr - 0.7).abs() < 0.006, "{r:?}");
        assert!((r.tnr - 0.9).abs() < 0.006, "{r:?}");
    }

    #[test]
    fn zero_rho_matches_independent() {
        let c = SimulationConfig { rho: 0.0, ..config(3) };
        assert_eq!(simulate_correlated(&c).unwrap(), simulate_independent(&c).unwrap());
    }

    #[test]
    fn trial_row_fields() {
        let row = simulate_trial(&SimulationConfig { rho: -0.8, ..config(5) }).unwrap();
        assert_eq!((row.seed, row.rho, row.n), (5, -0.8, 20_000));
        assert!(row.estimated_auroc > row.true_auroc);
    }
}
