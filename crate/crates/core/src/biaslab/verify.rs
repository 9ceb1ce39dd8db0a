use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::ConfusionRates;

use super::{predicted_auroc_independent, simulate_independent, ScoreModel, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub true_auroc: f64,
    pub tpr: f64,
    pub tnr: f64,
}

/// `{0.6, 0.75, 0.9} × {0.7, 0.8, 0.9} × {0.7, 0.8, 0.9}`.
pub fn default_grid() -> Vec<GridPoint> {
    let mut grid = Vec::with_capacity(27);
    for true_auroc in [0.6, 0.75, 0.9] {
        for tpr in [0.7, 0.8, 0.9] {
            for tnr in [0.7, 0.8, 0.9] {
                grid.push(GridPoint {
                    true_auroc,
                    tpr,
                    tnr,
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    pub point: GridPoint,
    pub predicted: f64,
    /// Estimated AUROC averaged over seeds.
    pub monte_carlo: f64,
    /// Empirical AUROC on the true labels, averaged over seeds.
    pub monte_carlo_true_auroc: f64,
    pub abs_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n_items: usize,
    pub seeds: Vec<u64>,
    pub prevalence: f64,
    pub tolerance: f64,
    pub points: Vec<GridPointResult>,
    pub all_pass: bool,
}

/// Monte Carlo check of the independent-error closed form at every grid
/// point. Grid points are simulated in parallel; each point's seeds are
/// offset by the point index so no two points share a stream.
pub fn verify_closed_form(
    grid: &[GridPoint],
    n_items: usize,
    seeds: &[u64],
    prevalence: f64,
    tolerance: f64,
) -> Result<VerifyReport> {
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(idx, &point)| {
            let rates = ConfusionRates::new(point.tpr, point.tnr)?;
            let predicted = predicted_auroc_independent(point.true_auroc, &rates);
            let (mut est, mut tru) = (0.0, 0.0);
            for &seed in seeds {
                let cfg = SimulationConfig {
                    n_items,
                    prevalence,
                    score_model: ScoreModel::TargetAuroc(point.true_auroc),
                    tpr: point.tpr,
                    tnr: point.tnr,
                    rho: 0.0,
                    seed: seed.wrapping_mul(1_000_003).wrapping_add(idx as u64),
                    ..Default::default()
                };
                let draws = simulate_independent(&cfg)?;
                est += draws.estimated_auroc()?;
                tru += draws.true_auroc()?;
            }
            let k = seeds.len().max(1) as f64;
            let monte_carlo = est / k;
            let abs_error = (monte_carlo - predicted).abs();
            Ok(GridPointResult {
                point,
                predicted,
                monte_carlo,
                monte_carlo_true_auroc: tru / k,
                abs_error,
                pass: abs_error <= tolerance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_pass = points.iter().all(|p| p.pass);
    Ok(VerifyReport {
        n_items,
        seeds: seeds.to_vec(),
        prevalence,
        tolerance,
        points,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 27);
        assert_eq!(g[0], GridPoint { true_auroc: 0.6, tpr: 0.7, tnr: 0.7 });
    }

    #[test]
    fn half_is_a_fixed_point() {
        let grid = [GridPoint { true_auroc: 0.5, tpr: 0.7, tnr: 0.9 }];
        let r = verify_closed_form(&grid, 50_000, &[1], 0.5, 0.01).unwrap();
        assert!((r.points[0].predicted - 0.5).abs() < 1e-12);
        assert!(r.all_pass, "{r:?}");
    }

    #[test]
    fn noiseless_point_equals_true_auroc() {
        let grid = [GridPoint { true_auroc: 0.8, tpr: 1.0, tnr: 1.0 }];
        let r = verify_closed_form(&grid, 20_000, &[2], 0.5, 0.02).unwrap();
        assert_eq!(r.points[0].monte_carlo, r.points[0].monte_carlo_true_auroc);
    }
}
