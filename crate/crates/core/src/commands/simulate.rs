use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biaslab::{
    default_grid, simulate_trial, verify_closed_form, GridPoint, SimulationConfig, TrialRow,
    VerifyReport,
};
use crate::error::{Error, Result};

/// A batch of correlated-error trials: every `rho` crossed with `seeds`
/// consecutive seeds starting at `base.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub base: SimulationConfig,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
}

fn default_rhos() -> Vec<f64> {
    vec![-0.8, 0.0, 0.8]
}
fn default_seeds() -> usize {
    10
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            base: SimulationConfig::default(),
            rhos: default_rhos(),
            seeds: default_seeds(),
        }
    }
}

impl SimulateConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// One row per (rho, seed), ordered by rho as given and then by seed.
pub fn cmd_simulate(config: &SimulateConfig) -> Result<Vec<TrialRow>> {
    config.base.validate()?;
    let jobs: Vec<SimulationConfig> = config
        .rhos
        .iter()
        .flat_map(|&rho| {
            (0..config.seeds as u64).map(move |i| SimulationConfig {
                rho,
                seed: config.base.seed + i,
                ..config.base.clone()
            })
        })
        .collect();
    jobs.par_iter().map(simulate_trial).collect()
}

pub fn write_trials_csv<W: Write>(mut w: W, rows: &[TrialRow]) -> Result<()> {
    writeln!(w, "seed,rho,true_auroc,estimated_auroc,tpr,tnr,n")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.seed, r.rho, r.true_auroc, r.estimated_auroc, r.tpr, r.tnr, r.n
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_grid")]
    pub grid: Vec<GridPoint>,
    #[serde(default = "default_verify_items")]
    pub n_items: usize,
    #[serde(default = "default_verify_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_prevalence")]
    pub prevalence: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_verify_items() -> usize {
    200_000
}
fn default_verify_seeds() -> Vec<u64> {
    vec![0]
}
fn default_prevalence() -> f64 {
    0.5
}
fn default_tolerance() -> f64 {
    0.005
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            grid: default_grid(),
            n_items: default_verify_items(),
            seeds: default_verify_seeds(),
            prevalence: default_prevalence(),
            tolerance: default_tolerance(),
        }
    }
}

impl VerifyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn cmd_verify(config: &VerifyConfig) -> Result<VerifyReport> {
    if config.seeds.is_empty() {
        return Err(Error::Config("verify needs at least one seed".into()));
    }
    verify_closed_form(
        &config.grid,
        config.n_items,
        &config.seeds,
        config.prevalence,
        config.tolerance,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_follow_rho_then_seed() {
        let cfg = SimulateConfig {
            base: SimulationConfig {
                n_items: 2_000,
                seed: 5,
                ..Default::default()
            },
            rhos: vec![0.0, -0.8],
            seeds: 2,
        };
        let rows = cmd_simulate(&cfg).unwrap();
        let keys: Vec<(u64, f64)> = rows.iter().map(|r| (r.seed, r.rho)).collect();
        assert_eq!(keys, [(5, 0.0), (6, 0.0), (5, -0.8), (6, -0.8)]);
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("seed,rho,true_auroc,estimated_auroc,tpr,tnr,n\n5,0,"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn configs_parse_with_defaults() {
        let s = SimulateConfig::from_toml(
            "rhos = [0.5]\n[base]\nn_items = 10\nscore_model = { target_auroc = 0.8 }",
        )
        .unwrap();
        assert_eq!(s.base.n_items, 10);
        assert_eq!(s.base.tpr, 0.9);
        assert_eq!((s.rhos.as_slice(), s.seeds), (&[0.5][..], 10));
        let v = VerifyConfig::from_toml("").unwrap();
        assert_eq!(v, VerifyConfig::default());
        assert_eq!(v.grid.len(), 27);
    }
}
