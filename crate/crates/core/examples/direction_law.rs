//! Correlated label errors push the estimated AUROC up or down depending on
//! the sign of the coupling between errors and scores.
//!
//! ```text
//! cargo run --release --example direction_law
//! ```

use uqbias::biaslab::{predicted_auroc_independent, simulate_trial, SimulationConfig};
use uqbias::stats::ConfusionRates;

fn main() -> uqbias::Result<()> {
    let base = SimulationConfig {
        n_items: 50_000,
        ..Default::default()
    };
    let independent = predicted_auroc_independent(0.75, &ConfusionRates::new(base.tpr, base.tnr)?);
    println!("true AUROC 0.75, independent-error prediction {independent:.4}");
    println!("{:>5} {:>10} {:>10}", "rho", "true", "estimated");
    for rho in [-0.8, -0.4, 0.0, 0.4, 0.8] {
        let row = simulate_trial(&SimulationConfig { rho, ..base.clone() })?;
        println!("{rho:>5} {:>10.4} {:>10.4}", row.true_auroc, row.estimated_auroc);
    }
    Ok(())
}
