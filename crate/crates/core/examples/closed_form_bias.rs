//! The AUROC measured against an imperfect correctness function whose
//! errors are independent of the score, compared with Monte Carlo.
//!
//! ```text
//! cargo run --release --example closed_form_bias
//! ```

use uqbias::biaslab::{predicted_auroc_independent, simulate_independent, ScoreModel, SimulationConfig};
use uqbias::stats::ConfusionRates;

fn main() -> uqbias::Result<()> {
    println!("{:>6} {:>5} {:>5} {:>10} {:>10}", "A", "tpr", "tnr", "predicted", "simulated");
    for a in [0.6, 0.75, 0.9] {
        for (tpr, tnr) in [(0.95, 0.95), (0.9, 0.7), (0.7, 0.9)] {
            let rates = ConfusionRates::new(tpr, tnr)?;
            let draws = simulate_independent(&SimulationConfig {
                n_items: 50_000,
                score_model: ScoreModel::TargetAuroc(a),
                tpr,
                tnr,
                ..Default::default()
            })?;
            println!(
                "{a:>6} {tpr:>5} {tnr:>5} {:>10.4} {:>10.4}",
                predicted_auroc_independent(a, &rates),
                draws.estimated_auroc()?
            );
        }
    }
    Ok(())
}
