//! Two methods whose true ranking is inverted by a correctness function
//! that shares a confounder with the weaker method.
//!
//! ```text
//! cargo run --release --example ranking_inversion
//! ```

use uqbias::biaslab::{ranking_trials, ConfoundedScenario};

fn main() -> uqbias::Result<()> {
    let scenario = ConfoundedScenario::pinned();
    println!(
        "method A true AUROC {}, method B {}",
        scenario.method_a_auroc,
        scenario.method_b_auroc()
    );
    for strength in [0.0, 0.5, scenario.confounder.strength] {
        let s = ranking_trials(&scenario.with_strength(strength), 0, 20)?;
        println!(
            "strength {strength:.1}: estimated A {:.4} vs B {:.4}; ranking preserved in {}/{}",
            s.mean_estimated_a, s.mean_estimated_b, s.ranking_preserved, s.trials
        );
    }
    Ok(())
}
