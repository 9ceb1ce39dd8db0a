//! AUROC of an uncertainty score, Cohen's kappa between two labelers, and
//! the Spearman correlation of a score with length.
//!
//! ```text
//! cargo run --example auroc_and_agreement
//! ```

use uqbias::stats::{auroc, cohen_kappa, confusion_rates, spearman};

fn main() -> uqbias::Result<()> {
    // uncertainty, human label (1 = correct)
    let scored = [
        (0.05, 1),
        (0.10, 1),
        (0.20, 0),
        (0.20, 1),
        (0.35, 1),
        (0.50, 0),
        (0.70, 0),
        (0.90, 0),
    ];
    let a = auroc(&scored)?;
    println!(
        "AUROC {:.4} over {} correct / {} incorrect, {} tied pair(s)",
        a.value, a.n_pos, a.n_neg, a.tie_pairs
    );

    let human: Vec<u8> = scored.iter().map(|s| s.1).collect();
    let metric = [1, 1, 0, 0, 1, 1, 0, 0];
    let k = cohen_kappa(&human, &metric)?;
    println!(
        "kappa {:.4} (observed {:.3}, chance {:.3}, degenerate {})",
        k.kappa, k.observed, k.expected, k.degenerate
    );
    let r = confusion_rates(&human, &metric)?;
    println!("metric tpr {:.3}, tnr {:.3}", r.tpr, r.tnr);

    let lengths = [3.0, 4.0, 9.0, 6.0, 12.0, 15.0, 14.0, 20.0];
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    println!("Spearman(score, length) {:.4}", spearman(&scores, &lengths)?);
    Ok(())
}
