//! Semantic entropy: samples are clustered by meaning before the entropy is
//! taken, so paraphrases of one answer do not count as disagreement.
//!
//! ```text
//! cargo run --example semantic_entropy
//! ```

use uqbias::records::{GeneratedAnswer, TokenObservation};
use uqbias::uq::{cluster_samples, semantic_entropy, ClusterOptions, ExactMatchOracle};

fn sample(text: &str, logprob: f64) -> GeneratedAnswer {
    GeneratedAnswer {
        text: text.to_string(),
        tokens: vec![TokenObservation {
            text: text.to_string(),
            logprob,
            entropy: None,
        }],
    }
}

fn main() -> uqbias::Result<()> {
    let agreeing = vec![
        sample("Paris", -0.1),
        sample("paris.", -0.3),
        sample("The Paris", -0.6),
        sample("Lyon", -2.5),
    ];
    let scattered = vec![
        sample("Paris", -1.2),
        sample("Lyon", -1.3),
        sample("Nice", -1.4),
        sample("Lille", -1.5),
    ];
    for (label, samples) in [("agreeing", &agreeing), ("scattered", &scattered)] {
        let clusters = cluster_samples(samples, &ExactMatchOracle, ClusterOptions::default())?;
        println!("{label}: {} cluster(s)", clusters.len());
        for c in &clusters {
            let texts: Vec<&str> = c.members.iter().map(|&i| samples[i].text.as_str()).collect();
            println!("  p={:.3} {:?}", c.probability, texts);
        }
        println!("  semantic entropy {:.4}", semantic_entropy(&clusters, false).value);
    }
    Ok(())
}
