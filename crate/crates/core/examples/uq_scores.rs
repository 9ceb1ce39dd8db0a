//! Token-level uncertainty scores for a short and a long answer with the
//! same per-token confidence. Sequence probability penalises length;
//! perplexity does not.
//!
//! ```text
//! cargo run --example uq_scores
//! ```

use uqbias::records::{GeneratedAnswer, TokenObservation};
use uqbias::uq::{
    length_baseline, mean_token_entropy, naive_entropy, neg_sequence_probability, perplexity,
    LengthUnit,
};

fn answer(words: &[&str], p: f64) -> GeneratedAnswer {
    let tokens: Vec<TokenObservation> = words
        .iter()
        .enumerate()
        .map(|(i, w)| TokenObservation {
            text: if i == 0 { w.to_string() } else { format!(" {w}") },
            logprob: p.ln(),
            entropy: Some(-p.ln()),
        })
        .collect();
    GeneratedAnswer {
        text: tokens.iter().map(|t| t.text.as_str()).collect(),
        tokens,
    }
}

fn main() -> uqbias::Result<()> {
    let short = answer(&["Paris"], 0.9);
    let long = answer(&["The", "capital", "of", "France", "is", "Paris"], 0.9);
    for (label, a) in [("short", &short), ("long", &long)] {
        println!(
            "{label:<6} neg_seq_prob {:>8.4}  perplexity {:.4}  mean_token_entropy {:.4}  len {}",
            neg_sequence_probability(a)?.value,
            perplexity(a)?.value,
            mean_token_entropy(a)?.value,
            length_baseline(a, LengthUnit::Tokens).value,
        );
    }

    let samples = vec![
        answer(&["Paris"], 0.9),
        answer(&["Paris"], 0.9),
        answer(&["Lyon"], 0.3),
        answer(&["Marseille"], 0.2),
    ];
    println!(
        "naive entropy over samples: all {:.4}, unique texts {:.4}",
        naive_entropy(&samples, false)?.value,
        naive_entropy(&samples, true)?.value
    );
    Ok(())
}
