//! Lexical correctness metrics on a few hand-picked answers, showing how a
//! verbose but correct answer fares under each.
//!
//! ```text
//! cargo run --example lexical_metrics
//! ```

use uqbias::correctness::{binarize, rouge_1, rouge_l, squad_f1};
use uqbias::records::tokenize_for_overlap;

fn main() -> uqbias::Result<()> {
    let reference = "the Eiffel Tower";
    let answers = [
        "Eiffel Tower",
        "It is the Eiffel Tower, which stands in Paris on the Champ de Mars",
        "the Louvre",
        "Tower Eiffel",
    ];
    println!("reference tokens: {:?}", tokenize_for_overlap(reference));
    println!(
        "{:<70} {:>8} {:>8} {:>8} {:>8} {:>6}",
        "answer", "R1-F1", "RL-F1", "RL-rec", "SQuAD", "RL@0.5"
    );
    for a in answers {
        let rl = rouge_l(a, reference);
        println!(
            "{a:<70} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>6}",
            rouge_1(a, reference).f1,
            rl.f1,
            rl.recall,
            squad_f1(a, &[reference])?,
            binarize(rl.f1, 0.5),
        );
    }
    Ok(())
}
