//! Evaluates the bundled toy corpus against a local stub judge and prints
//! the AUROC matrix, showing how the method ranking depends on the
//! correctness function.
//!
//! ```text
//! cargo run --example evaluate_toy_corpus [-- report.json]
//! ```

use std::path::PathBuf;

use uqbias::commands::{cmd_evaluate, Dataset, EvalConfig};
use uqbias::judge::Judge;
use uqbias::records::parse_annotations;
use uqbias::stub_judge::StubJudgeServer;
use uqbias::uq::MethodId;

fn main() -> uqbias::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let server = StubJudgeServer::start()?;
    let mut config = EvalConfig::load(&dir.join("config.toml"))?;
    let judge_config = config.judge.as_mut().expect("toy config has a judge section");
    judge_config.endpoint = server.endpoint();
    let judge = Judge::new(judge_config.clone())?;

    let dataset = Dataset::load(&dir.join("records.jsonl"))?;
    let annotations = parse_annotations(std::io::BufReader::new(std::fs::File::open(
        dir.join("annotations.jsonl"),
    )?))?;
    let report = cmd_evaluate(&[dataset], Some(&annotations), &config, Some(&judge))?;
    let d = &report.datasets[0];

    print!("{:<22}", "method");
    for c in &d.metric_columns {
        print!("{c:>16}");
    }
    println!();
    for method in &config.methods {
        print!("{:<22}", method.to_string());
        for c in &d.metric_columns {
            match d.cell(*method, c).and_then(|cell| cell.value()) {
                Some(v) => print!("{v:>16.3}"),
                None => print!("{:>16}", "undefined"),
            }
        }
        println!();
    }

    let pick = |metric: &str| {
        let a = d.cell(MethodId::NegSeqProb, metric).and_then(|c| c.value());
        let b = d.cell(MethodId::Perplexity, metric).and_then(|c| c.value());
        match (a, b) {
            (Some(a), Some(b)) if a > b => "neg_seq_prob",
            (Some(_), Some(_)) => "perplexity",
            _ => "undefined",
        }
    };
    println!("\nbetter under rougeL_f1@0.5: {}", pick("rougeL_f1@0.5"));
    println!("better under llm_judge:     {}", pick("llm_judge"));
    println!("judge requests served: {}", server.requests());

    if let Some(h) = &d.human_agreement {
        println!("\nkappa vs human majority ({} records, {} split):", h.joined_records, h.excluded_ties);
        for row in &h.rows {
            println!("  {:<16} {:?}", row.column, row.outcome);
        }
    }
    if let Some(out) = std::env::args().nth(1) {
        std::fs::write(&out, report.to_json()?)?;
        println!("\nreport written to {out}");
    }
    Ok(())
}
