//! Judges the toy corpus through a local stub server, twice, to show the
//! verdict cache absorbing the second pass.
//!
//! ```text
//! cargo run --example judge_with_cache
//! ```

use uqbias::judge::{Judge, JudgeConfig};
use uqbias::stub_judge::StubJudgeServer;
use uqbias::toy::toy_corpus;

fn main() -> uqbias::Result<()> {
    let server = StubJudgeServer::start()?;
    let dir = std::env::temp_dir().join(format!("uqbias-judge-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut config = JudgeConfig::new(server.endpoint(), "stub-judge");
    config.cache = Some(dir.join("verdicts.jsonl"));
    let (records, _) = toy_corpus();

    for pass in 1..=2 {
        let judge = Judge::new(config.clone())?;
        let verdicts = judge.judge_many(&records);
        let correct = verdicts.iter().filter(|v| matches!(v, Ok(v) if v.label == 1)).count();
        println!(
            "pass {pass}: {correct}/{} judged correct, {} network call(s)",
            records.len(),
            judge.network_calls()
        );
    }
    println!("server saw {} request(s)", server.requests());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
