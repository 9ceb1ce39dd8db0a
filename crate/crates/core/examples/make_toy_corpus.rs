//! Regenerates the bundled toy corpus in `data/toy/`.
//!
//! ```text
//! cargo run --example make_toy_corpus [-- OUT_DIR]
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use uqbias::records::write_records;
use uqbias::toy::{toy_corpus, TOY_CONFIG};

fn main() -> uqbias::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy"));
    std::fs::create_dir_all(&dir)?;
    let (records, annotations) = toy_corpus();

    write_records(BufWriter::new(File::create(dir.join("records.jsonl"))?), &records)?;
    let mut ann = BufWriter::new(File::create(dir.join("annotations.jsonl"))?);
    for a in &annotations {
        serde_json::to_writer(&mut ann, a)?;
        ann.write_all(b"\n")?;
    }
    ann.flush()?;
    std::fs::write(dir.join("config.toml"), TOY_CONFIG)?;
    println!(
        "wrote {} records and {} annotations to {}",
        records.len(),
        annotations.len(),
        dir.display()
    );
    Ok(())
}
