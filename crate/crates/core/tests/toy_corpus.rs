use std::io::BufReader;
use std::path::PathBuf;

use uqbias::commands::EvalConfig;
use uqbias::records::{parse_annotations, parse_records};
use uqbias::toy::{toy_corpus, TOY_CONFIG};

fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy")
}

#[test]
fn bundled_files_match_the_generator() {
    let (records, annotations) = toy_corpus();
    let open = |name: &str| BufReader::new(std::fs::File::open(toy_dir().join(name)).unwrap());
    assert_eq!(parse_records(open("records.jsonl")).unwrap(), records);
    assert_eq!(parse_annotations(open("annotations.jsonl")).unwrap(), annotations);
    let config = std::fs::read_to_string(toy_dir().join("config.toml")).unwrap();
    assert_eq!(config, TOY_CONFIG);
    EvalConfig::from_toml(&config).unwrap().validate().unwrap();
}
