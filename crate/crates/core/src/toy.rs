//! Generator for the small bundled corpus under `data/toy/`.
//!
//! Sixty fictional-geography questions in four groups:
//!
//! | group              | records | answer                     | per-token p |
//! |--------------------|---------|----------------------------|-------------|
//! | short correct      | 0..15   | the reference name         | ~0.85       |
//! | verbose correct    | 15..35  | reference inside a sentence| ~0.93       |
//! | short incorrect    | 35..50  | a different name           | ~0.70       |
//! | verbose incorrect  | 50..60  | wrong name in a sentence   | ~0.78       |
//!
//! Verbose correct answers are long, so ROUGE-L F1 marks them incorrect at
//! 0.5 while a containment judge accepts them; their low perplexity and
//! middling sequence probability make the two methods trade places between
//! those two correctness functions. Four annotators label every record;
//! record `toy-020` is split 2–2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::records::{GeneratedAnswer, GenerationRecord, HumanAnnotation, TokenObservation};

pub const TOY_SEED: u64 = 7;
pub const TOY_RECORDS: usize = 60;
pub const SPLIT_RECORD: &str = "toy-020";

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "tor", "sa", "vel", "dun", "ari", "zo", "bel", "quin", "mar", "tes",
    "ul", "fen",
];

const VERBOSE_CORRECT: &[&str] = &[
    "I am fairly confident that the answer you are looking for here is {} in this case",
    "Based on what I know the city that fits this description best is {} as far as I can tell",
    "The answer to this question is {} which is the one most people would give here",
];

const VERBOSE_INCORRECT: &[&str] = &[
    "I think it might be {} but honestly I am not completely sure about that one",
    "It could possibly be {} although I would want to double check that answer first",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyGroup {
    ShortCorrect,
    VerboseCorrect,
    ShortIncorrect,
    VerboseIncorrect,
}

impl ToyGroup {
    pub fn of(index: usize) -> Self {
        match index {
            0..=14 => ToyGroup::ShortCorrect,
            15..=34 => ToyGroup::VerboseCorrect,
            35..=49 => ToyGroup::ShortIncorrect,
            _ => ToyGroup::VerboseIncorrect,
        }
    }

    pub fn correct(self) -> bool {
        matches!(self, ToyGroup::ShortCorrect | ToyGroup::VerboseCorrect)
    }

    fn token_p(self) -> f64 {
        match self {
            ToyGroup::ShortCorrect => 0.85,
            ToyGroup::VerboseCorrect => 0.93,
            ToyGroup::ShortIncorrect => 0.70,
            ToyGroup::VerboseIncorrect => 0.78,
        }
    }
}

fn name(rng: &mut ChaCha8Rng) -> (String, Vec<String>) {
    let parts: Vec<String> = (0..3)
        .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())].to_string())
        .collect();
    let mut word = parts.concat();
    word[..1].make_ascii_uppercase();
    let mut pieces = parts;
    pieces[0] = word[..pieces[0].len()].to_string();
    (word, pieces)
}

/// Splits text into word tokens, with `name` further split into its
/// syllables.
fn answer(rng: &mut ChaCha8Rng, text: &str, name: &str, syllables: &[String], p: f64) -> GeneratedAnswer {
    let mut pieces = Vec::new();
    for (i, word) in text.split_whitespace().enumerate() {
        let lead = if i == 0 { "" } else { " " };
        if word.trim_end_matches(['.', ',']) == name {
            for (j, s) in syllables.iter().enumerate() {
                pieces.push(format!("{}{s}", if j == 0 { lead } else { "" }));
            }
        } else {
            pieces.push(format!("{lead}{word}"));
        }
    }
    let tokens = pieces
        .into_iter()
        .map(|text| {
            let q: f64 = (p + rng.random_range(-0.04..0.04)).min(0.995);
            TokenObservation {
                text,
                logprob: q.ln(),
                entropy: Some(round6(-1.5 * q.ln() + rng.random_range(0.0..0.05))),
            }
        })
        .map(|mut t| {
            t.logprob = round6(t.logprob);
            t
        })
        .collect();
    GeneratedAnswer {
        text: text.to_string(),
        tokens,
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Builds the toy records and their human annotations.
pub fn toy_corpus() -> (Vec<GenerationRecord>, Vec<HumanAnnotation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(TOY_SEED);
    let mut records = Vec::with_capacity(TOY_RECORDS);
    let mut annotations = Vec::new();

    for i in 0..TOY_RECORDS {
        let group = ToyGroup::of(i);
        let id = format!("toy-{i:03}");
        let (place, _) = name(&mut rng);
        let (city, city_syl) = name(&mut rng);
        let (wrong, wrong_syl) = loop {
            let n = name(&mut rng);
            if n.0 != city {
                break n;
            }
        };
        let p = group.token_p();
        let greedy = match group {
            ToyGroup::ShortCorrect => answer(&mut rng, &city, &city, &city_syl, p),
            ToyGroup::ShortIncorrect => answer(&mut rng, &wrong, &wrong, &wrong_syl, p),
            ToyGroup::VerboseCorrect => {
                let t = VERBOSE_CORRECT[i % VERBOSE_CORRECT.len()].replace("{}", &city);
                answer(&mut rng, &t, &city, &city_syl, p)
            }
            ToyGroup::VerboseIncorrect => {
                let t = VERBOSE_INCORRECT[i % VERBOSE_INCORRECT.len()].replace("{}", &wrong);
                answer(&mut rng, &t, &wrong, &wrong_syl, p)
            }
        };

        let mut samples = Vec::new();
        for s in 0..5 {
            let sample = match group {
                ToyGroup::ShortCorrect if s == 4 => answer(&mut rng, &wrong, &wrong, &wrong_syl, 0.5),
                ToyGroup::ShortCorrect => answer(&mut rng, &city, &city, &city_syl, p),
                ToyGroup::VerboseCorrect if s >= 3 => answer(&mut rng, &city, &city, &city_syl, 0.8),
                ToyGroup::VerboseCorrect => answer(&mut rng, &greedy.text, &city, &city_syl, p),
                ToyGroup::ShortIncorrect | ToyGroup::VerboseIncorrect => {
                    let (other, other_syl) = if s == 0 {
                        (wrong.clone(), wrong_syl.clone())
                    } else {
                        name(&mut rng)
                    };
                    answer(&mut rng, &other, &other, &other_syl, 0.6)
                }
            };
            samples.push(sample);
        }

        let correct = group.correct();
        let mut u = |lo: f64, hi: f64| round6(rng.random_range(lo..hi));
        let mut external_scores = std::collections::BTreeMap::new();
        let (align, bert, sbert) = match group {
            ToyGroup::ShortCorrect => (u(0.88, 0.99), u(0.90, 0.98), u(0.6, 0.9)),
            ToyGroup::VerboseCorrect => (u(0.88, 0.99), u(0.82, 0.88), u(0.6, 0.9)),
            ToyGroup::ShortIncorrect => (u(0.02, 0.12), u(0.80, 0.86), u(0.1, 0.5)),
            ToyGroup::VerboseIncorrect => (u(0.02, 0.12), u(0.78, 0.84), u(0.1, 0.5)),
        };
        external_scores.insert("alignscore".to_string(), align);
        external_scores.insert("bertscore_f1".to_string(), bert);
        external_scores.insert("sentencebert".to_string(), sbert);

        let h = f64::from(u8::from(correct));
        let mut noise = || -> f64 { rng.sample(StandardNormal) };
        let embedding = vec![
            round6(1.5 * h + 0.6 * noise()),
            round6(greedy.tokens.len() as f64 / 10.0),
            round6(noise()),
            round6(noise()),
        ];

        // each record gets at most one dissenting annotator, except the
        // designated split record
        let truth = u8::from(correct);
        let dissenters: Vec<usize> = if id == SPLIT_RECORD {
            vec![1, 3]
        } else if rng.random::<f64>() < 0.3 {
            vec![rng.random_range(0..4)]
        } else {
            Vec::new()
        };
        for a in 0..4 {
            annotations.push(HumanAnnotation {
                record_id: id.clone(),
                annotator_id: format!("a{}", a + 1),
                label: if dissenters.contains(&a) { 1 - truth } else { truth },
            });
        }

        records.push(GenerationRecord {
            id,
            question: format!("Which city is the capital of the province of {place}?"),
            references: vec![city],
            greedy,
            samples,
            embedding: Some(embedding),
            external_scores,
        });
    }
    (records, annotations)
}

/// Evaluation config bundled with the corpus. The judge endpoint is a
/// placeholder that runs replace with a live or stub server.
pub const TOY_CONFIG: &str = r#"seed = 0
workers = 2
methods = ["neg_seq_prob", "perplexity", "semantic_entropy", "len_tokens", "probe:rougeL_recall"]
metrics = ["rougeL_f1", "llm_judge", "alignscore"]

[thresholds]
rougeL_f1 = [0.5]
alignscore = [0.5]

[judge]
endpoint = "http://127.0.0.1:8080/v1/chat/completions"
model = "stub-judge"
"#;
