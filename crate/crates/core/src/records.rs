//! Record data model, JSONL ingestion and the text normalization shared by
//! the lexical correctness metrics.
//!
//! A dataset is a JSONL file with one [`GenerationRecord`] per line:
//!
//! ```text
//! {"id": "q1", "question": "...", "references": ["..."],
//!  "greedy": {"text": "...", "tokens": [{"text": "...", "logprob": -0.1, "entropy": 0.4}]},
//!  "samples": [...], "embedding": [0.1, ...] | null, "external_scores": {"alignscore": 0.9} | null}
//! ```
//!
//! `samples`, `embedding`, `external_scores` and per-token `entropy` may be
//! omitted or `null`. Human annotations are a separate JSONL file of
//! `{"record_id", "annotator_id", "label"}` objects.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// One generated token with its log-probability and, when the dump recorded
/// it, the entropy (nats) of the full predictive distribution at that step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenObservation {
    pub text: String,
    pub logprob: f64,
    pub entropy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedAnswer {
    pub text: String,
    pub tokens: Vec<TokenObservation>,
}

impl GeneratedAnswer {
    /// Sum of token log-probabilities, i.e. log p(answer | prompt).
    pub fn sequence_logprob(&self) -> f64 {
        self.tokens.iter().map(|t| t.logprob).sum()
    }

    pub fn sequence_probability(&self) -> f64 {
        self.sequence_logprob().exp()
    }

    pub fn token_len(&self) -> usize {
        self.tokens.len()
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub id: String,
    pub question: String,
    pub references: Vec<String>,
    pub greedy: GeneratedAnswer,
    #[serde(default)]
    pub samples: Vec<GeneratedAnswer>,
    #[serde(default)]
    pub embedding: Option<Vec<f64>>,
    #[serde(default)]
    pub external_scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanAnnotation {
    pub record_id: String,
    pub annotator_id: String,
    /// 1 = equivalent to the reference, 0 = not equivalent.
    pub label: u8,
}

/// External metrics whose scores are declared to lie in [0, 1].
const UNIT_INTERVAL_METRICS: &[&str] = &["bertscore_f1", "sentencebert", "alignscore"];

/// Parses a JSONL stream of generation records, validating every record
/// invariant. Blank lines are skipped.
pub fn parse_records<R: BufRead>(reader: R) -> Result<Vec<GenerationRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut embedding_dim: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let record = record_from_value(&value, line_no)?;

        if let Some(emb) = &record.embedding {
            match embedding_dim {
                None => embedding_dim = Some(emb.len()),
                Some(d) if d != emb.len() => {
                    return Err(Error::Invariant {
                        line: line_no,
                        message: format!(
                            "embedding dimension {} differs from dataset dimension {d}",
                            emb.len()
                        ),
                    })
                }
                Some(_) => {}
            }
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records back out in the same JSONL schema `parse_records` reads.
pub fn write_records<W: Write>(mut writer: W, records: &[GenerationRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn parse_annotations<R: BufRead>(reader: R) -> Result<Vec<HumanAnnotation>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = as_object(&value, line_no, "<root>")?;
        let record_id = req_str(obj, "record_id", line_no)?;
        let annotator_id = req_str(obj, "annotator_id", line_no)?;
        let label = match obj.get("label").and_then(Value::as_u64) {
            Some(l @ (0 | 1)) => l as u8,
            _ => return Err(schema(line_no, "label")),
        };
        if !seen.insert((record_id.clone(), annotator_id.clone())) {
            return Err(Error::DuplicateAnnotation {
                record_id,
                annotator_id,
            });
        }
        out.push(HumanAnnotation {
            record_id,
            annotator_id,
            label,
        });
    }
    Ok(out)
}

fn schema(line: usize, field: &str) -> Error {
    Error::Schema {
        line,
        field: field.to_string(),
    }
}

fn as_object<'a>(v: &'a Value, line: usize, field: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(line, field))
}

fn req_str(obj: &Map<String, Value>, field: &str, line: usize) -> Result<String> {
    obj.get(field)
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| schema(line, field))
}

fn is_null_or_missing(obj: &Map<String, Value>, field: &str) -> bool {
    matches!(obj.get(field), None | Some(Value::Null))
}

fn record_from_value(value: &Value, line: usize) -> Result<GenerationRecord> {
    let obj = as_object(value, line, "<root>")?;
    let id = req_str(obj, "id", line)?;
    let question = req_str(obj, "question", line)?;

    let references = obj
        .get("references")
        .and_then(Value::as_array)
        .ok_or_else(|| schema(line, "references"))?
        .iter()
        .map(|r| r.as_str().map(str::to_owned))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| schema(line, "references"))?;
    if references.is_empty() {
        return Err(Error::Invariant {
            line,
            message: "`references` must be non-empty".into(),
        });
    }

    let greedy = answer_from_value(
        obj.get("greedy").ok_or_else(|| schema(line, "greedy"))?,
        line,
        "greedy",
    )?;

    let samples = if is_null_or_missing(obj, "samples") {
        Vec::new()
    } else {
        obj["samples"]
            .as_array()
            .ok_or_else(|| schema(line, "samples"))?
            .iter()
            .enumerate()
            .map(|(i, s)| answer_from_value(s, line, &format!("samples[{i}]")))
            .collect::<Result<Vec<_>>>()?
    };

    let embedding = if is_null_or_missing(obj, "embedding") {
        None
    } else {
        let values = obj["embedding"]
            .as_array()
            .ok_or_else(|| schema(line, "embedding"))?
            .iter()
            .map(Value::as_f64)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| schema(line, "embedding"))?;
        Some(values)
    };

    let mut external_scores = BTreeMap::new();
    if !is_null_or_missing(obj, "external_scores") {
        let scores = as_object(&obj["external_scores"], line, "external_scores")?;
        for (metric, v) in scores {
            let score = v
                .as_f64()
                .ok_or_else(|| schema(line, &format!("external_scores.{metric}")))?;
            if UNIT_INTERVAL_METRICS.contains(&metric.as_str()) && !(0.0..=1.0).contains(&score)
            {
                return Err(Error::Invariant {
                    line,
                    message: format!("external score `{metric}` = {score} outside [0, 1]"),
                });
            }
            external_scores.insert(metric.clone(), score);
        }
    }

    Ok(GenerationRecord {
        id,
        question,
        references,
        greedy,
        samples,
        embedding,
        external_scores,
    })
}

fn answer_from_value(value: &Value, line: usize, field: &str) -> Result<GeneratedAnswer> {
    let obj = as_object(value, line, field)?;
    let text = req_str(obj, "text", line).map_err(|_| schema(line, &format!("{field}.text")))?;
    let raw_tokens = obj
        .get("tokens")
        .and_then(Value::as_array)
        .ok_or_else(|| schema(line, &format!("{field}.tokens")))?;
    if raw_tokens.is_empty() {
        return Err(Error::Invariant {
            line,
            message: format!("`{field}.tokens` must be non-empty"),
        });
    }

    let mut tokens = Vec::with_capacity(raw_tokens.len());
    for (i, tok) in raw_tokens.iter().enumerate() {
        let path = format!("{field}.tokens[{i}]");
        let tobj = as_object(tok, line, &path)?;
        let text = req_str(tobj, "text", line).map_err(|_| schema(line, &format!("{path}.text")))?;
        let logprob = tobj
            .get("logprob")
            .and_then(Value::as_f64)
            .ok_or_else(|| schema(line, &format!("{path}.logprob")))?;
        if !(logprob <= 0.0) {
            return Err(Error::Invariant {
                line,
                message: format!("{path}.logprob = {logprob} must be <= 0"),
            });
        }
        let entropy = if is_null_or_missing(tobj, "entropy") {
            None
        } else {
            let e = tobj["entropy"]
                .as_f64()
                .ok_or_else(|| schema(line, &format!("{path}.entropy")))?;
            if !(e >= 0.0) {
                return Err(Error::Invariant {
                    line,
                    message: format!("{path}.entropy = {e} must be >= 0"),
                });
            }
            Some(e)
        };
        tokens.push(TokenObservation {
            text,
            logprob,
            entropy,
        });
    }
    Ok(GeneratedAnswer { text, tokens })
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
                | '\u{00BF}' | '\u{00A1}' | '\u{00AB}' | '\u{00BB}'
        )
}

/// SQuAD-style answer normalization: lowercase, delete punctuation, drop the
/// English articles and collapse whitespace.
pub fn normalize_text(s: &str) -> String {
    let lowered: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !is_punctuation(*c))
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn tokenize_for_overlap(s: &str) -> Vec<String> {
    normalize_text(s)
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(logprob: f64) -> String {
        format!(
            r#"{{"id":"r1","question":"Q?","references":["ref"],"greedy":{{"text":"a b c","tokens":[{{"text":"a","logprob":-0.1,"entropy":0.3}},{{"text":"b","logprob":{logprob},"entropy":null}},{{"text":"c","logprob":-0.2}}]}},"samples":[],"embedding":null,"external_scores":null}}"#
        )
    }

    #[test]
    fn parses_single_record() {
        let recs = parse_records(line(-0.5).as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].greedy.tokens.len(), 3);
        assert_eq!(recs[0].greedy.tokens[0].entropy, Some(0.3));
        assert_eq!(recs[0].greedy.tokens[1].entropy, None);
    }

    #[test]
    fn empty_stream() {
        assert!(parse_records("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn positive_logprob_rejected() {
        let err = parse_records(line(0.5).as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Invariant { line: 1, .. }), "{err}");
    }

    #[test]
    fn malformed_json_reports_line() {
        let input = format!("{}\n{{not json\n", line(-0.1));
        match parse_records(input.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_field_is_named() {
        let input = r#"{"id":"x","references":["r"],"greedy":{"text":"t","tokens":[{"text":"t","logprob":0}]}}"#;
        match parse_records(input.as_bytes()).unwrap_err() {
            Error::Schema { field, .. } => assert_eq!(field, "question"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let input = format!("{}\n{}\n", line(-0.1), line(-0.2));
        match parse_records(input.as_bytes()).unwrap_err() {
            Error::DuplicateId(id) => assert_eq!(id, "r1"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn embedding_dimension_must_agree() {
        let a = r#"{"id":"a","question":"q","references":["r"],"greedy":{"text":"t","tokens":[{"text":"t","logprob":0}]},"embedding":[1,2]}"#;
        let b = r#"{"id":"b","question":"q","references":["r"],"greedy":{"text":"t","tokens":[{"text":"t","logprob":0}]},"embedding":[1,2,3]}"#;
        let err = parse_records(format!("{a}\n{b}").as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Invariant { line: 2, .. }));
    }

    #[test]
    fn unit_interval_external_scores() {
        let bad = r#"{"id":"a","question":"q","references":["r"],"greedy":{"text":"t","tokens":[{"text":"t","logprob":0}]},"external_scores":{"alignscore":1.5}}"#;
        assert!(parse_records(bad.as_bytes()).is_err());
        let ok = r#"{"id":"a","question":"q","references":["r"],"greedy":{"text":"t","tokens":[{"text":"t","logprob":0}]},"external_scores":{"custom":7.0}}"#;
        assert_eq!(parse_records(ok.as_bytes()).unwrap()[0].external_scores["custom"], 7.0);
    }

    #[test]
    fn annotations_parse_and_dedupe() {
        let input = "{\"record_id\":\"a\",\"annotator_id\":\"h1\",\"label\":1}\n{\"record_id\":\"a\",\"annotator_id\":\"h2\",\"label\":0}\n";
        assert_eq!(parse_annotations(input.as_bytes()).unwrap().len(), 2);
        let dup = "{\"record_id\":\"a\",\"annotator_id\":\"h1\",\"label\":1}\n{\"record_id\":\"a\",\"annotator_id\":\"h1\",\"label\":0}\n";
        assert!(matches!(
            parse_annotations(dup.as_bytes()),
            Err(Error::DuplicateAnnotation { .. })
        ));
        let bad = "{\"record_id\":\"a\",\"annotator_id\":\"h1\",\"label\":2}\n";
        assert!(matches!(parse_annotations(bad.as_bytes()), Err(Error::Schema { .. })));
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_text("The Cat."), "cat");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("An  apple,  a day"), "apple day");
    }

    #[test]
    fn tokenization_examples() {
        assert_eq!(tokenize_for_overlap("the cat sat"), vec!["cat", "sat"]);
        assert!(tokenize_for_overlap("").is_empty());
        assert_eq!(tokenize_for_overlap("Paris, France!"), vec!["paris", "france"]);
    }
}
