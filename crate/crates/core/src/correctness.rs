//! Correctness functions: native lexical metrics (ROUGE-1, ROUGE-L, SQuAD F1),
//! pass-through adapters for externally computed metrics, and binarization
//! against a threshold catalog.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{tokenize_for_overlap, GenerationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricId {
    #[serde(rename = "rouge1_f1")]
    Rouge1F1,
    #[serde(rename = "rougeL_f1")]
    RougeLF1,
    #[serde(rename = "rougeL_recall")]
    RougeLRecall,
    #[serde(rename = "rougeL_precision")]
    RougeLPrecision,
    #[serde(rename = "squad_f1")]
    SquadF1,
    #[serde(rename = "bertscore_f1")]
    BertScoreF1,
    #[serde(rename = "sentencebert")]
    SentenceBert,
    #[serde(rename = "alignscore")]
    AlignScore,
    #[serde(rename = "llm_judge")]
    LlmJudge,
}

impl MetricId {
    pub const ALL: [MetricId; 9] = [
        MetricId::Rouge1F1,
        MetricId::RougeLF1,
        MetricId::RougeLRecall,
        MetricId::RougeLPrecision,
        MetricId::SquadF1,
        MetricId::BertScoreF1,
        MetricId::SentenceBert,
        MetricId::AlignScore,
        MetricId::LlmJudge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Rouge1F1 => "rouge1_f1",
            MetricId::RougeLF1 => "rougeL_f1",
            MetricId::RougeLRecall => "rougeL_recall",
            MetricId::RougeLPrecision => "rougeL_precision",
            MetricId::SquadF1 => "squad_f1",
            MetricId::BertScoreF1 => "bertscore_f1",
            MetricId::SentenceBert => "sentencebert",
            MetricId::AlignScore => "alignscore",
            MetricId::LlmJudge => "llm_judge",
        }
    }

    /// Inherently binary metrics carry no threshold.
    pub fn is_binary(self) -> bool {
        matches!(self, MetricId::LlmJudge)
    }

    pub fn is_lexical(self) -> bool {
        matches!(
            self,
            MetricId::Rouge1F1
                | MetricId::RougeLF1
                | MetricId::RougeLRecall
                | MetricId::RougeLPrecision
                | MetricId::SquadF1
        )
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl OverlapScores {
    fn from_counts(overlap: usize, hyp_len: usize, ref_len: usize) -> Self {
        let precision = if hyp_len == 0 {
            0.0
        } else {
            overlap as f64 / hyp_len as f64
        };
        let recall = if ref_len == 0 {
            0.0
        } else {
            overlap as f64 / ref_len as f64
        };
        // 2PR/(P+R) reduces to 2·overlap/(|hyp|+|ref|); one division keeps
        // the result correctly rounded
        let f1 = if overlap == 0 {
            0.0
        } else {
            2.0 * overlap as f64 / (hyp_len + ref_len) as f64
        };
        OverlapScores {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessResult {
    pub metric_id: MetricId,
    pub raw: f64,
    pub threshold: Option<f64>,
    pub label: Option<u8>,
}

/// Candidate binarization thresholds per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCatalog(BTreeMap<MetricId, Vec<f64>>);

impl Default for ThresholdCatalog {
    fn default() -> Self {
        let entries = [
            (MetricId::Rouge1F1, vec![0.1]),
            (MetricId::RougeLF1, vec![0.1, 0.3, 0.5]),
            (MetricId::RougeLRecall, vec![1.0]),
            (MetricId::SquadF1, vec![0.3]),
            (MetricId::BertScoreF1, vec![0.8]),
            (MetricId::SentenceBert, vec![0.4, 0.9]),
            (MetricId::AlignScore, vec![0.5]),
        ];
        ThresholdCatalog(entries.into_iter().collect())
    }
}

impl ThresholdCatalog {
    pub fn thresholds(&self, metric: MetricId) -> &[f64] {
        self.0.get(&metric).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Replaces the threshold list of every metric named in `overrides`.
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        for (name, thresholds) in overrides {
            let metric: MetricId = name.parse()?;
            if metric.is_binary() {
                return Err(Error::Config(format!(
                    "metric `{name}` is binary and takes no thresholds"
                )));
            }
            self.0.insert(metric, thresholds.clone());
        }
        Ok(self)
    }

    pub fn iter(&self) -> impl Iterator<Item = (MetricId, &[f64])> {
        self.0.iter().map(|(m, t)| (*m, t.as_slice()))
    }
}

/// Length of the longest common (not necessarily contiguous) subsequence.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                curr[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

pub fn rouge_l_tokens(hyp: &[String], reference: &[String]) -> OverlapScores {
    OverlapScores::from_counts(lcs_length(hyp, reference), hyp.len(), reference.len())
}

pub fn rouge_l(hyp: &str, reference: &str) -> OverlapScores {
    rouge_l_tokens(&tokenize_for_overlap(hyp), &tokenize_for_overlap(reference))
}

/// Clipped multiset intersection size.
fn bag_overlap(hyp: &[String], reference: &[String]) -> usize {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut overlap = 0;
    for t in hyp {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    overlap
}

pub fn rouge_1_tokens(hyp: &[String], reference: &[String]) -> OverlapScores {
    OverlapScores::from_counts(bag_overlap(hyp, reference), hyp.len(), reference.len())
}

pub fn rouge_1(hyp: &str, reference: &str) -> OverlapScores {
    rouge_1_tokens(&tokenize_for_overlap(hyp), &tokenize_for_overlap(reference))
}

/// SQuAD F1: bag-of-tokens F1 after normalization, maximized over references.
pub fn squad_f1<S: AsRef<str>>(hyp: &str, references: &[S]) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::Contract("squad_f1 needs at least one reference".into()));
    }
    let hyp_tokens = tokenize_for_overlap(hyp);
    Ok(references
        .iter()
        .map(|r| rouge_1_tokens(&hyp_tokens, &tokenize_for_overlap(r.as_ref())).f1)
        .fold(0.0, f64::max))
}

/// Returns a precomputed score stored on the record, unmodified.
pub fn external_metric(record: &GenerationRecord, metric_id: &str) -> Result<f64> {
    record
        .external_scores
        .get(metric_id)
        .copied()
        .ok_or_else(|| Error::MissingMetric {
            metric: metric_id.to_string(),
            record_id: record.id.clone(),
        })
}

/// Inclusive comparison: `raw >= t` is labeled correct.
pub fn binarize(raw: f64, t: f64) -> u8 {
    u8::from(raw >= t)
}

/// Raw (continuous) score of `metric` for the record's greedy answer, reduced
/// by max over references. `llm_judge` is read from the record's external
/// scores, where the evaluation pipeline stores judge verdicts.
pub fn raw_score(record: &GenerationRecord, metric: MetricId) -> Result<f64> {
    let hyp = &record.greedy.text;
    let lexical = |f: fn(&[String], &[String]) -> f64| -> f64 {
        let hyp_tokens = tokenize_for_overlap(hyp);
        record
            .references
            .iter()
            .map(|r| f(&hyp_tokens, &tokenize_for_overlap(r)))
            .fold(0.0, f64::max)
    };
    Ok(match metric {
        MetricId::Rouge1F1 => lexical(|h, r| rouge_1_tokens(h, r).f1),
        MetricId::RougeLF1 => lexical(|h, r| rouge_l_tokens(h, r).f1),
        MetricId::RougeLRecall => lexical(|h, r| rouge_l_tokens(h, r).recall),
        MetricId::RougeLPrecision => lexical(|h, r| rouge_l_tokens(h, r).precision),
        MetricId::SquadF1 => squad_f1(hyp, &record.references)?,
        MetricId::BertScoreF1 | MetricId::SentenceBert | MetricId::AlignScore => {
            external_metric(record, metric.as_str())?
        }
        MetricId::LlmJudge => {
            let v = external_metric(record, metric.as_str())?;
            if v != 0.0 && v != 1.0 {
                return Err(Error::Data(format!(
                    "record `{}`: llm_judge score {v} is not binary",
                    record.id
                )));
            }
            v
        }
    })
}

/// Scores and labels one record. Binary metrics ignore `threshold`;
/// continuous metrics without a threshold return an unlabeled result.
pub fn score_record(
    record: &GenerationRecord,
    metric: MetricId,
    threshold: Option<f64>,
) -> Result<CorrectnessResult> {
    let raw = raw_score(record, metric)?;
    if metric.is_binary() {
        return Ok(CorrectnessResult {
            metric_id: metric,
            raw,
            threshold: None,
            label: Some(raw as u8),
        });
    }
    Ok(CorrectnessResult {
        metric_id: metric,
        raw,
        threshold,
        label: threshold.map(|t| binarize(raw, t)),
    })
}
