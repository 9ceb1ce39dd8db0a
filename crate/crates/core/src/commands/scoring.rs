use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correctness::{binarize, raw_score, MetricId, ThresholdCatalog};
use crate::error::{Error, Result};
use crate::judge::{Judge, JudgeEntailment};
use crate::records::{parse_records, GenerationRecord};
use crate::uq::{
    cluster_samples, length_baseline, mean_token_entropy, naive_entropy, neg_sequence_probability,
    perplexity, probe_in_train_split, probe_uncertainty, semantic_entropy, train_probe,
    ClusterOptions, ExactMatchOracle, LengthUnit, MethodId, ProbeMetadata,
};

use super::config::{EvalConfig, Equivalence};

/// A parsed dataset together with the digest of its exact bytes.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub sha256: String,
    pub records: Vec<GenerationRecord>,
}

impl Dataset {
    pub fn from_bytes(name: impl Into<String>, bytes: &[u8]) -> Result<Self> {
        Ok(Dataset {
            name: name.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
            records: parse_records(bytes)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::from_bytes(name, &bytes)
    }
}

/// A metric paired with one of its thresholds; binary metrics carry none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricColumn {
    pub metric: MetricId,
    pub threshold: Option<f64>,
}

impl MetricColumn {
    pub fn label(&self, raw: f64) -> u8 {
        match self.threshold {
            Some(t) => binarize(raw, t),
            None => u8::from(raw >= 0.5),
        }
    }

    /// Every configured column: one per catalog threshold, or a single
    /// column for binary metrics.
    pub fn expand(metrics: &[MetricId], catalog: &ThresholdCatalog) -> Vec<MetricColumn> {
        let mut out = Vec::new();
        for &metric in metrics {
            if metric.is_binary() {
                out.push(MetricColumn {
                    metric,
                    threshold: None,
                });
            } else {
                for &t in catalog.thresholds(metric) {
                    out.push(MetricColumn {
                        metric,
                        threshold: Some(t),
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for MetricColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.threshold {
            Some(t) => write!(f, "{}@{t}", self.metric),
            None => write!(f, "{}", self.metric),
        }
    }
}

/// Per-record values of one score, with a tally of why values are missing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreColumn {
    pub values: Vec<Option<f64>>,
    pub missing: BTreeMap<String, usize>,
    /// Set when the whole column could not be produced.
    pub undefined: Option<String>,
}

impl ScoreColumn {
    fn undefined(n: usize, reason: impl Into<String>) -> Self {
        ScoreColumn {
            values: vec![None; n],
            missing: BTreeMap::new(),
            undefined: Some(reason.into()),
        }
    }

    fn from_results(results: Vec<Result<f64>>) -> Self {
        let mut col = ScoreColumn::default();
        for r in results {
            match r {
                Ok(v) => col.values.push(Some(v)),
                Err(e) => {
                    *col.missing.entry(short_reason(&e)).or_default() += 1;
                    col.values.push(None);
                }
            }
        }
        col
    }

    fn mark_missing(&mut self, idx: usize, reason: &str) {
        self.values[idx] = None;
        *self.missing.entry(reason.to_string()).or_default() += 1;
    }

    pub fn present(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Collapses record-specific error text into a stable category.
pub fn short_reason(e: &Error) -> String {
    match e {
        Error::MissingMetric { metric, .. } => format!("missing external score `{metric}`"),
        Error::Transport { .. } => "judge transport failure".into(),
        Error::VerdictParse { .. } => "unparseable judge verdict".into(),
        Error::UnavailableEstimator { reason, .. } => {
            if reason.starts_with("token ") && reason.ends_with("has no entropy") {
                "token without entropy".into()
            } else {
                reason.clone()
            }
        }
        Error::SingleClass => "single-class".into(),
        Error::DimensionMismatch { .. } => "embedding dimension mismatch".into(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub label_metric: MetricId,
    pub label_threshold: Option<f64>,
    pub train_records: usize,
    pub eval_records: usize,
    pub training: ProbeMetadata,
}

/// Computes score columns for one dataset, sharing raw metric scores and
/// judge verdicts between methods and metrics.
pub struct Scorer<'a> {
    records: &'a [GenerationRecord],
    config: &'a EvalConfig,
    judge: Option<&'a Judge>,
    pool: rayon::ThreadPool,
    metrics: BTreeMap<MetricId, ScoreColumn>,
    pub probes: BTreeMap<String, ProbeSummary>,
}

impl<'a> Scorer<'a> {
    pub fn new(
        records: &'a [GenerationRecord],
        config: &'a EvalConfig,
        judge: Option<&'a Judge>,
    ) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        Ok(Scorer {
            records,
            config,
            judge,
            pool,
            metrics: BTreeMap::new(),
            probes: BTreeMap::new(),
        })
    }

    pub fn records(&self) -> &[GenerationRecord] {
        self.records
    }

    /// Raw scores of `metric` for every record, computed once.
    pub fn metric(&mut self, metric: MetricId) -> &ScoreColumn {
        if !self.metrics.contains_key(&metric) {
            let col = self.compute_metric(metric);
            for (reason, count) in &col.missing {
                log::warn!("{metric}: {count} record(s) excluded ({reason})");
            }
            self.metrics.insert(metric, col);
        }
        &self.metrics[&metric]
    }

    fn compute_metric(&self, metric: MetricId) -> ScoreColumn {
        let records = self.records;
        if metric == MetricId::LlmJudge {
            if let Some(judge) = self.judge {
                let verdicts = judge.judge_many(records);
                return ScoreColumn::from_results(
                    verdicts
                        .into_iter()
                        .map(|v| v.map(|v| f64::from(v.label)))
                        .collect(),
                );
            }
            if records.iter().all(|r| !r.external_scores.contains_key("llm_judge")) {
                return ScoreColumn::undefined(records.len(), "no judge configured");
            }
        }
        let results = self
            .pool
            .install(|| records.par_iter().map(|r| raw_score(r, metric)).collect());
        ScoreColumn::from_results(results)
    }

    /// Binary labels of `column` for every record.
    pub fn labels(&mut self, column: MetricColumn) -> (Vec<Option<u8>>, Option<String>) {
        let raw = self.metric(column.metric);
        let labels = raw.values.iter().map(|v| v.map(|v| column.label(v))).collect();
        (labels, raw.undefined.clone())
    }

    pub fn method(&mut self, method: MethodId) -> ScoreColumn {
        match method {
            MethodId::Probe(label_metric) => self.probe_column(label_metric),
            MethodId::SemanticEntropy | MethodId::SemanticEntropyLenNorm => {
                self.semantic_column(method == MethodId::SemanticEntropyLenNorm)
            }
            _ => {
                let unique = self.config.naive_entropy_unique;
                let results = self.pool.install(|| {
                    self.records
                        .par_iter()
                        .map(|r| {
                            let g = &r.greedy;
                            Ok(match method {
                                MethodId::NegSeqProb => neg_sequence_probability(g)?.value,
                                MethodId::Perplexity => perplexity(g)?.value,
                                MethodId::MeanTokenEntropy => mean_token_entropy(g)?.value,
                                MethodId::NaiveEntropy => naive_entropy(&r.samples, unique)?.value,
                                MethodId::LenTokens => length_baseline(g, LengthUnit::Tokens).value,
                                MethodId::LenChars => length_baseline(g, LengthUnit::Chars).value,
                                _ => unreachable!("handled above"),
                            })
                        })
                        .collect()
                });
                ScoreColumn::from_results(results)
            }
        }
    }

    fn semantic_column(&self, length_normalized: bool) -> ScoreColumn {
        let options = ClusterOptions {
            length_normalized,
            normalize: self.config.semantic.normalize_clusters,
        };
        let score = |r: &GenerationRecord| -> Result<f64> {
            let clusters = match (self.config.semantic.equivalence, self.judge) {
                (Equivalence::Judge, Some(judge)) => {
                    let oracle = JudgeEntailment {
                        judge,
                        question: &r.question,
                    };
                    cluster_samples(&r.samples, &oracle, options)?
                }
                (Equivalence::Judge, None) => {
                    return Err(Error::UnavailableEstimator {
                        method: MethodId::SemanticEntropy.to_string(),
                        reason: "no judge configured".into(),
                    })
                }
                (Equivalence::Exact, _) => cluster_samples(&r.samples, &ExactMatchOracle, options)?,
            };
            Ok(semantic_entropy(&clusters, length_normalized).value)
        };
        let results = self
            .pool
            .install(|| self.records.par_iter().map(score).collect());
        ScoreColumn::from_results(results)
    }

    /// Trains on the hash-selected training split and scores only the
    /// held-out records; training-split records are reported as excluded.
    fn probe_column(&mut self, label_metric: MetricId) -> ScoreColumn {
        let n = self.records.len();
        if self.records.iter().all(|r| r.embedding.is_none()) {
            return ScoreColumn::undefined(n, "no embeddings");
        }
        let settings = self.config.probe.clone();
        let column = MetricColumn {
            metric: label_metric,
            threshold: (!label_metric.is_binary()).then_some(settings.threshold),
        };
        let (labels, undefined) = self.labels(column);
        if let Some(reason) = undefined {
            return ScoreColumn::undefined(n, format!("label metric unavailable: {reason}"));
        }

        let seed = self.config.seed;
        let in_train: Vec<bool> = self
            .records
            .iter()
            .map(|r| probe_in_train_split(&r.id, seed, settings.train_fraction))
            .collect();
        let mut features = Vec::new();
        let mut train_labels = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if let (true, Some(e), Some(l)) = (in_train[i], &r.embedding, labels[i]) {
                features.push(e.clone());
                train_labels.push(l);
            }
        }
        let model = match train_probe(
            &features,
            &train_labels,
            Some(label_metric),
            &settings.optimizer(),
        ) {
            Ok(m) => m,
            Err(e) => return ScoreColumn::undefined(n, format!("probe training failed: {e}")),
        };

        let mut col = ScoreColumn {
            values: vec![None; n],
            ..Default::default()
        };
        let mut eval_records = 0;
        for (i, r) in self.records.iter().enumerate() {
            if in_train[i] {
                col.mark_missing(i, "probe training split");
                continue;
            }
            match &r.embedding {
                None => col.mark_missing(i, "no embedding"),
                Some(e) => match probe_uncertainty(&model, e) {
                    Ok(s) => {
                        col.values[i] = Some(s.value);
                        eval_records += 1;
                    }
                    Err(err) => col.mark_missing(i, &short_reason(&err)),
                },
            }
        }
        self.probes.insert(
            MethodId::Probe(label_metric).to_string(),
            ProbeSummary {
                label_metric,
                label_threshold: column.threshold,
                train_records: features.len(),
                eval_records,
                training: model.metadata,
            },
        );
        col
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_labels() {
        let c = MetricColumn {
            metric: MetricId::RougeLF1,
            threshold: Some(0.5),
        };
        assert_eq!(c.to_string(), "rougeL_f1@0.5");
        assert_eq!((c.label(0.5), c.label(0.49)), (1, 0));
        let j = MetricColumn {
            metric: MetricId::LlmJudge,
            threshold: None,
        };
        assert_eq!(j.to_string(), "llm_judge");
        assert_eq!((j.label(1.0), j.label(0.0)), (1, 0));
    }

    #[test]
    fn expand_uses_catalog() {
        let cols = MetricColumn::expand(
            &[MetricId::RougeLF1, MetricId::LlmJudge],
            &ThresholdCatalog::default(),
        );
        let names: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
        assert_eq!(
            names,
            ["rougeL_f1@0.1", "rougeL_f1@0.3", "rougeL_f1@0.5", "llm_judge"]
        );
    }
}
