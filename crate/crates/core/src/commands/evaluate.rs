use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::judge::Judge;
use crate::records::HumanAnnotation;
use crate::stats::{auroc, spearman, spearman_permutation_pvalue};
use crate::uq::MethodId;

use super::agree::{cmd_agree, KappaTable};
use super::config::EvalConfig;
use super::scoring::{Dataset, MetricColumn, ProbeSummary, ScoreColumn, Scorer};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: EvalConfig,
}

impl RunMetadata {
    pub fn new(config: &EvalConfig) -> Self {
        RunMetadata {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            seed: config.seed,
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AurocCell {
    pub method: MethodId,
    pub metric: String,
    #[serde(flatten)]
    pub outcome: AurocOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum AurocOutcome {
    Defined {
        auroc: f64,
        n_pos: usize,
        n_neg: usize,
        tie_pairs: u64,
        /// Records lacking either a score or a label.
        excluded: usize,
    },
    Undefined {
        reason: String,
    },
}

impl AurocCell {
    pub fn value(&self) -> Option<f64> {
        match self.outcome {
            AurocOutcome::Defined { auroc, .. } => Some(auroc),
            AurocOutcome::Undefined { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CorrelationCell {
    Defined {
        rho: f64,
        n: usize,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        p_value: Option<f64>,
    },
    Undefined {
        reason: String,
    },
}

impl CorrelationCell {
    pub fn rho(&self) -> Option<f64> {
        match self {
            CorrelationCell::Defined { rho, .. } => Some(*rho),
            CorrelationCell::Undefined { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthCorrelation {
    pub method: MethodId,
    pub tokens: CorrelationCell,
    pub chars: CorrelationCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub name: String,
    pub sha256: String,
    pub n_records: usize,
    pub metric_columns: Vec<String>,
    pub auroc: Vec<AurocCell>,
    pub length_correlation: Vec<LengthCorrelation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub human_agreement: Option<KappaTable>,
    /// Per score, the number of records without a value and why.
    pub missing: BTreeMap<String, BTreeMap<String, usize>>,
    pub probes: BTreeMap<String, ProbeSummary>,
}

impl DatasetReport {
    pub fn cell(&self, method: MethodId, metric: &str) -> Option<&AurocCell> {
        self.auroc
            .iter()
            .find(|c| c.method == method && c.metric == metric)
    }
}

/// Equal-weight average of a cell over the datasets where it is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCell {
    pub method: MethodId,
    pub metric: String,
    pub unweighted_mean_auroc: Option<f64>,
    pub datasets_defined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metadata: RunMetadata,
    pub datasets: Vec<DatasetReport>,
    pub unweighted_mean_over_datasets: Vec<MeanCell>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn auroc_cell(method: MethodId, column: MetricColumn, scores: &ScoreColumn, labels: &[Option<u8>], label_undefined: Option<String>) -> AurocCell {
    let outcome = if let Some(reason) = scores.undefined.clone().or(label_undefined) {
        AurocOutcome::Undefined { reason }
    } else {
        let pairs: Vec<(f64, u8)> = scores
            .values
            .iter()
            .zip(labels)
            .filter_map(|(g, l)| Some(((*g)?, (*l)?)))
            .collect();
        let excluded = labels.len() - pairs.len();
        if pairs.is_empty() {
            AurocOutcome::Undefined {
                reason: "no scored and labeled records".into(),
            }
        } else {
            match auroc(&pairs) {
                Ok(a) => AurocOutcome::Defined {
                    auroc: a.value,
                    n_pos: a.n_pos,
                    n_neg: a.n_neg,
                    tie_pairs: a.tie_pairs,
                    excluded,
                },
                Err(Error::SingleClass) => AurocOutcome::Undefined {
                    reason: "single-class".into(),
                },
                Err(e) => AurocOutcome::Undefined {
                    reason: e.to_string(),
                },
            }
        }
    };
    AurocCell {
        method,
        metric: column.to_string(),
        outcome,
    }
}

fn correlation_cell(
    scores: &ScoreColumn,
    lengths: &[f64],
    permutations: usize,
    seed: u64,
) -> CorrelationCell {
    if let Some(reason) = &scores.undefined {
        return CorrelationCell::Undefined {
            reason: reason.clone(),
        };
    }
    let (x, y): (Vec<f64>, Vec<f64>) = scores
        .values
        .iter()
        .zip(lengths)
        .filter_map(|(s, &l)| Some(((*s)?, l)))
        .unzip();
    if x.len() < 2 {
        return CorrelationCell::Undefined {
            reason: "fewer than two scored records".into(),
        };
    }
    match spearman(&x, &y) {
        Ok(rho) => {
            let p_value = (permutations > 0)
                .then(|| spearman_permutation_pvalue(&x, &y, permutations, seed).ok())
                .flatten();
            CorrelationCell::Defined {
                rho,
                n: x.len(),
                p_value,
            }
        }
        Err(Error::UndefinedCorrelation(reason)) => CorrelationCell::Undefined { reason },
        Err(e) => CorrelationCell::Undefined {
            reason: e.to_string(),
        },
    }
}

fn length_correlation(
    scorer: &Scorer<'_>,
    method: MethodId,
    scores: &ScoreColumn,
    permutations: usize,
    seed: u64,
) -> LengthCorrelation {
    let tokens: Vec<f64> = scorer
        .records()
        .iter()
        .map(|r| r.greedy.token_len() as f64)
        .collect();
    let chars: Vec<f64> = scorer
        .records()
        .iter()
        .map(|r| r.greedy.char_len() as f64)
        .collect();
    LengthCorrelation {
        method,
        tokens: correlation_cell(scores, &tokens, permutations, seed),
        chars: correlation_cell(scores, &chars, permutations, seed),
    }
}

fn evaluate_dataset(
    dataset: &Dataset,
    annotations: Option<&[HumanAnnotation]>,
    config: &EvalConfig,
    judge: Option<&Judge>,
) -> Result<DatasetReport> {
    let columns = MetricColumn::expand(&config.metrics, &config.catalog()?);
    let mut scorer = Scorer::new(&dataset.records, config, judge)?;
    let mut missing = BTreeMap::new();

    let mut method_columns = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let col = scorer.method(method);
        if let Some(reason) = &col.undefined {
            log::warn!("{method}: undefined ({reason})");
        }
        if !col.missing.is_empty() {
            missing.insert(method.to_string(), col.missing.clone());
        }
        method_columns.push((method, col));
    }

    let mut cells = Vec::new();
    for (method, scores) in &method_columns {
        for &column in &columns {
            let (labels, undefined) = scorer.labels(column);
            cells.push(auroc_cell(*method, column, scores, &labels, undefined));
        }
    }
    for metric in &config.metrics {
        let col = scorer.metric(*metric);
        if !col.missing.is_empty() {
            missing.insert(metric.to_string(), col.missing.clone());
        }
    }

    let length_correlation = method_columns
        .iter()
        .map(|(m, s)| length_correlation(&scorer, *m, s, 0, config.seed))
        .collect();

    let human_agreement = match annotations {
        Some(a) => match cmd_agree(&mut scorer, a, &columns) {
            Ok(table) => Some(table),
            Err(Error::EmptyJoin) => {
                log::warn!("{}: annotations share no record ids", dataset.name);
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };

    Ok(DatasetReport {
        name: dataset.name.clone(),
        sha256: dataset.sha256.clone(),
        n_records: dataset.records.len(),
        metric_columns: columns.iter().map(|c| c.to_string()).collect(),
        auroc: cells,
        length_correlation,
        human_agreement,
        missing,
        probes: std::mem::take(&mut scorer.probes),
    })
}

/// AUROC of every configured method against every configured metric column
/// on each dataset, plus length diagnostics and optional human agreement.
pub fn cmd_evaluate(
    datasets: &[Dataset],
    annotations: Option<&[HumanAnnotation]>,
    config: &EvalConfig,
    judge: Option<&Judge>,
) -> Result<EvaluationReport> {
    config.validate()?;
    let reports = datasets
        .iter()
        .map(|d| evaluate_dataset(d, annotations, config, judge))
        .collect::<Result<Vec<_>>>()?;

    let mut means = Vec::new();
    if let Some(first) = reports.first() {
        for cell in &first.auroc {
            let values: Vec<f64> = reports
                .iter()
                .filter_map(|r| r.cell(cell.method, &cell.metric)?.value())
                .collect();
            means.push(MeanCell {
                method: cell.method,
                metric: cell.metric.clone(),
                unweighted_mean_auroc: (!values.is_empty())
                    .then(|| values.iter().sum::<f64>() / values.len() as f64),
                datasets_defined: values.len(),
            });
        }
    }
    Ok(EvaluationReport {
        metadata: RunMetadata::new(config),
        datasets: reports,
        unweighted_mean_over_datasets: means,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub metadata: RunMetadata,
    pub dataset: String,
    pub sha256: String,
    /// Permutations behind each p-value; zero when none were computed.
    pub permutations: usize,
    pub rows: Vec<LengthCorrelation>,
}

/// Spearman correlation of each method's scores with answer length in
/// tokens and in characters.
pub fn cmd_correlate(
    dataset: &Dataset,
    config: &EvalConfig,
    judge: Option<&Judge>,
    permutations: usize,
) -> Result<CorrelationTable> {
    config.validate()?;
    if dataset.records.len() < 2 {
        return Err(Error::Contract("correlation needs at least two records".into()));
    }
    let mut scorer = Scorer::new(&dataset.records, config, judge)?;
    let mut rows = Vec::new();
    for &method in &config.methods {
        let scores = scorer.method(method);
        rows.push(length_correlation(&scorer, method, &scores, permutations, config.seed));
    }
    Ok(CorrelationTable {
        metadata: RunMetadata::new(config),
        dataset: dataset.name.clone(),
        sha256: dataset.sha256.clone(),
        permutations,
        rows,
    })
}
