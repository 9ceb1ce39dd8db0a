use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::correctness::MetricId;
use crate::error::{Error, Result};
use crate::records::HumanAnnotation;
use crate::stats::cohen_kappa;

use super::scoring::{MetricColumn, Scorer};

/// Majority label per record. Records whose annotators split evenly have no
/// majority and are counted in `ties`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HumanMajority {
    pub labels: BTreeMap<String, u8>,
    pub ties: usize,
}

pub fn human_majority(annotations: &[HumanAnnotation]) -> HumanMajority {
    let mut votes: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for a in annotations {
        let v = votes.entry(a.record_id.as_str()).or_default();
        if a.label == 1 {
            v.1 += 1;
        } else {
            v.0 += 1;
        }
    }
    let mut out = HumanMajority::default();
    for (id, (zeros, ones)) in votes {
        match ones.cmp(&zeros) {
            std::cmp::Ordering::Greater => {
                out.labels.insert(id.to_string(), 1);
            }
            std::cmp::Ordering::Less => {
                out.labels.insert(id.to_string(), 0);
            }
            std::cmp::Ordering::Equal => out.ties += 1,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    /// Column label, `metric@threshold` or the bare binary metric id.
    pub column: String,
    pub metric: MetricId,
    pub threshold: Option<f64>,
    /// Records carrying both a human majority and a metric label.
    pub n: usize,
    #[serde(flatten)]
    pub outcome: KappaOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum KappaOutcome {
    Defined {
        kappa: f64,
        observed: f64,
        expected: f64,
        degenerate: bool,
    },
    Undefined {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairKappa {
    pub annotator_a: String,
    pub annotator_b: String,
    pub n: usize,
    pub kappa: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterAnnotator {
    /// Mean kappa over annotator pairs sharing at least one record.
    pub mean_pairwise_kappa: Option<f64>,
    pub pairs: Vec<PairKappa>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaTable {
    /// Records with a human majority that also appear in the dataset.
    pub joined_records: usize,
    /// Records dropped because their annotators split evenly.
    pub excluded_ties: usize,
    pub rows: Vec<KappaRow>,
    pub inter_annotator: InterAnnotator,
}

/// Record indices with a human majority, paired with that majority label.
fn join(scorer: &Scorer<'_>, majority: &HumanMajority) -> Vec<(usize, u8)> {
    scorer
        .records()
        .iter()
        .enumerate()
        .filter_map(|(i, r)| majority.labels.get(&r.id).map(|&l| (i, l)))
        .collect()
}

fn kappa_row(scorer: &mut Scorer<'_>, joined: &[(usize, u8)], column: MetricColumn) -> KappaRow {
    let (labels, undefined) = scorer.labels(column);
    let mut human = Vec::new();
    let mut metric = Vec::new();
    for &(i, h) in joined {
        if let Some(l) = labels[i] {
            human.push(h);
            metric.push(l);
        }
    }
    let outcome = match undefined {
        Some(reason) => KappaOutcome::Undefined { reason },
        None if metric.is_empty() => KappaOutcome::Undefined {
            reason: "no labeled records".into(),
        },
        None => match cohen_kappa(&metric, &human) {
            Ok(a) => KappaOutcome::Defined {
                kappa: a.kappa,
                observed: a.observed,
                expected: a.expected,
                degenerate: a.degenerate,
            },
            Err(e) => KappaOutcome::Undefined {
                reason: e.to_string(),
            },
        },
    };
    KappaRow {
        column: column.to_string(),
        metric: column.metric,
        threshold: column.threshold,
        n: metric.len(),
        outcome,
    }
}

pub fn inter_annotator(annotations: &[HumanAnnotation]) -> InterAnnotator {
    let mut by_annotator: BTreeMap<&str, BTreeMap<&str, u8>> = BTreeMap::new();
    for a in annotations {
        by_annotator
            .entry(a.annotator_id.as_str())
            .or_default()
            .insert(a.record_id.as_str(), a.label);
    }
    let names: Vec<&str> = by_annotator.keys().copied().collect();
    let mut pairs = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let (la, lb): (Vec<u8>, Vec<u8>) = by_annotator[a]
                .iter()
                .filter_map(|(id, &x)| by_annotator[b].get(id).map(|&y| (x, y)))
                .unzip();
            if let Ok(k) = cohen_kappa(&la, &lb) {
                pairs.push(PairKappa {
                    annotator_a: a.to_string(),
                    annotator_b: b.to_string(),
                    n: la.len(),
                    kappa: k.kappa,
                    degenerate: k.degenerate,
                });
            }
        }
    }
    let mean_pairwise_kappa =
        (!pairs.is_empty()).then(|| pairs.iter().map(|p| p.kappa).sum::<f64>() / pairs.len() as f64);
    InterAnnotator {
        mean_pairwise_kappa,
        pairs,
    }
}

/// Cohen's kappa between each metric column and the human majority label.
pub fn cmd_agree(
    scorer: &mut Scorer<'_>,
    annotations: &[HumanAnnotation],
    columns: &[MetricColumn],
) -> Result<KappaTable> {
    let majority = human_majority(annotations);
    let joined = join(scorer, &majority);
    if joined.is_empty() {
        return Err(Error::EmptyJoin);
    }
    if majority.ties > 0 {
        log::info!("{} record(s) excluded: annotators split evenly", majority.ties);
    }
    let rows = columns
        .iter()
        .map(|&c| kappa_row(scorer, &joined, c))
        .collect();
    Ok(KappaTable {
        joined_records: joined.len(),
        excluded_ties: majority.ties,
        rows,
        inter_annotator: inter_annotator(annotations),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub kappa: f64,
    pub degenerate: bool,
    pub n: usize,
}

/// Kappa against the human majority at every threshold of `grid`, in
/// ascending threshold order.
pub fn cmd_sweep(
    scorer: &mut Scorer<'_>,
    annotations: &[HumanAnnotation],
    metric: MetricId,
    grid: &[f64],
) -> Result<Vec<SweepPoint>> {
    if metric.is_binary() {
        return Err(Error::NotSweepable(metric.to_string()));
    }
    let majority = human_majority(annotations);
    let joined = join(scorer, &majority);
    if joined.is_empty() {
        return Err(Error::EmptyJoin);
    }
    let mut grid = grid.to_vec();
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Config("sweep thresholds must be finite".into()));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut points = Vec::with_capacity(grid.len());
    for threshold in grid {
        let row = kappa_row(
            scorer,
            &joined,
            MetricColumn {
                metric,
                threshold: Some(threshold),
            },
        );
        match row.outcome {
            KappaOutcome::Defined {
                kappa, degenerate, ..
            } => points.push(SweepPoint {
                threshold,
                kappa,
                degenerate,
                n: row.n,
            }),
            KappaOutcome::Undefined { reason } => {
                return Err(Error::Data(format!("{metric}: {reason}")))
            }
        }
    }
    Ok(points)
}

pub fn write_sweep_csv<W: Write>(mut w: W, points: &[SweepPoint]) -> Result<()> {
    writeln!(w, "threshold,kappa,degenerate,n")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.threshold, p.kappa, p.degenerate, p.n)?;
    }
    Ok(())
}

/// `{0.1, 0.2, …, 1.0}`.
pub fn default_sweep_grid() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) / 10.0).collect()
}
