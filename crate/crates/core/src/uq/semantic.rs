use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{normalize_text, GeneratedAnswer};

use super::{MethodId, UncertaintyScore};

/// Decides whether one answer entails another. Clustering requires
/// entailment in both directions.
pub trait EquivalenceOracle {
    fn entails(&self, premise: &str, hypothesis: &str) -> Result<bool>;

    fn equivalent(&self, a: &str, b: &str) -> Result<bool> {
        Ok(self.entails(a, b)? && self.entails(b, a)?)
    }
}

/// Two answers are equivalent when their normalized texts are identical.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatchOracle;

impl EquivalenceOracle for ExactMatchOracle {
    fn entails(&self, premise: &str, hypothesis: &str) -> Result<bool> {
        Ok(normalize_text(premise) == normalize_text(hypothesis))
    }
}

impl<F> EquivalenceOracle for F
where
    F: Fn(&str, &str) -> Result<bool>,
{
    fn entails(&self, premise: &str, hypothesis: &str) -> Result<bool> {
        self(premise, hypothesis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticCluster {
    pub members: Vec<usize>,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    /// Divide each sample's log-probability by its token count before
    /// exponentiating.
    pub length_normalized: bool,
    /// Rescale cluster masses to sum to one.
    pub normalize: bool,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            length_normalized: false,
            normalize: true,
        }
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Greedy bidirectional-equivalence clustering. Each sample joins the first
/// cluster whose representative (first member) it is equivalent to. Cluster
/// mass is the summed sequence probability of the cluster's distinct texts.
pub fn cluster_samples<O: EquivalenceOracle + ?Sized>(
    samples: &[GeneratedAnswer],
    oracle: &O,
    options: ClusterOptions,
) -> Result<Vec<SemanticCluster>> {
    if samples.is_empty() {
        return Err(Error::UnavailableEstimator {
            method: MethodId::SemanticEntropy.to_string(),
            reason: "no samples".into(),
        });
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, sample) in samples.iter().enumerate() {
        let mut home = None;
        for (c, group) in groups.iter().enumerate() {
            if oracle.equivalent(&samples[group[0]].text, &sample.text)? {
                home = Some(c);
                break;
            }
        }
        match home {
            Some(c) => groups[c].push(i),
            None => groups.push(vec![i]),
        }
    }

    let sample_logp = |s: &GeneratedAnswer| {
        let lp = s.sequence_logprob();
        if options.length_normalized {
            lp / s.tokens.len().max(1) as f64
        } else {
            lp
        }
    };
    let log_masses: Vec<f64> = groups
        .iter()
        .map(|members| {
            let mut seen = std::collections::HashSet::new();
            let unique: Vec<f64> = members
                .iter()
                .filter(|&&m| seen.insert(samples[m].text.as_str()))
                .map(|&m| sample_logp(&samples[m]))
                .collect();
            log_sum_exp(&unique)
        })
        .collect();

    let total = log_sum_exp(&log_masses);
    if options.normalize && total == f64::NEG_INFINITY {
        return Err(Error::Data("all sample probabilities are zero".into()));
    }
    Ok(groups
        .into_iter()
        .zip(log_masses)
        .map(|(members, lm)| SemanticCluster {
            members,
            probability: if options.normalize {
                (lm - total).exp()
            } else {
                lm.exp()
            },
        })
        .collect())
}

/// Shannon entropy (nats) of the cluster distribution.
pub fn semantic_entropy(clusters: &[SemanticCluster], length_normalized: bool) -> UncertaintyScore {
    let value = -clusters
        .iter()
        .map(|c| {
            if c.probability > 0.0 {
                c.probability * c.probability.ln()
            } else {
                0.0
            }
        })
        .sum::<f64>();
    UncertaintyScore {
        method: if length_normalized {
            MethodId::SemanticEntropyLenNorm
        } else {
            MethodId::SemanticEntropy
        },
        value: value.max(0.0),
    }
}
