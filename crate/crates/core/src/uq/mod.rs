//! Uncertainty estimators. Every score follows one orientation: a higher
//! value means the model is more uncertain about its answer.

mod probe;
mod semantic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::correctness::MetricId;
use crate::error::{Error, Result};
use crate::records::GeneratedAnswer;

pub use probe::{
    probe_in_train_split, probe_uncertainty, train_probe, LogisticObjective, ProbeConfig,
    ProbeMetadata, ProbeModel,
};
pub use semantic::{
    cluster_samples, semantic_entropy, ClusterOptions, EquivalenceOracle, ExactMatchOracle,
    SemanticCluster,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    NegSeqProb,
    Perplexity,
    MeanTokenEntropy,
    NaiveEntropy,
    SemanticEntropy,
    SemanticEntropyLenNorm,
    /// Logistic probe trained on labels from the given correctness metric.
    Probe(MetricId),
    LenTokens,
    LenChars,
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MethodId::NegSeqProb => "neg_seq_prob",
            MethodId::Perplexity => "perplexity",
            MethodId::MeanTokenEntropy => "mean_token_entropy",
            MethodId::NaiveEntropy => "naive_entropy",
            MethodId::SemanticEntropy => "semantic_entropy",
            MethodId::SemanticEntropyLenNorm => "semantic_entropy_lennorm",
            MethodId::Probe(m) => return write!(f, "probe:{m}"),
            MethodId::LenTokens => "len_tokens",
            MethodId::LenChars => "len_chars",
        };
        f.write_str(s)
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "neg_seq_prob" => MethodId::NegSeqProb,
            "perplexity" => MethodId::Perplexity,
            "mean_token_entropy" => MethodId::MeanTokenEntropy,
            "naive_entropy" => MethodId::NaiveEntropy,
            "semantic_entropy" => MethodId::SemanticEntropy,
            "semantic_entropy_lennorm" => MethodId::SemanticEntropyLenNorm,
            "len_tokens" => MethodId::LenTokens,
            "len_chars" => MethodId::LenChars,
            other => match other.strip_prefix("probe:") {
                Some(metric) => MethodId::Probe(
                    metric
                        .parse()
                        .map_err(|_| Error::UnknownMethod(other.to_string()))?,
                ),
                None => return Err(Error::UnknownMethod(other.to_string())),
            },
        })
    }
}

impl Serialize for MethodId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScore {
    pub method: MethodId,
    pub value: f64,
}

impl UncertaintyScore {
    fn new(method: MethodId, value: f64) -> Self {
        UncertaintyScore { method, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Tokens,
    Chars,
}

fn require_tokens(ans: &GeneratedAnswer, method: MethodId) -> Result<()> {
    if ans.tokens.is_empty() {
        return Err(Error::UnavailableEstimator {
            method: method.to_string(),
            reason: "answer has no tokens".into(),
        });
    }
    Ok(())
}

/// `-p(answer | prompt)`, the negated product of token probabilities.
pub fn neg_sequence_probability(ans: &GeneratedAnswer) -> Result<UncertaintyScore> {
    require_tokens(ans, MethodId::NegSeqProb)?;
    Ok(UncertaintyScore::new(
        MethodId::NegSeqProb,
        -ans.sequence_logprob().exp(),
    ))
}

/// `exp(-mean token logprob)`.
pub fn perplexity(ans: &GeneratedAnswer) -> Result<UncertaintyScore> {
    require_tokens(ans, MethodId::Perplexity)?;
    // shifted mean: equal token logprobs give exactly that logprob back,
    // so perplexity carries no summation noise that could track length
    let first = ans.tokens[0].logprob;
    let offset: f64 = ans.tokens.iter().map(|t| t.logprob - first).sum();
    let mean = first + offset / ans.tokens.len() as f64;
    Ok(UncertaintyScore::new(MethodId::Perplexity, (-mean).exp()))
}

pub fn mean_token_entropy(ans: &GeneratedAnswer) -> Result<UncertaintyScore> {
    require_tokens(ans, MethodId::MeanTokenEntropy)?;
    let mut total = 0.0;
    for (i, tok) in ans.tokens.iter().enumerate() {
        total += tok.entropy.ok_or_else(|| Error::UnavailableEstimator {
            method: MethodId::MeanTokenEntropy.to_string(),
            reason: format!("token {i} has no entropy"),
        })?;
    }
    Ok(UncertaintyScore::new(
        MethodId::MeanTokenEntropy,
        total / ans.tokens.len() as f64,
    ))
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// `-Σ_s p_s ln p_s` over the sampled answers taken verbatim. With
/// `unique_only`, repeated texts contribute once.
pub fn naive_entropy(samples: &[GeneratedAnswer], unique_only: bool) -> Result<UncertaintyScore> {
    if samples.is_empty() {
        return Err(Error::UnavailableEstimator {
            method: MethodId::NaiveEntropy.to_string(),
            reason: "no samples".into(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    let value = -samples
        .iter()
        .filter(|s| !unique_only || seen.insert(s.text.as_str()))
        .map(|s| plogp(s.sequence_probability()))
        .sum::<f64>();
    Ok(UncertaintyScore::new(MethodId::NaiveEntropy, value))
}

pub fn length_baseline(ans: &GeneratedAnswer, unit: LengthUnit) -> UncertaintyScore {
    match unit {
        LengthUnit::Tokens => UncertaintyScore::new(MethodId::LenTokens, ans.token_len() as f64),
        LengthUnit::Chars => UncertaintyScore::new(MethodId::LenChars, ans.char_len() as f64),
    }
}
