use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::correctness::{MetricId, ThresholdCatalog};
use crate::error::{Error, Result};
use crate::judge::JudgeConfig;
use crate::uq::{MethodId, ProbeConfig};

/// Run configuration, read from TOML.
///
/// ```toml
/// seed = 0
/// workers = 4
/// methods = ["neg_seq_prob", "perplexity", "probe:rougeL_recall"]
/// metrics = ["rougeL_f1", "llm_judge"]
///
/// [thresholds]          # replaces catalog entries
/// rougeL_f1 = [0.5]
///
/// [judge]
/// endpoint = "http://localhost:8000/v1/chat/completions"
/// model = "Qwen/Qwen2.5-72B-Instruct"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodId>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricId>,
    #[serde(default)]
    pub thresholds: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub probe: ProbeSettings,
    #[serde(default)]
    pub semantic: SemanticSettings,
    /// Count repeated sample texts once in naive entropy.
    #[serde(default)]
    pub naive_entropy_unique: bool,
    #[serde(default)]
    pub judge: Option<JudgeConfig>,
}

fn default_workers() -> usize {
    4
}

fn default_methods() -> Vec<MethodId> {
    vec![
        MethodId::NegSeqProb,
        MethodId::Perplexity,
        MethodId::MeanTokenEntropy,
        MethodId::NaiveEntropy,
        MethodId::SemanticEntropy,
        MethodId::SemanticEntropyLenNorm,
        MethodId::LenTokens,
        MethodId::LenChars,
    ]
}

fn default_metrics() -> Vec<MetricId> {
    vec![
        MetricId::Rouge1F1,
        MetricId::RougeLF1,
        MetricId::RougeLRecall,
        MetricId::SquadF1,
    ]
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            workers: default_workers(),
            methods: default_methods(),
            metrics: default_metrics(),
            thresholds: BTreeMap::new(),
            probe: ProbeSettings::default(),
            semantic: SemanticSettings::default(),
            naive_entropy_unique: false,
            judge: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    /// Threshold that binarizes a continuous label metric.
    #[serde(default = "default_probe_threshold")]
    pub threshold: f64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub l2: f64,
}

fn default_probe_threshold() -> f64 {
    0.5
}
fn default_train_fraction() -> f64 {
    0.8
}
fn default_tolerance() -> f64 {
    1e-4
}
fn default_max_iterations() -> usize {
    10_000
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            threshold: default_probe_threshold(),
            train_fraction: default_train_fraction(),
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            l2: 0.0,
        }
    }
}

impl ProbeSettings {
    pub fn optimizer(&self) -> ProbeConfig {
        ProbeConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            l2: self.l2,
            ..ProbeConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equivalence {
    /// Normalized exact match.
    Exact,
    /// Bidirectional entailment asked of the judge endpoint.
    Judge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticSettings {
    #[serde(default = "default_true")]
    pub normalize_clusters: bool,
    #[serde(default = "default_equivalence")]
    pub equivalence: Equivalence,
}

fn default_true() -> bool {
    true
}
fn default_equivalence() -> Equivalence {
    Equivalence::Exact
}

impl Default for SemanticSettings {
    fn default() -> Self {
        SemanticSettings {
            normalize_clusters: true,
            equivalence: Equivalence::Exact,
        }
    }
}

impl EvalConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: EvalConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if !(self.probe.train_fraction > 0.0 && self.probe.train_fraction < 1.0) {
            return Err(Error::Config("probe.train_fraction must lie in (0, 1)".into()));
        }
        if self.semantic.equivalence == Equivalence::Judge && self.judge.is_none() {
            return Err(Error::Config(
                "semantic.equivalence = \"judge\" requires a [judge] section".into(),
            ));
        }
        if let Some(judge) = &self.judge {
            judge.validate()?;
        }
        self.catalog()?;
        Ok(())
    }

    pub fn catalog(&self) -> Result<ThresholdCatalog> {
        ThresholdCatalog::default().with_overrides(&self.thresholds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let c = EvalConfig::from_toml(
            r#"
            seed = 7
            methods = ["neg_seq_prob", "probe:rougeL_recall"]
            metrics = ["rougeL_f1", "llm_judge"]
            [thresholds]
            rougeL_f1 = [0.5]
            [probe]
            threshold = 0.5
            [judge]
            endpoint = "http://127.0.0.1:1/v1/chat/completions"
            model = "judge"
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.methods[1], MethodId::Probe(MetricId::RougeLRecall));
        assert_eq!(c.catalog().unwrap().thresholds(MetricId::RougeLF1), &[0.5]);
        assert_eq!(c.judge.unwrap().template, "v1");
    }

    #[test]
    fn defaults_apply() {
        let c = EvalConfig::from_toml("").unwrap();
        assert_eq!(c, EvalConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(EvalConfig::from_toml("methods = [\"bogus\"]").is_err());
        assert!(EvalConfig::from_toml("unknown_key = 1").is_err());
        assert!(EvalConfig::from_toml("[semantic]\nequivalence = \"judge\"").is_err());
        assert!(EvalConfig::from_toml("[thresholds]\nllm_judge = [0.5]").is_err());
    }
}
