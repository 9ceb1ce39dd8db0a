//! Logistic-regression probe over final-token embeddings, trained with a
//! limited-memory BFGS optimizer.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correctness::MetricId;
use crate::error::{Error, Result};

use super::{MethodId, UncertaintyScore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Stop once the gradient infinity-norm drops below this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of curvature pairs kept by L-BFGS.
    pub memory: usize,
    /// L2 penalty on the weights (not the bias). Zero disables it.
    pub l2: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            tolerance: 1e-4,
            max_iterations: 10_000,
            memory: 10,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetadata {
    pub label_source: Option<MetricId>,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub metadata: ProbeMetadata,
}

impl ProbeModel {
    pub fn logit(&self, embedding: &[f64]) -> Result<f64> {
        if embedding.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: embedding.len(),
            });
        }
        Ok(dot(&self.weights, embedding) + self.bias)
    }

    pub fn method_id(&self) -> MethodId {
        MethodId::Probe(self.metadata.label_source.unwrap_or(MetricId::LlmJudge))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean negative log-likelihood of a logistic model. Parameters are laid
/// out as `[w_0, .., w_{d-1}, b]`.
pub struct LogisticObjective<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [u8],
    l2: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(features: &'a [Vec<f64>], labels: &'a [u8], l2: f64) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: labels.len(),
            });
        }
        if features.is_empty() {
            return Err(Error::DegenerateTraining("no training rows".into()));
        }
        let dim = features[0].len();
        for row in features {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data("non-finite feature value".into()));
            }
        }
        Ok(LogisticObjective {
            features,
            labels,
            l2,
        })
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let (w, b) = params.split_at(self.dim());
        let b = b[0];
        let n = self.features.len() as f64;
        let nll: f64 = self
            .features
            .iter()
            .zip(self.labels)
            .map(|(x, &y)| {
                let z = dot(w, x) + b;
                softplus(z) - f64::from(y) * z
            })
            .sum();
        nll / n + 0.5 * self.l2 * dot(w, w)
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let (w, b) = params.split_at(d);
        let b = b[0];
        let n = self.features.len() as f64;
        let mut grad = vec![0.0; d + 1];
        for (x, &y) in self.features.iter().zip(self.labels) {
            let r = sigmoid(dot(w, x) + b) - f64::from(y);
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += r * xi;
            }
            grad[d] += r;
        }
        for g in grad.iter_mut() {
            *g /= n;
        }
        for (g, wi) in grad.iter_mut().zip(w) {
            *g += self.l2 * wi;
        }
        grad
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct LbfgsOutcome {
    params: Vec<f64>,
    iterations: usize,
    grad_norm: f64,
    converged: bool,
}

fn lbfgs(objective: &LogisticObjective, config: &ProbeConfig) -> LbfgsOutcome {
    let n = objective.dim() + 1;
    let mut x = vec![0.0; n];
    let mut fx = objective.value(&x);
    let mut g = objective.gradient(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut iterations = 0;

    while inf_norm(&g) >= config.tolerance && iterations < config.max_iterations {
        // two-loop recursion for d = -H g
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let beta = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - beta) * si;
            }
        }
        let mut direction: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &direction);
        if slope >= 0.0 {
            // lost descent: restart from steepest descent
            history.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = dot(&g, &direction);
        }

        // backtracking line search with the Armijo condition
        let mut step = if history.is_empty() {
            (1.0 / inf_norm(&g)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(a, d)| a + step * d).collect();
            let f_trial = objective.value(&trial);
            if f_trial <= fx + 1e-4 * step * slope {
                accepted = Some((trial, f_trial));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = objective.gradient(&x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }

    let grad_norm = inf_norm(&g);
    LbfgsOutcome {
        params: x,
        iterations,
        grad_norm,
        converged: grad_norm < config.tolerance,
    }
}

/// Fits a logistic probe predicting `label = 1` (correct) from features.
pub fn train_probe(
    features: &[Vec<f64>],
    labels: &[u8],
    label_source: Option<MetricId>,
    config: &ProbeConfig,
) -> Result<ProbeModel> {
    if features.len() < 2 {
        return Err(Error::DegenerateTraining("need at least two rows".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateTraining("labels contain a single class".into()));
    }
    let objective = LogisticObjective::new(features, labels, config.l2)?;
    let outcome = lbfgs(&objective, config);
    let d = objective.dim();
    Ok(ProbeModel {
        weights: outcome.params[..d].to_vec(),
        bias: outcome.params[d],
        metadata: ProbeMetadata {
            label_source,
            iterations: outcome.iterations,
            final_gradient_norm: outcome.grad_norm,
            converged: outcome.converged,
            tolerance: config.tolerance,
            max_iterations: config.max_iterations,
        },
    })
}

/// Predicted probability that the answer is incorrect, `1 - σ(w·e + b)`.
pub fn probe_uncertainty(model: &ProbeModel, embedding: &[f64]) -> Result<UncertaintyScore> {
    let z = model.logit(embedding)?;
    Ok(UncertaintyScore {
        method: model.method_id(),
        value: sigmoid(-z),
    })
}

/// Deterministic hash split: true when `record_id` belongs to the training
/// portion for the given seed.
pub fn probe_in_train_split(record_id: &str, seed: u64, train_fraction: f64) -> bool {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(record_id.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    let unit = (u64::from_le_bytes(head) >> 11) as f64 / (1u64 << 53) as f64;
    unit < train_fraction
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::auroc;

    fn model(w: f64, b: f64) -> ProbeModel {
        ProbeModel {
            weights: vec![w],
            bias: b,
            metadata: ProbeMetadata {
                label_source: Some(MetricId::LlmJudge),
                iterations: 0,
                final_gradient_norm: 0.0,
                converged: true,
                tolerance: 1e-4,
                max_iterations: 10_000,
            },
        }
    }

    #[test]
    fn probe_uncertainty_examples() {
        assert_eq!(probe_uncertainty(&model(1.0, 0.0), &[0.0]).unwrap().value, 0.5);
        assert!(probe_uncertainty(&model(1.0, 0.0), &[800.0]).unwrap().value < 1e-300);
        let v = probe_uncertainty(&model(1.0, 0.0), &[3f64.ln()]).unwrap().value;
        assert!((v - 0.25).abs() < 1e-15);
        assert!(matches!(
            probe_uncertainty(&model(1.0, 0.0), &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn separable_one_dimensional_data() {
        let features: Vec<Vec<f64>> = (0..20).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let m = train_probe(&features, &labels, None, &ProbeConfig::default()).unwrap();
        assert!(m.metadata.converged);
        assert!(m.metadata.final_gradient_norm < 1e-4);
        let scores: Vec<(f64, u8)> = features
            .iter()
            .zip(&labels)
            .map(|(x, &l)| (probe_uncertainty(&m, x).unwrap().value, l))
            .collect();
        assert_eq!(auroc(&scores).unwrap().value, 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let f = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_probe(&f, &[1, 1], None, &ProbeConfig::default()),
            Err(Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let f = vec![vec![1.0], vec![f64::NAN]];
        assert!(matches!(
            train_probe(&f, &[1, 0], None, &ProbeConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn iteration_cap_is_respected() {
        let features: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        let labels: Vec<u8> = (0..50).map(|i| u8::from(i % 3 == 0)).collect();
        let cfg = ProbeConfig {
            max_iterations: 2,
            tolerance: 0.0,
            ..Default::default()
        };
        let m = train_probe(&features, &labels, None, &cfg).unwrap();
        assert!(m.metadata.iterations <= 2);
        assert!(!m.metadata.converged);
    }

    #[test]
    fn split_is_deterministic_and_roughly_proportional() {
        let train = (0..2000)
            .filter(|i| probe_in_train_split(&format!("id-{i}"), 7, 0.8))
            .count();
        assert!((1500..1700).contains(&train), "{train}");
        assert_eq!(probe_in_train_split("abc", 1, 0.8), probe_in_train_split("abc", 1, 0.8));
    }
}
