//! Rank statistics used throughout the evaluation: AUROC on (possibly
//! estimated) labels, Cohen's kappa, tie-corrected Spearman correlation and
//! confusion rates conditioned on the estimated label.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AurocEstimate {
    pub value: f64,
    /// Items labeled correct (label 1).
    pub n_pos: usize,
    /// Items labeled incorrect (label 0).
    pub n_neg: usize,
    /// Cross-class pairs with equal scores, each credited 1/2.
    pub tie_pairs: u64,
}

/// Probability that a correct item (label 1) receives a strictly lower
/// uncertainty than an incorrect one (label 0), ties counted as 1/2.
///
/// Runs in O(n log n) by sweeping the sorted scores tie-group by tie-group;
/// the numerator is accumulated in integer half-units so the result equals
/// the all-pairs definition exactly.
pub fn auroc(scores: &[(f64, u8)]) -> Result<AurocEstimate> {
    if scores.iter().any(|(g, _)| g.is_nan()) {
        return Err(Error::Data("NaN uncertainty score".into()));
    }
    let n_pos = scores.iter().filter(|(_, l)| *l == 1).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut sorted: Vec<(f64, u8)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut twice_u: u128 = 0;
    let mut tie_pairs: u64 = 0;
    let mut correct_below: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut c1, mut c0) = (0u64, 0u64);
        // -0.0 and 0.0 compare equal and must share a tie group
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 == 1 {
                c1 += 1;
            } else {
                c0 += 1;
            }
            j += 1;
        }
        twice_u += 2 * u128::from(c0) * u128::from(correct_below) + u128::from(c0 * c1);
        tie_pairs += c0 * c1;
        correct_below += c1;
        i = j;
    }

    let value = (twice_u as f64 / 2.0) / (n_pos as f64 * n_neg as f64);
    Ok(AurocEstimate {
        value,
        n_pos,
        n_neg,
        tie_pairs,
    })
}

/// AUROC of the scores and of their negation.
pub fn auroc_complement_check(scores: &[(f64, u8)]) -> Result<(AurocEstimate, AurocEstimate)> {
    let negated: Vec<(f64, u8)> = scores.iter().map(|&(g, l)| (-g, l)).collect();
    Ok((auroc(scores)?, auroc(&negated)?))
}

/// Percentile bootstrap interval for the AUROC. Resamples that happen to be
/// single-class are redrawn.
pub fn bootstrap_auroc(
    scores: &[(f64, u8)],
    n_boot: usize,
    alpha: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    auroc(scores)?;
    if n_boot == 0 || !(0.0..1.0).contains(&alpha) {
        return Err(Error::Contract("bootstrap needs n_boot > 0 and alpha in [0,1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_boot);
    let mut sample = vec![(0.0, 0u8); scores.len()];
    while values.len() < n_boot {
        for slot in sample.iter_mut() {
            *slot = scores[rng.random_range(0..scores.len())];
        }
        if let Ok(est) = auroc(&sample) {
            values.push(est.value);
        }
    }
    values.sort_by(f64::total_cmp);
    let pick = |q: f64| values[((q * (n_boot - 1) as f64).round() as usize).min(n_boot - 1)];
    Ok((pick(alpha / 2.0), pick(1.0 - alpha / 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub kappa: f64,
    pub observed: f64,
    pub expected: f64,
    /// Set when either rater is constant; kappa is then reported as 0 and
    /// carries no information.
    pub degenerate: bool,
}

pub fn cohen_kappa(a: &[u8], b: &[u8]) -> Result<Agreement> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Contract("cohen_kappa needs at least one item".into()));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let pa = a.iter().filter(|&&x| x == 1).count() as f64 / n;
    let pb = b.iter().filter(|&&x| x == 1).count() as f64 / n;
    let observed = agree / n;
    let expected = pa * pb + (1.0 - pa) * (1.0 - pb);
    let constant = |p: f64| p == 0.0 || p == 1.0;
    let degenerate = constant(pa) || constant(pb);
    let kappa = if expected == 1.0 {
        0.0
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(Agreement {
        kappa,
        observed,
        expected,
        degenerate,
    })
}

/// 1-based ranks with ties assigned the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two observations".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Data("NaN in correlation input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-sided permutation p-value for Spearman's rho, `(1 + k) / (1 + n_perm)`.
pub fn spearman_permutation_pvalue(x: &[f64], y: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    let observed = spearman(x, y)?.abs();
    let rx = average_ranks(x);
    let mut ry = average_ranks(y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n_perm {
        ry.shuffle(&mut rng);
        if pearson(&rx, &ry)?.abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + n_perm) as f64)
}

/// Error rates conditioned on the *estimated* label:
/// `tpr = P(h=1 | ĥ=1)`, `tnr = P(h=0 | ĥ=0)`, `fpr = 1 - tpr`, `fnr = 1 - tnr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    pub tpr: f64,
    pub fpr: f64,
    pub tnr: f64,
    pub fnr: f64,
}

impl ConfusionRates {
    pub fn new(tpr: f64, tnr: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tpr) || !(0.0..=1.0).contains(&tnr) {
            return Err(Error::Contract(format!(
                "rates must lie in [0,1], got tpr={tpr}, tnr={tnr}"
            )));
        }
        Ok(ConfusionRates {
            tpr,
            fpr: 1.0 - tpr,
            tnr,
            fnr: 1.0 - tnr,
        })
    }

    /// True when the labels carry ranking information (`tpr·tnr > fpr·fnr`).
    pub fn informative(&self) -> bool {
        self.tpr * self.tnr > self.fpr * self.fnr
    }
}

pub fn confusion_rates(h: &[u8], h_hat: &[u8]) -> Result<ConfusionRates> {
    if h.len() != h_hat.len() {
        return Err(Error::LengthMismatch {
            left: h.len(),
            right: h_hat.len(),
        });
    }
    let (mut est_pos, mut true_pos, mut est_neg, mut true_neg) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &e) in h.iter().zip(h_hat) {
        if e == 1 {
            est_pos += 1;
            true_pos += usize::from(t == 1);
        } else {
            est_neg += 1;
            true_neg += usize::from(t == 0);
        }
    }
    if est_pos == 0 || est_neg == 0 {
        return Err(Error::UndefinedRates);
    }
    ConfusionRates::new(
        true_pos as f64 / est_pos as f64,
        true_neg as f64 / est_neg as f64,
    )
}
