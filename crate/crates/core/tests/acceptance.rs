//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use uqbias::biaslab::{
    default_grid, predicted_auroc_independent, ranking_trials, simulate_trial, verify_closed_form,
    ConfoundedScenario, SimulationConfig,
};
use uqbias::commands::{cmd_correlate, Dataset, EvalConfig};
use uqbias::correctness::{lcs_length, rouge_1, rouge_l, squad_f1};
use uqbias::records::{tokenize_for_overlap, GeneratedAnswer, GenerationRecord, TokenObservation};
use uqbias::stats::{auroc, cohen_kappa, spearman, ConfusionRates};
use uqbias::stub_judge::StubJudgeServer;
use uqbias::uq::{probe_uncertainty, train_probe, LogisticObjective, MethodId, ProbeConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

// ---------------------------------------------------------------- oracles

/// `P(X1 < X0)` for Gaussian mixtures by Simpson integration of
/// `F1(y) f0(y)`, where `X1` is the score of an item labeled correct.
fn mixture_auroc_oracle(true_auroc: f64, rates: &ConfusionRates) -> f64 {
    let unit = Normal::new(0.0, 1.0).unwrap();
    let gap = std::f64::consts::SQRT_2 * unit.inverse_cdf(true_auroc);
    let cdf1 = |y: f64| rates.tpr * unit.cdf(y) + rates.fpr * unit.cdf(y - gap);
    let pdf0 = |y: f64| rates.fnr * unit.pdf(y) + rates.tnr * unit.pdf(y - gap);
    let (lo, hi, steps) = (-12.0, 12.0 + gap, 20_000);
    let h = (hi - lo) / steps as f64;
    let f = |y: f64| cdf1(y) * pdf0(y);
    let mut sum = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + i as f64 * h);
    }
    sum * h / 3.0
}

fn brute_auroc(scores: &[(f64, u8)]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0u64);
    for &(g1, l1) in scores {
        if l1 != 1 {
            continue;
        }
        for &(g0, l0) in scores {
            if l0 != 0 {
                continue;
            }
            pairs += 1;
            if g1 < g0 {
                num += 1.0;
            } else if g1 == g0 {
                num += 0.5;
            }
        }
    }
    num / pairs as f64
}

fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (brute_ranks(x), brute_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Kappa from the 2x2 contingency table.
fn brute_kappa(a: &[u8], b: &[u8]) -> f64 {
    let n = a.len() as f64;
    let mut t = [[0.0; 2]; 2];
    for (&x, &y) in a.iter().zip(b) {
        t[x as usize][y as usize] += 1.0;
    }
    let po = (t[0][0] + t[1][1]) / n;
    let pe = ((t[0][0] + t[0][1]) * (t[0][0] + t[1][0]) + (t[1][0] + t[1][1]) * (t[0][1] + t[1][1]))
        / (n * n);
    if pe == 1.0 {
        0.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

fn fraction(s: &str) -> f64 {
    let (n, d) = s.split_once('/').expect("fraction num/den");
    n.trim().parse::<f64>().unwrap() / d.trim().parse::<f64>().unwrap()
}

// --------------------------------------------------------------- criteria

fn closed_form_verification() -> Outcome {
    let grid = default_grid();
    for p in &grid {
        let rates = ConfusionRates::new(p.tpr, p.tnr).unwrap();
        let oracle = mixture_auroc_oracle(p.true_auroc, &rates);
        let predicted = predicted_auroc_independent(p.true_auroc, &rates);
        check(
            (oracle - predicted).abs() < 1e-9,
            format!("closed form {predicted} disagrees with integration oracle {oracle} at {p:?}"),
        )?;
    }
    let start = Instant::now();
    let report = verify_closed_form(&grid, 200_000, &[1], 0.5, 0.005).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let worst = report
        .points
        .iter()
        .map(|p| p.abs_error)
        .fold(0.0, f64::max);
    check(report.points.len() == 27, "grid must have 27 points")?;
    check(
        report.all_pass,
        format!("max |MC - predicted| = {worst:.5} exceeds 0.005"),
    )?;
    check(secs < 120.0, format!("runtime {secs:.1}s exceeds 120s"))?;
    Ok(format!(
        "27 points, n=200000, max |MC - predicted| = {worst:.5}, {secs:.1}s"
    ))
}

fn shrinkage_and_order() -> Outcome {
    let mut checked = 0;
    for p in default_grid() {
        let r = ConfusionRates::new(p.tpr, p.tnr).unwrap();
        if p.true_auroc > 0.5 && r.tpr * r.tnr > r.fpr * r.fnr {
            let v = predicted_auroc_independent(p.true_auroc, &r);
            check(
                v > 0.5 && v < p.true_auroc,
                format!("{v} outside (0.5, {}) at {p:?}", p.true_auroc),
            )?;
            checked += 1;
        }
    }
    for tpr in [0.7, 0.8, 0.9] {
        for tnr in [0.7, 0.8, 0.9] {
            let r = ConfusionRates::new(tpr, tnr).unwrap();
            let values: Vec<f64> = (0..100)
                .map(|k| predicted_auroc_independent((k as f64 + 0.5) / 100.0, &r))
                .collect();
            check(
                values.windows(2).all(|w| w[1] > w[0]),
                format!("not strictly increasing at tpr={tpr}, tnr={tnr}"),
            )?;
        }
    }
    Ok(format!(
        "{checked} grid points inside (0.5, A); strictly increasing over 100-point sweeps"
    ))
}

fn direction_law() -> Outcome {
    let jobs: Vec<(f64, u64)> = [-0.8, 0.8]
        .iter()
        .flat_map(|&rho| (0..100).map(move |s| (rho, s)))
        .collect();
    let rows: Vec<(f64, f64, f64)> = jobs
        .par_iter()
        .map(|&(rho, seed)| {
            let row = simulate_trial(&SimulationConfig {
                n_items: 100_000,
                rho,
                seed,
                ..Default::default()
            })
            .unwrap();
            (rho, row.true_auroc, row.estimated_auroc)
        })
        .collect();
    let over = rows
        .iter()
        .filter(|(rho, t, e)| *rho < 0.0 && e > t)
        .count();
    let under = rows
        .iter()
        .filter(|(rho, t, e)| *rho > 0.0 && e < t)
        .count();
    let msg = format!("rho=-0.8: estimated > true in {over}/100; rho=+0.8: estimated < true in {under}/100");
    check(over >= 99 && under >= 99, msg.clone())?;
    Ok(msg)
}

fn ranking_inversion() -> Outcome {
    let scenario = ConfoundedScenario::pinned();
    let confounded = ranking_trials(&scenario, 0, 100).map_err(|e| e.to_string())?;
    let clean = ranking_trials(&scenario.with_strength(0.0), 0, 100).map_err(|e| e.to_string())?;
    let msg = format!(
        "pinned: B over A (estimated) in {}/100 with A over B (true) in {}/100; \
         strength 0: ranking preserved in {}/100",
        confounded.estimated_b_over_a, confounded.true_a_over_b, clean.ranking_preserved
    );
    check(
        (scenario.confounder.auroc_gap - 0.05).abs() < 1e-12,
        "pinned true AUROC gap must be 0.05",
    )?;
    check(confounded.estimated_b_over_a >= 99, msg.clone())?;
    check(clean.ranking_preserved >= 95, msg.clone())?;
    Ok(msg)
}

fn auroc_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tie_free = 0;
    for instance in 0..1000 {
        let n = rng.random_range(2..=500);
        let tied = instance % 2 == 0;
        let mut scores: Vec<(f64, u8)> = (0..n)
            .map(|_| {
                let g = if tied {
                    f64::from(rng.random_range(0..8u8))
                } else {
                    rng.random::<f64>()
                };
                (g, u8::from(rng.random::<bool>()))
            })
            .collect();
        scores[0].1 = 1;
        scores[1].1 = 0;
        let fast = auroc(&scores).map_err(|e| e.to_string())?.value;
        let slow = brute_auroc(&scores);
        check(
            (fast - slow).abs() <= 1e-12,
            format!("instance {instance}: {fast} vs brute force {slow}"),
        )?;
        if !tied {
            let neg: Vec<(f64, u8)> = scores.iter().map(|&(g, l)| (-g, l)).collect();
            let comp = auroc(&neg).unwrap().value;
            check(
                (fast + comp - 1.0).abs() <= 1e-12,
                format!("instance {instance}: complement sums to {}", fast + comp),
            )?;
            tie_free += 1;
        }
    }
    Ok(format!(
        "1000 instances equal brute force; complement identity on {tie_free} tie-free instances"
    ))
}

fn lexical_fixtures() -> Outcome {
    let text = std::fs::read_to_string(manifest_dir().join("tests/fixtures/lexical_cases.toml"))
        .map_err(|e| e.to_string())?;
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
    let cases = doc["case"].as_array().ok_or("fixture has no [[case]] array")?;
    check(cases.len() == 20, format!("expected 20 cases, found {}", cases.len()))?;
    for (i, case) in cases.iter().enumerate() {
        let hyp = case["hyp"].as_str().unwrap();
        let refs: Vec<&str> = case["refs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r.as_str().unwrap())
            .collect();
        let expect = |table: &str, key: &str| fraction(case[table][key].as_str().unwrap());
        let rl = rouge_l(hyp, refs[0]);
        let r1 = rouge_1(hyp, refs[0]);
        let lcs = lcs_length(&tokenize_for_overlap(hyp), &tokenize_for_overlap(refs[0]));
        let got = [
            ("rouge_l.overlap", lcs as f64, case["rouge_l"]["overlap"].as_integer().unwrap() as f64),
            ("rouge_l.precision", rl.precision, expect("rouge_l", "precision")),
            ("rouge_l.recall", rl.recall, expect("rouge_l", "recall")),
            ("rouge_l.f1", rl.f1, expect("rouge_l", "f1")),
            ("rouge_1.precision", r1.precision, expect("rouge_1", "precision")),
            ("rouge_1.recall", r1.recall, expect("rouge_1", "recall")),
            ("rouge_1.f1", r1.f1, expect("rouge_1", "f1")),
            (
                "squad_f1",
                squad_f1(hyp, &refs).unwrap(),
                fraction(case["squad_f1"].as_str().unwrap()),
            ),
        ];
        for (name, actual, expected) in got {
            check(
                actual == expected,
                format!("case {}: {name} = {actual}, expected {expected}", i + 1),
            )?;
        }
    }
    Ok("20 cases, exact equality on ROUGE-L, ROUGE-1 and SQuAD F1".into())
}

fn statistics_fixtures() -> Outcome {
    let tie = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    check(
        (tie - 0.75f64.sqrt()).abs() < 1e-9 && (tie - brute_spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0])).abs() < 1e-12,
        format!("tie case gave {tie}"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let n = rng.random_range(3..40);
        let x: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..6u8))).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let oracle = brute_spearman(&x, &y);
        match spearman(&x, &y) {
            Ok(v) => check((v - oracle).abs() < 1e-12, format!("spearman {v} vs {oracle}"))?,
            Err(_) => check(oracle.is_nan(), "spearman undefined on non-degenerate input")?,
        }
    }

    let id = cohen_kappa(&[1, 0, 1, 1, 0], &[1, 0, 1, 1, 0]).unwrap();
    check(id.kappa == 1.0 && !id.degenerate, "identity kappa must be 1")?;
    let indep = cohen_kappa(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
    check(indep.kappa == 0.0, format!("independence kappa {}", indep.kappa))?;
    let constant = cohen_kappa(&[1, 1, 1, 1], &[1, 0, 1, 0]).unwrap();
    check(
        constant.kappa == 0.0 && constant.degenerate,
        "constant vector must give 0 with the degenerate flag",
    )?;
    for _ in 0..200 {
        let n = rng.random_range(1..30);
        let a: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let b: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let k = cohen_kappa(&a, &b).unwrap().kappa;
        check((k - brute_kappa(&a, &b)).abs() < 1e-12, "kappa differs from 2x2 table")?;
    }
    Ok(format!(
        "spearman tie case {tie:.10}; kappa identity 1, independence 0, constant 0 (flagged); 400 brute-force comparisons"
    ))
}

fn probe_training() -> Outcome {
    // separable: x < 0 is correct
    let xs: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64 + 0.05).collect();
    let features: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let labels: Vec<u8> = xs.iter().map(|&x| u8::from(x < 0.0)).collect();
    let config = ProbeConfig::default();
    let model = train_probe(&features, &labels, None, &config).map_err(|e| e.to_string())?;
    let scored: Vec<(f64, u8)> = features
        .iter()
        .zip(&labels)
        .map(|(f, &l)| (probe_uncertainty(&model, f).unwrap().value, l))
        .collect();
    let train_auroc = auroc(&scored).unwrap().value;
    check(train_auroc == 1.0, format!("training AUROC {train_auroc}"))?;

    let meta = &model.metadata;
    check(
        meta.tolerance == 1e-4 && meta.max_iterations == 10_000,
        "stopping parameters not recorded",
    )?;
    check(
        (meta.converged && meta.final_gradient_norm < 1e-4)
            || (!meta.converged && meta.iterations == 10_000),
        format!("stopping contract violated: {meta:?}"),
    )?;
    let capped = train_probe(
        &features,
        &labels,
        None,
        &ProbeConfig {
            max_iterations: 3,
            ..ProbeConfig::default()
        },
    )
    .unwrap();
    check(
        capped.metadata.iterations == 3 && !capped.metadata.converged,
        format!("iteration cap not honoured: {:?}", capped.metadata),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<Vec<f64>> = (0..30)
        .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let ys: Vec<u8> = (0..30).map(|i| (i % 3 == 0) as u8).collect();
    let objective = LogisticObjective::new(&data, &ys, 0.0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let params: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let grad = objective.gradient(&params);
        let h = 1e-6;
        for k in 0..params.len() {
            let mut up = params.clone();
            let mut down = params.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (objective.value(&up) - objective.value(&down)) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    check(worst < 1e-5, format!("gradient relative error {worst:e}"))?;
    Ok(format!(
        "training AUROC 1.0 after {} iterations (|grad| = {:.1e}); max finite-difference relative error {worst:.1e}",
        meta.iterations, meta.final_gradient_norm
    ))
}

/// Records of length 1..=1000 whose tokens all share one probability per
/// record. That probability carries an equidistributed jitter below 1e-5
/// in log space, small enough that sequence probability stays strictly
/// decreasing in length.
fn constant_probability_corpus() -> Vec<GenerationRecord> {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    (1..=1000usize)
        .map(|len| {
            let logprob = -0.01 + 4e-6 * (len as f64 * phi).fract();
            let tokens = vec![
                TokenObservation {
                    text: String::new(),
                    logprob,
                    entropy: None,
                };
                len
            ];
            GenerationRecord {
                id: format!("c{len}"),
                question: "q".into(),
                references: vec!["r".into()],
                greedy: GeneratedAnswer {
                    text: "w ".repeat(len).trim_end().to_string(),
                    tokens,
                },
                samples: Vec::new(),
                embedding: None,
                external_scores: Default::default(),
            }
        })
        .collect()
}

fn length_bias() -> Outcome {
    let dataset = Dataset {
        name: "constant-probability".into(),
        sha256: String::new(),
        records: constant_probability_corpus(),
    };
    let config = EvalConfig {
        methods: vec![MethodId::NegSeqProb, MethodId::Perplexity, MethodId::LenTokens],
        ..EvalConfig::default()
    };
    let table = cmd_correlate(&dataset, &config, None, 0).map_err(|e| e.to_string())?;
    let rho = |m: MethodId| {
        table
            .rows
            .iter()
            .find(|r| r.method == m)
            .and_then(|r| r.tokens.rho())
            .ok_or(format!("{m} correlation undefined"))
    };
    let (nsp, ppl, len) = (
        rho(MethodId::NegSeqProb)?,
        rho(MethodId::Perplexity)?,
        rho(MethodId::LenTokens)?,
    );
    let msg = format!("neg_seq_prob {nsp}, perplexity {ppl:.5}, len_tokens {len}");
    check(nsp == 1.0 && ppl.abs() < 0.05 && len == 1.0, msg.clone())?;
    Ok(msg)
}

fn run_evaluate(bin: &str, dir: &Path, endpoint: &str, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(bin)
        .args(["evaluate", "--records"])
        .arg(dir.join("records.jsonl"))
        .arg("--annotations")
        .arg(dir.join("annotations.jsonl"))
        .arg("--config")
        .arg(dir.join("config.toml"))
        .args(["--judge-endpoint", endpoint, "--judge-model", "stub-judge", "--seed", "0"])
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    check(status.success(), format!("evaluate exited with {status}"))?;
    std::fs::read(out).map_err(|e| e.to_string())
}

fn end_to_end_determinism() -> Outcome {
    let server = StubJudgeServer::start().map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = manifest_dir().join("data/toy");
    let bin = env!("CARGO_BIN_EXE_uqbias");
    let first = run_evaluate(bin, &dir, &server.endpoint(), &tmp.path().join("a.json"))?;
    let second = run_evaluate(bin, &dir, &server.endpoint(), &tmp.path().join("b.json"))?;
    check(first == second, "reports differ between runs")?;

    let report: Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    let cells = report["datasets"][0]["auroc"].as_array().ok_or("no auroc cells")?;
    let value = |method: &str, metric: &str| -> Result<f64, String> {
        let cell = cells
            .iter()
            .find(|c| c["method"] == method && c["metric"] == metric)
            .ok_or(format!("missing cell {method} x {metric}"))?;
        cell["auroc"]
            .as_f64()
            .ok_or(format!("cell {method} x {metric} undefined: {cell}"))
    };
    let (nr, pr) = (value("neg_seq_prob", "rougeL_f1@0.5")?, value("perplexity", "rougeL_f1@0.5")?);
    let (nj, pj) = (value("neg_seq_prob", "llm_judge")?, value("perplexity", "llm_judge")?);
    check(
        (nr > pr) != (nj > pj),
        format!("no ranking change: rouge ({nr}, {pr}), judge ({nj}, {pj})"),
    )?;
    Ok(format!(
        "{} identical bytes; neg_seq_prob vs perplexity: rougeL_f1@0.5 {nr:.3} vs {pr:.3}, llm_judge {nj:.3} vs {pj:.3}",
        first.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed-form verification", closed_form_verification),
        ("shrinkage and order preservation", shrinkage_and_order),
        ("direction law", direction_law),
        ("ranking inversion", ranking_inversion),
        ("AUROC oracle equivalence", auroc_oracle_equivalence),
        ("lexical metric fixtures", lexical_fixtures),
        ("statistics fixtures", statistics_fixtures),
        ("probe training", probe_training),
        ("length-bias diagnostics", length_bias),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    // keep panic output from interleaving with the report lines
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
