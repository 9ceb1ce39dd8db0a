//! Trains a logistic probe on synthetic embeddings and scores held-out
//! items with it.
//!
//! ```text
//! cargo run --example probe_training
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use uqbias::correctness::MetricId;
use uqbias::stats::auroc;
use uqbias::uq::{probe_uncertainty, train_probe, ProbeConfig};

fn main() -> uqbias::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = Vec::new();
    for _ in 0..600 {
        let label = u8::from(rng.random::<f64>() < 0.6);
        let shift = if label == 1 { 1.0 } else { -1.0 };
        let e: Vec<f64> = (0..8)
            .map(|d| {
                let noise: f64 = rng.sample(StandardNormal);
                noise + if d < 2 { shift } else { 0.0 }
            })
            .collect();
        rows.push((e, label));
    }
    let (train, test) = rows.split_at(480);
    let features: Vec<Vec<f64>> = train.iter().map(|r| r.0.clone()).collect();
    let labels: Vec<u8> = train.iter().map(|r| r.1).collect();

    let model = train_probe(&features, &labels, Some(MetricId::RougeLF1), &ProbeConfig::default())?;
    let m = &model.metadata;
    println!(
        "L-BFGS: {} iterations, gradient norm {:.2e}, converged {}",
        m.iterations, m.final_gradient_norm, m.converged
    );
    println!("weights {:?}", model.weights.iter().map(|w| (w * 100.0).round() / 100.0).collect::<Vec<_>>());

    let scored = test
        .iter()
        .map(|(e, l)| Ok((probe_uncertainty(&model, e)?.value, *l)))
        .collect::<uqbias::Result<Vec<_>>>()?;
    println!("held-out AUROC {:.3} on {} items", auroc(&scored)?.value, scored.len());
    Ok(())
}
