//! Criterion 5: the boosted-tree classifier on datasets with a known answer.

use alphaforge_core::gbdt::train_with_report;
use alphaforge_core::{Dataset, DatasetRow, Ensemble, FeatureVector, Hyperparams, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::support::ensure;

/// 2,000 rows on distinct dates with standard normal features; `label`
/// decides each row's class from its features.
fn dataset(seed: u64, label: impl Fn(&FeatureVector, &mut ChaCha8Rng) -> u8) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    let rows = (0..2000u64)
        .map(|i| {
            let x = FeatureVector(std::array::from_fn(|_| rng.sample(StandardNormal)));
            DatasetRow {
                ticker: "SYN".into(),
                date: start + chrono::Days::new(i),
                features: x,
                label: label(&x, &mut rng),
            }
        })
        .collect();
    Dataset { rows }
}

fn accuracy(model: &Ensemble, data: &Dataset) -> f64 {
    let hits = data
        .rows
        .iter()
        .filter(|r| model.predict(&model.scale(&r.features)) == r.label)
        .count();
    hits as f64 / data.len() as f64
}

/// Fits on the first 70% of dates; returns held-out accuracy and the
/// per-round training loss.
fn fit(data: &Dataset) -> Result<(f64, Vec<f64>), String> {
    let (fit, held_out) = data.chronological_split(0.7).map_err(|e| e.to_string())?;
    let (model, report) =
        train_with_report(&fit, &Hyperparams::default(), 0).map_err(|e| e.to_string())?;
    Ok((accuracy(&model, &held_out), report.loss_per_round))
}

fn non_increasing(loss: &[f64]) -> Result<(), String> {
    // the base score's loss, then one entry per round
    ensure(loss.len() == 201, || {
        format!("{} losses logged", loss.len())
    })?;
    for (k, w) in loss.windows(2).enumerate() {
        ensure(w[1] <= w[0], || {
            format!("loss rose at round {}: {} -> {}", k + 1, w[0], w[1])
        })?;
    }
    Ok(())
}

pub fn gbdt_sanity() -> Result<String, String> {
    let separable = dataset(5, |x, rng| {
        let y = u8::from(x.0[3] > 0.0);
        if rng.random::<f64>() < 0.05 {
            1 - y
        } else {
            y
        }
    });
    let (acc_sep, loss_sep) = fit(&separable)?;
    ensure(acc_sep >= 0.90, || {
        format!("separable held-out accuracy {acc_sep:.4}")
    })?;
    non_increasing(&loss_sep)?;

    let noise = dataset(6, |_, rng| u8::from(rng.random::<bool>()));
    let (acc_noise, loss_noise) = fit(&noise)?;
    ensure((0.45..=0.55).contains(&acc_noise), || {
        format!("noise held-out accuracy {acc_noise:.4}")
    })?;
    non_increasing(&loss_noise)?;

    Ok(format!(
        "held-out accuracy {acc_sep:.4} separable, {acc_noise:.4} noise; loss non-increasing over 200 rounds"
    ))
}
