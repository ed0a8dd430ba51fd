//! Criteria 1 and 10: metric arithmetic against known portfolio outcomes and
//! against brute-force definitions.

use alphaforge_core::metrics::{cagr, max_drawdown, sharpe, total_return};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::support::{ensure, near};

pub fn metric_arithmetic() -> Result<String, String> {
    let initial = 100_000.0;
    // (final value, expected CAGR %)
    for (fv, want) in [(235_492.83, 53.46), (108_643.27, 4.23)] {
        let got = cagr(initial, fv, 2.0);
        ensure((got - want).abs() <= 0.05, || {
            format!("cagr({fv}) = {got}, want {want}")
        })?;
    }
    // (final value, expected total return %)
    let table = [
        (235_492.83, 135.49),
        (108_643.27, 8.64),
        (153_187.39, 53.18),
        (192_071.58, 92.07),
        (128_349.17, 28.35),
    ];
    for (fv, want) in table {
        let got = total_return(initial, fv);
        ensure((got - want).abs() <= 0.02, || {
            format!("total_return({fv}) = {got}, want {want}")
        })?;
    }
    Ok("2 CAGR and 5 total-return figures reproduced".into())
}

fn all_pairs_drawdown(v: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..v.len() {
        for j in i..v.len() {
            worst = worst.min((v[j] / v[i] - 1.0) * 100.0);
        }
    }
    worst
}

fn direct_sharpe(v: &[f64]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    let r: Vec<f64> = (1..v.len()).map(|i| (v[i] - v[i - 1]) / v[i - 1]).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let ss: f64 = r.iter().map(|x| (x - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if sd <= 1e-12 {
        0.0
    } else {
        mean / sd * 252f64.sqrt()
    }
}

pub fn metrics_oracles() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..400);
        let vol = rng.random_range(0.001..0.05);
        let drift = rng.random_range(-0.002..0.002);
        let mut v = Vec::with_capacity(n);
        let mut x: f64 = rng.random_range(1_000.0..1_000_000.0);
        for _ in 0..n {
            v.push(x);
            x *= (drift + vol * rng.sample::<f64, _>(StandardNormal)).exp();
        }
        if case % 100 == 0 {
            // flat stretches exercise the zero-variance rule
            v.iter_mut().for_each(|y| *y = 50_000.0);
        }

        let (dd, dd_oracle) = (max_drawdown(&v), all_pairs_drawdown(&v));
        ensure(near(dd, dd_oracle, 1e-12, 1.0), || {
            format!("case {case}: drawdown {dd} vs {dd_oracle}")
        })?;
        let (sr, sr_oracle) = (sharpe(&v), direct_sharpe(&v));
        ensure(near(sr, sr_oracle, 1e-12, 1.0), || {
            format!("case {case}: sharpe {sr} vs {sr_oracle}")
        })?;

        let k: f64 = rng.random_range(0.001..1000.0);
        let scaled: Vec<f64> = v.iter().map(|y| y * k).collect();
        ensure(near(max_drawdown(&scaled), dd, 1e-12, 1.0), || {
            format!("case {case}: drawdown not scale invariant under {k}")
        })?;
        ensure(near(sharpe(&scaled), sr, 1e-12, 1.0), || {
            format!("case {case}: sharpe not scale invariant under {k}")
        })?;
        checked += 1;
    }
    Ok(format!(
        "{checked} curves match the all-pairs drawdown and direct Sharpe to 1e-12"
    ))
}
