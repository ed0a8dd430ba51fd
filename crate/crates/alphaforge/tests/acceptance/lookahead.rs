//! Criterion 3: truncating the data after a date never changes any trade
//! up to that date.

use alphaforge::fixture::{FixtureSpec, NewsInjection, Segment};
use alphaforge::io::trade_fields;
use alphaforge_core::{BacktestResult, BaselineStrategy, HybridStrategy, NaiveDate, Strategy};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::support::{config, ensure, range, Market};

/// Five tickers over two years of weekdays with scripted news throughout.
fn two_year_spec() -> FixtureSpec {
    let start = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
    let mut spec = FixtureSpec::new(
        5,
        start,
        vec![
            Segment::new(260, 0.0007, 0.015),
            Segment::new(100, -0.0008, 0.02),
            Segment::new(162, 0.0009, 0.013),
        ],
        33,
    );
    let calendar = spec.calendar();
    for (k, ticker) in spec.tickers.clone().into_iter().enumerate() {
        for (j, day) in calendar.iter().enumerate().skip(250 + k).step_by(9) {
            let score = [-0.9, 0.5, -0.2, 0.8, -0.75][(j + k) % 5];
            spec.news
                .push(NewsInjection::with_score(&ticker, *day, score));
        }
    }
    spec
}

fn log_upto(result: &BacktestResult, t: NaiveDate) -> Vec<String> {
    result
        .trades
        .iter()
        .filter(|r| r.date <= t)
        .map(|r| trade_fields(r).join(","))
        .collect()
}

pub fn no_look_ahead() -> Result<String, String> {
    let full = Market::from_spec(&two_year_spec());
    let calendar = full.calendar().to_vec();
    let train_range = range(calendar[0], calendar[300]);
    let test_start = calendar[300];
    let end = *calendar.last().unwrap() + chrono::Days::new(1);
    let cfg = config(range(test_start, end));

    let model = full.train(&train_range);
    let hybrid = HybridStrategy {
        model,
        thresholds: Default::default(),
    };
    let baseline = BaselineStrategy::default();
    let full_hybrid = full.run(&hybrid, &cfg);
    let full_baseline = full.run(&baseline, &cfg);
    ensure(
        !full_hybrid.trades.is_empty() && !full_baseline.trades.is_empty(),
        || "full runs made no trades".into(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let candidates = &calendar[301..calendar.len() - 1];
    let mut cuts: Vec<NaiveDate> = sample(&mut rng, candidates.len(), 20)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    cuts.sort();
    let mut compared = 0;
    for t in &cuts {
        let universe = full
            .universe
            .truncate_after(*t)
            .map_err(|e| e.to_string())?;
        let cut = Market::new(universe, full.articles.clone());
        // retrain on the truncated data so the whole pipeline is covered
        let model = cut.train(&train_range);
        let cut_hybrid = HybridStrategy {
            model,
            thresholds: Default::default(),
        };
        for (name, strategy, reference) in [
            ("hybrid", &cut_hybrid as &dyn Strategy, &full_hybrid),
            ("baseline", &baseline as &dyn Strategy, &full_baseline),
        ] {
            let got = log_upto(&cut.run(strategy, &cfg), *t);
            let want = log_upto(reference, *t);
            ensure(got == want, || {
                format!("{name}: trade logs differ when cut after {t}")
            })?;
            compared += want.len();
        }
    }
    Ok(format!(
        "20 cuts from {} to {}, {compared} trade rows identical",
        cuts[0],
        cuts[cuts.len() - 1]
    ))
}
