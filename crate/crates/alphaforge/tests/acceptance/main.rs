//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! Criteria 6 and 8 also audit every backtest run by the other criteria, so
//! they are evaluated last; the summary is printed in criterion order.

// `!(x <= cap)` on purpose so that NaN counts as a breach
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod arithmetic;
mod behaviour;
mod learning;
mod lookahead;
mod support;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Check = fn() -> Result<String, String>;

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Option<Duration>,
    check: Check,
}

const fn criterion(id: u8, name: &'static str, secs: Option<u64>, check: Check) -> Criterion {
    let budget = match secs {
        Some(s) => Some(Duration::from_secs(s)),
        None => None,
    };
    Criterion {
        id,
        name,
        budget,
        check,
    }
}

const CRITERIA: [Criterion; 10] = [
    criterion(
        1,
        "metric arithmetic",
        Some(1),
        arithmetic::metric_arithmetic,
    ),
    criterion(
        2,
        "indicator oracles",
        Some(30),
        indicators::indicator_oracles,
    ),
    criterion(3, "no look-ahead", Some(120), lookahead::no_look_ahead),
    criterion(4, "determinism", None, determinism::cli_determinism),
    criterion(5, "gbdt sanity", Some(60), learning::gbdt_sanity),
    criterion(7, "sentiment gate", None, behaviour::sentiment_gate),
    criterion(
        9,
        "hybrid vs baseline",
        Some(120),
        behaviour::hybrid_vs_baseline,
    ),
    criterion(10, "metrics oracles", None, arithmetic::metrics_oracles),
    criterion(6, "position sizing", None, behaviour::position_sizing),
    criterion(
        8,
        "accounting invariants",
        None,
        behaviour::accounting_invariants,
    ),
];

fn main() -> ExitCode {
    let only: Option<u8> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    panic::set_hook(Box::new(|info| eprintln!("  panic: {info}")));
    let mut lines = Vec::new();
    let mut failed = 0;
    for c in &CRITERIA {
        if only.is_some_and(|id| id != c.id) && c.id != 6 && c.id != 8 {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.1?}, budget {b:?}")),
            (o, _) => o,
        };
        let (verdict, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let line = format!(
            "criterion {:>2} {verdict}: {} ({elapsed:.2?}) {detail}",
            c.id, c.name
        );
        eprintln!("{line}");
        lines.push((c.id, line));
    }
    lines.sort_by_key(|(id, _)| *id);
    println!("acceptance summary");
    for (_, line) in &lines {
        println!("{line}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
