//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::checks;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: Box<dyn Fn() -> String>,
}

fn criterion(name: &'static str, limit_secs: Option<u64>, run: impl Fn() -> String + 'static) -> Criterion {
    Criterion {
        name,
        limit: limit_secs.map(Duration::from_secs),
        run: Box::new(run),
    }
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() -> ExitCode {
    let criteria = vec![
        criterion("1 metric oracle equivalence (20 trees x 1000 pairs)", Some(10), || {
            checks::metric_oracle(20, 1000);
            "hier and LCA scores within 1e-9 of brute force".into()
        }),
        criterion("2 hand-computed metric fixtures", None, || {
            checks::hand_fixtures();
            "E131/E132 hF1 2/3 lcaF1 1/2; cross-branch 0; exact 1".into()
        }),
        criterion("3 published results table aggregates", Some(1), || {
            let s = checks::published_results_summary();
            format!(
                "mean F1 {:.4}, mean lcaF1 {:.4}, r(F1,lcaF1) {:.4}, r(hF1,lcaF1) {:.4}",
                s.mean_of("F1").unwrap(),
                s.mean_of("lcaF1").unwrap(),
                s.correlation("F1", "lcaF1").unwrap(),
                s.correlation("hF1", "lcaF1").unwrap()
            )
        }),
        criterion("4 gradient checks", Some(5), || {
            checks::gradients();
            "both learners within 1e-4 relative error".into()
        }),
        criterion("5 synthetic end-to-end", Some(120), || {
            let data = checks::synthetic_data();
            let (flat, hier) = checks::synthetic_end_to_end(&data);
            format!("flat lcaF1 {flat:.4}, LCPN+VC lcaF1 {hier:.4}")
        }),
        criterion("6 dimension sweep", None, || {
            let data = checks::synthetic_data();
            let s = checks::dimension_sweep(&data);
            format!("lcaF1 at 5/10/20/30: {:.4} {:.4} {:.4} {:.4}", s[0], s[1], s[2], s[3])
        }),
        criterion("7 pipeline invariants", Some(10), || {
            let (tax, docs) = checks::excerpt_corpus(600);
            checks::split_conservation(&tax, &docs);
            checks::vc_placement(&tax, &docs);
            checks::one_model_per_internal_node(&tax, &docs);
            checks::holdout_determinism(&docs);
            checks::persistence_byte_identity(&tax, &docs);
            "split conservation, VC placement, local models, holdout, persistence".into()
        }),
    ];

    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| (c.run)()));
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(detail) => match c.limit {
                Some(limit) if elapsed > limit => (false, format!("{detail}; exceeded {}s limit", limit.as_secs())),
                _ => (true, detail),
            },
            Err(e) => (false, panic_message(e)),
        };
        failed += usize::from(!ok);
        println!(
            "{} criterion {} ({:.2}s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
