//! Flat vs. top-down LCPN+VC on a generated 13-node taxonomy.
//!
//! ```text
//! cargo run --release --example synthetic_experiment [seed] [learning_rate] [epochs]
//! ```

use std::time::Instant;

use htc::corpus::{hierarchical_split, holdout_split};
use htc::learner::TrainConfig;
use htc::metrics::{FlatAveraging, MetricsReport, PredictionPair};
use htc::strategy::{predict_flat, predict_top_down, train_flat, train_lcpn_vc, Features};
use htc::synthetic::{balanced_taxonomy, signal_corpus, SignalCorpusConfig};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let learning_rate: f64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(0.5);
    let epochs: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let tax = balanced_taxonomy(3);
    let docs = signal_corpus(
        &tax,
        &SignalCorpusConfig {
            seed,
            ..Default::default()
        },
    );
    let split = holdout_split(&docs, 0.1, seed)?;
    println!("{} train / {} test documents", split.train.len(), split.test.len());

    for dimension in [5, 10, 20, 30] {
        let config = TrainConfig {
            dimension,
            bigram_buckets: 100_000,
            learning_rate,
            epochs,
            seed,
            ..Default::default()
        };

        let start = Instant::now();
        let (flat, _) = train_flat(&split.train, &Features::Learned, &config)?;
        let pairs: Vec<_> = split
            .test
            .iter()
            .map(|d| PredictionPair::new(&d.doc_id, &d.label, predict_flat(&flat, &d.tokens)))
            .collect();
        let flat_report = MetricsReport::compute(&pairs, &tax, FlatAveraging::Macro)?;
        let flat_secs = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let locals = hierarchical_split(&split.train, &tax)?;
        let (hier, _) = train_lcpn_vc(&locals, &tax, &Features::Learned, &config)?;
        let pairs: Vec<_> = split
            .test
            .iter()
            .map(|d| PredictionPair::new(&d.doc_id, &d.label, predict_top_down(&hier, &d.tokens).0))
            .collect();
        let hier_report = MetricsReport::compute(&pairs, &tax, FlatAveraging::Macro)?;
        let hier_secs = start.elapsed().as_secs_f64();

        println!(
            "dim {dimension:>2}  flat: F1 {:.4} hF1 {:.4} lcaF1 {:.4} ({flat_secs:.1}s)   \
             lcpn-vc: F1 {:.4} hF1 {:.4} lcaF1 {:.4} ({hier_secs:.1}s)",
            flat_report.flat_macro.f1,
            flat_report.hier.f1,
            flat_report.lca.f1,
            hier_report.flat_macro.f1,
            hier_report.hier.f1,
            hier_report.lca.f1,
        );
    }
    Ok(())
}
