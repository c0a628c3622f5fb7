//! Flat versus local-classifier-per-parent prediction with virtual
//! categories, including the descent path and a save/load round trip.
//!
//! ```text
//! cargo run --release --example strategies
//! ```

use htc::corpus::{hierarchical_split, holdout_split};
use htc::learner::TrainConfig;
use htc::strategy::{predict_flat, predict_top_down, train_flat, train_lcpn_vc, Features, TrainedModel};
use htc::synthetic::{signal_corpus, SignalCorpusConfig};
use htc::Taxonomy;

const HIERARCHY: &str = include_str!("../tests/fixtures/excerpt_hierarchy.txt");

fn main() -> anyhow::Result<()> {
    let tax = Taxonomy::read(HIERARCHY.as_bytes())?;
    let docs = signal_corpus(
        &tax,
        &SignalCorpusConfig {
            n_docs: 3000,
            internal_fraction: 0.2,
            ..Default::default()
        },
    );
    let split = holdout_split(&docs, 0.1, 0)?;
    let config = TrainConfig {
        dimension: 20,
        bigram_buckets: 50_000,
        learning_rate: 0.5,
        epochs: 20,
        ..Default::default()
    };

    let (flat, _) = train_flat(&split.train, &Features::Learned, &config)?;
    let locals = hierarchical_split(&split.train, &tax)?;
    let (hier, reports) = train_lcpn_vc(&locals, &tax, &Features::Learned, &config)?;
    for r in &reports {
        println!("{:<6} {:>5} examples", r.node.as_deref().unwrap_or("-"), r.n_examples);
    }

    for d in split.test.iter().take(8) {
        let (label, path) = predict_top_down(&hier, &d.tokens);
        println!(
            "{}: true {:<6} flat {:<6} lcpn-vc {:<6} path {:?} ({:?})",
            d.doc_id,
            d.label,
            predict_flat(&flat, &d.tokens),
            label,
            path.nodes,
            path.stop_reason
        );
    }

    let dir = std::env::temp_dir().join("htc-strategies-example");
    let model = TrainedModel::Hier(hier);
    model.save(&dir)?;
    let loaded = TrainedModel::load(&dir)?;
    let same = split.test.iter().all(|d| loaded.predict(&d.tokens) == model.predict(&d.tokens));
    println!("saved to {}; reloaded predictions identical: {same}", dir.display());
    Ok(())
}
