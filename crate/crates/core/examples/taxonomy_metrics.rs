//! Ancestor sets, lowest common ancestors, and the three families of
//! scores on part of the RCV1 topic tree.
//!
//! ```text
//! cargo run --example taxonomy_metrics
//! ```

use htc::metrics::{hier_scores, lca_scores, FlatAveraging, MetricsReport, PredictionPair};
use htc::Taxonomy;

const HIERARCHY: &str = include_str!("../tests/fixtures/excerpt_hierarchy.txt");

fn main() -> anyhow::Result<()> {
    let tax = Taxonomy::read(HIERARCHY.as_bytes())?;
    println!("{} nodes, internal: {:?}", tax.len(), tax.internal_nodes());

    for label in ["C1511", "E131", "GCAT"] {
        let anc = tax.ancestors(label)?;
        let mut names: Vec<&str> = anc.members.iter().map(|&n| tax.label(n)).collect();
        names.sort_unstable();
        println!("ancestors({label}) = {names:?}");
    }
    for (a, b) in [("C151", "C152"), ("E131", "E132"), ("E131", "G151")] {
        println!("lca({a}, {b}) = {}", tax.lca(a, b)?);
    }

    // A sibling confusion costs less under the hierarchical measure than
    // under the LCA measure, and a cross-branch error scores zero in both.
    for (truth, predicted) in [("E131", "E132"), ("C11", "E11"), ("C1511", "C1511")] {
        let pair = [PredictionPair::new("doc", truth, predicted)];
        println!(
            "{truth} -> {predicted}: hF1 {:.3}, lcaF1 {:.3}",
            hier_scores(&pair, &tax)?.f1,
            lca_scores(&pair, &tax)?.f1
        );
    }

    let pairs = [
        PredictionPair::new("d1", "E131", "E131"),
        PredictionPair::new("d2", "E131", "E132"),
        PredictionPair::new("d3", "C15", "C151"),
        PredictionPair::new("d4", "G151", "GCAT"),
    ];
    println!("{}", MetricsReport::compute(&pairs, &tax, FlatAveraging::Macro)?);
    Ok(())
}
