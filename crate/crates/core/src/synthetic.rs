//! Generated taxonomies and corpora for tests, examples, and benchmarks.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::LabeledDocument;
use crate::taxonomy::{Taxonomy, ROOT_LABEL};

/// A random tree with between 2 and `max_nodes` nodes (root included) and
/// depth at most `max_depth`. Non-root nodes are labeled `N1`, `N2`, ...
pub fn random_taxonomy(seed: u64, max_nodes: usize, max_depth: usize) -> Taxonomy {
    assert!(max_nodes >= 2 && max_depth >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_nodes);
    let mut labels = vec![ROOT_LABEL.to_string()];
    let mut depth = vec![0usize];
    let mut edges = Vec::new();
    for i in 1..n {
        let open: Vec<usize> = (0..labels.len()).filter(|&j| depth[j] < max_depth).collect();
        let parent = *open.choose(&mut rng).expect("root is always open");
        labels.push(format!("N{i}"));
        depth.push(depth[parent] + 1);
        edges.push((labels[parent].clone(), labels[i].clone()));
    }
    Taxonomy::from_edges(edges).expect("generated edges form a tree")
}

/// `Root` with `branching` children, each with `branching` children.
///
/// Top-level nodes are `A`, `B`, ...; their children are `A1`, `A2`, ...
/// With the default branching of 3 this is a 13-node tree.
pub fn balanced_taxonomy(branching: usize) -> Taxonomy {
    assert!((1..=26).contains(&branching));
    let mut edges = Vec::new();
    for a in 0..branching {
        let top = char::from(b'A' + a as u8).to_string();
        for b in 1..=branching {
            edges.push((top.clone(), format!("{top}{b}")));
        }
        edges.push((ROOT_LABEL.to_string(), top));
    }
    Taxonomy::from_edges(edges).expect("balanced tree")
}

/// Settings of [`signal_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct SignalCorpusConfig {
    pub n_docs: usize,
    /// Share of documents labeled at an internal (non-root) node.
    pub internal_fraction: f64,
    /// Distinct signal words per node.
    pub words_per_node: usize,
    /// Signal tokens drawn per node on the label's path.
    pub signal_tokens: usize,
    /// Probability that a signal token comes from a sibling's pool instead.
    pub confusion: f64,
    pub noise_vocabulary: usize,
    pub noise_tokens: usize,
    /// Zipf exponent of the label distribution within each group (internal
    /// nodes, leaves); 0 means uniform. Ranks are assigned in random order.
    pub label_skew: f64,
    pub seed: u64,
}

impl Default for SignalCorpusConfig {
    fn default() -> Self {
        SignalCorpusConfig {
            n_docs: 5000,
            internal_fraction: 0.1,
            words_per_node: 20,
            signal_tokens: 4,
            confusion: 0.1,
            noise_vocabulary: 500,
            noise_tokens: 20,
            label_skew: 1.0,
            seed: 0,
        }
    }
}

/// Documents whose tokens carry evidence for every node on the path from
/// the root to their label.
///
/// Each non-root node `n` owns the words `{n}w0`, `{n}w1`, ... (lowercased).
/// A document labeled `l` gets `signal_tokens` words from the pool of each
/// node on the path to `l`, each swapped for a sibling's word with
/// probability `confusion`, plus `noise_tokens` words shared by all
/// classes, in random order. Labels are internal nodes with probability
/// `internal_fraction` and leaves otherwise; within each group the `k`-th
/// label (in a seeded random order) has weight `1 / k^label_skew`.
pub fn signal_corpus(tax: &Taxonomy, config: &SignalCorpusConfig) -> Vec<LabeledDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let root = tax.root();
    let (mut internal, mut leaves) = (Vec::new(), Vec::new());
    for id in tax.node_ids() {
        if id == root {
            continue;
        }
        if tax.is_leaf(id) {
            leaves.push(id);
        } else {
            internal.push(id);
        }
    }
    internal.shuffle(&mut rng);
    leaves.shuffle(&mut rng);
    let zipf = |n: usize| {
        WeightedIndex::new((1..=n.max(1)).map(|k| (k as f64).powf(-config.label_skew)))
            .expect("positive weights")
    };
    let (internal_dist, leaf_dist) = (zipf(internal.len()), zipf(leaves.len()));
    let word = |node: &str, i: usize| format!("{}w{i}", node.to_lowercase());

    (0..config.n_docs)
        .map(|d| {
            let pick_internal = !internal.is_empty() && rng.gen_bool(config.internal_fraction);
            let label = if pick_internal {
                internal[internal_dist.sample(&mut rng)]
            } else {
                leaves[leaf_dist.sample(&mut rng)]
            };
            let mut tokens = Vec::new();
            for &node in &tax.path_from_root(label)[1..] {
                let siblings: Vec<_> = tax
                    .children(tax.parent(node).expect("non-root"))
                    .iter()
                    .copied()
                    .filter(|&s| s != node)
                    .collect();
                for _ in 0..config.signal_tokens {
                    let source = if !siblings.is_empty() && rng.gen_bool(config.confusion) {
                        *siblings.choose(&mut rng).expect("non-empty")
                    } else {
                        node
                    };
                    tokens.push(word(tax.label(source), rng.gen_range(0..config.words_per_node)));
                }
            }
            for _ in 0..config.noise_tokens {
                tokens.push(format!("z{}", rng.gen_range(0..config.noise_vocabulary)));
            }
            tokens.shuffle(&mut rng);
            LabeledDocument::new(format!("doc{d:05}"), tokens, tax.label(label))
        })
        .collect()
}
