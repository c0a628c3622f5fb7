//! End-to-end checks shared by the granular test targets and the
//! acceptance harness. Each function panics with a description on failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use htc::cli::{cmd_report, ReportSummary};
use htc::corpus::{hierarchical_split, holdout_split, LabeledDocument};
use htc::learner::TrainConfig;
use htc::metrics::{hier_scores, lca_scores, FlatAveraging, MetricsReport, PredictionPair};
use htc::strategy::{predict_flat, predict_top_down, train_flat, train_lcpn_vc, Features, TrainedModel};
use htc::synthetic::{balanced_taxonomy, random_taxonomy, signal_corpus, SignalCorpusConfig};
use htc::taxonomy::VC_PREFIX;
use htc::Taxonomy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{excerpt, fixture, joint_gradient_error, linear_gradient_error, non_root_labels, OracleScorer};

/// Library scores against the brute-force oracle on `trees` random trees
/// with `pairs` random prediction pairs each.
pub fn metric_oracle(trees: u64, pairs: usize) {
    for seed in 0..trees {
        let tax = random_taxonomy(seed, 30, 4);
        let labels = non_root_labels(&tax);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let ps: Vec<PredictionPair> = (0..pairs)
            .map(|i| {
                let t = &labels[rng.gen_range(0..labels.len())];
                let p = &labels[rng.gen_range(0..labels.len())];
                PredictionPair::new(format!("d{i}"), t, p)
            })
            .collect();
        let oracle = OracleScorer::new(&tax);
        let h = hier_scores(&ps, &tax).unwrap();
        let l = lca_scores(&ps, &tax).unwrap();
        let got = [h.precision, h.recall, h.f1, l.precision, l.recall, l.f1];
        let want = [oracle.hier(&ps), oracle.lca_prf(&ps)].concat();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9, "tree {seed}: {got:?} vs {want:?}");
        }
    }
}

/// Sibling, cross-branch, and exact-match cases on the RCV1 excerpt.
pub fn hand_fixtures() {
    let tax = excerpt();
    let score = |t: &str, p: &str| {
        let pair = [PredictionPair::new("d", t, p)];
        (hier_scores(&pair, &tax).unwrap(), lca_scores(&pair, &tax).unwrap())
    };
    let (h, l) = score("E131", "E132");
    assert_eq!((h.precision, h.recall, h.f1), (2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0));
    assert_eq!((l.precision, l.recall, l.f1), (0.5, 0.5, 0.5));
    let (h, l) = score("C11", "E11");
    assert_eq!((h.f1, l.f1), (0.0, 0.0));
    for label in ["C1511", "ECAT", "E13", "G151"] {
        let (h, l) = score(label, label);
        assert_eq!((h.f1, l.f1), (1.0, 1.0), "{label}");
    }
}

/// Summary of the published results table fixture.
pub fn published_results_summary() -> ReportSummary {
    let s = cmd_report(&fixture("published_results.tsv")).unwrap();
    assert_eq!(s.n_rows, 16);
    let near = |x: f64, want: f64, tol: f64, what: &str| {
        assert!((x - want).abs() <= tol, "{what}: {x} vs {want}");
    };
    near(s.mean_of("F1").unwrap(), 0.533, 0.001, "mean F1");
    near(s.mean_of("lcaF1").unwrap(), 0.823, 0.001, "mean lcaF1");
    near(s.correlation("F1", "lcaF1").unwrap(), 0.756, 0.005, "r(F1, lcaF1)");
    near(s.correlation("hF1", "lcaF1").unwrap(), 0.923, 0.005, "r(hF1, lcaF1)");
    s
}

pub fn gradients() {
    for seed in 0..5 {
        let e = linear_gradient_error(seed);
        assert!(e < 1e-4, "linear model, seed {seed}: relative error {e}");
        let e = joint_gradient_error(seed);
        assert!(e < 1e-4, "joint model, seed {seed}: relative error {e}");
    }
}

/// Training settings of the synthetic experiment at one embedding size.
pub fn synthetic_config(dimension: usize) -> TrainConfig {
    TrainConfig {
        dimension,
        bigram_buckets: 100_000,
        learning_rate: 0.5,
        epochs: 20,
        seed: 0,
        ..Default::default()
    }
}

pub struct SyntheticData {
    pub tax: Taxonomy,
    pub train: Vec<LabeledDocument>,
    pub test: Vec<LabeledDocument>,
}

/// 13-node, 3-level tree; 5,000 documents, 10% at internal nodes; 10% held out.
pub fn synthetic_data() -> SyntheticData {
    let tax = balanced_taxonomy(3);
    assert_eq!(tax.len(), 13);
    let docs = signal_corpus(&tax, &SignalCorpusConfig::default());
    assert_eq!(docs.len(), 5000);
    let split = holdout_split(&docs, 0.1, 0).unwrap();
    SyntheticData {
        tax,
        train: split.train,
        test: split.test,
    }
}

fn score(data: &SyntheticData, predict: impl Fn(&[String]) -> String) -> MetricsReport {
    let pairs: Vec<_> = data
        .test
        .iter()
        .map(|d| PredictionPair::new(&d.doc_id, &d.label, predict(&d.tokens)))
        .collect();
    MetricsReport::compute(&pairs, &data.tax, FlatAveraging::Macro).unwrap()
}

/// Held-out lcaF1 of the flat joint-embedding model.
pub fn flat_lca_f1(data: &SyntheticData, dimension: usize) -> f64 {
    let (flat, _) = train_flat(&data.train, &Features::Learned, &synthetic_config(dimension)).unwrap();
    score(data, |t| predict_flat(&flat, t).to_string()).lca.f1
}

/// Held-out lcaF1 of LCPN+VC with joint-embedding local models.
pub fn lcpn_lca_f1(data: &SyntheticData, dimension: usize) -> f64 {
    let locals = hierarchical_split(&data.train, &data.tax).unwrap();
    let (hier, _) = train_lcpn_vc(&locals, &data.tax, &Features::Learned, &synthetic_config(dimension)).unwrap();
    score(data, |t| predict_top_down(&hier, t).0).lca.f1
}

/// Returns (flat lcaF1, LCPN+VC lcaF1) at dimension 30.
pub fn synthetic_end_to_end(data: &SyntheticData) -> (f64, f64) {
    let flat = flat_lca_f1(data, 30);
    let hier = lcpn_lca_f1(data, 30);
    assert!(flat >= 0.95, "flat lcaF1 {flat:.4} < 0.95");
    assert!(hier >= flat - 0.005, "LCPN+VC lcaF1 {hier:.4} < flat {flat:.4} - 0.005");
    (flat, hier)
}

/// Flat lcaF1 at dimensions 5, 10, 20, 30; each step may drop by at most 0.005.
pub fn dimension_sweep(data: &SyntheticData) -> Vec<f64> {
    let scores: Vec<f64> = [5, 10, 20, 30].iter().map(|&d| flat_lca_f1(data, d)).collect();
    for w in scores.windows(2) {
        assert!(w[1] >= w[0] - 0.005, "lcaF1 by dimension {scores:?} drops by more than 0.005");
    }
    scores
}

/// A small corpus over the RCV1 excerpt with documents at every level.
pub fn excerpt_corpus(n_docs: usize) -> (Taxonomy, Vec<LabeledDocument>) {
    let tax = excerpt();
    let docs = signal_corpus(
        &tax,
        &SignalCorpusConfig {
            n_docs,
            internal_fraction: 0.3,
            seed: 5,
            ..Default::default()
        },
    );
    (tax, docs)
}

/// Every internal node's dataset holds exactly the training documents of its
/// subtree, and the root's holds all of them.
pub fn split_conservation(tax: &Taxonomy, train: &[LabeledDocument]) {
    let locals = hierarchical_split(train, tax).unwrap();
    for ds in &locals {
        let subtree = tax.subtree(&ds.parent).unwrap();
        let expected = train.iter().filter(|d| subtree.contains(&d.label)).count();
        assert_eq!(ds.examples.len(), expected, "dataset {}", ds.parent);
        for (doc, _) in &ds.examples {
            assert!(subtree.contains(&doc.label), "{} outside {}", doc.label, ds.parent);
        }
    }
    let root = locals.iter().find(|d| d.parent == tax.root_label()).unwrap();
    assert_eq!(root.examples.len(), train.len());
}

/// Virtual categories appear exactly for documents labeled with the
/// dataset's own node, never at the root; other examples carry the child
/// leading towards their label.
pub fn vc_placement(tax: &Taxonomy, train: &[LabeledDocument]) {
    let locals = hierarchical_split(train, tax).unwrap();
    for ds in &locals {
        let is_root = ds.parent == tax.root_label();
        assert_eq!(ds.vc_label.is_none(), is_root, "{}", ds.parent);
        for (doc, local) in &ds.examples {
            let is_vc = local.starts_with(VC_PREFIX);
            assert_eq!(is_vc, doc.label == ds.parent, "{} in {}", doc.label, ds.parent);
            if is_vc {
                assert_eq!(Some(local), ds.vc_label.as_ref());
            } else {
                let parent = tax.id(&ds.parent).unwrap();
                let child = tax.child_towards(parent, tax.id(&doc.label).unwrap()).unwrap();
                assert_eq!(local, tax.label(child));
            }
        }
    }
}

/// One local model per internal node, with the split's class lists.
pub fn one_model_per_internal_node(tax: &Taxonomy, train: &[LabeledDocument]) {
    let locals = hierarchical_split(train, tax).unwrap();
    assert_eq!(locals.len(), tax.internal_nodes().len());
    let config = TrainConfig {
        dimension: 5,
        bigram_buckets: 500,
        ..Default::default()
    };
    let (hier, reports) = train_lcpn_vc(&locals, tax, &Features::Learned, &config).unwrap();
    assert_eq!(hier.locals().len(), tax.internal_nodes().len());
    assert_eq!(reports.len(), tax.internal_nodes().len());
    for ds in &locals {
        let local = hier.local(&ds.parent).unwrap();
        let model = local.model.as_ref().expect("every node has examples");
        use htc::strategy::Classifier;
        assert_eq!(model.classes(), ds.classes.as_slice(), "{}", ds.parent);
    }
}

/// Same seed, same split; another seed gives a different one.
pub fn holdout_determinism(docs: &[LabeledDocument]) {
    let ids = |seed| {
        let s = holdout_split(docs, 0.1, seed).unwrap();
        assert_eq!(s.test.len(), (docs.len() as f64 * 0.1).round() as usize);
        assert_eq!(s.train.len() + s.test.len(), docs.len());
        let mut all: Vec<&str> = s.train.iter().chain(&s.test).map(|d| d.doc_id.as_str()).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), docs.len(), "train and test overlap");
        s.test.iter().map(|d| d.doc_id.clone()).collect::<Vec<_>>()
    };
    assert_eq!(ids(3), ids(3));
    assert!((4..9).any(|s| ids(s) != ids(3)));
}

/// Every file under `dir`, keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Save, load, save again, and retrain from scratch: all byte-identical,
/// with identical predictions after loading.
pub fn persistence_byte_identity(tax: &Taxonomy, train: &[LabeledDocument]) {
    let config = TrainConfig {
        dimension: 5,
        bigram_buckets: 500,
        seed: 9,
        ..Default::default()
    };
    let build = |hier: bool| -> TrainedModel {
        if hier {
            let locals = hierarchical_split(train, tax).unwrap();
            TrainedModel::Hier(train_lcpn_vc(&locals, tax, &Features::Learned, &config).unwrap().0)
        } else {
            TrainedModel::Flat(train_flat(train, &Features::Learned, &config).unwrap().0)
        }
    };
    let tmp = tempfile::tempdir().unwrap();
    for hier in [false, true] {
        let model = build(hier);
        let dirs: Vec<_> = ["a", "b", "c"].iter().map(|n| tmp.path().join(format!("{hier}-{n}"))).collect();
        model.save(&dirs[0]).unwrap();
        let loaded = TrainedModel::load(&dirs[0]).unwrap();
        loaded.save(&dirs[1]).unwrap();
        build(hier).save(&dirs[2]).unwrap();
        let first = read_tree(&dirs[0]);
        assert!(first.contains_key("manifest.txt"));
        assert_eq!(first, read_tree(&dirs[1]), "save/load/save differs (hier={hier})");
        assert_eq!(first, read_tree(&dirs[2]), "retraining differs (hier={hier})");
        if hier {
            let blobs = first.keys().filter(|k| k.ends_with(".bin")).count();
            assert_eq!(blobs, tax.internal_nodes().len());
        }
        for d in train.iter().take(50) {
            assert_eq!(model.predict(&d.tokens), loaded.predict(&d.tokens));
        }
    }
}
