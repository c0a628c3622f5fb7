//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use htc::learner::ProbabilityDistribution;
use htc::metrics::PredictionPair;
use htc::strategy::Classifier;
use htc::Taxonomy;

pub mod checks;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn excerpt() -> Taxonomy {
    let text = std::fs::read_to_string(fixture("excerpt_hierarchy.txt")).unwrap();
    Taxonomy::read(text.as_bytes()).unwrap()
}

pub fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

/// Brute-force scorer that only looks at the tree's parent links.
///
/// Ancestor chains and LCA paths are materialized as label sets and
/// intersected directly; nothing from the library's metric code is reused.
pub struct OracleScorer {
    parent: HashMap<String, String>,
    root: String,
}

impl OracleScorer {
    pub fn new(tax: &Taxonomy) -> Self {
        let parent = tax
            .edges()
            .into_iter()
            .map(|(p, c)| (tax.label(c).to_string(), tax.label(p).to_string()))
            .collect();
        OracleScorer {
            parent,
            root: tax.root_label().to_string(),
        }
    }

    /// `node` and every node above it, root included, bottom-up.
    fn chain(&self, node: &str) -> Vec<String> {
        let mut out = vec![node.to_string()];
        while let Some(p) = self.parent.get(out.last().unwrap()) {
            out.push(p.clone());
        }
        out
    }

    fn anc(&self, node: &str) -> BTreeSet<String> {
        self.chain(node).into_iter().filter(|n| *n != self.root).collect()
    }

    pub fn lca(&self, a: &str, b: &str) -> String {
        let cb: BTreeSet<String> = self.chain(b).into_iter().collect();
        // The first node of a's bottom-up chain that is also above b.
        self.chain(a).into_iter().find(|n| cb.contains(n)).unwrap()
    }

    /// Nodes from `node` up to `stop`, both included, root dropped.
    fn path_to(&self, node: &str, stop: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for n in self.chain(node) {
            let done = n == stop;
            if n != self.root {
                out.insert(n);
            }
            if done {
                break;
            }
        }
        out
    }

    /// (overlap, predicted, truth) set sizes summed over pairs.
    fn pooled(&self, pairs: &[PredictionPair], sets: impl Fn(&PredictionPair) -> (BTreeSet<String>, BTreeSet<String>)) -> [f64; 3] {
        let mut sums = [0.0; 3];
        for p in pairs {
            let (truth, pred) = sets(p);
            sums[0] += truth.intersection(&pred).count() as f64;
            sums[1] += pred.len() as f64;
            sums[2] += truth.len() as f64;
        }
        sums
    }

    pub fn hier(&self, pairs: &[PredictionPair]) -> [f64; 3] {
        prf(self.pooled(pairs, |p| (self.anc(&p.true_label), self.anc(&p.predicted_label))))
    }

    pub fn lca_prf(&self, pairs: &[PredictionPair]) -> [f64; 3] {
        prf(self.pooled(pairs, |p| {
            let l = self.lca(&p.true_label, &p.predicted_label);
            (self.path_to(&p.true_label, &l), self.path_to(&p.predicted_label, &l))
        }))
    }
}

fn prf([overlap, predicted, truth]: [f64; 3]) -> [f64; 3] {
    let p = if predicted == 0.0 { 0.0 } else { overlap / predicted };
    let r = if truth == 0.0 { 0.0 } else { overlap / truth };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    [p, r, f]
}

/// Non-root labels of `tax`.
pub fn non_root_labels(tax: &Taxonomy) -> Vec<String> {
    tax.labels()
        .filter(|l| *l != tax.root_label())
        .map(String::from)
        .collect()
}

/// A local model that puts all mass on one class chosen per document by
/// `route(tokens)`; documents it does not know get the first class.
type Route = Box<dyn Fn(&[String]) -> Option<String> + Send + Sync>;

pub struct Routed {
    classes: Vec<String>,
    route: Route,
}

impl Routed {
    pub fn new(classes: Vec<String>, route: impl Fn(&[String]) -> Option<String> + Send + Sync + 'static) -> Self {
        Routed {
            classes,
            route: Box::new(route),
        }
    }
}

impl Classifier for Routed {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn predict_proba(&self, tokens: &[String]) -> ProbabilityDistribution {
        let pick = (self.route)(tokens)
            .and_then(|c| self.classes.iter().position(|x| *x == c))
            .unwrap_or(0);
        let mut p = vec![0.0; self.classes.len()];
        p[pick] = 1.0;
        ProbabilityDistribution(p)
    }
}

/// Relative error used by the finite-difference checks.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between analytic and central-difference
/// gradients, over every parameter of every group.
///
/// `params` exposes the model's parameter groups for writing, `loss`
/// evaluates the objective, and `grad` returns the analytic gradient laid
/// out like `params`.
pub fn max_gradient_error<M: Clone>(
    model: &M,
    params: impl Fn(&mut M) -> Vec<&mut [f64]>,
    loss: impl Fn(&M) -> f64,
    grad: impl Fn(&M) -> Vec<Vec<f64>>,
) -> f64 {
    const H: f64 = 1e-5;
    let analytic = grad(model);
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    let sizes: Vec<usize> = params(&mut probe).iter().map(|g| g.len()).collect();
    for (g, &n) in sizes.iter().enumerate() {
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            let original = params(&mut probe)[g][i];
            params(&mut probe)[g][i] = original + H;
            let up = loss(&probe);
            params(&mut probe)[g][i] = original - H;
            let down = loss(&probe);
            params(&mut probe)[g][i] = original;
            worst = worst.max(relative_error(analytic[g][i], (up - down) / (2.0 * H)));
        }
    }
    worst
}

/// Fills every parameter uniformly in [-1, 1] from a seeded generator.
pub fn randomize<'a>(groups: impl IntoIterator<Item = &'a mut [f64]>, seed: u64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for g in groups {
        for v in g.iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
    }
}

/// Worst gradient error of a random 3-class, 4-feature linear model.
pub fn linear_gradient_error(seed: u64) -> f64 {
    use htc::learner::LinearModel;
    let mut m = LinearModel::<f64>::zeros(vec!["a".into(), "b".into(), "c".into()], 4);
    randomize(m.parameter_groups_mut().into_iter().map(|(_, g)| g), seed);
    let x = vec![0.5, -1.5, 2.0, 0.25];
    let target = (seed % 3) as usize;
    max_gradient_error(
        &m,
        |m| m.parameter_groups_mut().into_iter().map(|(_, g)| g).collect(),
        |m| m.loss(&x, target).unwrap(),
        |m| {
            let g = m.gradient(&x, target).unwrap();
            g.parameter_groups().iter().map(|(_, p)| p.to_vec()).collect()
        },
    )
}

/// Worst gradient error of a random joint-embedding model with 3 words,
/// 2 bigram buckets, dimension 4, and 3 classes (32 parameters).
pub fn joint_gradient_error(seed: u64) -> f64 {
    use htc::learner::{JointEmbeddingModel, TrainConfig};
    let config = TrainConfig {
        dimension: 4,
        bigram_buckets: 2,
        ..Default::default()
    };
    let mut m = JointEmbeddingModel::<f64>::zeros(
        vec!["x".into(), "y".into(), "z".into()],
        vec!["a".into(), "b".into(), "c".into()],
        4,
        2,
        config,
    );
    randomize(m.parameter_groups_mut().into_iter().map(|(_, g)| g), seed);
    let doc = tokens("x y z y unknown x");
    let target = (seed % 3) as usize;
    max_gradient_error(
        &m,
        |m| m.parameter_groups_mut().into_iter().map(|(_, g)| g).collect(),
        |m| m.loss(&doc, target),
        |m| {
            let g = m.gradient(&doc, target);
            g.parameter_groups().iter().map(|(_, p)| p.to_vec()).collect()
        },
    )
}
