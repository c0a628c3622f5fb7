mod common;

use common::{excerpt, non_root_labels, OracleScorer};
use htc::metrics::{
    hier_counts, hier_scores, lca_counts, lca_scores, FlatAveraging, MetricsReport, PooledCounts,
    PredictionPair,
};
use htc::synthetic::random_taxonomy;
use htc::Taxonomy;
use proptest::prelude::*;

fn pairs_strategy() -> impl Strategy<Value = (Taxonomy, Vec<PredictionPair>)> {
    (any::<u64>(), 1usize..200).prop_flat_map(|(seed, n)| {
        let tax = random_taxonomy(seed, 30, 4);
        let labels = non_root_labels(&tax);
        let pair = (0..labels.len(), 0..labels.len());
        prop::collection::vec(pair, n).prop_map(move |idx| {
            let pairs = idx
                .iter()
                .enumerate()
                .map(|(i, &(t, p))| PredictionPair::new(format!("d{i}"), &labels[t], &labels[p]))
                .collect();
            (tax.clone(), pairs)
        })
    })
}

fn close(a: [f64; 3], p: htc::metrics::Prf) -> bool {
    (a[0] - p.precision).abs() <= 1e-9 && (a[1] - p.recall).abs() <= 1e-9 && (a[2] - p.f1).abs() <= 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_match_brute_force((tax, pairs) in pairs_strategy()) {
        let oracle = OracleScorer::new(&tax);
        prop_assert!(close(oracle.hier(&pairs), hier_scores(&pairs, &tax).unwrap()));
        prop_assert!(close(oracle.lca_prf(&pairs), lca_scores(&pairs, &tax).unwrap()));
    }

    #[test]
    fn report_values_are_bounded_and_consistent((tax, pairs) in pairs_strategy()) {
        let r = MetricsReport::compute(&pairs, &tax, FlatAveraging::Macro).unwrap();
        for prf in [r.flat_macro, r.flat_micro, r.hier, r.lca] {
            for v in [prf.precision, prf.recall, prf.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let h = if prf.precision + prf.recall == 0.0 {
                0.0
            } else {
                2.0 * prf.precision * prf.recall / (prf.precision + prf.recall)
            };
            prop_assert!((prf.f1 - h).abs() < 1e-12);
        }
        prop_assert_eq!(r.n_pairs, pairs.len());
    }

    #[test]
    fn partial_sums_combine((tax, pairs) in pairs_strategy(), cut in 0usize..200) {
        let cut = cut.min(pairs.len());
        let counts = |ps: &[PredictionPair], f: fn(&Taxonomy, _, _) -> PooledCounts| -> PooledCounts {
            ps.iter()
                .map(|p| f(&tax, tax.id(&p.true_label).unwrap(), tax.id(&p.predicted_label).unwrap()))
                .sum()
        };
        let (a, b) = pairs.split_at(cut);
        prop_assert_eq!(counts(a, hier_counts) + counts(b, hier_counts), counts(&pairs, hier_counts));
        prop_assert_eq!(
            (counts(a, lca_counts) + counts(b, lca_counts)).scores(),
            lca_scores(&pairs, &tax).unwrap()
        );
    }

    #[test]
    fn lca_is_symmetric_and_deepest(seed in any::<u64>()) {
        let tax = random_taxonomy(seed, 30, 4);
        let oracle = OracleScorer::new(&tax);
        let labels: Vec<&str> = tax.labels().collect();
        for a in &labels {
            for b in &labels {
                let l = tax.lca(a, b).unwrap();
                prop_assert_eq!(l, tax.lca(b, a).unwrap());
                prop_assert_eq!(l, oracle.lca(a, b));
            }
        }
    }

    #[test]
    fn identity_scores_one(seed in any::<u64>()) {
        let tax = random_taxonomy(seed, 30, 4);
        let pairs: Vec<_> = non_root_labels(&tax)
            .iter()
            .map(|l| PredictionPair::new(l, l, l))
            .collect();
        let r = MetricsReport::compute(&pairs, &tax, FlatAveraging::Micro).unwrap();
        prop_assert_eq!((r.hier.f1, r.lca.f1, r.flat_micro.f1), (1.0, 1.0, 1.0));
    }
}

#[test]
fn ancestor_set_size_is_depth() {
    for seed in 0..20 {
        let tax = random_taxonomy(seed, 200, 6);
        for id in tax.node_ids() {
            assert_eq!(tax.ancestor_ids(id).len(), tax.depth(id));
        }
    }
}

#[test]
fn deeper_lca_never_scores_lower() {
    let tax = excerpt();
    let labels = non_root_labels(&tax);
    let single = |t: &str, p: &str| {
        let pair = [PredictionPair::new("d", t, p)];
        (hier_scores(&pair, &tax).unwrap().f1, lca_scores(&pair, &tax).unwrap().f1)
    };
    // Group pairs by (depth(true), depth(pred)) and sort each group by LCA depth.
    let depth = |l: &str| tax.depth(tax.id(l).unwrap());
    for t1 in &labels {
        for p1 in &labels {
            for t2 in &labels {
                for p2 in &labels {
                    if (depth(t1), depth(p1)) != (depth(t2), depth(p2)) {
                        continue;
                    }
                    let (l1, l2) = (depth(tax.lca(t1, p1).unwrap()), depth(tax.lca(t2, p2).unwrap()));
                    if l1 < l2 {
                        let (h1, a1) = single(t1, p1);
                        let (h2, a2) = single(t2, p2);
                        assert!(h1 <= h2, "hF1 {t1}/{p1} vs {t2}/{p2}");
                        assert!(a1 <= a2, "lcaF1 {t1}/{p1} vs {t2}/{p2}");
                    }
                }
            }
        }
    }
}
