mod common;

use common::{adjacency, bfs_distances, dense_q, identity, matmul, random_tree, rel_close};
use proptest::prelude::*;
use treeconc::delta::{
    alt_delta_bound, delta_profile, delta_series, delta_via_operator, pair_distance_sum,
    pair_distance_sum_naive, sandwich_bounds, TreeFamily,
};
use treeconc::{GeneratorSpec, RootedTree, VertexId};

/// `δ(v) = Σ_r |D_r(v)| b^r` with `|D_r(v)|` counted from graph distances:
/// `w ∈ D_r(v)` iff `d(v, w) = r` and `d(ρ, w) = d(ρ, v) + r`.
fn series_oracle(tree: &RootedTree, b: f64) -> Vec<f64> {
    let adj = adjacency(tree);
    let from_root = bfs_distances(&adj, 0);
    (0..tree.len())
        .map(|v| {
            let dv = bfs_distances(&adj, v);
            let mut counts = vec![0u64; tree.len()];
            for w in 0..tree.len() {
                if from_root[w] == from_root[v] + dv[w] {
                    counts[dv[w]] += 1;
                }
            }
            counts
                .iter()
                .enumerate()
                .map(|(r, &c)| c as f64 * b.powi(r as i32))
                .sum()
        })
        .collect()
}

/// `Σ_{(w₁,w₂)} b^{d(w₁,w₂)}` over ordered pairs from all-pairs BFS.
fn pair_sum_oracle(tree: &RootedTree, b: f64) -> f64 {
    let adj = adjacency(tree);
    (0..tree.len())
        .map(|s| {
            bfs_distances(&adj, s)
                .iter()
                .map(|&d| b.powi(d as i32))
                .sum::<f64>()
        })
        .sum()
}

fn tree_strategy(max_n: usize) -> impl Strategy<Value = RootedTree> {
    (1..=max_n, any::<u64>()).prop_map(|(n, seed)| random_tree(n, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recurrence_matches_series(tree in tree_strategy(80), b in 0.0..0.99f64) {
        let profile = delta_profile(&tree, b).unwrap();
        for (got, want) in profile.delta.iter().zip(series_oracle(&tree, b)) {
            prop_assert!(rel_close(*got, want, 1e-12), "{got} vs {want}");
        }
    }

    #[test]
    fn fast_pair_sum_matches_bfs(tree in tree_strategy(80), b in 0.0..0.99f64) {
        let oracle = pair_sum_oracle(&tree, b);
        prop_assert!(rel_close(pair_distance_sum(&tree, b).unwrap(), oracle, 1e-12));
        prop_assert!(rel_close(pair_distance_sum_naive(&tree, b).unwrap(), oracle, 1e-12));
    }

    #[test]
    fn sandwich_holds(tree in tree_strategy(120), b in 0.0..0.99f64) {
        let s = sandwich_bounds(&tree, b).unwrap();
        prop_assert!(s.delta_sq - s.lower >= -1e-9 * s.delta_sq);
        prop_assert!(s.upper - s.delta_sq >= -1e-9 * s.upper);
    }

    #[test]
    fn operator_form_matches_dense_powers(tree in tree_strategy(40), b in 0.0..0.95f64) {
        // Σ_j (bQ)^j 1_{V_k} from dense matrix powers
        let q = dense_q(&tree);
        let n = tree.len();
        for k in 0..=tree.height() {
            let indicator: Vec<Vec<f64>> = (0..n)
                .map(|v| vec![f64::from(tree.depth(VertexId(v)) <= k)])
                .collect();
            let mut term = indicator.clone();
            let mut total = indicator;
            let bq: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|x| b * x).collect()).collect();
            for _ in 0..=tree.height() {
                term = matmul(&bq, &term);
                for (t, x) in total.iter_mut().zip(&term) {
                    t[0] += x[0];
                }
            }
            let got = delta_via_operator(&tree, b, k).unwrap();
            for v in 0..n {
                prop_assert!((got[v] - total[v][0]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn zero_b_gives_sqrt_n(tree in tree_strategy(200)) {
        let p = delta_profile(&tree, 0.0).unwrap();
        prop_assert_eq!(p.big_delta, (tree.len() as f64).sqrt());
    }

    #[test]
    fn delta_is_monotone_in_b(tree in tree_strategy(60), a in 0.0..0.9f64, gap in 0.0..0.09f64) {
        let lo = delta_profile(&tree, a).unwrap();
        let hi = delta_profile(&tree, a + gap).unwrap();
        prop_assert!(lo.delta.iter().zip(&hi.delta).all(|(x, y)| x <= y));
    }
}

#[test]
fn truncated_series_matches_truncations() {
    for seed in 0..20 {
        let tree = random_tree(60, seed);
        let s = delta_series(&tree, 0.7, tree.height()).unwrap();
        for k in 0..=tree.height() {
            let t = tree.truncate_to_depth(k);
            let direct = delta_profile(&t, 0.7).unwrap().delta_sq();
            assert!(rel_close(s.deltas_sq[k], direct, 1e-13));
            assert_eq!(s.vertex_counts[k], t.len() as u64);
        }
    }
}

#[test]
fn operator_identity_is_the_identity_at_b_zero() {
    let tree = random_tree(30, 3);
    let q = dense_q(&tree);
    assert_eq!(matmul(&identity(tree.len()), &q), q);
    let d = delta_via_operator(&tree, 0.0, tree.height()).unwrap();
    assert!(d.iter().all(|&x| x == 1.0));
}

#[test]
fn paths_satisfy_the_geometric_bound() {
    for length in [0usize, 1, 5, 40, 300] {
        let path = RootedTree::generate(&GeneratorSpec::Path { length }).unwrap();
        for b in [0.0, 0.2, 0.5, 0.9, 0.99] {
            let bound = alt_delta_bound(&path, b).unwrap().unwrap();
            let got = delta_profile(&path, b).unwrap().big_delta;
            assert!(bound - got >= -1e-9, "length {length} b {b}");
            let d = f64::from(length > 0);
            assert!(rel_close(
                bound,
                ((length + 1) as f64).sqrt() / (1.0 - b * d),
                1e-15
            ));
        }
    }
}

#[test]
fn families_agree_with_generated_trees() {
    for b in [0.0, 0.3, 0.5, 1.0 / 3f64.sqrt(), 0.75] {
        for k in 0..=12 {
            let t = RootedTree::generate(&GeneratorSpec::ThreeOne { depth: k }).unwrap();
            let direct = delta_profile(&t, b).unwrap().delta_sq();
            let family = TreeFamily::ThreeOne.delta_sq(b, k).unwrap();
            assert!(rel_close(direct, family, 1e-12), "threeone k={k} b={b}");
            let t = RootedTree::generate(&GeneratorSpec::Dary { d: 2, depth: k }).unwrap();
            let direct = delta_profile(&t, b).unwrap().delta_sq();
            let family = TreeFamily::Dary(2).delta_sq(b, k).unwrap();
            assert!(rel_close(direct, family, 1e-12), "dary k={k} b={b}");
        }
    }
}

#[test]
fn binary_closed_form_to_depth_twenty() {
    for k in 0..=20usize {
        let closed: f64 = (0..=k)
            .map(|j| (1u64 << j) as f64 * ((k - j + 1) as f64).powi(2))
            .sum();
        assert_eq!(
            TreeFamily::Dary(2).delta_sq(0.5, k).unwrap(),
            closed,
            "k={k}"
        );
    }
}
