mod common;

use common::{dense_q, matmul, random_tree, rel_close, transpose};
use proptest::prelude::*;
use treeconc::delta::delta_profile;
use treeconc::spectral::{
    mixing_matrix_with_order, mixing_norms, partial_sum_indicator_norm, q_power_norm_exact,
    q_power_norm_iterative, random_bfs_order,
};
use treeconc::RootedTree;

fn matrix_power(a: &[Vec<f64>], j: usize) -> Vec<Vec<f64>> {
    (0..j).fold(common::identity(a.len()), |acc, _| matmul(&acc, a))
}

fn tree_strategy(max_n: usize) -> impl Strategy<Value = RootedTree> {
    (1..=max_n, any::<u64>()).prop_map(|(n, seed)| random_tree(n, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `Q^j (Q^j)^T` is diagonal with entries `|D_j(v)|`, so its largest
    /// entry is `‖Q^j‖²`.
    #[test]
    fn exact_norm_matches_dense_gram(tree in tree_strategy(50), j in 0usize..6) {
        let qj = matrix_power(&dense_q(&tree), j);
        let gram = matmul(&qj, &transpose(&qj));
        let mut top = 0.0f64;
        for (i, row) in gram.iter().enumerate() {
            for (k, &x) in row.iter().enumerate() {
                if i != k {
                    prop_assert_eq!(x, 0.0);
                }
            }
            top = top.max(row[i]);
        }
        prop_assert_eq!(q_power_norm_exact(&tree, j), top.sqrt());
    }

    #[test]
    fn power_iteration_converges(tree in tree_strategy(100), j in 0usize..=5, seed in any::<u64>()) {
        let exact = q_power_norm_exact(&tree, j);
        let iter = q_power_norm_iterative(&tree, j, 100_000, seed);
        prop_assert!(rel_close(iter, exact, 1e-6), "{iter} vs {exact}");
    }

    #[test]
    fn mixing_matrix_matches_dense_series(tree in tree_strategy(40), b in 0.0..0.95f64, seed in any::<u64>()) {
        let q = dense_q(&tree);
        let n = tree.len();
        let mut series = common::identity(n);
        let mut term = common::identity(n);
        for _ in 0..tree.height() {
            term = matmul(&term, &q).into_iter()
                .map(|r| r.into_iter().map(|x| x * b).collect())
                .collect();
            for (s, t) in series.iter_mut().zip(&term) {
                for (x, y) in s.iter_mut().zip(t) {
                    *x += y;
                }
            }
        }
        let order = random_bfs_order(&tree, seed);
        let m = mixing_matrix_with_order(&tree, b, &order).unwrap();
        for i in 0..n {
            for k in 0..n {
                let want = series[order[i].index()][order[k].index()];
                prop_assert!((m.get(i, k) - want).abs() <= 1e-12);
                if k < i {
                    prop_assert_eq!(m.get(i, k), 0.0);
                }
            }
        }
    }

    #[test]
    fn mixing_identities(tree in tree_strategy(150), b in prop::sample::select(vec![0.3, 0.6, 0.9]), seed in any::<u64>()) {
        let p = delta_profile(&tree, b).unwrap();
        let m = mixing_matrix_with_order(&tree, b, &random_bfs_order(&tree, seed)).unwrap();
        let norms = mixing_norms(&m);
        prop_assert!((norms.inf_norm - p.max_delta()).abs() <= 1e-9);
        let ones: f64 = norms.row_sums.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((ones - p.big_delta).abs() <= 1e-9);
        prop_assert!(norms.two_norm - p.big_delta / (tree.len() as f64).sqrt() >= -1e-9);
    }
}

#[test]
fn indicator_norm_is_the_truncated_delta() {
    for seed in 0..10 {
        let tree = random_tree(70, seed);
        for k in 0..=tree.height() {
            let t = tree.truncate_to_depth(k);
            let want = delta_profile(&t, 0.6).unwrap().big_delta / (t.len() as f64).sqrt();
            let got = partial_sum_indicator_norm(&tree, 0.6, k).unwrap();
            assert!(rel_close(got, want, 1e-12));
        }
    }
}
