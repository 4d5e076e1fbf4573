mod common;

use common::{adjacency, bfs_distances, random_tree, rel_close};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeconc::broadcast::{
    eta_coefficients, exact_measure, linear_exp_moment, linear_log_exp_moment,
    magnetization_distribution, magnetization_weights, sample, variance_magnetization,
    ExactMeasure, IsingModel, Kernel, MarkovTreeModel, StateSpace,
};
use treeconc::spectral::{mixing_matrix_with_order, random_bfs_order};
use treeconc::RootedTree;

fn random_kernel(q: usize, rng: &mut ChaCha8Rng) -> Kernel {
    let rows: Vec<f64> = (0..q)
        .flat_map(|_| {
            let raw: Vec<f64> = (0..q).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(move |x| x / total)
        })
        .collect();
    Kernel::new(q, rows).unwrap()
}

fn random_model(tree: RootedTree, q: usize, seed: u64) -> MarkovTreeModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kernels = (1..tree.len())
        .map(|_| random_kernel(q, &mut rng))
        .collect();
    let root = random_kernel(q, &mut rng).row(0).to_vec();
    MarkovTreeModel::new(tree, StateSpace::discrete(q).unwrap(), root, kernels).unwrap()
}

/// Joint probability of a configuration by the product formula.
fn product_formula(model: &MarkovTreeModel, x: &[usize]) -> f64 {
    let parents = model.tree().parent_array();
    let mut p = model.root_dist()[x[0]];
    for v in 1..x.len() {
        let k = model.kernel(treeconc::VertexId(v)).unwrap();
        p *= k.prob(x[parents[v] as usize], x[v]);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exact_measure_matches_product_formula(n in 1usize..=7, q in 2usize..=3, seed in any::<u64>()) {
        let model = random_model(random_tree(n, seed), q, seed ^ 1);
        let mu = exact_measure(&model).unwrap();
        let total: f64 = mu.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for r in 0..mu.len() {
            let want = product_formula(&model, &mu.configuration(r));
            prop_assert!((mu.probs()[r] - want).abs() < 1e-15);
        }
        let marginals = model.marginals();
        for (v, want) in marginals.iter().enumerate() {
            for (a, b) in mu.marginal(v).iter().zip(want) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn magnetization_dp_matches_enumeration(n in 1usize..=12, p in 0.01..=0.5f64, seed in any::<u64>()) {
        let model = IsingModel::new(random_tree(n, seed), p).unwrap();
        let pgf = magnetization_distribution(&model).unwrap();
        let brute = exact_measure(model.model()).unwrap().count_distribution();
        for (a, b) in pgf.coefficients.iter().zip(&brute) {
            prop_assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn variance_formula_matches_pairwise_correlations(n in 1usize..=60, p in 0.01..=0.5f64, seed in any::<u64>()) {
        // Cov(X_v, X_w) = b^{d(v,w)} / 4 for the symmetric channel
        let tree = random_tree(n, seed);
        let b = 1.0 - 2.0 * p;
        let adj = adjacency(&tree);
        let mut sum = 0.0;
        for v in 0..n {
            for d in bfs_distances(&adj, v) {
                sum += b.powi(d as i32) / 4.0;
            }
        }
        let want = sum / (n * n) as f64;
        let v = variance_magnetization(&IsingModel::new(tree, p).unwrap()).unwrap();
        prop_assert!(rel_close(v.formula, want, 1e-12));
        prop_assert!(rel_close(v.exact.unwrap(), want, 1e-10));
    }

    #[test]
    fn linear_moment_matches_enumeration(n in 1usize..=6, seed in any::<u64>(), lambda in -3.0..3.0f64) {
        let model = random_model(random_tree(n, seed), 3, seed ^ 7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 11);
        let weights: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let base: f64 = rng.random_range(-1.0..1.0);
                (0..3).map(|_| base + rng.random_range(0.0..1.0)).collect()
            })
            .collect();
        let mu = exact_measure(&model).unwrap();
        let values: Vec<f64> = (0..mu.len())
            .map(|r| mu.configuration(r).iter().enumerate().map(|(v, &s)| weights[v][s]).sum())
            .collect();
        let want = mu.centered_exp_moment(&values, lambda);
        let got = linear_exp_moment(&model, &weights, lambda).unwrap();
        prop_assert!(rel_close(got, want, 1e-11), "{got} vs {want}");
    }

    #[test]
    fn eta_matrix_equals_mixing_matrix(n in 1usize..=9, p in 0.05..=0.5f64, seed in any::<u64>()) {
        let model = IsingModel::new(random_tree(n, seed), p).unwrap();
        let order = random_bfs_order(model.tree(), seed);
        let idx: Vec<usize> = order.iter().map(|v| v.index()).collect();
        let eta = eta_coefficients(&exact_measure(model.model()).unwrap(), &idx).unwrap();
        let m = mixing_matrix_with_order(model.tree(), model.b(), &order).unwrap();
        for (a, b) in eta.iter().zip(&m.entries) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn large_tree_moment_stays_finite() {
    let tree = random_tree(5000, 3);
    let model = IsingModel::new(tree, 0.1).unwrap();
    let w = magnetization_weights(5000);
    let m = model.exp_moment(&w, 0.05).unwrap();
    assert!(m.is_finite() && m > 1.0);
    let w: Vec<Vec<f64>> = w.iter().map(|&(a, b)| vec![a, b]).collect();
    let log = linear_log_exp_moment(model.model(), &w, 2.0).unwrap();
    assert!(log.is_finite() && log > 709.0);
}

#[test]
fn sample_frequencies_match_exact_measure() {
    let model = IsingModel::new(RootedTree::from_parents(&[-1, 0, 0, 1]).unwrap(), 0.2).unwrap();
    let mu = exact_measure(model.model()).unwrap();
    let count = 200_000u64;
    let mut freq = vec![0u64; mu.len()];
    for x in sample(model.model(), count, 42) {
        freq[mu.rank_of(&x)] += 1;
    }
    for (f, p) in freq.iter().zip(mu.probs()) {
        let se = (p * (1.0 - p) / count as f64).sqrt();
        assert!((*f as f64 / count as f64 - p).abs() < 5.0 * se);
    }
}

#[test]
fn tilts_and_conditionings_are_normalized() {
    let model = IsingModel::new(random_tree(6, 9), 0.3).unwrap();
    let nu = exact_measure(model.model()).unwrap();
    let ones: Vec<f64> = (0..nu.len())
        .map(|r| nu.configuration(r).iter().sum::<usize>() as f64)
        .collect();
    let tilted = nu.tilt(&ones, 1.0).unwrap();
    assert!((tilted.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(tilted.expectation(&ones) > nu.expectation(&ones));
    let c = nu.condition(3, 1).unwrap();
    let m = c.marginal(3);
    assert_eq!(m[0], 0.0);
    assert!((m[1] - 1.0).abs() < 1e-15);
    let again = ExactMeasure::new(c.space().clone(), c.coords(), c.probs().to_vec()).unwrap();
    assert_eq!(again, c);
}
