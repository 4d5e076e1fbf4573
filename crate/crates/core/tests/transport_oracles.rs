use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeconc::broadcast::{ExactMeasure, StateSpace};
use treeconc::transport::{
    check_lipschitz, mcshane_extension, product_coupling_identity, relative_entropy, wasserstein,
    wasserstein_hamming_graph, WeightedHamming,
};

fn bits() -> StateSpace {
    StateSpace::discrete(2).unwrap()
}

fn line3() -> StateSpace {
    StateSpace::new(3, vec![0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0]).unwrap()
}

/// Random law on `q^n` points, sparse with probability ½.
fn random_measure(space: &StateSpace, n: usize, rng: &mut ChaCha8Rng) -> ExactMeasure {
    let count = space.size().pow(n as u32);
    let sparse = rng.random_bool(0.5);
    let mut p: Vec<f64> = (0..count)
        .map(|_| {
            if sparse && rng.random_bool(0.6) {
                0.0
            } else {
                rng.random_range(0.0..1.0)
            }
        })
        .collect();
    if p.iter().all(|&x| x == 0.0) {
        p[0] = 1.0;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    ExactMeasure::new(space.clone(), n, p).unwrap()
}

fn random_metric(space: &StateSpace, n: usize, rng: &mut ChaCha8Rng) -> WeightedHamming {
    let w = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    WeightedHamming::new(space.clone(), w).unwrap()
}

fn space_for(flag: bool) -> StateSpace {
    if flag {
        line3()
    } else {
        bits()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn plans_are_feasible_and_certified(seed in any::<u64>(), n in 1usize..=4, three in any::<bool>()) {
        let space = space_for(three);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_measure(&space, n, &mut rng);
        let nu = random_measure(&space, n, &mut rng);
        let metric = random_metric(&space, n, &mut rng);
        let (d, plan) = wasserstein(&mu, &nu, &metric).unwrap();
        for (r, &x) in plan.support_mu.iter().enumerate() {
            prop_assert!((plan.row_sums()[r] - mu.probs()[x]).abs() < 1e-9);
        }
        for (c, &y) in plan.support_nu.iter().enumerate() {
            prop_assert!((plan.column_sums()[c] - nu.probs()[y]).abs() < 1e-9);
        }
        let cost: f64 = plan.entries.iter()
            .map(|&(i, j, w)| w * metric.dist_ranks(plan.support_mu[i], plan.support_nu[j]))
            .sum();
        prop_assert!((cost - d).abs() < 1e-12);
        prop_assert!(plan.dual_slack >= -1e-9);
        prop_assert!(plan.duality_gap.abs() <= 1e-9);
    }

    #[test]
    fn graph_route_agrees(seed in any::<u64>(), n in 1usize..=5, three in any::<bool>()) {
        let space = space_for(three);
        let n = if three { n.min(4) } else { n };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_measure(&space, n, &mut rng);
        let nu = random_measure(&space, n, &mut rng);
        let metric = random_metric(&space, n, &mut rng);
        let (d, _) = wasserstein(&mu, &nu, &metric).unwrap();
        let g = wasserstein_hamming_graph(&mu, &nu, &metric).unwrap();
        prop_assert!((d - g.distance).abs() < 1e-9, "{d} vs {}", g.distance);
        // the potentials are an optimal Kantorovich witness
        let gain = nu.expectation(&g.witness) - mu.expectation(&g.witness);
        prop_assert!((gain - d).abs() < 1e-9);
        for x in 0..mu.len() {
            for y in 0..mu.len() {
                prop_assert!((g.witness[x] - g.witness[y]).abs() <= metric.dist_ranks(x, y) + 1e-9);
            }
        }
    }

    #[test]
    fn metric_axioms(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let metric = random_metric(&bits(), n, &mut rng);
        let a = random_measure(&bits(), n, &mut rng);
        let b = random_measure(&bits(), n, &mut rng);
        let c = random_measure(&bits(), n, &mut rng);
        let d = |x: &ExactMeasure, y: &ExactMeasure| wasserstein(x, y, &metric).unwrap().0;
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-9);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        prop_assert!(d(&a, &a).abs() < 1e-12);
    }

    #[test]
    fn product_identity(seed in any::<u64>(), n in 1usize..=4, three in any::<bool>()) {
        let space = space_for(three);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factor = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let raw: Vec<f64> = (0..space.size()).map(|_| rng.random_range(0.0..1.0)).collect();
            let t: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / t).collect()
        };
        let mus: Vec<Vec<f64>> = (0..n).map(|_| factor(&mut rng)).collect();
        let nus: Vec<Vec<f64>> = (0..n).map(|_| factor(&mut rng)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let (lhs, rhs) = product_coupling_identity(&mus, &nus, &space, &weights).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn entropy_is_nonnegative(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_measure(&bits(), n, &mut rng);
        let b = random_measure(&bits(), n, &mut rng);
        let d = relative_entropy(&a, &b).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(relative_entropy(&a, &a).unwrap().abs() <= 1e-12);
        if a != b && d.is_finite() {
            prop_assert!(d > 0.0);
        }
    }
}

#[test]
fn product_identity_holds_on_a_hundred_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.random_range(1..=4usize);
        let factor = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let x = rng.random_range(0.0..1.0);
            vec![x, 1.0 - x]
        };
        let mus: Vec<Vec<f64>> = (0..n).map(|_| factor(&mut rng)).collect();
        let nus: Vec<Vec<f64>> = (0..n).map(|_| factor(&mut rng)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let (lhs, rhs) = product_coupling_identity(&mus, &nus, &bits(), &weights).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9);
    }
}

#[test]
fn mcshane_on_the_cube_is_lipschitz_pairwise() {
    let metric = WeightedHamming::normalized(bits(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let values: Vec<(usize, f64)> = (0..4)
            .map(|_| (rng.random_range(0..8), rng.random_range(-2.0..2.0)))
            .collect();
        let f = mcshane_extension(&values, &metric).unwrap();
        let mut pairs = 0;
        for x in 0..8 {
            for y in 0..8 {
                assert!((f[x] - f[y]).abs() <= metric.dist_ranks(x, y) + 1e-12);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 64);
        assert!(check_lipschitz(&f, &metric).is_ok());
        for &(x, v) in &values {
            assert!(f[x] <= v);
        }
    }
}

#[test]
fn kantorovich_duality_spot_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 3;
    let metric = WeightedHamming::normalized(bits(), n);
    let mut two_point_tight = 0;
    for instance in 0..20 {
        let (mu, nu) = if instance % 2 == 0 {
            let x = rng.random_range(0..8);
            let y = rng.random_range(0..8);
            (
                ExactMeasure::point_mass(bits(), n, x).unwrap(),
                ExactMeasure::point_mass(bits(), n, y).unwrap(),
            )
        } else {
            (
                random_measure(&bits(), n, &mut rng),
                random_measure(&bits(), n, &mut rng),
            )
        };
        let (d, _) = wasserstein(&mu, &nu, &metric).unwrap();
        let mut best = f64::NEG_INFINITY;
        for _ in 0..500 {
            let k = rng.random_range(1..=3);
            let values: Vec<(usize, f64)> = (0..k)
                .map(|_| (rng.random_range(0..8), rng.random_range(0.0..1.0)))
                .collect();
            let f = mcshane_extension(&values, &metric).unwrap();
            best = best.max(mu.expectation(&f) - nu.expectation(&f));
        }
        assert!(best <= d + 1e-9, "instance {instance}: {best} > {d}");
        if instance % 2 == 0 && (d == 0.0 || best >= 0.95 * d) {
            two_point_tight += 1;
        }
    }
    assert!(two_point_tight >= 1);
}

#[test]
fn guards() {
    let space = bits();
    let big = WeightedHamming::normalized(space.clone(), 21);
    assert!(mcshane_extension(&[(0, 0.0)], &big).is_err());
    let mu = ExactMeasure::uniform(space.clone(), 12).unwrap();
    let nu = ExactMeasure::uniform(space.clone(), 12).unwrap();
    let metric = WeightedHamming::normalized(space, 12);
    assert!(wasserstein(&mu, &nu, &metric).is_err());
    assert!(wasserstein_hamming_graph(&mu, &nu, &metric).is_ok());
}
