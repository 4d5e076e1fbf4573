//! Executable checks of the concentration inequalities on exact small
//! instances, each summarized as an [`InequalityReport`].
//!
//! A report records the smallest slack `bound - achieved` over its instances
//! and the instance attaining it. Inequalities pass when the worst slack is
//! at least `-tolerance`; identities record `-|lhs - rhs|` (or its relative
//! form) as their slack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::broadcast::{
    eta_coefficients, exact_measure, kernel_lipschitz, linear_exp_moment,
    magnetization_distribution, sample, ExactMeasure, IsingModel, Kernel, MarkovTreeModel,
    StateSpace,
};
use crate::delta::{delta_profile, pair_distance_sum};
use crate::error::{Error, Result};
use crate::spectral::{mixing_matrix_with_order, mixing_norms, random_bfs_order};
use crate::transport::{
    check_lipschitz, mcshane_extension, relative_entropy, wasserstein_hamming_graph,
    WeightedHamming,
};
use crate::tree::{GeneratorSpec, RootedTree, VertexId};

/// Default slack tolerance.
pub const TOLERANCE: f64 = 1e-9;

/// Relative tolerance for identities whose two sides are both exact DP values.
pub const EXACT_IDENTITY_TOLERANCE: f64 = 1e-10;

/// `λ` grid of the exponential-moment check.
pub const LAMBDA_GRID: [f64; 7] = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];

/// `ε` grid of the tail check.
pub const EPSILON_GRID: [f64; 4] = [0.1, 0.25, 0.4, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub instances: usize,
    /// Minimum over instances of `bound - achieved`.
    pub worst_slack: f64,
    pub passed: bool,
    /// Description of the instance attaining the worst slack.
    pub witness: String,
    pub tolerance: f64,
}

impl InequalityReport {
    /// Recomputes `passed` from the slack and tolerance.
    pub fn recheck(&self) -> bool {
        self.worst_slack >= -self.tolerance
    }
}

/// Min-reduction of slacks into a report.
#[derive(Debug, Clone)]
pub struct ReportBuilder {
    name: String,
    tolerance: f64,
    instances: usize,
    worst: f64,
    witness: String,
}

impl ReportBuilder {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        ReportBuilder {
            name: name.into(),
            tolerance,
            instances: 0,
            worst: f64::INFINITY,
            witness: String::new(),
        }
    }

    /// Records one instance; the witness is built only when it becomes the worst.
    pub fn record(&mut self, slack: f64, witness: impl FnOnce() -> String) {
        self.instances += 1;
        // NaN slack is treated as a failure
        let slack = if slack.is_nan() {
            f64::NEG_INFINITY
        } else {
            slack
        };
        if slack < self.worst || self.instances == 1 {
            self.worst = slack;
            self.witness = witness();
        }
    }

    pub fn merge(&mut self, other: ReportBuilder) {
        if other.instances == 0 {
            return;
        }
        if self.instances == 0 || other.worst < self.worst {
            self.worst = other.worst;
            self.witness = other.witness;
        }
        self.instances += other.instances;
    }

    pub fn finish(self) -> InequalityReport {
        InequalityReport {
            passed: self.worst >= -self.tolerance,
            name: self.name,
            instances: self.instances,
            worst_slack: self.worst,
            witness: self.witness,
            tolerance: self.tolerance,
        }
    }
}

/// A test function for the exponential-moment check, 1-Lipschitz in the
/// normalized Hamming metric.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `f(x) = (1/n) Σ_v c_v(x_v)` with `c_v` 1-Lipschitz in the base metric.
    Linear {
        label: String,
        weights: Vec<Vec<f64>>,
    },
    /// Values over all configurations, by rank.
    Table { label: String, values: Vec<f64> },
}

impl TestFunction {
    /// Density of state 1 (two-state models).
    pub fn magnetization(n: usize) -> Self {
        TestFunction::Linear {
            label: "magnetization".into(),
            weights: vec![vec![0.0, 1.0]; n],
        }
    }

    pub fn label(&self) -> &str {
        match self {
            TestFunction::Linear { label, .. } | TestFunction::Table { label, .. } => label,
        }
    }
}

/// `count` McShane extensions of random values on random small point sets.
pub fn random_lipschitz_functions(
    metric: &WeightedHamming,
    count: usize,
    seed: u64,
) -> Result<Vec<TestFunction>> {
    let q = metric.space().size();
    let configs = q
        .checked_pow(metric.coords() as u32)
        .ok_or(Error::Overflow("configuration count".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let points = rng.random_range(1..=4usize);
            let values: Vec<(usize, f64)> = (0..points)
                .map(|_| (rng.random_range(0..configs), rng.random_range(0.0..1.0)))
                .collect();
            Ok(TestFunction::Table {
                label: format!("mcshane#{i}"),
                values: mcshane_extension(&values, metric)?,
            })
        })
        .collect()
}

fn model_delta(model: &MarkovTreeModel) -> Result<(f64, f64)> {
    let b = kernel_lipschitz(model);
    Ok((b, delta_profile(model.tree(), b)?.big_delta))
}

/// `∫ e^{nλ(f - ∫f)} dν <= e^{λ²Δ²/8}` with `Δ` at `b` = the kernel
/// Lipschitz constant.
pub fn check_exp_moment(
    model: &MarkovTreeModel,
    functions: &[TestFunction],
    lambdas: &[f64],
) -> Result<InequalityReport> {
    let (b, big_delta) = model_delta(model)?;
    let n = model.tree().len();
    let metric = WeightedHamming::normalized(model.space().clone(), n);
    let mut nu: Option<ExactMeasure> = None;
    let mut report = ReportBuilder::new("exponential moment", TOLERANCE);
    for f in functions {
        let moment: Box<dyn Fn(f64) -> Result<f64>> = match f {
            TestFunction::Linear { weights, .. } => {
                // reject before evaluating any λ
                linear_exp_moment(model, weights, 0.0)?;
                Box::new(move |lambda| linear_exp_moment(model, weights, lambda))
            }
            TestFunction::Table { values, .. } => {
                check_lipschitz(values, &metric)?;
                if nu.is_none() {
                    nu = Some(exact_measure(model)?);
                }
                let nu = nu.clone().unwrap();
                let values = values.clone();
                Box::new(move |lambda| Ok(nu.centered_exp_moment(&values, n as f64 * lambda)))
            }
        };
        for &lambda in lambdas {
            let achieved = moment(lambda)?;
            let bound = (lambda * lambda * big_delta * big_delta / 8.0).exp();
            report.record(bound - achieved, || {
                format!(
                    "f={} λ={lambda} b={b} moment={achieved} bound={bound}",
                    f.label()
                )
            });
        }
    }
    Ok(report.finish())
}

/// The transportation test family: `ν` itself, all point masses, tilts
/// `μ_λ ∝ e^{nλf} ν` of the magnetization for `λ ∈ {±0.5, ±1}`, and every
/// single-vertex conditioning `ν(· | X_v = s)` of positive probability.
pub fn t1_family(nu: &ExactMeasure) -> Result<Vec<(String, ExactMeasure)>> {
    let mut family = vec![("nu".to_string(), nu.clone())];
    for r in 0..nu.len() {
        family.push((
            format!("point {:?}", nu.configuration(r)),
            ExactMeasure::point_mass(nu.space().clone(), nu.coords(), r)?,
        ));
    }
    if nu.space().size() == 2 {
        let ones: Vec<f64> = (0..nu.len())
            .map(|r| nu.configuration(r).iter().sum::<usize>() as f64)
            .collect();
        for lambda in [-1.0, -0.5, 0.5, 1.0] {
            // e^{nλf} with f = ones / n
            family.push((format!("tilt λ={lambda}"), nu.tilt(&ones, lambda)?));
        }
    }
    for v in 0..nu.coords() {
        for s in 0..nu.space().size() {
            if let Ok(c) = nu.condition(v, s) {
                family.push((format!("condition X_{v}={s}"), c));
            }
        }
    }
    Ok(family)
}

/// `d̄(μ, ν) <= (Δ/n) √(D(μ‖ν)/2)` for each `μ`; infinite entropy is
/// vacuously satisfied and skipped.
pub fn check_t1(
    model: &MarkovTreeModel,
    mus: &[(String, ExactMeasure)],
) -> Result<InequalityReport> {
    let (_, big_delta) = model_delta(model)?;
    let nu = exact_measure(model)?;
    let n = model.tree().len();
    let metric = WeightedHamming::normalized(model.space().clone(), n);
    let mut report = ReportBuilder::new("transportation", TOLERANCE);
    for (label, mu) in mus {
        let entropy = relative_entropy(mu, &nu)?;
        if entropy.is_infinite() {
            continue;
        }
        let distance = wasserstein_hamming_graph(mu, &nu, &metric)?.distance;
        let bound = big_delta / n as f64 * (entropy / 2.0).sqrt();
        report.record(bound - distance, || {
            format!("μ={label} d̄={distance} D={entropy} bound={bound}")
        });
    }
    Ok(report.finish())
}

/// `ν{|f - ∫f| >= ε} <= 2 e^{-2n²ε²/Δ²}` for the magnetization, with the
/// exact tail from the count distribution.
pub fn check_tail(model: &IsingModel, epsilons: &[f64]) -> Result<InequalityReport> {
    let n = model.tree().len() as f64;
    let big_delta = delta_profile(model.tree(), model.b())?.big_delta;
    let pgf = magnetization_distribution(model)?;
    let mut report = ReportBuilder::new("tail", TOLERANCE);
    for &eps in epsilons {
        let tail = pgf.centered_tail(eps);
        let bound = 2.0 * (-2.0 * n * n * eps * eps / (big_delta * big_delta)).exp();
        report.record(bound - tail, || {
            format!("ε={eps} p={} tail={tail} bound={bound}", model.p())
        });
    }
    Ok(report.finish())
}

/// Monte Carlo estimate of `ν{|f - 1/2| >= ε}` for each `ε`; advisory only.
pub fn empirical_tail(model: &IsingModel, epsilons: &[f64], samples: u64, seed: u64) -> Vec<f64> {
    let n = model.tree().len();
    let mut hits = vec![0u64; epsilons.len()];
    for x in sample(model.model(), samples, seed) {
        let ones = x.iter().filter(|&&s| s == 1).count();
        let gap = (2 * ones).abs_diff(n) as f64;
        for (h, &eps) in hits.iter_mut().zip(epsilons) {
            if gap >= 2.0 * n as f64 * eps - 1e-9 {
                *h += 1;
            }
        }
    }
    hits.iter().map(|&h| h as f64 / samples as f64).collect()
}

/// The lower-bound chain for the optimal constant: `4n² Var f = S`,
/// `S >= (1 - b²) Δ²`, and `Δ √(1 - b²) / 2 <= Δ`.
pub fn check_optimality_chain(tree: &RootedTree, p: f64) -> Result<Vec<InequalityReport>> {
    let model = IsingModel::new(tree.clone(), p)?;
    let b = model.b();
    let n = tree.len() as f64;
    let s = pair_distance_sum(tree, b)?;
    let delta_sq = delta_profile(tree, b)?.delta_sq();
    let var = magnetization_distribution(&model)?.variance_density();

    let mut identity = ReportBuilder::new("variance identity", EXACT_IDENTITY_TOLERANCE);
    let lhs = 4.0 * n * n * var;
    identity.record(-(lhs - s).abs() / s, || format!("p={p} 4n²Var={lhs} S={s}"));

    let mut lower = ReportBuilder::new("pair sum lower bound", TOLERANCE);
    let rhs = (1.0 - b * b) * delta_sq;
    lower.record(s - rhs, || format!("p={p} S={s} (1-b²)Δ²={rhs}"));

    let mut gap = ReportBuilder::new("optimal constant gap", TOLERANCE);
    let big_delta = delta_sq.sqrt();
    let c_lower = big_delta * (1.0 - b * b).sqrt() / 2.0;
    gap.record(big_delta - c_lower, || {
        format!("p={p} C>={c_lower} Δ={big_delta}")
    });

    Ok(vec![identity.finish(), lower.finish(), gap.finish()])
}

/// Mixing-matrix identities `‖Δ̃‖∞ = max δ`, `‖Δ̃ 1‖₂ = Δ` and the bound
/// `Δ/√n <= ‖Δ̃‖₂`, under the canonical and `extra_orders` random
/// breadth-first orders.
pub fn check_mixing_corollary(
    tree: &RootedTree,
    b: f64,
    extra_orders: usize,
    seed: u64,
) -> Result<Vec<InequalityReport>> {
    let profile = delta_profile(tree, b)?;
    let n = tree.len() as f64;
    let mut orders = vec![("canonical".to_string(), tree.bfs_order())];
    for i in 0..extra_orders {
        let s = seed.wrapping_add(i as u64);
        orders.push((format!("shuffled seed={s}"), random_bfs_order(tree, s)));
    }
    let mut inf = ReportBuilder::new("mixing inf-norm identity", TOLERANCE);
    let mut ones = ReportBuilder::new("mixing row-sum identity", TOLERANCE);
    let mut two = ReportBuilder::new("mixing two-norm bound", TOLERANCE);
    for (label, order) in &orders {
        let m = mixing_matrix_with_order(tree, b, order)?;
        let norms = mixing_norms(&m);
        let max_delta = profile.max_delta();
        inf.record(-(norms.inf_norm - max_delta).abs(), || {
            format!("{label} b={b} ‖Δ̃‖∞={} max δ={max_delta}", norms.inf_norm)
        });
        let row_norm = norms.row_sums.iter().map(|x| x * x).sum::<f64>().sqrt();
        ones.record(-(row_norm - profile.big_delta).abs(), || {
            format!("{label} b={b} ‖Δ̃1‖₂={row_norm} Δ={}", profile.big_delta)
        });
        let lower = profile.big_delta / n.sqrt();
        two.record(norms.two_norm - lower, || {
            format!("{label} b={b} ‖Δ̃‖₂={} Δ/√n={lower}", norms.two_norm)
        });
    }
    Ok(vec![inf.finish(), ones.finish(), two.finish()])
}

/// The brute-force `η̄` matrix of the exact Ising measure equals the mixing
/// matrix `Σ b^r Q^r` along a breadth-first order.
pub fn check_eta_matrix(model: &IsingModel, order: &[VertexId]) -> Result<InequalityReport> {
    let nu = exact_measure(model.model())?;
    let idx: Vec<usize> = order.iter().map(|v| v.index()).collect();
    let eta = eta_coefficients(&nu, &idx)?;
    let m = mixing_matrix_with_order(model.tree(), model.b(), order)?;
    let n = order.len();
    let mut report = ReportBuilder::new("eta mixing identity", TOLERANCE);
    for i in 0..n {
        for j in 0..n {
            let (a, e) = (m.get(i, j), eta[i * n + j]);
            report.record(-(a - e).abs(), || {
                format!("p={} positions ({i},{j}) η̄={e} b^d={a}", model.p())
            });
        }
    }
    Ok(report.finish())
}

/// Named small trees for the exact checks, all with at most 12 vertices.
pub fn corpus(seed: u64) -> Result<Vec<(String, RootedTree)>> {
    let mut trees = vec![
        ("singleton".to_string(), RootedTree::singleton()),
        ("edge".into(), RootedTree::from_parents(&[-1, 0])?),
        ("star-2".into(), RootedTree::from_parents(&[-1, 0, 0])?),
        (
            "star-5".into(),
            RootedTree::from_parents(&[-1, 0, 0, 0, 0, 0])?,
        ),
        (
            "caterpillar".into(),
            RootedTree::from_parents(&[-1, 0, 0, 1, 1, 3, 5, 5])?,
        ),
    ];
    for spec in [
        GeneratorSpec::Path { length: 4 },
        GeneratorSpec::Path { length: 11 },
        GeneratorSpec::Dary { d: 2, depth: 2 },
        GeneratorSpec::ThreeOne { depth: 2 },
    ] {
        trees.push((spec.to_string(), RootedTree::generate(&spec)?));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..6 {
        let n = rng.random_range(3..=12usize);
        let s = rng.random();
        trees.push((
            format!("recursive#{i} n={n}"),
            RootedTree::random_recursive(n, s),
        ));
    }
    for i in 0..4 {
        let spec = GeneratorSpec::GaltonWatson {
            offspring: vec![0.3, 0.3, 0.4],
            depth: 3,
            seed: rng.random(),
        };
        let t = RootedTree::generate(&spec)?;
        if t.len() <= 12 {
            trees.push((format!("gw#{i}"), t));
        }
    }
    Ok(trees)
}

/// Flip probabilities used across the corpus.
pub const CORPUS_P: [f64; 3] = [0.1, 0.25, 0.5];

/// A three-state model on a line metric with an asymmetric kernel.
pub fn three_state_model(tree: RootedTree) -> Result<MarkovTreeModel> {
    let space = StateSpace::new(3, vec![0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0])?;
    let kernel = Kernel::new(3, vec![0.6, 0.3, 0.1, 0.2, 0.6, 0.2, 0.1, 0.4, 0.5])?;
    MarkovTreeModel::homogeneous(tree, space, vec![0.3, 0.3, 0.4], kernel)
}

/// Every check on the corpus.
pub fn run_all(seed: u64) -> Result<Vec<InequalityReport>> {
    let trees = corpus(seed)?;
    let mut exp = ReportBuilder::new("exponential moment", TOLERANCE);
    let mut t1 = ReportBuilder::new("transportation", TOLERANCE);
    let mut tail = ReportBuilder::new("tail", TOLERANCE);
    let mut chain: Vec<ReportBuilder> = Vec::new();
    let mut mixing: Vec<ReportBuilder> = Vec::new();
    let mut eta = ReportBuilder::new("eta mixing identity", TOLERANCE);

    let absorb = |acc: &mut ReportBuilder, r: InequalityReport, tree: &str| {
        let mut b = ReportBuilder::new(r.name.clone(), r.tolerance);
        b.instances = r.instances;
        b.worst = r.worst_slack;
        b.witness = format!("tree={tree} {}", r.witness);
        acc.merge(b);
    };
    let absorb_all = |acc: &mut Vec<ReportBuilder>, rs: Vec<InequalityReport>, tree: &str| {
        if acc.is_empty() {
            acc.extend(
                rs.iter()
                    .map(|r| ReportBuilder::new(r.name.clone(), r.tolerance)),
            );
        }
        for (a, r) in acc.iter_mut().zip(rs) {
            absorb(a, r, tree);
        }
    };

    for (ti, (name, tree)) in trees.iter().enumerate() {
        let n = tree.len();
        let fseed = seed.wrapping_mul(1_000_003).wrapping_add(ti as u64);
        for &p in &CORPUS_P {
            let model = IsingModel::new(tree.clone(), p)?;
            let metric = WeightedHamming::normalized(StateSpace::discrete(2)?, n);
            let mut functions = vec![TestFunction::magnetization(n)];
            functions.extend(random_lipschitz_functions(&metric, 20, fseed)?);
            absorb(
                &mut exp,
                check_exp_moment(model.model(), &functions, &LAMBDA_GRID)?,
                name,
            );
            if n <= 8 {
                let nu = exact_measure(model.model())?;
                absorb(&mut t1, check_t1(model.model(), &t1_family(&nu)?)?, name);
            }
            absorb(&mut tail, check_tail(&model, &EPSILON_GRID)?, name);
            absorb_all(&mut chain, check_optimality_chain(tree, p)?, name);
            if n <= 10 {
                let order = random_bfs_order(tree, fseed);
                absorb(&mut eta, check_eta_matrix(&model, &order)?, name);
            }
        }
        for b in [0.3, 0.6, 0.9] {
            absorb_all(
                &mut mixing,
                check_mixing_corollary(tree, b, 3, fseed)?,
                name,
            );
        }
        if n <= 7 {
            let model = three_state_model(tree.clone())?;
            let metric = WeightedHamming::normalized(model.space().clone(), n);
            let mut functions = vec![TestFunction::Linear {
                label: "line position".into(),
                weights: vec![vec![0.0, 0.5, 1.0]; n],
            }];
            functions.extend(random_lipschitz_functions(&metric, 5, fseed)?);
            absorb(
                &mut exp,
                check_exp_moment(&model, &functions, &LAMBDA_GRID)?,
                name,
            );
            if n <= 5 {
                let nu = exact_measure(&model)?;
                absorb(&mut t1, check_t1(&model, &t1_family(&nu)?)?, name);
            }
        }
    }
    let mut out = vec![exp.finish(), t1.finish(), tail.finish()];
    out.extend(chain.into_iter().map(ReportBuilder::finish));
    out.extend(mixing.into_iter().map(ReportBuilder::finish));
    out.push(eta.finish());
    Ok(out)
}
