//! Finite-state broadcast models on rooted trees.
//!
//! A model is a root distribution plus a row-stochastic kernel for every
//! non-root vertex; the joint law is `ν(a) = ν_ρ(a_ρ) Π_v q_v(a_v | a_{π(v)})`.
//! The two-state symmetric channel with flip probability `p` is the Ising
//! model, for which the magnetization distribution and linear exponential
//! moments are computed exactly by a bottom-up dynamic program.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delta::pair_distance_sum;
use crate::error::{Error, Result};
use crate::transport::base_wasserstein;
use crate::tree::{RootedTree, VertexId};

/// Largest configuration space [`exact_measure`] will enumerate.
pub const EXACT_MEASURE_LIMIT: u128 = 1 << 20;

/// Largest tree for the magnetization dynamic program.
pub const MAGNETIZATION_LIMIT: usize = 20_000;

const STOCHASTIC_TOL: f64 = 1e-12;

/// A finite metric space of states with diameter at most 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    size: usize,
    metric: Vec<f64>,
}

impl StateSpace {
    /// States `0..size` at mutual distance 1.
    pub fn discrete(size: usize) -> Result<Self> {
        let metric = (0..size * size)
            .map(|k| if k / size == k % size { 0.0 } else { 1.0 })
            .collect();
        Self::new(size, metric)
    }

    /// `metric` is row-major `size × size`.
    pub fn new(size: usize, metric: Vec<f64>) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidModel(format!(
                "state space needs at least 2 states, got {size}"
            )));
        }
        if metric.len() != size * size {
            return Err(Error::InvalidModel(format!(
                "metric has {} entries, expected {}",
                metric.len(),
                size * size
            )));
        }
        let d = |a: usize, b: usize| metric[a * size + b];
        for a in 0..size {
            if d(a, a) != 0.0 {
                return Err(Error::InvalidModel(format!("d({a},{a}) is not 0")));
            }
            for b in 0..size {
                let x = d(a, b);
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::InvalidModel(format!(
                        "d({a},{b}) = {x} is outside [0, 1]"
                    )));
                }
                if x != d(b, a) {
                    return Err(Error::InvalidModel(format!("d({a},{b}) is not symmetric")));
                }
                if a != b && x == 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "d({a},{b}) = 0 for distinct states"
                    )));
                }
                for c in 0..size {
                    if d(a, c) > d(a, b) + d(b, c) + 1e-12 {
                        return Err(Error::InvalidModel(format!(
                            "triangle inequality fails for ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        Ok(StateSpace { size, metric })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.metric[a * self.size + b]
    }

    pub fn is_discrete(&self) -> bool {
        (0..self.size).all(|a| (0..self.size).all(|b| self.dist(a, b) == f64::from(a != b)))
    }
}

/// Row-stochastic matrix `q(to | from)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    size: usize,
    rows: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, rows: Vec<f64>) -> Result<Self> {
        if rows.len() != size * size {
            return Err(Error::InvalidModel(format!(
                "kernel has {} entries, expected {}",
                rows.len(),
                size * size
            )));
        }
        for (r, row) in rows.chunks(size).enumerate() {
            check_distribution(row)
                .map_err(|why| Error::InvalidModel(format!("kernel row {r}: {why}")))?;
        }
        Ok(Kernel { size, rows })
    }

    /// Two-state channel flipping with probability `p`.
    pub fn symmetric_flip(p: f64) -> Self {
        Kernel {
            size: 2,
            rows: vec![1.0 - p, p, p, 1.0 - p],
        }
    }

    #[inline]
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.rows[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rows[from * self.size..(from + 1) * self.size]
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if let Some(x) = p.iter().find(|x| **x < 0.0 || !x.is_finite()) {
        return Err(format!("entry {x} is not a probability"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(format!("entries sum to {total}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovTreeModel {
    tree: RootedTree,
    space: StateSpace,
    root_dist: Vec<f64>,
    /// Kernel of vertex `v` is stored at `v - 1`.
    kernels: Vec<Kernel>,
}

impl MarkovTreeModel {
    /// `kernels[i]` is the kernel of vertex `i + 1`.
    pub fn new(
        tree: RootedTree,
        space: StateSpace,
        root_dist: Vec<f64>,
        kernels: Vec<Kernel>,
    ) -> Result<Self> {
        if root_dist.len() != space.size() {
            return Err(Error::InvalidModel(format!(
                "root distribution has {} entries for {} states",
                root_dist.len(),
                space.size()
            )));
        }
        check_distribution(&root_dist)
            .map_err(|why| Error::InvalidModel(format!("root distribution: {why}")))?;
        if kernels.len() != tree.len() - 1 {
            return Err(Error::InvalidModel(format!(
                "{} kernels for {} non-root vertices",
                kernels.len(),
                tree.len() - 1
            )));
        }
        if let Some((i, k)) = kernels
            .iter()
            .enumerate()
            .find(|(_, k)| k.size() != space.size())
        {
            return Err(Error::InvalidModel(format!(
                "kernel of vertex {} has {} states, space has {}",
                i + 1,
                k.size(),
                space.size()
            )));
        }
        Ok(MarkovTreeModel {
            tree,
            space,
            root_dist,
            kernels,
        })
    }

    /// Same kernel at every non-root vertex.
    pub fn homogeneous(
        tree: RootedTree,
        space: StateSpace,
        root_dist: Vec<f64>,
        kernel: Kernel,
    ) -> Result<Self> {
        let kernels = vec![kernel; tree.len() - 1];
        Self::new(tree, space, root_dist, kernels)
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn root_dist(&self) -> &[f64] {
        &self.root_dist
    }

    pub fn kernel(&self, v: VertexId) -> Option<&Kernel> {
        v.index().checked_sub(1).map(|i| &self.kernels[i])
    }

    fn kernel_of(&self, i: usize) -> &Kernel {
        &self.kernels[i - 1]
    }

    /// Per-vertex marginal laws.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let q = self.space.size();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.tree.len());
        out.push(self.root_dist.clone());
        for i in 1..self.tree.len() {
            let parent = self.tree.parent(VertexId(i)).unwrap().index();
            let k = self.kernel_of(i);
            let m = (0..q)
                .map(|s| (0..q).map(|r| out[parent][r] * k.prob(r, s)).sum())
                .collect();
            out.push(m);
        }
        out
    }
}

/// Uniform root and the symmetric flip kernel with probability `p ∈ (0, 1/2]`
/// at every non-root vertex; `b = 1 - 2p`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    model: MarkovTreeModel,
    p: f64,
}

impl IsingModel {
    pub fn new(tree: RootedTree, p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 0.5) {
            return Err(Error::InvalidFlipProbability(p));
        }
        let model = MarkovTreeModel::homogeneous(
            tree,
            StateSpace::discrete(2)?,
            vec![0.5, 0.5],
            Kernel::symmetric_flip(p),
        )?;
        Ok(IsingModel { model, p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn b(&self) -> f64 {
        1.0 - 2.0 * self.p
    }

    pub fn model(&self) -> &MarkovTreeModel {
        &self.model
    }

    pub fn tree(&self) -> &RootedTree {
        self.model.tree()
    }

    /// `E[exp(λ Σ_v (c_v(X_v) - E c_v(X_v)))]` for per-vertex values
    /// `c_v = (value at 0, value at 1)`.
    pub fn exp_moment(&self, weights: &[(f64, f64)], lambda: f64) -> Result<f64> {
        let w: Vec<Vec<f64>> = weights.iter().map(|&(a, b)| vec![a, b]).collect();
        linear_exp_moment(&self.model, &w, lambda)
    }
}

impl AsRef<MarkovTreeModel> for IsingModel {
    fn as_ref(&self) -> &MarkovTreeModel {
        &self.model
    }
}

/// Per-vertex weights of the magnetization `#ones`.
pub fn magnetization_weights(n: usize) -> Vec<(f64, f64)> {
    vec![(0.0, 1.0); n]
}

/// Smallest `b` with every kernel `b`-Lipschitz from the base metric to the
/// transportation metric it induces.
pub fn kernel_lipschitz(model: &MarkovTreeModel) -> f64 {
    let space = model.space();
    let q = space.size();
    let mut best = 0.0f64;
    let mut seen: Vec<&Kernel> = Vec::new();
    for k in &model.kernels {
        if seen.contains(&k) {
            continue;
        }
        seen.push(k);
        for x in 0..q {
            for y in (x + 1)..q {
                let moved = base_wasserstein(k.row(x), k.row(y), space);
                best = best.max(moved / space.dist(x, y));
            }
        }
    }
    best
}

/// `P^m = ½[[1+b^m, 1-b^m], [1-b^m, 1+b^m]]` with `b = 1 - 2p`.
pub fn n_step_matrix(p: f64, m: u32) -> Result<[[f64; 2]; 2]> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::InvalidFlipProbability(p));
    }
    let bm = (1.0 - 2.0 * p).powi(m as i32);
    let same = 0.5 * (1.0 + bm);
    let diff = 0.5 * (1.0 - bm);
    Ok([[same, diff], [diff, same]])
}

/// Configuration number `index` from the stream for `seed`.
///
/// Each configuration owns its own ChaCha stream, so a run of `count`
/// samples is the same whether drawn serially or split across workers.
pub fn sample_one(model: &MarkovTreeModel, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = model.tree.len();
    let mut x = Vec::with_capacity(n);
    x.push(draw(&mut rng, &model.root_dist));
    for i in 1..n {
        let parent = model.tree.parent(VertexId(i)).unwrap().index();
        x.push(draw(&mut rng, model.kernel_of(i).row(x[parent])));
    }
    x
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (s, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    // rounding left `u` above the cumulative total
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn sample(
    model: &MarkovTreeModel,
    count: u64,
    seed: u64,
) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..count).map(move |i| sample_one(model, seed, i))
}

/// An explicit probability vector over `ℋ^n`.
///
/// Configurations are ranked with coordinate 0 as the most significant digit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMeasure {
    space: StateSpace,
    n: usize,
    probs: Vec<f64>,
}

fn configuration_count(q: usize, n: usize) -> Option<u128> {
    (q as u128).checked_pow(u32::try_from(n).ok()?)
}

impl ExactMeasure {
    pub fn new(space: StateSpace, n: usize, probs: Vec<f64>) -> Result<Self> {
        let expected = configuration_count(space.size(), n)
            .filter(|&c| c <= EXACT_MEASURE_LIMIT)
            .ok_or(Error::SizeGuard {
                what: "configuration space",
                required: configuration_count(space.size(), n).unwrap_or(u128::MAX),
                limit: EXACT_MEASURE_LIMIT,
            })?;
        if probs.len() as u128 != expected {
            return Err(Error::InvalidMeasure(format!(
                "{} probabilities for {expected} configurations",
                probs.len()
            )));
        }
        if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidMeasure("negative or non-finite mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidMeasure(format!("total mass {total}")));
        }
        Ok(ExactMeasure { space, n, probs })
    }

    pub fn point_mass(space: StateSpace, n: usize, rank: usize) -> Result<Self> {
        let count = configuration_count(space.size(), n).unwrap_or(u128::MAX);
        if count > EXACT_MEASURE_LIMIT {
            return Err(Error::SizeGuard {
                what: "configuration space",
                required: count,
                limit: EXACT_MEASURE_LIMIT,
            });
        }
        let mut probs = vec![0.0; count as usize];
        *probs
            .get_mut(rank)
            .ok_or_else(|| Error::InvalidMeasure(format!("rank {rank} out of range")))? = 1.0;
        Self::new(space, n, probs)
    }

    pub fn uniform(space: StateSpace, n: usize) -> Result<Self> {
        let count = configuration_count(space.size(), n).unwrap_or(u128::MAX);
        if count > EXACT_MEASURE_LIMIT {
            return Err(Error::SizeGuard {
                what: "configuration space",
                required: count,
                limit: EXACT_MEASURE_LIMIT,
            });
        }
        let probs = vec![1.0 / count as f64; count as usize];
        Self::new(space, n, probs)
    }

    /// Product of per-coordinate laws.
    pub fn product(space: StateSpace, factors: &[Vec<f64>]) -> Result<Self> {
        let q = space.size();
        let mut probs = vec![1.0];
        for f in factors {
            if f.len() != q {
                return Err(Error::InvalidMeasure(format!(
                    "factor has {} entries for {q} states",
                    f.len()
                )));
            }
            probs = probs
                .iter()
                .flat_map(|&p| f.iter().map(move |&x| p * x))
                .collect();
        }
        Self::new(space, factors.len(), probs)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Number of coordinates.
    pub fn coords(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// State of coordinate `i` in configuration `rank`.
    #[inline]
    pub fn coordinate(&self, rank: usize, i: usize) -> usize {
        let q = self.space.size();
        (rank / q.pow((self.n - 1 - i) as u32)) % q
    }

    pub fn configuration(&self, rank: usize) -> Vec<usize> {
        (0..self.n).map(|i| self.coordinate(rank, i)).collect()
    }

    pub fn rank_of(&self, config: &[usize]) -> usize {
        let q = self.space.size();
        config.iter().fold(0, |r, &s| r * q + s)
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.probs.iter().zip(f).map(|(p, x)| p * x).sum()
    }

    /// `∫ exp(scale (f - ∫f)) dμ`.
    pub fn centered_exp_moment(&self, f: &[f64], scale: f64) -> f64 {
        let mean = self.expectation(f);
        self.probs
            .iter()
            .zip(f)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, x)| p * (scale * (x - mean)).exp())
            .sum()
    }

    /// `μ_λ ∝ e^{scale · f} μ`.
    pub fn tilt(&self, f: &[f64], scale: f64) -> Result<Self> {
        let top = f
            .iter()
            .zip(&self.probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(x, _)| scale * x)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = self
            .probs
            .iter()
            .zip(f)
            .map(|(p, x)| {
                if *p > 0.0 {
                    p * (scale * x - top).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(self.space.clone(), self.n, probs)
    }

    /// `μ( · | X_i = s)`.
    pub fn condition(&self, i: usize, s: usize) -> Result<Self> {
        let mut probs: Vec<f64> = (0..self.len())
            .map(|r| {
                if self.coordinate(r, i) == s {
                    self.probs[r]
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure(format!(
                "conditioning on X_{i} = {s} has probability 0"
            )));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(self.space.clone(), self.n, probs)
    }

    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.space.size()];
        for (r, p) in self.probs.iter().enumerate() {
            m[self.coordinate(r, i)] += p;
        }
        m
    }

    /// Law of `#{i : X_i = 1}` (two-state spaces).
    pub fn count_distribution(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n + 1];
        for (r, p) in self.probs.iter().enumerate() {
            let ones = (0..self.n).filter(|&i| self.coordinate(r, i) == 1).count();
            c[ones] += p;
        }
        c
    }
}

/// The full joint law of a model, for `|ℋ|^n <= 2^20`.
pub fn exact_measure(model: &MarkovTreeModel) -> Result<ExactMeasure> {
    let q = model.space.size();
    let n = model.tree.len();
    let count = configuration_count(q, n).unwrap_or(u128::MAX);
    if count > EXACT_MEASURE_LIMIT {
        return Err(Error::SizeGuard {
            what: "exact measure",
            required: count,
            limit: EXACT_MEASURE_LIMIT,
        });
    }
    // extend the prefix law over vertices 0..i one vertex at a time
    let mut probs = model.root_dist.clone();
    for i in 1..n {
        let parent = model.tree.parent(VertexId(i)).unwrap().index();
        let k = model.kernel_of(i);
        let shift = q.pow((i - 1 - parent) as u32);
        let mut next = Vec::with_capacity(probs.len() * q);
        for (r, &p) in probs.iter().enumerate() {
            let xp = (r / shift) % q;
            next.extend(k.row(xp).iter().map(|&w| p * w));
        }
        probs = next;
    }
    ExactMeasure::new(model.space.clone(), n, probs)
}

/// Law of the number of ones in an Ising configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationPgf {
    /// `coefficients[m] = P(#ones = m)`.
    pub coefficients: Vec<f64>,
}

impl MagnetizationPgf {
    pub fn n(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * z + c)
    }

    pub fn mean_density(&self) -> f64 {
        let n = self.n() as f64;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(m, c)| c * m as f64 / n)
            .sum()
    }

    /// Variance of `#ones / n`.
    pub fn variance_density(&self) -> f64 {
        let n = self.n() as f64;
        let mean = self.mean_density();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let x = m as f64 / n - mean;
                c * x * x
            })
            .sum()
    }

    /// `P(|#ones/n - 1/2| >= ε)`, comparing `|2m - n| >= 2nε` so the
    /// boundary counts are decided without rounding.
    pub fn centered_tail(&self, eps: f64) -> f64 {
        let n = self.n() as f64;
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(m, _)| (2.0 * *m as f64 - n).abs() >= 2.0 * n * eps - 1e-9)
            .map(|(_, c)| c)
            .sum()
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Exact distribution of `#ones` by per-spin subtree polynomials.
pub fn magnetization_distribution(model: &IsingModel) -> Result<MagnetizationPgf> {
    let tree = model.tree();
    let n = tree.len();
    if n > MAGNETIZATION_LIMIT {
        return Err(Error::SizeGuard {
            what: "magnetization dynamic program",
            required: n as u128,
            limit: MAGNETIZATION_LIMIT as u128,
        });
    }
    let (stay, flip) = (1.0 - model.p(), model.p());
    let mut polys: Vec<Option<[Vec<f64>; 2]>> = vec![None; n];
    for i in (0..n).rev() {
        let mut zero = vec![1.0];
        let mut one = vec![0.0, 1.0];
        for c in tree.children(VertexId(i)) {
            let [c0, c1] = polys[c.index()].take().expect("child processed first");
            let mix = |a: f64, b: f64| -> Vec<f64> {
                c0.iter().zip(&c1).map(|(x, y)| a * x + b * y).collect()
            };
            zero = poly_mul(&zero, &mix(stay, flip));
            one = poly_mul(&one, &mix(flip, stay));
        }
        // c0 and c1 have equal length (subtree size + 1); keep both padded
        zero.resize(one.len(), 0.0);
        polys[i] = Some([zero, one]);
    }
    let [zero, one] = polys[0].take().unwrap();
    let coefficients = zero.iter().zip(&one).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(MagnetizationPgf { coefficients })
}

/// `E[exp(λ Σ_v (c_v(X_v) - E c_v(X_v)))]` for a linear function with
/// per-vertex, per-state values `weights[v][s]`.
///
/// Each `c_v` must be 1-Lipschitz in the base metric; the result is then the
/// exponential moment `∫ e^{nλ(f - ∫f)} dν` of the normalized-Hamming
/// 1-Lipschitz function `f = (1/n) Σ_v c_v(x_v)`.
pub fn linear_exp_moment(
    model: &MarkovTreeModel,
    weights: &[Vec<f64>],
    lambda: f64,
) -> Result<f64> {
    linear_log_exp_moment(model, weights, lambda).map(f64::exp)
}

/// Natural log of [`linear_exp_moment`], finite where the moment overflows.
pub fn linear_log_exp_moment(
    model: &MarkovTreeModel,
    weights: &[Vec<f64>],
    lambda: f64,
) -> Result<f64> {
    let tree = model.tree();
    let space = model.space();
    let q = space.size();
    let n = tree.len();
    if weights.len() != n || weights.iter().any(|w| w.len() != q) {
        return Err(Error::InvalidModel(format!(
            "linear function needs {n} vertices × {q} states of weights"
        )));
    }
    for (v, w) in weights.iter().enumerate() {
        for a in 0..q {
            for b in 0..q {
                let gap = (w[a] - w[b]).abs();
                if gap > space.dist(a, b) + 1e-12 {
                    return Err(Error::NotLipschitz {
                        x: v,
                        y: v,
                        gap,
                        distance: space.dist(a, b),
                    });
                }
            }
        }
    }
    let marginals = model.marginals();
    // messages scaled to max 1, with the scale carried in log space
    let mut msgs: Vec<Option<(Vec<f64>, f64)>> = vec![None; n];
    for i in (0..n).rev() {
        let mean: f64 = marginals[i]
            .iter()
            .zip(&weights[i])
            .map(|(p, c)| p * c)
            .sum();
        let mut msg: Vec<f64> = weights[i]
            .iter()
            .map(|c| (lambda * (c - mean)).exp())
            .collect();
        let mut log_scale = 0.0;
        for c in tree.children(VertexId(i)) {
            let (child, child_log) = msgs[c.index()].take().expect("child processed first");
            let k = model.kernel_of(c.index());
            for (s, m) in msg.iter_mut().enumerate() {
                *m *= k.row(s).iter().zip(&child).map(|(a, b)| a * b).sum::<f64>();
            }
            log_scale += child_log;
        }
        let top = msg.iter().copied().fold(0.0, f64::max);
        msg.iter_mut().for_each(|m| *m /= top);
        msgs[i] = Some((msg, log_scale + top.ln()));
    }
    let (root, log_scale) = msgs[0].take().unwrap();
    let total: f64 = root.iter().zip(model.root_dist()).map(|(m, p)| m * p).sum();
    Ok(total.ln() + log_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnetizationVariance {
    /// `(1 / 4n²) Σ_{(v,w)} b^{d(v,w)}`
    pub formula: f64,
    /// From the exact count distribution, when the tree fits the DP guard.
    pub exact: Option<f64>,
}

pub fn variance_magnetization(model: &IsingModel) -> Result<MagnetizationVariance> {
    let tree = model.tree();
    let n = tree.len() as f64;
    let formula = pair_distance_sum(tree, model.b())? / (4.0 * n * n);
    let exact = if tree.len() <= MAGNETIZATION_LIMIT {
        Some(magnetization_distribution(model)?.variance_density())
    } else {
        None
    };
    Ok(MagnetizationVariance { formula, exact })
}

/// Mixing coefficients `η̄_ij` of an exact measure along `order`, computed by
/// brute-force conditioning; row-major `n × n`, unit diagonal, zero below.
///
/// `η̄_ij` is the largest total-variation distance between the laws of
/// `X_j` given two prefixes `(x_1..x_{i-1}, x_i)` and `(x_1..x_{i-1}, x_i')`
/// of positive probability.
pub fn eta_coefficients(measure: &ExactMeasure, order: &[usize]) -> Result<Vec<f64>> {
    let n = measure.coords();
    let q = measure.space().size();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..n).collect::<Vec<_>>() {
        return Err(Error::InvalidOrder("order is not a permutation".into()));
    }
    let mut eta = vec![0.0; n * n];
    for i in 0..n {
        eta[i * n + i] = 1.0;
    }
    // prefix key over order[0..=i], combined with the state of X_j
    for i in 0..n {
        let prefix_states = q.pow(i as u32);
        for j in (i + 1)..n {
            let mut joint = vec![0.0; prefix_states * q * q];
            for (r, &p) in measure.probs().iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let key = order[..=i]
                    .iter()
                    .fold(0usize, |k, &c| k * q + measure.coordinate(r, c));
                joint[key * q + measure.coordinate(r, order[j])] += p;
            }
            let mut worst = 0.0f64;
            for head in 0..prefix_states {
                let law = |xi: usize| -> Option<Vec<f64>> {
                    let base = (head * q + xi) * q;
                    let row = &joint[base..base + q];
                    let total: f64 = row.iter().sum();
                    (total > 0.0).then(|| row.iter().map(|x| x / total).collect())
                };
                let laws: Vec<Vec<f64>> = (0..q).filter_map(law).collect();
                for a in 0..laws.len() {
                    for b in (a + 1)..laws.len() {
                        let tv: f64 = 0.5
                            * laws[a]
                                .iter()
                                .zip(&laws[b])
                                .map(|(x, y)| (x - y).abs())
                                .sum::<f64>();
                        worst = worst.max(tv);
                    }
                }
            }
            eta[i * n + j] = worst;
        }
    }
    Ok(eta)
}

/// A model read from the model text format.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Ising(IsingModel),
    General(MarkovTreeModel),
}

impl ModelSpec {
    pub fn model(&self) -> &MarkovTreeModel {
        match self {
            ModelSpec::Ising(m) => m.model(),
            ModelSpec::General(m) => m,
        }
    }
}

/// Parses the model text format.
///
/// ```text
/// tree <path>
/// p=<decimal>
/// ```
///
/// for the Ising model, or for a general model
///
/// ```text
/// tree <path>
/// states <q>
/// root <q decimals>
/// kernel * <q² decimals, row-major>
/// kernel <v> <q² decimals>        (optional per-vertex override)
/// metric <q² decimals>            (optional; discrete by default)
/// ```
///
/// Blank lines and `#` comments are ignored. `load_tree` resolves the path.
pub fn parse_model(
    text: &str,
    load_tree: impl Fn(&str) -> Result<RootedTree>,
) -> Result<ModelSpec> {
    let parse_err = |line: usize, reason: String| Error::Parse { line, reason };
    let numbers = |line: usize, words: &[&str]| -> Result<Vec<f64>> {
        words
            .iter()
            .map(|w| {
                w.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("'{w}' is not a number")))
            })
            .collect()
    };
    let mut tree: Option<RootedTree> = None;
    let mut p: Option<(usize, f64)> = None;
    let mut states: Option<(usize, usize)> = None;
    let mut root: Option<(usize, Vec<f64>)> = None;
    let mut default_kernel: Option<(usize, Vec<f64>)> = None;
    let mut overrides: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    let mut metric: Option<(usize, Vec<f64>)> = None;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(value) = content.strip_prefix("p=") {
            let v = value
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("'{value}' is not a number")))?;
            p = Some((line, v));
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[0] {
            "tree" if words.len() == 2 => {
                tree = Some(load_tree(words[1]).map_err(|e| parse_err(line, e.to_string()))?)
            }
            "states" if words.len() == 2 => {
                states = Some((
                    line,
                    words[1]
                        .parse()
                        .map_err(|_| parse_err(line, format!("'{}' is not a count", words[1])))?,
                ))
            }
            "root" => root = Some((line, numbers(line, &words[1..])?)),
            "metric" => metric = Some((line, numbers(line, &words[1..])?)),
            "kernel" if words.len() >= 2 => {
                let values = numbers(line, &words[2..])?;
                if words[1] == "*" {
                    default_kernel = Some((line, values));
                } else {
                    let v = words[1]
                        .parse()
                        .map_err(|_| parse_err(line, format!("'{}' is not a vertex", words[1])))?;
                    overrides.push((line, v, values));
                }
            }
            other => return Err(parse_err(line, format!("unrecognized directive '{other}'"))),
        }
    }
    let tree = tree.ok_or_else(|| parse_err(last_line, "missing 'tree' line".into()))?;
    if let Some((p_line, p)) = p {
        if states.is_some() || root.is_some() || default_kernel.is_some() || !overrides.is_empty() {
            return Err(parse_err(
                last_line,
                "'p=' cannot be combined with kernel tables".into(),
            ));
        }
        let model = IsingModel::new(tree, p).map_err(|e| parse_err(p_line, e.to_string()))?;
        return Ok(ModelSpec::Ising(model));
    }
    let (states_line, q) =
        states.ok_or_else(|| parse_err(last_line, "missing 'states' or 'p=' line".into()))?;
    let space = match metric {
        Some((line, m)) => StateSpace::new(q, m).map_err(|e| parse_err(line, e.to_string()))?,
        None => StateSpace::discrete(q).map_err(|e| parse_err(states_line, e.to_string()))?,
    };
    let (root_line, root) =
        root.ok_or_else(|| parse_err(last_line, "missing 'root' line".into()))?;
    let mut kernels: Vec<Option<Kernel>> = vec![None; tree.len() - 1];
    if let Some((line, k)) = default_kernel {
        let k = Kernel::new(q, k).map_err(|e| parse_err(line, e.to_string()))?;
        kernels.iter_mut().for_each(|slot| *slot = Some(k.clone()));
    }
    for (line, v, values) in overrides {
        if v == 0 || v >= tree.len() {
            return Err(parse_err(line, format!("vertex {v} has no kernel")));
        }
        kernels[v - 1] = Some(Kernel::new(q, values).map_err(|e| parse_err(line, e.to_string()))?);
    }
    let kernels = kernels
        .into_iter()
        .enumerate()
        .map(|(i, k)| {
            k.ok_or_else(|| parse_err(last_line, format!("no kernel for vertex {}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let model = MarkovTreeModel::new(tree, space, root, kernels)
        .map_err(|e| parse_err(root_line, e.to_string()))?;
    Ok(ModelSpec::General(model))
}
