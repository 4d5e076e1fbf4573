//! The child-sum operator `(Qf)(v) = Σ_{π(w)=v} f(w)`, its operator norms,
//! and the mixing matrix `Σ_r b^r Q^r` in a breadth-first order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_b, Error, Result};
use crate::tree::{RootedTree, VertexId};

/// Largest tree for which [`mixing_matrix`] builds the dense matrix.
pub const MIXING_MATRIX_LIMIT: usize = 4096;

/// Matrix-free view of `Q` and its adjoint `(Q*g)(w) = g(π(w))`, `0` at the root.
#[derive(Clone, Copy)]
pub struct TreeOperator<'a> {
    tree: &'a RootedTree,
}

impl<'a> TreeOperator<'a> {
    pub fn new(tree: &'a RootedTree) -> Self {
        TreeOperator { tree }
    }

    pub fn tree(&self) -> &'a RootedTree {
        self.tree
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for v in self.tree.vertices().skip(1) {
            let p = self.tree.parent(v).expect("non-root vertex has a parent");
            out[p.index()] += f[v.index()];
        }
        out
    }

    pub fn apply_adjoint(&self, g: &[f64]) -> Vec<f64> {
        self.tree
            .vertices()
            .map(|w| self.tree.parent(w).map_or(0.0, |p| g[p.index()]))
            .collect()
    }

    pub fn apply_pow(&self, f: &[f64], j: usize) -> Vec<f64> {
        (0..j).fold(f.to_vec(), |x, _| self.apply(&x))
    }

    pub fn apply_adjoint_pow(&self, g: &[f64], j: usize) -> Vec<f64> {
        (0..j).fold(g.to_vec(), |x, _| self.apply_adjoint(&x))
    }
}

/// `Q^j f`.
pub fn q_apply(op: &TreeOperator<'_>, f: &[f64], j: usize) -> Vec<f64> {
    op.apply_pow(f, j)
}

/// `‖Q^j‖₂ = √(max_v |D_j(v)|)`.
pub fn q_power_norm_exact(tree: &RootedTree, j: usize) -> f64 {
    let max = tree.descendant_counts(j).into_iter().max().unwrap_or(0);
    (max as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    pub max_iters: usize,
    /// Stop once successive Rayleigh quotients differ by less than `tol * max(1, λ)`.
    pub tol: f64,
    pub start: StartVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartVector {
    Ones,
    Random(u64),
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            max_iters: 200,
            tol: 1e-12,
            start: StartVector::Ones,
        }
    }
}

impl PowerIteration {
    pub fn with_iters(max_iters: usize) -> Self {
        PowerIteration {
            max_iters,
            ..Self::default()
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.start = StartVector::Random(seed);
        self
    }

    /// Largest eigenvalue of a symmetric positive semidefinite map on `R^n`.
    pub fn top_eigenvalue(&self, n: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let mut rng = match self.start {
            StartVector::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            StartVector::Ones => None,
        };
        let mut x: Vec<f64> = match rng.as_mut() {
            Some(rng) => (0..n).map(|_| rng.random_range(0.5..1.5)).collect(),
            None => vec![1.0; n],
        };
        normalize(&mut x);
        let mut y = apply(&x);
        // a start vector in the kernel gets one fresh random draw per retry
        let mut retries = 0;
        while norm(&y) == 0.0 {
            if retries == 3 {
                return 0.0;
            }
            retries += 1;
            let rng = rng.get_or_insert_with(|| ChaCha8Rng::seed_from_u64(retries));
            x = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize(&mut x);
            y = apply(&x);
        }
        let mut lambda = dot(&x, &y);
        for _ in 1..self.max_iters {
            let ny = norm(&y);
            if ny == 0.0 {
                return 0.0;
            }
            x = y.iter().map(|v| v / ny).collect();
            y = apply(&x);
            let next = dot(&x, &y);
            let converged = (next - lambda).abs() < self.tol * next.abs().max(1.0);
            lambda = next;
            if converged {
                break;
            }
        }
        lambda
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let s = norm(a);
    if s > 0.0 {
        a.iter_mut().for_each(|x| *x /= s);
    }
}

/// Power-iteration estimate of `‖Q^j‖₂` through `Q^j (Q^j)*`.
pub fn q_power_norm_iterative(tree: &RootedTree, j: usize, iters: usize, seed: u64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let op = TreeOperator::new(tree);
    let solver = PowerIteration::with_iters(iters.max(1)).seeded(seed);
    solver
        .top_eigenvalue(tree.len(), |x| op.apply_pow(&op.apply_adjoint_pow(x, j), j))
        .max(0.0)
        .sqrt()
}

fn partial_sum(op: &TreeOperator<'_>, b: f64, k: usize, x: &[f64], adjoint: bool) -> Vec<f64> {
    // Horner: x + bQ(x + bQ(x + ...))
    let mut y = x.to_vec();
    for _ in 0..k {
        let qy = if adjoint {
            op.apply_adjoint(&y)
        } else {
            op.apply(&y)
        };
        for ((yi, qi), xi) in y.iter_mut().zip(qy).zip(x) {
            *yi = xi + b * qi;
        }
    }
    y
}

/// `‖Σ_{j=0}^k (bQ)^j‖₂`.
pub fn partial_sum_norm(
    tree: &RootedTree,
    b: f64,
    k: usize,
    solver: &PowerIteration,
) -> Result<f64> {
    check_b(b)?;
    let op = TreeOperator::new(tree);
    let lambda = solver.top_eigenvalue(tree.len(), |x| {
        partial_sum(&op, b, k, &partial_sum(&op, b, k, x, false), true)
    });
    Ok(lambda.max(0.0).sqrt())
}

/// `‖Σ_{j=0}^k (bQ)^j 1_{V_k}‖₂ / √|V_k|` with `V_k` the vertices of depth `<= k`.
pub fn partial_sum_indicator_norm(tree: &RootedTree, b: f64, k: usize) -> Result<f64> {
    check_b(b)?;
    let op = TreeOperator::new(tree);
    let ind: Vec<f64> = tree
        .vertices()
        .map(|v| if tree.depth(v) <= k { 1.0 } else { 0.0 })
        .collect();
    let count: f64 = ind.iter().sum();
    let y = partial_sum(&op, b, k, &ind, false);
    Ok(norm(&y) / count.sqrt())
}

/// Dense upper-triangular `Σ_r b^r Q^r` with rows and columns in `order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingMatrix {
    pub order: Vec<VertexId>,
    /// Row-major `n × n`.
    pub entries: Vec<f64>,
}

impl MixingMatrix {
    pub fn dim(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(i)) {
                    *o += a * xi;
                }
            }
        }
        out
    }
}

/// Mixing matrix in the tree's canonical breadth-first order.
pub fn mixing_matrix(tree: &RootedTree, b: f64) -> Result<MixingMatrix> {
    mixing_matrix_with_order(tree, b, &tree.bfs_order())
}

/// Mixing matrix for a caller-chosen breadth-first order: a permutation
/// starting at the root along which depth never decreases.
pub fn mixing_matrix_with_order(
    tree: &RootedTree,
    b: f64,
    order: &[VertexId],
) -> Result<MixingMatrix> {
    check_b(b)?;
    let n = tree.len();
    if n > MIXING_MATRIX_LIMIT {
        return Err(Error::SizeGuard {
            what: "mixing matrix",
            required: n as u128,
            limit: MIXING_MATRIX_LIMIT as u128,
        });
    }
    let position = check_bfs_order(tree, order)?;
    let mut entries = vec![0.0; n * n];
    let mut stack = Vec::new();
    for (i, &v) in order.iter().enumerate() {
        stack.clear();
        stack.push((v, 1.0f64));
        while let Some((w, weight)) = stack.pop() {
            entries[i * n + position[w.index()]] = weight;
            stack.extend(tree.children(w).iter().map(|&c| (c, weight * b)));
        }
    }
    Ok(MixingMatrix {
        order: order.to_vec(),
        entries,
    })
}

fn check_bfs_order(tree: &RootedTree, order: &[VertexId]) -> Result<Vec<usize>> {
    let n = tree.len();
    if order.len() != n {
        return Err(Error::InvalidOrder(format!(
            "order has {} entries for {n} vertices",
            order.len()
        )));
    }
    let mut position = vec![usize::MAX; n];
    for (i, &v) in order.iter().enumerate() {
        tree.check(v)?;
        if position[v.index()] != usize::MAX {
            return Err(Error::InvalidOrder(format!("vertex {v} listed twice")));
        }
        position[v.index()] = i;
        if i > 0 && tree.depth(order[i - 1]) > tree.depth(v) {
            return Err(Error::InvalidOrder(format!(
                "vertex {v} at position {i} is shallower than its predecessor"
            )));
        }
    }
    Ok(position)
}

/// A breadth-first order with each level shuffled independently.
pub fn random_bfs_order(tree: &RootedTree, seed: u64) -> Vec<VertexId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels: Vec<Vec<VertexId>> = vec![Vec::new(); tree.height() + 1];
    for v in tree.vertices() {
        levels[tree.depth(v)].push(v);
    }
    for level in &mut levels {
        level.shuffle(&mut rng);
    }
    levels.concat()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingNorms {
    /// Max row sum.
    pub inf_norm: f64,
    /// Largest singular value.
    pub two_norm: f64,
    /// The matrix applied to the all-ones vector.
    pub row_sums: Vec<f64>,
}

pub fn mixing_norms(m: &MixingMatrix) -> MixingNorms {
    mixing_norms_with(m, &PowerIteration::with_iters(2000))
}

pub fn mixing_norms_with(m: &MixingMatrix, solver: &PowerIteration) -> MixingNorms {
    let row_sums = m.mul_vec(&vec![1.0; m.dim()]);
    let inf_norm = row_sums.iter().copied().fold(0.0, f64::max);
    let lambda = solver.top_eigenvalue(m.dim(), |x| m.mul_transpose_vec(&m.mul_vec(x)));
    MixingNorms {
        inf_norm,
        two_norm: lambda.max(0.0).sqrt(),
        row_sums,
    }
}
