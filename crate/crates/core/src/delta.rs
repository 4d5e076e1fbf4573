//! The descendant generating function `δ(v) = Σ_r |D_r(v)| b^r` and `Δ = ‖δ‖₂`.

use serde::{Deserialize, Serialize};

use crate::error::{check_b, Error, Result};
use crate::spectral::TreeOperator;
use crate::tree::{dary_vertex_count, threeone_vertex_count, RootedTree, VertexId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescendantProfile {
    pub b: f64,
    /// `δ(v)` indexed by vertex.
    pub delta: Vec<f64>,
    /// `Δ = (Σ_v δ(v)²)^{1/2}`.
    pub big_delta: f64,
}

impl DescendantProfile {
    pub fn delta_sq(&self) -> f64 {
        sum_squares(&self.delta)
    }

    pub fn max_delta(&self) -> f64 {
        self.delta.iter().copied().fold(0.0, f64::max)
    }
}

/// `δ` by the recurrence `δ(v) = 1 + b Σ_{children w} δ(w)`, one pass from
/// the highest index down.
pub fn delta_profile(tree: &RootedTree, b: f64) -> Result<DescendantProfile> {
    check_b(b)?;
    let delta = recurrence(tree, b, usize::MAX);
    let big_delta = sum_squares(&delta).sqrt();
    Ok(DescendantProfile {
        b,
        delta,
        big_delta,
    })
}

/// δ restricted to vertices of depth `<= k`; deeper entries are left at 0.
fn recurrence(tree: &RootedTree, b: f64, k: usize) -> Vec<f64> {
    let n = tree.len();
    let mut child_sum = vec![0.0f64; n];
    let mut delta = vec![0.0f64; n];
    for i in (0..n).rev() {
        let v = VertexId(i);
        if tree.depth(v) > k {
            continue;
        }
        delta[i] = 1.0 + b * child_sum[i];
        if let Some(p) = tree.parent(v) {
            child_sum[p.index()] += delta[i];
        }
    }
    delta
}

fn sum_squares(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum()
}

/// δ of the depth-`k` truncation as `Σ_j (bQ)^j 1_{V_k}`, indexed by the
/// vertices of `tree` (zero outside `V_k`).
pub fn delta_via_operator(tree: &RootedTree, b: f64, k: usize) -> Result<Vec<f64>> {
    check_b(b)?;
    if k > tree.height() {
        return Err(Error::InvalidGenerator(format!(
            "truncation depth {k} exceeds tree height {}",
            tree.height()
        )));
    }
    let op = TreeOperator::new(tree);
    let mut term: Vec<f64> = tree
        .vertices()
        .map(|v| if tree.depth(v) <= k { 1.0 } else { 0.0 })
        .collect();
    let mut total = term.clone();
    for _ in 0..k {
        term = op.apply(&term);
        for x in &mut term {
            *x *= b;
        }
        for (t, x) in total.iter_mut().zip(&term) {
            *t += x;
        }
    }
    Ok(total)
}

/// `S = Σ_{(w₁,w₂) ∈ V²} b^{d(w₁,w₂)}` over ordered pairs, grouped by meet.
///
/// Pairs meeting at `a` are the diagonal pair, the ancestor pairs `(a, w)`
/// and `(w, a)`, and pairs split across two distinct children of `a`. Each
/// group's depth-profile convolution evaluated at `b` factors through `δ`:
/// `1 + 2(δ(a) - 1) + b²[(Σ_c δ(c))² - Σ_c δ(c)²]`.
pub fn pair_distance_sum(tree: &RootedTree, b: f64) -> Result<f64> {
    let profile = delta_profile(tree, b)?;
    let delta = &profile.delta;
    let b2 = b * b;
    let total = tree
        .vertices()
        .map(|a| {
            let (sum, sq) = tree.children(a).iter().fold((0.0, 0.0), |(s, q), c| {
                let x = delta[c.index()];
                (s + x, q + x * x)
            });
            1.0 + 2.0 * (delta[a.index()] - 1.0) + b2 * (sum * sum - sq)
        })
        .sum();
    Ok(total)
}

/// The same pair sum by breadth-first search from every vertex, `O(n²)`.
pub fn pair_distance_sum_naive(tree: &RootedTree, b: f64) -> Result<f64> {
    check_b(b)?;
    let n = tree.len();
    let mut powers = vec![1.0f64; 2 * tree.height() + 1];
    for d in 1..powers.len() {
        powers[d] = powers[d - 1] * b;
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = Vec::with_capacity(n);
    let mut per_source = Vec::with_capacity(n);
    for s in 0..n {
        dist.fill(usize::MAX);
        queue.clear();
        dist[s] = 0;
        queue.push(s);
        let mut head = 0;
        let mut acc = 0.0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            acc += powers[dist[u]];
            let v = VertexId(u);
            let nbrs = tree
                .children(v)
                .iter()
                .map(|c| c.index())
                .chain(tree.parent(v).map(VertexId::index));
            for w in nbrs {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push(w);
                }
            }
        }
        per_source.push(acc);
    }
    Ok(per_source.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichBounds {
    pub lower: f64,
    pub upper: f64,
    pub delta_sq: f64,
}

/// `S <= Δ² <= S / (1 - b²)`.
pub fn sandwich_bounds(tree: &RootedTree, b: f64) -> Result<SandwichBounds> {
    let lower = pair_distance_sum(tree, b)?;
    let delta_sq = delta_profile(tree, b)?.delta_sq();
    Ok(SandwichBounds {
        lower,
        upper: lower / (1.0 - b * b),
        delta_sq,
    })
}

/// `√n / (1 - b d)` with `d` the largest child count, when `b d < 1`.
pub fn alt_delta_bound(tree: &RootedTree, b: f64) -> Result<Option<f64>> {
    check_b(b)?;
    let bd = b * tree.max_children() as f64;
    Ok((bd < 1.0).then(|| (tree.len() as f64).sqrt() / (1.0 - bd)))
}

/// `Δ_k` over the truncations `T_0, ..., T_{k_max}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub b: f64,
    pub ks: Vec<usize>,
    pub vertex_counts: Vec<u64>,
    pub deltas: Vec<f64>,
    /// `Δ_k²`
    pub deltas_sq: Vec<f64>,
    /// `Δ_k² / |V_k|`
    pub ratios: Vec<f64>,
}

impl DeltaSeries {
    fn with_capacity(b: f64, cap: usize) -> Self {
        DeltaSeries {
            b,
            ks: Vec::with_capacity(cap),
            vertex_counts: Vec::with_capacity(cap),
            deltas: Vec::with_capacity(cap),
            deltas_sq: Vec::with_capacity(cap),
            ratios: Vec::with_capacity(cap),
        }
    }

    fn push(&mut self, k: usize, count: u64, delta_sq: f64) {
        self.ks.push(k);
        self.vertex_counts.push(count);
        self.deltas.push(delta_sq.sqrt());
        self.deltas_sq.push(delta_sq);
        self.ratios.push(delta_sq / count as f64);
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }
}

pub fn delta_series(tree: &RootedTree, b: f64, k_max: usize) -> Result<DeltaSeries> {
    check_b(b)?;
    if k_max > tree.height() {
        return Err(Error::InvalidGenerator(format!(
            "k_max {k_max} exceeds tree height {}",
            tree.height()
        )));
    }
    let sizes = tree.level_sizes();
    let mut series = DeltaSeries::with_capacity(b, k_max + 1);
    let mut count = 0u64;
    for (k, &size) in sizes.iter().enumerate().take(k_max + 1) {
        count += size as u64;
        let delta = recurrence(tree, b, k);
        series.push(k, count, sum_squares(&delta));
    }
    Ok(series)
}

/// `(1/|V_k|) Σ_{(w₁,w₂) ∈ V_k²} b^{d(w₁,w₂)}` for `k = 0..=k_max`.
pub fn pair_sum_series(tree: &RootedTree, b: f64, k_max: usize) -> Result<Vec<f64>> {
    (0..=k_max.min(tree.height()))
        .map(|k| {
            let t = tree.truncate_to_depth(k);
            Ok(pair_distance_sum(&t, b)? / t.len() as f64)
        })
        .collect()
}

/// Infinite trees whose truncations can be evaluated level by level without
/// materializing a [`RootedTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeFamily {
    /// The 3-1 tree: level `j` has `2^j` vertices, the first half of each
    /// level `j >= 1` has three children and the rest one.
    ThreeOne,
    /// The infinite `d`-ary tree.
    Dary(usize),
}

impl TreeFamily {
    pub fn vertex_count(&self, k: usize) -> Option<usize> {
        match *self {
            TreeFamily::ThreeOne => threeone_vertex_count(k),
            TreeFamily::Dary(d) => dary_vertex_count(d, k),
        }
    }

    /// Memory needed by [`delta_sq`](Self::delta_sq) at depth `k`, in bytes.
    pub fn working_bytes(&self, k: usize) -> Option<usize> {
        match *self {
            TreeFamily::ThreeOne => 1usize
                .checked_shl(u32::try_from(k).ok()?)?
                .checked_mul(std::mem::size_of::<f64>()),
            TreeFamily::Dary(_) => (k + 1).checked_mul(std::mem::size_of::<f64>()),
        }
    }

    /// `Δ_k²` for the depth-`k` truncation.
    pub fn delta_sq(&self, b: f64, k: usize) -> Result<f64> {
        check_b(b)?;
        let count = self
            .vertex_count(k)
            .ok_or_else(|| Error::Overflow(format!("{self:?} at depth {k}")))?;
        match *self {
            TreeFamily::Dary(0) => Err(Error::InvalidGenerator("dary needs d >= 1".into())),
            TreeFamily::Dary(d) => {
                // every vertex at depth j carries the same δ_j
                let mut level_delta = 1.0;
                let mut level_size = vec![1.0f64; k + 1];
                for j in 1..=k {
                    level_size[j] = level_size[j - 1] * d as f64;
                }
                let mut total = level_size[k];
                for j in (0..k).rev() {
                    level_delta = 1.0 + b * d as f64 * level_delta;
                    total += level_size[j] * level_delta * level_delta;
                }
                Ok(total)
            }
            TreeFamily::ThreeOne => {
                if count > crate::tree::MAX_MATERIALIZED_VERTICES * 4 {
                    return Err(Error::SizeGuard {
                        what: "3-1 tree level buffer",
                        required: count as u128,
                        limit: (crate::tree::MAX_MATERIALIZED_VERTICES * 4) as u128,
                    });
                }
                Ok(threeone_delta_sq(b, k))
            }
        }
    }

    pub fn series(&self, b: f64, k_max: usize) -> Result<DeltaSeries> {
        let mut series = DeltaSeries::with_capacity(b, k_max + 1);
        for k in 0..=k_max {
            let count = self
                .vertex_count(k)
                .ok_or_else(|| Error::Overflow(format!("{self:?} at depth {k}")))?;
            series.push(k, count as u64, self.delta_sq(b, k)?);
        }
        Ok(series)
    }
}

/// Level-by-level pass over the 3-1 tree in a single buffer of `2^k` values.
///
/// Children of vertex `i` on level `j >= 1` sit at `3i..3i+3` on level `j+1`
/// when `i < 2^{j-1}` and at `2^j + i` otherwise; both positions are `>= i`,
/// so level `j` can overwrite level `j+1` front to back.
fn threeone_delta_sq(b: f64, k: usize) -> f64 {
    let leaves = 1usize << k;
    let mut buf = vec![1.0f64; leaves];
    let mut total = leaves as f64;
    for j in (0..k).rev() {
        let size = 1usize << j;
        let mut level_sq = 0.0;
        if j == 0 {
            let d = 1.0 + b * (buf[0] + buf[1]);
            buf[0] = d;
            level_sq = d * d;
        } else {
            let half = size / 2;
            for i in 0..size {
                let child_sum = if i < half {
                    buf[3 * i] + buf[3 * i + 1] + buf[3 * i + 2]
                } else {
                    buf[size + i]
                };
                let d = 1.0 + b * child_sum;
                buf[i] = d;
                level_sq += d * d;
            }
        }
        total += level_sq;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::GeneratorSpec;

    fn tree(parents: &[i64]) -> RootedTree {
        RootedTree::from_parents(parents).unwrap()
    }

    fn gen(spec: GeneratorSpec) -> RootedTree {
        RootedTree::generate(&spec).unwrap()
    }

    #[test]
    fn hand_profiles() {
        let p = delta_profile(&tree(&[-1, 0, 1]), 0.5).unwrap();
        assert_eq!(p.delta, vec![1.75, 1.5, 1.0]);
        assert_eq!(p.delta_sq(), 6.3125);

        let s = delta_profile(&tree(&[-1, 0, 0]), 0.5).unwrap();
        assert_eq!(s.delta, vec![2.0, 1.0, 1.0]);
        assert_eq!(s.delta_sq(), 6.0);

        let t = RootedTree::random_recursive(37, 5);
        let z = delta_profile(&t, 0.0).unwrap();
        assert!(z.delta.iter().all(|&d| d == 1.0));
        assert_eq!(z.big_delta, 37f64.sqrt());
    }

    #[test]
    fn rejects_b_outside_unit_interval() {
        let t = tree(&[-1, 0]);
        for b in [-0.1, 1.0, 1.5, f64::NAN] {
            assert!(matches!(delta_profile(&t, b), Err(Error::InvalidB(_))));
            assert!(pair_distance_sum(&t, b).is_err());
        }
    }

    #[test]
    fn operator_form_on_binary_tree() {
        let t = gen(GeneratorSpec::Dary { d: 2, depth: 2 });
        let d = delta_via_operator(&t, 0.5, 2).unwrap();
        assert_eq!(d, vec![3.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0]);
        let d0 = delta_via_operator(&t, 0.5, 0).unwrap();
        assert_eq!(d0[0], 1.0);
        assert!(d0[1..].iter().all(|&x| x == 0.0));
        let flat = delta_via_operator(&t, 0.0, 2).unwrap();
        assert!(flat.iter().all(|&x| x == 1.0));
        assert!(delta_via_operator(&t, 0.5, 3).is_err());
    }

    #[test]
    fn hand_pair_sums() {
        let star = tree(&[-1, 0, 0]);
        assert_eq!(pair_distance_sum_naive(&star, 0.5).unwrap(), 5.5);
        assert_eq!(pair_distance_sum(&star, 0.5).unwrap(), 5.5);
        let bin = gen(GeneratorSpec::Dary { d: 2, depth: 2 });
        assert_eq!(pair_distance_sum_naive(&bin, 0.5).unwrap(), 18.0);
        assert_eq!(pair_distance_sum(&bin, 0.5).unwrap(), 18.0);
        let t = RootedTree::random_recursive(40, 1);
        assert_eq!(pair_distance_sum(&t, 0.0).unwrap(), 40.0);
        assert_eq!(pair_distance_sum_naive(&t, 0.0).unwrap(), 40.0);
    }

    #[test]
    fn hand_sandwiches() {
        let s = sandwich_bounds(&tree(&[-1, 0, 0]), 0.5).unwrap();
        assert_eq!((s.lower, s.delta_sq), (5.5, 6.0));
        assert!((s.upper - 22.0 / 3.0).abs() < 1e-15);
        let s = sandwich_bounds(&gen(GeneratorSpec::Dary { d: 2, depth: 2 }), 0.5).unwrap();
        assert_eq!((s.lower, s.upper, s.delta_sq), (18.0, 24.0, 21.0));
        let s = sandwich_bounds(&RootedTree::random_recursive(12, 2), 0.0).unwrap();
        assert_eq!((s.lower, s.upper, s.delta_sq), (12.0, 12.0, 12.0));
    }

    #[test]
    fn alt_bound_cases() {
        let path = gen(GeneratorSpec::Path { length: 5 });
        let bound = alt_delta_bound(&path, 0.5).unwrap().unwrap();
        assert!((bound - 2.0 * 6f64.sqrt()).abs() < 1e-12);
        assert!(delta_profile(&path, 0.5).unwrap().big_delta <= bound);
        let bin = gen(GeneratorSpec::Dary { d: 2, depth: 2 });
        assert_eq!(alt_delta_bound(&bin, 0.5).unwrap(), None);
        let b0 = alt_delta_bound(&bin, 0.0).unwrap().unwrap();
        assert_eq!(b0, 7f64.sqrt());
        assert_eq!(delta_profile(&bin, 0.0).unwrap().big_delta, b0);
    }

    #[test]
    fn binary_series_closed_form() {
        let t = gen(GeneratorSpec::Dary { d: 2, depth: 6 });
        let s = delta_series(&t, 0.5, 6).unwrap();
        for k in 0..=6usize {
            let closed: f64 = (0..=k)
                .map(|j| (1u64 << j) as f64 * ((k - j + 1) as f64).powi(2))
                .sum();
            assert_eq!(s.deltas_sq[k], closed);
        }
        assert_eq!(s.deltas[0], 1.0);
        assert_eq!(s.ratios[2], 3.0);
        let p = gen(GeneratorSpec::Path { length: 8 });
        assert!(delta_series(&p, 0.0, 8)
            .unwrap()
            .ratios
            .iter()
            .all(|&r| r == 1.0));
        assert!(delta_series(&p, 0.5, 9).is_err());
    }

    #[test]
    fn families_match_materialized_trees() {
        for b in [0.0, 0.3, 0.5, 0.75] {
            for k in 0..=9 {
                let t = gen(GeneratorSpec::ThreeOne { depth: k });
                let want = delta_profile(&t, b).unwrap().delta_sq();
                let got = TreeFamily::ThreeOne.delta_sq(b, k).unwrap();
                assert!((got - want).abs() <= 1e-12 * want, "threeone b={b} k={k}");

                let t = gen(GeneratorSpec::Dary {
                    d: 3,
                    depth: k.min(7),
                });
                let want = delta_profile(&t, b).unwrap().delta_sq();
                let got = TreeFamily::Dary(3).delta_sq(b, k.min(7)).unwrap();
                assert!((got - want).abs() <= 1e-12 * want, "dary b={b} k={k}");
            }
        }
        let s = TreeFamily::Dary(2).series(0.5, 3).unwrap();
        assert_eq!(s.vertex_counts, vec![1, 3, 7, 15]);
        assert_eq!(s.ratios[2], 3.0);
    }

    #[test]
    fn pair_series_starts_at_one() {
        let t = gen(GeneratorSpec::ThreeOne { depth: 4 });
        let s = pair_sum_series(&t, 0.5, 4).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s[0], 1.0);
    }
}
