//! Immutable rooted trees.
//!
//! Vertices are numbered `0..n` with the root at `0` and every parent
//! preceding its children. Generators and [`RootedTree::truncate_to_depth`]
//! produce breadth-first numberings; trees read from a parent array keep the
//! caller's numbering as long as parents precede children.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tree the generators will materialize.
pub const MAX_MATERIALIZED_VERTICES: usize = 1 << 27;

/// Largest tree for which [`MeetTable`] precomputes all pairs.
pub const MEET_TABLE_LIMIT: usize = 1 << 12;

const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub usize);

impl VertexId {
    pub const ROOT: VertexId = VertexId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for VertexId {
    fn from(i: usize) -> Self {
        VertexId(i)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    parent: Vec<usize>,
    depth: Vec<usize>,
    child_offsets: Vec<usize>,
    child_list: Vec<VertexId>,
}

impl RootedTree {
    /// Builds a tree from a parent array where the root is marked `-1`.
    ///
    /// Position 0 must hold the root and every other position `i` must name
    /// a parent `j` with `0 <= j < i`.
    pub fn from_parents(parents: &[i64]) -> Result<Self> {
        if parents.is_empty() {
            return Err(Error::InvalidParent {
                index: 0,
                reason: "empty parent array".into(),
            });
        }
        if parents[0] != -1 {
            return Err(Error::InvalidParent {
                index: 0,
                reason: format!("root entry must be -1, found {}", parents[0]),
            });
        }
        let mut parent = Vec::with_capacity(parents.len());
        parent.push(NO_PARENT);
        for (i, &p) in parents.iter().enumerate().skip(1) {
            if p == -1 {
                return Err(Error::InvalidParent {
                    index: i,
                    reason: "second root sentinel (input is a forest)".into(),
                });
            }
            if p < 0 {
                return Err(Error::InvalidParent {
                    index: i,
                    reason: format!("negative parent {p}"),
                });
            }
            if p as u64 >= i as u64 {
                return Err(Error::InvalidParent {
                    index: i,
                    reason: format!("parent {p} does not precede vertex {i}"),
                });
            }
            parent.push(p as usize);
        }
        Ok(Self::from_valid_parents(parent))
    }

    /// `parent[0]` is ignored; every other entry must be smaller than its index.
    fn from_valid_parents(mut parent: Vec<usize>) -> Self {
        let n = parent.len();
        parent[0] = NO_PARENT;
        let mut depth = vec![0usize; n];
        let mut counts = vec![0usize; n + 1];
        for i in 1..n {
            depth[i] = depth[parent[i]] + 1;
            counts[parent[i] + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let child_offsets = counts;
        let mut fill = child_offsets.clone();
        let mut child_list = vec![VertexId::ROOT; n.saturating_sub(1)];
        for (i, &p) in parent.iter().enumerate().skip(1) {
            child_list[fill[p]] = VertexId(i);
            fill[p] += 1;
        }
        RootedTree {
            parent,
            depth,
            child_offsets,
            child_list,
        }
    }

    /// Single-vertex tree.
    pub fn singleton() -> Self {
        Self::from_valid_parents(vec![NO_PARENT])
    }

    pub fn generate(spec: &GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        match *spec {
            GeneratorSpec::Dary { d, depth } => {
                let count =
                    dary_vertex_count(d, depth).ok_or_else(|| Error::Overflow(spec.to_string()))?;
                guard_materialized(count, spec)?;
                let mut parent = Vec::with_capacity(count);
                parent.push(NO_PARENT);
                // level order: the i-th non-root vertex hangs under (i - 1) / d
                for i in 1..count {
                    parent.push((i - 1) / d);
                }
                Ok(Self::from_valid_parents(parent))
            }
            GeneratorSpec::ThreeOne { depth } => {
                let count = threeone_vertex_count(depth)
                    .ok_or_else(|| Error::Overflow(spec.to_string()))?;
                guard_materialized(count, spec)?;
                let mut parent = Vec::with_capacity(count);
                parent.push(NO_PARENT);
                if depth >= 1 {
                    parent.extend([0, 0]);
                }
                for level in 1..depth {
                    let start = (1usize << level) - 1;
                    let half = 1usize << (level - 1);
                    for j in 0..(1usize << level) {
                        let kids = if j < half { 3 } else { 1 };
                        for _ in 0..kids {
                            parent.push(start + j);
                        }
                    }
                }
                Ok(Self::from_valid_parents(parent))
            }
            GeneratorSpec::Path { length } => {
                let count = length
                    .checked_add(1)
                    .ok_or_else(|| Error::Overflow(spec.to_string()))?;
                guard_materialized(count, spec)?;
                let mut parent: Vec<usize> = (0..count).map(|i| i.wrapping_sub(1)).collect();
                parent[0] = NO_PARENT;
                Ok(Self::from_valid_parents(parent))
            }
            GeneratorSpec::GaltonWatson {
                ref offspring,
                depth,
                seed,
            } => {
                let dist = WeightedIndex::new(offspring)
                    .map_err(|e| Error::InvalidGenerator(e.to_string()))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut parent = vec![NO_PARENT];
                let mut level = 0..1usize;
                for _ in 0..depth {
                    let next_start = parent.len();
                    for v in level.clone() {
                        let kids = dist.sample(&mut rng);
                        if parent.len() + kids > MAX_MATERIALIZED_VERTICES {
                            return Err(Error::SizeGuard {
                                what: "galton-watson tree",
                                required: (parent.len() + kids) as u128,
                                limit: MAX_MATERIALIZED_VERTICES as u128,
                            });
                        }
                        parent.extend(std::iter::repeat_n(v, kids));
                    }
                    level = next_start..parent.len();
                    if level.is_empty() {
                        break;
                    }
                }
                Ok(Self::from_valid_parents(parent))
            }
        }
    }

    /// Uniform random recursive tree: vertex `i` attaches to a uniform earlier vertex.
    pub fn random_recursive(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parent = Vec::with_capacity(n.max(1));
        parent.push(NO_PARENT);
        for i in 1..n {
            parent.push(rng.random_range(0..i));
        }
        Self::from_valid_parents(parent)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    /// Always false: a rooted tree has at least its root.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn root(&self) -> VertexId {
        VertexId::ROOT
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.len()).map(VertexId)
    }

    pub fn check(&self, v: VertexId) -> Result<()> {
        if v.0 < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidVertex(v.0, self.len()))
        }
    }

    #[inline]
    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        match self.parent[v.0] {
            NO_PARENT => None,
            p => Some(VertexId(p)),
        }
    }

    #[inline]
    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.child_list[self.child_offsets[v.0]..self.child_offsets[v.0 + 1]]
    }

    #[inline]
    pub fn child_count(&self, v: VertexId) -> usize {
        self.child_offsets[v.0 + 1] - self.child_offsets[v.0]
    }

    #[inline]
    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.child_count(v) == 0
    }

    #[inline]
    pub fn depth(&self, v: VertexId) -> usize {
        self.depth[v.0]
    }

    /// Depth of the deepest vertex.
    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn max_children(&self) -> usize {
        self.vertices()
            .map(|v| self.child_count(v))
            .max()
            .unwrap_or(0)
    }

    /// `|D_r(ρ)|` for `r = 0..=height`.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.height() + 1];
        for &d in &self.depth {
            sizes[d] += 1;
        }
        sizes
    }

    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut size = vec![1usize; self.len()];
        for i in (1..self.len()).rev() {
            size[self.parent[i]] += size[i];
        }
        size
    }

    /// Parent array with the root written as `-1`.
    pub fn parent_array(&self) -> Vec<i64> {
        self.parent
            .iter()
            .map(|&p| if p == NO_PARENT { -1 } else { p as i64 })
            .collect()
    }

    pub fn distance(&self, v: VertexId, w: VertexId) -> Result<usize> {
        let m = self.meet(v, w)?;
        Ok(self.depth(v) + self.depth(w) - 2 * self.depth(m))
    }

    /// Deepest common ancestor of `v` and `w`.
    pub fn meet(&self, v: VertexId, w: VertexId) -> Result<VertexId> {
        self.check(v)?;
        self.check(w)?;
        let (mut a, mut b) = (v.0, w.0);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        Ok(VertexId(a))
    }

    /// `|D_r(v)|`, the number of descendants of `v` exactly `r` generations down.
    pub fn descendants_at(&self, v: VertexId, r: usize) -> Result<usize> {
        self.check(v)?;
        let mut frontier = vec![v];
        for _ in 0..r {
            if frontier.is_empty() {
                break;
            }
            frontier = frontier
                .iter()
                .flat_map(|&u| self.children(u).iter().copied())
                .collect();
        }
        Ok(frontier.len())
    }

    /// `|D_r(v)|` for every vertex at once, by `r` applications of the child-sum map.
    pub fn descendant_counts(&self, r: usize) -> Vec<usize> {
        let mut counts = vec![1usize; self.len()];
        for _ in 0..r {
            let mut next = vec![0usize; self.len()];
            for i in 1..self.len() {
                next[self.parent[i]] += counts[i];
            }
            counts = next;
        }
        counts
    }

    /// Vertices in breadth-first order, children visited in index order.
    pub fn bfs_order(&self) -> Vec<VertexId> {
        let mut order = Vec::with_capacity(self.len());
        let mut queue = VecDeque::from([VertexId::ROOT]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            queue.extend(self.children(v).iter().copied());
        }
        order
    }

    /// True when the numbering itself is breadth-first (depth never decreases).
    pub fn is_level_ordered(&self) -> bool {
        self.depth.windows(2).all(|w| w[0] <= w[1])
    }

    /// The subtree induced by vertices within distance `k` of the root,
    /// renumbered breadth-first.
    pub fn truncate_to_depth(&self, k: usize) -> RootedTree {
        self.truncate_with_map(k).0
    }

    /// Like [`truncate_to_depth`](Self::truncate_to_depth), also returning
    /// the original id of each new vertex.
    pub fn truncate_with_map(&self, k: usize) -> (RootedTree, Vec<VertexId>) {
        let order: Vec<VertexId> = self
            .bfs_order()
            .into_iter()
            .filter(|&v| self.depth(v) <= k)
            .collect();
        let mut new_id = vec![NO_PARENT; self.len()];
        for (i, v) in order.iter().enumerate() {
            new_id[v.0] = i;
        }
        let parent = order
            .iter()
            .map(|&v| match self.parent(v) {
                None => NO_PARENT,
                Some(p) => new_id[p.0],
            })
            .collect();
        (Self::from_valid_parents(parent), order)
    }

    /// Canonical text form: `n` on the first line, the parent array on the second.
    pub fn to_text(&self) -> String {
        let entries: Vec<String> = self.parent_array().iter().map(i64::to_string).collect();
        format!("{}\n{}\n", self.len(), entries.join(" "))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().ok_or(Error::Parse {
            line: 1,
            reason: "missing vertex count".into(),
        })?;
        let n: usize = first.trim().parse().map_err(|e| Error::Parse {
            line: 1,
            reason: format!("bad vertex count {first:?}: {e}"),
        })?;
        let second = lines.next().ok_or(Error::Parse {
            line: 2,
            reason: "missing parent array".into(),
        })?;
        let parents = second
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>().map_err(|e| Error::Parse {
                    line: 2,
                    reason: format!("bad parent entry {tok:?}: {e}"),
                })
            })
            .collect::<Result<Vec<i64>>>()?;
        if parents.len() != n {
            return Err(Error::Parse {
                line: 2,
                reason: format!("expected {n} parent entries, found {}", parents.len()),
            });
        }
        if let Some((i, extra)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::Parse {
                line: i + 3,
                reason: format!("unexpected trailing content {extra:?}"),
            });
        }
        Self::from_parents(&parents).map_err(|e| Error::Parse {
            line: 2,
            reason: e.to_string(),
        })
    }
}

fn guard_materialized(count: usize, spec: &GeneratorSpec) -> Result<()> {
    if count > MAX_MATERIALIZED_VERTICES {
        return Err(Error::SizeGuard {
            what: if matches!(spec, GeneratorSpec::Path { .. }) {
                "path"
            } else {
                "generated tree"
            },
            required: count as u128,
            limit: MAX_MATERIALIZED_VERTICES as u128,
        });
    }
    Ok(())
}

/// `(d^(depth+1) - 1) / (d - 1)`, or `depth + 1` when `d = 1`.
pub fn dary_vertex_count(d: usize, depth: usize) -> Option<usize> {
    let mut total: usize = 1;
    let mut level: usize = 1;
    for _ in 0..depth {
        level = level.checked_mul(d)?;
        total = total.checked_add(level)?;
    }
    Some(total)
}

/// `2^(depth+1) - 1`.
pub fn threeone_vertex_count(depth: usize) -> Option<usize> {
    let shift = u32::try_from(depth.checked_add(1)?).ok()?;
    if shift >= usize::BITS {
        return None;
    }
    Some((1usize << shift) - 1)
}

/// Precomputed meets for all vertex pairs of a small tree.
pub struct MeetTable {
    n: usize,
    table: Vec<u16>,
}

impl MeetTable {
    pub fn new(tree: &RootedTree) -> Result<Self> {
        let n = tree.len();
        if n > MEET_TABLE_LIMIT {
            return Err(Error::SizeGuard {
                what: "meet table",
                required: n as u128,
                limit: MEET_TABLE_LIMIT as u128,
            });
        }
        let mut table = vec![0u16; n * n];
        for v in 0..n {
            for w in 0..=v {
                let m = if v == w {
                    v
                } else if tree.depth[v] >= tree.depth[w] {
                    table[tree.parent[v] * n + w] as usize
                } else {
                    table[v * n + tree.parent[w]] as usize
                };
                table[v * n + w] = m as u16;
                table[w * n + v] = m as u16;
            }
        }
        Ok(MeetTable { n, table })
    }

    #[inline]
    pub fn meet(&self, v: VertexId, w: VertexId) -> VertexId {
        VertexId(self.table[v.0 * self.n + w.0] as usize)
    }
}

/// Recipe for one of the built-in tree families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeneratorSpec {
    /// Complete `d`-ary tree of the given depth.
    Dary { d: usize, depth: usize },
    /// The 3-1 tree truncated at `depth`: level `j` has `2^j` vertices.
    ThreeOne { depth: usize },
    /// Path with `length` edges.
    Path { length: usize },
    /// Galton-Watson tree cut at `depth`; `offspring[k]` is the probability of `k` children.
    GaltonWatson {
        offspring: Vec<f64>,
        depth: usize,
        seed: u64,
    },
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorSpec::Dary { d, .. } if *d == 0 => {
                Err(Error::InvalidGenerator("dary needs d >= 1".into()))
            }
            GeneratorSpec::GaltonWatson { offspring, .. } => {
                if offspring.is_empty() || offspring.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                    return Err(Error::InvalidGenerator(
                        "offspring probabilities must be finite and nonnegative".into(),
                    ));
                }
                let total: f64 = offspring.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidGenerator(format!(
                        "offspring probabilities sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Dary { d, depth } => write!(f, "dary:{d}:{depth}"),
            GeneratorSpec::ThreeOne { depth } => write!(f, "threeone:{depth}"),
            GeneratorSpec::Path { length } => write!(f, "path:{length}"),
            GeneratorSpec::GaltonWatson {
                offspring,
                depth,
                seed,
            } => {
                let probs: Vec<String> = offspring.iter().map(|p| p.to_string()).collect();
                write!(f, "gw:{}:{depth}:{seed}", probs.join(","))
            }
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    /// Parses `dary:D:DEPTH`, `threeone:DEPTH`, `path:LENGTH` or
    /// `gw:P0,P1,...:DEPTH:SEED`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidGenerator(format!("{s:?}: {why}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |tok: &str| -> Result<usize> {
            tok.parse::<usize>()
                .map_err(|_| bad(&format!("expected an integer, found {tok:?}")))
        };
        let spec = match parts.as_slice() {
            ["dary", d, depth] => GeneratorSpec::Dary {
                d: int(d)?,
                depth: int(depth)?,
            },
            ["threeone", depth] => GeneratorSpec::ThreeOne { depth: int(depth)? },
            ["path", length] => GeneratorSpec::Path {
                length: int(length)?,
            },
            ["gw", probs, depth, seed] => GeneratorSpec::GaltonWatson {
                offspring: probs
                    .split(',')
                    .map(|p| {
                        p.parse::<f64>()
                            .map_err(|_| bad(&format!("bad probability {p:?}")))
                    })
                    .collect::<Result<_>>()?,
                depth: int(depth)?,
                seed: seed
                    .parse::<u64>()
                    .map_err(|_| bad(&format!("bad seed {seed:?}")))?,
            },
            _ => return Err(bad("unknown generator")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Finite-depth growth sequences for `r = 1..=height`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimates {
    /// `|D_r(ρ)|^{1/r}`
    pub level: Vec<f64>,
    /// `|B_r(ρ)|^{1/r}`
    pub ball: Vec<f64>,
    /// `max_v |D_r(v)|^{1/r}`
    pub max_local: Vec<f64>,
}

pub fn growth_estimates(tree: &RootedTree) -> GrowthEstimates {
    let sizes = tree.level_sizes();
    let height = sizes.len() - 1;
    let mut out = GrowthEstimates {
        level: Vec::with_capacity(height),
        ball: Vec::with_capacity(height),
        max_local: Vec::with_capacity(height),
    };
    let mut ball = sizes[0];
    let mut counts = vec![1usize; tree.len()];
    for (r, &size) in sizes.iter().enumerate().skip(1) {
        ball += size;
        let mut next = vec![0usize; tree.len()];
        for i in 1..tree.len() {
            next[tree.parent[i]] += counts[i];
        }
        counts = next;
        let max = counts.iter().copied().max().unwrap_or(0);
        let root = |x: usize| exact_root(x, r);
        out.level.push(root(size));
        out.ball.push(root(ball));
        out.max_local.push(root(max));
    }
    out
}

/// `x^{1/r}`, snapped to an integer when `x` is an exact `r`-th power.
fn exact_root(x: usize, r: usize) -> f64 {
    let y = (x as f64).powf(1.0 / r as f64);
    let rounded = y.round();
    if rounded >= 1.0 && (rounded as u128).checked_pow(r as u32) == Some(x as u128) {
        rounded
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(parents: &[i64]) -> RootedTree {
        RootedTree::from_parents(parents).unwrap()
    }

    #[test]
    fn small_parent_arrays() {
        let t = tree(&[-1]);
        assert_eq!(t.len(), 1);
        assert_eq!(t.depth(VertexId(0)), 0);

        let star = tree(&[-1, 0, 0]);
        assert_eq!(
            star.vertices().map(|v| star.depth(v)).collect::<Vec<_>>(),
            [0, 1, 1]
        );
        assert_eq!(star.children(VertexId(0)), &[VertexId(1), VertexId(2)]);

        let path = tree(&[-1, 0, 1]);
        assert_eq!(path.depth(VertexId(2)), 2);
    }

    #[test]
    fn rejects_bad_parent_arrays() {
        let err = |p: &[i64]| match RootedTree::from_parents(p) {
            Err(Error::InvalidParent { index, .. }) => index,
            other => panic!("expected rejection, got {other:?}"),
        };
        assert_eq!(err(&[]), 0);
        assert_eq!(err(&[0, 0]), 0);
        assert_eq!(err(&[-1, 0, -1]), 2);
        assert_eq!(err(&[-1, 2, 1]), 1);
        assert_eq!(err(&[-1, 0, 2]), 2);
        assert_eq!(err(&[-1, -3]), 1);
    }

    #[test]
    fn generator_sizes() {
        let t = RootedTree::generate(&GeneratorSpec::Dary { d: 2, depth: 2 }).unwrap();
        assert_eq!(t.len(), 7);
        let p = RootedTree::generate(&GeneratorSpec::Path { length: 5 }).unwrap();
        assert_eq!(p.len(), 6);
        assert!(p.vertices().all(|v| p.child_count(v) <= 1));
        let u = RootedTree::generate(&GeneratorSpec::Dary { d: 1, depth: 4 }).unwrap();
        assert_eq!(u.len(), 5);
    }

    #[test]
    fn threeone_levels_match_construction() {
        for k in 0..=10 {
            let t = RootedTree::generate(&GeneratorSpec::ThreeOne { depth: k }).unwrap();
            let sizes = t.level_sizes();
            assert_eq!(sizes.len(), k + 1);
            for (j, &s) in sizes.iter().enumerate() {
                assert_eq!(s, 1 << j);
            }
            assert!(t.is_level_ordered());
            // child counts within each internal level
            let mut start = 0;
            for j in 0..k {
                let size = 1usize << j;
                for i in 0..size {
                    let kids = t.child_count(VertexId(start + i));
                    let expected = if j == 0 {
                        2
                    } else if i < size / 2 {
                        3
                    } else {
                        1
                    };
                    assert_eq!(kids, expected, "level {j} position {i}");
                }
                start += size;
            }
        }
    }

    #[test]
    fn generator_overflow_is_rejected() {
        let spec = GeneratorSpec::Dary { d: 10, depth: 1000 };
        assert!(matches!(
            RootedTree::generate(&spec),
            Err(Error::Overflow(_))
        ));
        let spec = GeneratorSpec::ThreeOne { depth: 200 };
        assert!(matches!(
            RootedTree::generate(&spec),
            Err(Error::Overflow(_))
        ));
        let spec = GeneratorSpec::ThreeOne { depth: 40 };
        assert!(matches!(
            RootedTree::generate(&spec),
            Err(Error::SizeGuard { .. })
        ));
    }

    #[test]
    fn galton_watson_is_seeded() {
        let spec = GeneratorSpec::GaltonWatson {
            offspring: vec![0.25, 0.25, 0.5],
            depth: 8,
            seed: 11,
        };
        let a = RootedTree::generate(&spec).unwrap();
        let b = RootedTree::generate(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a.height() <= 8);
        let bad = GeneratorSpec::GaltonWatson {
            offspring: vec![0.5, 0.4],
            depth: 3,
            seed: 0,
        };
        assert!(RootedTree::generate(&bad).is_err());
    }

    #[test]
    fn distances_and_meets() {
        let path = tree(&[-1, 0, 1]);
        assert_eq!(path.distance(VertexId(0), VertexId(2)).unwrap(), 2);
        assert_eq!(path.meet(VertexId(1), VertexId(2)).unwrap(), VertexId(1));
        let star = tree(&[-1, 0, 0]);
        assert_eq!(star.distance(VertexId(1), VertexId(2)).unwrap(), 2);
        assert_eq!(star.meet(VertexId(1), VertexId(2)).unwrap(), VertexId(0));
        let bin = RootedTree::generate(&GeneratorSpec::Dary { d: 2, depth: 2 }).unwrap();
        // leaves 3,4 under 1; 5,6 under 2
        assert_eq!(bin.meet(VertexId(4), VertexId(5)).unwrap(), VertexId(0));
        assert_eq!(bin.meet(VertexId(3), VertexId(4)).unwrap(), VertexId(1));
        for v in bin.vertices() {
            assert_eq!(bin.distance(v, v).unwrap(), 0);
            assert_eq!(bin.meet(VertexId::ROOT, v).unwrap(), VertexId::ROOT);
        }
        assert!(bin.meet(VertexId(0), VertexId(7)).is_err());
        assert!(bin.distance(VertexId(9), VertexId(0)).is_err());
    }

    #[test]
    fn meet_table_agrees_with_walk() {
        let t = RootedTree::random_recursive(200, 3);
        let table = MeetTable::new(&t).unwrap();
        for v in t.vertices() {
            for w in t.vertices() {
                assert_eq!(table.meet(v, w), t.meet(v, w).unwrap());
            }
        }
        let big = RootedTree::generate(&GeneratorSpec::Path { length: 5000 }).unwrap();
        assert!(MeetTable::new(&big).is_err());
    }

    #[test]
    fn descendant_counts() {
        let t = RootedTree::generate(&GeneratorSpec::Dary { d: 2, depth: 3 }).unwrap();
        assert_eq!(t.descendants_at(VertexId::ROOT, 2).unwrap(), 4);
        let t4 = RootedTree::generate(&GeneratorSpec::ThreeOne { depth: 4 }).unwrap();
        assert_eq!(t4.descendants_at(VertexId::ROOT, 4).unwrap(), 16);
        let leaf = VertexId(t.len() - 1);
        assert_eq!(t.descendants_at(leaf, 1).unwrap(), 0);
        assert_eq!(t.descendants_at(leaf, 0).unwrap(), 1);
        assert_eq!(t.descendant_counts(2)[0], 4);
    }

    #[test]
    fn truncation() {
        let t = RootedTree::generate(&GeneratorSpec::Dary { d: 2, depth: 3 }).unwrap();
        assert_eq!(t.truncate_to_depth(2).len(), 7);
        assert_eq!(t.truncate_to_depth(0).len(), 1);
        assert_eq!(t.truncate_to_depth(3), t);
        assert_eq!(t.truncate_to_depth(99), t);
        // a non-level-ordered input is renumbered breadth-first
        let odd = tree(&[-1, 0, 1, 0]);
        let (tr, map) = odd.truncate_with_map(5);
        assert_eq!(tr.parent_array(), vec![-1, 0, 0, 1]);
        assert_eq!(
            map,
            vec![VertexId(0), VertexId(1), VertexId(3), VertexId(2)]
        );
    }

    #[test]
    fn growth_of_known_families() {
        let t = RootedTree::generate(&GeneratorSpec::Dary { d: 2, depth: 12 }).unwrap();
        let g = growth_estimates(&t);
        assert!(g.level.iter().all(|&x| x == 2.0));
        assert_eq!(g.level.len(), 12);

        let t = RootedTree::generate(&GeneratorSpec::ThreeOne { depth: 12 }).unwrap();
        let g = growth_estimates(&t);
        assert!(g.level.iter().all(|&x| x == 2.0));
        // deep 3-ary subtrees: max_v |D_r(v)| = 3^r while 3^r fits below level 12
        assert!(g.max_local[..7].iter().all(|&x| x == 3.0));
        // at r = 12 only the root has descendants that deep
        assert_eq!(g.max_local[11], 2.0);

        let p = RootedTree::generate(&GeneratorSpec::Path { length: 12 }).unwrap();
        let g = growth_estimates(&p);
        assert!(g.level.iter().chain(&g.max_local).all(|&x| x == 1.0));
        // ball grows linearly, so its root tends to 1 but is not 1
        assert!(g.ball.iter().all(|&x| x > 1.0));
    }

    #[test]
    fn text_format_round_trip() {
        let t = tree(&[-1, 0, 0, 1]);
        let text = t.to_text();
        assert_eq!(text, "4\n-1 0 0 1\n");
        assert_eq!(RootedTree::from_text(&text).unwrap(), t);
        assert_eq!(RootedTree::singleton().to_text(), "1\n-1\n");
        assert!(matches!(
            RootedTree::from_text("3\n-1 0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            RootedTree::from_text("x\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            RootedTree::from_text("2\n-1 0\nzzz\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn generator_spec_parsing() {
        for s in ["dary:2:3", "threeone:5", "path:4", "gw:0.5,0.5:3:9"] {
            let spec: GeneratorSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("dary:0:3".parse::<GeneratorSpec>().is_err());
        assert!("tree:3".parse::<GeneratorSpec>().is_err());
        assert!("gw:0.5,0.6:3:1".parse::<GeneratorSpec>().is_err());
    }
}
