//! Exact Wasserstein-1 distances over weighted Hamming metrics, relative
//! entropy, and 1-Lipschitz test functions on small configuration spaces.
//!
//! Two exact routes compute `d̄`:
//!
//! - [`wasserstein`] solves the bipartite transportation problem between the
//!   two supports and returns the coupling together with a dual certificate.
//! - [`wasserstein_hamming_graph`] solves the equivalent transshipment
//!   problem on the Hamming graph, whose shortest-path metric is `d_α`; its
//!   node potentials are an optimal 1-Lipschitz Kantorovich witness.

use serde::{Deserialize, Serialize};

use crate::broadcast::{ExactMeasure, StateSpace};
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;

/// Largest combined support accepted by the bipartite solver.
pub const SUPPORT_LIMIT: usize = 4096;

/// Largest configuration space for exhaustive constructions.
pub const ENUMERATION_LIMIT: usize = 1 << 20;

/// Probabilities below this are dropped from supports.
pub const SUPPORT_CUTOFF: f64 = 1e-15;

/// Integer cost units per unit of distance in the bipartite solver.
const BIPARTITE_SCALE: f64 = 1e9;

/// Integer cost units per unit of distance on the Hamming graph; finer than
/// the bipartite scale since path costs add up per-edge rounding.
const GRAPH_SCALE: f64 = (1u64 << 40) as f64;

/// `d_α(x, y) = (1/n) Σ_i α(i) d(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedHamming {
    space: StateSpace,
    weights: Vec<f64>,
}

impl WeightedHamming {
    /// All weights 1.
    pub fn normalized(space: StateSpace, n: usize) -> Self {
        WeightedHamming {
            space,
            weights: vec![1.0; n],
        }
    }

    pub fn new(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no coordinates".into()));
        }
        if let Some(w) = weights.iter().find(|w| **w <= 0.0 || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
        }
        Ok(WeightedHamming { space, weights })
    }

    pub fn coords(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn dist(&self, x: &[usize], y: &[usize]) -> f64 {
        let total: f64 = x
            .iter()
            .zip(y)
            .zip(&self.weights)
            .map(|((&a, &b), w)| w * self.space.dist(a, b))
            .sum();
        total / self.coords() as f64
    }

    /// Distance between configurations given by rank (coordinate 0 most
    /// significant).
    pub fn dist_ranks(&self, mut x: usize, mut y: usize) -> f64 {
        let q = self.space.size();
        let mut total = 0.0;
        for w in self.weights.iter().rev() {
            total += w * self.space.dist(x % q, y % q);
            x /= q;
            y /= q;
        }
        total / self.coords() as f64
    }

    fn configuration_count(&self) -> Option<usize> {
        self.space
            .size()
            .checked_pow(u32::try_from(self.coords()).ok()?)
    }

    fn enumerable(&self) -> Result<usize> {
        match self.configuration_count() {
            Some(c) if c <= ENUMERATION_LIMIT => Ok(c),
            c => Err(Error::SizeGuard {
                what: "configuration space",
                required: c.map_or(u128::MAX, |c| c as u128),
                limit: ENUMERATION_LIMIT as u128,
            }),
        }
    }

    /// Rank offsets of each coordinate.
    fn strides(&self) -> Vec<usize> {
        let q = self.space.size();
        let n = self.coords();
        (0..n).map(|i| q.pow((n - 1 - i) as u32)).collect()
    }
}

/// An optimal coupling between two truncated supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// Configuration ranks of the rows.
    pub support_mu: Vec<usize>,
    /// Configuration ranks of the columns.
    pub support_nu: Vec<usize>,
    /// Nonzero entries `(row, column, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    /// `Σ coupling · distance`.
    pub cost: f64,
    /// Mass of `μ` and `ν` removed by support truncation before renormalizing.
    pub dropped_mass: (f64, f64),
    /// Smallest reduced cost of the recovered potentials, in distance units.
    pub dual_slack: f64,
    /// Primal cost minus the dual objective of the potentials.
    pub duality_gap: f64,
}

impl TransportPlan {
    /// Dense coupling matrix over `support_mu × support_nu`.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.support_nu.len()]; self.support_mu.len()];
        for &(i, j, w) in &self.entries {
            m[i][j] += w;
        }
        m
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix().iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.support_nu.len()];
        for &(_, j, w) in &self.entries {
            sums[j] += w;
        }
        sums
    }
}

/// Support of `p` above the cutoff, renormalized, with the dropped mass.
fn truncated_support(p: &[f64]) -> (Vec<usize>, Vec<f64>, f64) {
    let (idx, mass): (Vec<usize>, Vec<f64>) = p
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= SUPPORT_CUTOFF)
        .map(|(i, &x)| (i, x))
        .unzip();
    let kept: f64 = mass.iter().sum();
    let total: f64 = p.iter().sum();
    let mass = mass.into_iter().map(|x| x / kept).collect();
    (idx, mass, (total - kept).max(0.0))
}

fn check_compatible(mu: &ExactMeasure, nu: &ExactMeasure) -> Result<()> {
    if mu.space() != nu.space() || mu.coords() != nu.coords() {
        return Err(Error::InvalidMeasure(
            "measures live on different configuration spaces".into(),
        ));
    }
    Ok(())
}

/// Bipartite min-cost flow between two weighted point sets.
fn bipartite(
    a: &[f64],
    b: &[f64],
    dist: impl Fn(usize, usize) -> f64,
) -> (Vec<(usize, usize, f64)>, f64, f64, f64) {
    let (na, nb) = (a.len(), b.len());
    let (s, t) = (na + nb, na + nb + 1);
    let mut g = FlowNetwork::new(na + nb + 2);
    for (i, &m) in a.iter().enumerate() {
        g.add_edge(s, i, m, 0);
    }
    for (j, &m) in b.iter().enumerate() {
        g.add_edge(na + j, t, m, 0);
    }
    let mut arcs = Vec::with_capacity(na * nb);
    for i in 0..na {
        for j in 0..nb {
            let d = dist(i, j);
            let e = g.add_edge(
                i,
                na + j,
                f64::INFINITY,
                (d * BIPARTITE_SCALE).round() as i64,
            );
            arcs.push((e, i, j, d));
        }
    }
    let sol = g.solve(s, t);
    debug_assert!((sol.flow - a.iter().sum::<f64>()).abs() < 1e-9);
    let h = &sol.potentials;
    let mut entries = Vec::new();
    let mut cost = 0.0;
    let mut scaled = 0.0;
    for &(e, i, j, d) in &arcs {
        let w = g.flow_on(e);
        if w > 0.0 {
            entries.push((i, j, w));
            cost += w * d;
            scaled += w * (d * BIPARTITE_SCALE).round();
        }
    }
    // φ(x) = -h(x), ψ(y) = h(y) satisfy φ(x) + ψ(y) <= c(x, y)
    let dual: f64 = b
        .iter()
        .enumerate()
        .map(|(j, m)| m * h[na + j] as f64)
        .sum::<f64>()
        - a.iter()
            .enumerate()
            .map(|(i, m)| m * h[i] as f64)
            .sum::<f64>();
    let slack = g.min_reduced_cost(h) as f64 / BIPARTITE_SCALE;
    (entries, cost, slack, (scaled - dual) / BIPARTITE_SCALE)
}

/// Exact `d̄_α(μ, ν)` with its optimal coupling.
pub fn wasserstein(
    mu: &ExactMeasure,
    nu: &ExactMeasure,
    metric: &WeightedHamming,
) -> Result<(f64, TransportPlan)> {
    check_compatible(mu, nu)?;
    if metric.coords() != mu.coords() || metric.space() != mu.space() {
        return Err(Error::InvalidMeasure(
            "metric does not match the measures".into(),
        ));
    }
    let (sa, a, dropped_a) = truncated_support(mu.probs());
    let (sb, b, dropped_b) = truncated_support(nu.probs());
    if sa.len() + sb.len() > SUPPORT_LIMIT {
        return Err(Error::SizeGuard {
            what: "transport support",
            required: (sa.len() + sb.len()) as u128,
            limit: SUPPORT_LIMIT as u128,
        });
    }
    let (entries, cost, dual_slack, duality_gap) =
        bipartite(&a, &b, |i, j| metric.dist_ranks(sa[i], sb[j]));
    let plan = TransportPlan {
        support_mu: sa,
        support_nu: sb,
        entries,
        cost,
        dropped_mass: (dropped_a, dropped_b),
        dual_slack,
        duality_gap,
    };
    Ok((cost, plan))
}

/// `d̄` between two laws on the state space under its own metric.
pub fn base_wasserstein(a: &[f64], b: &[f64], space: &StateSpace) -> f64 {
    let (sa, wa, _) = truncated_support(a);
    let (sb, wb, _) = truncated_support(b);
    bipartite(&wa, &wb, |i, j| space.dist(sa[i], sb[j])).1
}

/// `d̄_α(μ, ν)` on the Hamming graph, with an optimal Kantorovich witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTransport {
    pub distance: f64,
    /// 1-Lipschitz `f` with `∫f dν - ∫f dμ = distance` (up to rounding).
    pub witness: Vec<f64>,
}

/// Exact `d̄_α(μ, ν)` as min-cost transshipment on the Hamming graph.
///
/// Edges change one coordinate `i` from `a` to `c` at cost `α(i) d(a, c) / n`;
/// their shortest-path metric is `d_α`, so the optimal transshipment cost
/// is the Wasserstein-1 distance.
pub fn wasserstein_hamming_graph(
    mu: &ExactMeasure,
    nu: &ExactMeasure,
    metric: &WeightedHamming,
) -> Result<GraphTransport> {
    check_compatible(mu, nu)?;
    if metric.coords() != mu.coords() || metric.space() != mu.space() {
        return Err(Error::InvalidMeasure(
            "metric does not match the measures".into(),
        ));
    }
    let count = metric.enumerable()?;
    let q = metric.space().size();
    let n = metric.coords();
    let strides = metric.strides();
    let (s, t) = (count, count + 1);
    let mut g = FlowNetwork::new(count + 2);
    let (sa, a, _) = truncated_support(mu.probs());
    let (sb, b, _) = truncated_support(nu.probs());
    for (&x, &m) in sa.iter().zip(&a) {
        g.add_edge(s, x, m, 0);
    }
    for (&y, &m) in sb.iter().zip(&b) {
        g.add_edge(y, t, m, 0);
    }
    let mut arcs = Vec::with_capacity(count * n * (q - 1));
    for x in 0..count {
        for (i, &stride) in strides.iter().enumerate() {
            let digit = (x / stride) % q;
            for c in (0..q).filter(|&c| c != digit) {
                let y = x - digit * stride + c * stride;
                let d = metric.weights()[i] * metric.space().dist(digit, c) / n as f64;
                let e = g.add_edge(x, y, f64::INFINITY, (d * GRAPH_SCALE).round() as i64);
                arcs.push((e, d));
            }
        }
    }
    let sol = g.solve(s, t);
    debug_assert!((sol.flow - a.iter().sum::<f64>()).abs() < 1e-9);
    let distance = arcs.iter().map(|&(e, d)| g.flow_on(e) * d).sum();
    let witness = sol.potentials[..count]
        .iter()
        .map(|&h| h as f64 / GRAPH_SCALE)
        .collect();
    Ok(GraphTransport { distance, witness })
}

/// `D(μ‖ν)` in nats; `+∞` when `μ` is not absolutely continuous w.r.t. `ν`.
pub fn relative_entropy(mu: &ExactMeasure, nu: &ExactMeasure) -> Result<f64> {
    check_compatible(mu, nu)?;
    let mut total = 0.0;
    for (&m, &v) in mu.probs().iter().zip(nu.probs()) {
        if m == 0.0 {
            continue;
        }
        if v == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += m * (m / v).ln();
    }
    Ok(total.max(0.0))
}

/// `f̃(x) = min_y (f(y) + d(x, y))` over the points `(rank, value)` of a
/// partial function; the result is 1-Lipschitz and agrees with `f` where
/// `f` was already 1-Lipschitz.
pub fn mcshane_extension(values: &[(usize, f64)], metric: &WeightedHamming) -> Result<Vec<f64>> {
    let count = metric.enumerable()?;
    if values.is_empty() {
        return Err(Error::InvalidMeasure(
            "extension of an empty function".into(),
        ));
    }
    if let Some(&(r, _)) = values.iter().find(|(r, _)| *r >= count) {
        return Err(Error::InvalidMeasure(format!("rank {r} out of range")));
    }
    Ok((0..count)
        .map(|x| {
            values
                .iter()
                .map(|&(y, v)| v + metric.dist_ranks(x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Checks `|f(x) - f(y)| <= d_α(x, y)` for all pairs.
///
/// `d_α` is the path metric of the Hamming graph, so checking the
/// single-coordinate edges suffices.
pub fn check_lipschitz(f: &[f64], metric: &WeightedHamming) -> Result<()> {
    let count = metric.enumerable()?;
    if f.len() != count {
        return Err(Error::InvalidMeasure(format!(
            "function has {} values for {count} configurations",
            f.len()
        )));
    }
    let q = metric.space().size();
    let strides = metric.strides();
    for x in 0..count {
        for &stride in &strides {
            let digit = (x / stride) % q;
            for c in (digit + 1)..q {
                let y = x + (c - digit) * stride;
                let gap = (f[x] - f[y]).abs();
                let distance = metric.dist_ranks(x, y);
                if gap > distance + 1e-12 {
                    return Err(Error::NotLipschitz {
                        x,
                        y,
                        gap,
                        distance,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Both sides of `d̄_α(Π μ_i, Π ν_i) = (1/n) Σ α(i) d̄(μ_i, ν_i)`.
pub fn product_coupling_identity(
    mus: &[Vec<f64>],
    nus: &[Vec<f64>],
    space: &StateSpace,
    weights: &[f64],
) -> Result<(f64, f64)> {
    if mus.len() != nus.len() || mus.len() != weights.len() {
        return Err(Error::InvalidMeasure(
            "per-coordinate measures and weights differ in length".into(),
        ));
    }
    let metric = WeightedHamming::new(space.clone(), weights.to_vec())?;
    let mu = ExactMeasure::product(space.clone(), mus)?;
    let nu = ExactMeasure::product(space.clone(), nus)?;
    let (lhs, _) = wasserstein(&mu, &nu, &metric)?;
    let rhs = mus
        .iter()
        .zip(nus)
        .zip(weights)
        .map(|((m, v), w)| w * base_wasserstein(m, v, space))
        .sum::<f64>()
        / weights.len() as f64;
    Ok((lhs, rhs))
}
