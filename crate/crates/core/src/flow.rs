//! Successive shortest paths for min-cost flow with real-valued capacities
//! and integer costs.
//!
//! Costs are integers so Dijkstra on reduced costs is exact; flows are
//! `f64`. Every augmentation saturates its bottleneck exactly (`a - a == 0`),
//! so the loop terminates once the sink is unreachable.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

pub(crate) struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<i64>,
}

pub(crate) struct FlowSolution {
    pub flow: f64,
    /// Node potentials `h` with `cost(u,v) + h(u) - h(v) >= 0` on every residual edge.
    pub potentials: Vec<i64>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            cost: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u -> v` and its reverse; returns the forward edge id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, cost: i64) -> usize {
        let e = self.to.len();
        self.to.extend([v, u]);
        self.cap.extend([cap, 0.0]);
        self.cost.extend([cost, -cost]);
        self.adj[u].push(e);
        self.adj[v].push(e + 1);
        e
    }

    /// Flow currently carried by a forward edge.
    pub fn flow_on(&self, e: usize) -> f64 {
        self.cap[e ^ 1]
    }

    /// Min-cost flow from `s` to `t`; edge costs must be nonnegative.
    pub fn solve(&mut self, s: usize, t: usize) -> FlowSolution {
        let n = self.node_count();
        let mut h = vec![0i64; n];
        let mut dist = vec![i64::MAX; n];
        let mut done = vec![false; n];
        let mut via = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        let mut total = 0.0;
        loop {
            dist.fill(i64::MAX);
            done.fill(false);
            via.fill(usize::MAX);
            heap.clear();
            dist[s] = 0;
            heap.push(Reverse((0i64, s)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if done[u] {
                    continue;
                }
                done[u] = true;
                if u == t {
                    break;
                }
                for &e in &self.adj[u] {
                    if self.cap[e] <= 0.0 {
                        continue;
                    }
                    let v = self.to[e];
                    if done[v] {
                        continue;
                    }
                    let reduced = self.cost[e] + h[u] - h[v];
                    debug_assert!(reduced >= 0, "negative reduced cost {reduced}");
                    let nd = d + reduced;
                    if nd < dist[v] {
                        dist[v] = nd;
                        via[v] = e;
                        heap.push(Reverse((nd, v)));
                    }
                }
            }
            if !done[t] {
                break;
            }
            let reach = dist[t];
            for v in 0..n {
                h[v] += if done[v] { dist[v] } else { reach };
            }
            let mut amount = f64::INFINITY;
            let mut v = t;
            while v != s {
                let e = via[v];
                amount = amount.min(self.cap[e]);
                v = self.to[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.cap[e] -= amount;
                self.cap[e ^ 1] += amount;
                v = self.to[e ^ 1];
            }
            total += amount;
        }
        FlowSolution {
            flow: total,
            potentials: h,
        }
    }

    /// Smallest reduced cost over residual edges under `h`.
    pub fn min_reduced_cost(&self, h: &[i64]) -> i64 {
        (0..self.to.len())
            .filter(|&e| self.cap[e] > 0.0)
            .map(|e| self.cost[e] + h[self.to[e ^ 1]] - h[self.to[e]])
            .min()
            .unwrap_or(0)
    }
}
