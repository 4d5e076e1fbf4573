#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use treeconc::RootedTree;

/// Random tree with `n` vertices: each vertex picks a uniformly random
/// earlier parent, biased toward recent vertices half the time so that
/// both bushy and deep shapes appear.
pub fn random_tree(n: usize, seed: u64) -> RootedTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deep = rng.random_bool(0.5);
    let mut parents = vec![-1i64];
    for i in 1..n {
        let p = if deep {
            i - 1 - rng.random_range(0..i.min(3))
        } else {
            rng.random_range(0..i)
        };
        parents.push(p as i64);
    }
    RootedTree::from_parents(&parents).unwrap()
}

/// Undirected adjacency lists.
pub fn adjacency(tree: &RootedTree) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); tree.len()];
    for (i, &p) in tree.parent_array().iter().enumerate().skip(1) {
        adj[i].push(p as usize);
        adj[p as usize].push(i);
    }
    adj
}

/// Graph distances from `s` by breadth-first search.
pub fn bfs_distances(adj: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Dense child-sum matrix: `Q[v][w] = 1` when `w` is a child of `v`.
pub fn dense_q(tree: &RootedTree) -> Vec<Vec<f64>> {
    let n = tree.len();
    let mut q = vec![vec![0.0; n]; n];
    for (i, &p) in tree.parent_array().iter().enumerate().skip(1) {
        q[p as usize][i] = 1.0;
    }
    q
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for (k, &x) in a[i].iter().enumerate() {
            if x != 0.0 {
                for j in 0..m {
                    c[i][j] += x * b[k][j];
                }
            }
        }
    }
    c
}

pub fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| f64::from(i == j)).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a[0].len();
    (0..m).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
