//! Browser bindings for the demo page. Each exported function returns a JSON
//! string; the plain Rust functions behind them are usable natively.

use serde::Serialize;
use treeconc::broadcast::{magnetization_distribution, variance_magnetization, IsingModel};
use treeconc::delta::{delta_profile, pair_distance_sum, TreeFamily};
use treeconc::format::BValue;
use treeconc::{GeneratorSpec, RootedTree};
use wasm_bindgen::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error(transparent)]
    Core(#[from] treeconc::Error),
    #[error("{0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, DemoError>;

/// Largest depth offered per family in the browser.
pub const THREEONE_KMAX: usize = 18;
pub const DARY2_KMAX: usize = 22;
/// Largest tree drawn vertex by vertex.
pub const DRAW_LIMIT: usize = 4096;
/// Largest tree for the exact magnetization law.
pub const TAIL_LIMIT: usize = 1500;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub b: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct GrowthCurves {
    pub k: Vec<usize>,
    pub n_vertices: Vec<usize>,
    pub curves: Vec<Curve>,
}

/// `Δ_k²/|V_k|` for `k = 0..=kmax` and each comma-separated `b` token.
pub fn growth_curves(family: &str, bs: &str, kmax: usize) -> Result<GrowthCurves> {
    let (family, limit) = match family {
        "threeone" => (TreeFamily::ThreeOne, THREEONE_KMAX),
        "dary2" => (TreeFamily::Dary(2), DARY2_KMAX),
        other => return Err(DemoError::Input(format!("unknown family '{other}'"))),
    };
    if kmax > limit {
        return Err(DemoError::Input(format!(
            "depth {kmax} exceeds the in-browser limit of {limit}"
        )));
    }
    let tokens: Vec<BValue> = bs
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse())
        .collect::<treeconc::Result<_>>()?;
    if tokens.is_empty() {
        return Err(DemoError::Input("at least one b value is required".into()));
    }
    let curves = tokens
        .iter()
        .map(|b| {
            Ok(Curve {
                b: b.to_string(),
                values: family.series(b.value, kmax)?.ratios,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GrowthCurves {
        k: (0..=kmax).collect(),
        n_vertices: (0..=kmax)
            .map(|k| family.vertex_count(k).unwrap_or(0))
            .collect(),
        curves,
    })
}

#[derive(Debug, Serialize)]
pub struct TreeDelta {
    pub parents: Vec<i64>,
    pub depth: Vec<usize>,
    pub delta: Vec<f64>,
    pub big_delta: f64,
    pub max_delta: f64,
    pub pair_sum: f64,
    pub sandwich_upper: f64,
}

fn build_tree(spec: &str, limit: usize) -> Result<RootedTree> {
    let spec: GeneratorSpec = spec.trim().parse()?;
    let tree = RootedTree::generate(&spec)?;
    if tree.len() > limit {
        return Err(DemoError::Input(format!(
            "{} vertices exceeds the in-browser limit of {limit}",
            tree.len()
        )));
    }
    Ok(tree)
}

/// Per-vertex `δ` on a generated tree together with `Δ²` and its sandwich.
pub fn tree_delta(spec: &str, b: &str) -> Result<TreeDelta> {
    let tree = build_tree(spec, DRAW_LIMIT)?;
    let b: BValue = b.trim().parse()?;
    let profile = delta_profile(&tree, b.value)?;
    let pair_sum = pair_distance_sum(&tree, b.value)?;
    Ok(TreeDelta {
        parents: tree.parent_array(),
        depth: tree.vertices().map(|v| tree.depth(v)).collect(),
        big_delta: profile.big_delta,
        max_delta: profile.max_delta(),
        sandwich_upper: pair_sum / (1.0 - b.value * b.value),
        pair_sum,
        delta: profile.delta,
    })
}

#[derive(Debug, Serialize)]
pub struct TailComparison {
    pub n: usize,
    pub big_delta: f64,
    pub variance: f64,
    pub epsilon: Vec<f64>,
    pub exact: Vec<f64>,
    pub bound: Vec<f64>,
}

/// Exact tail of the centered magnetization against `2 exp(-2 n² ε² / Δ²)`.
pub fn magnetization_tail(spec: &str, p: f64, points: usize) -> Result<TailComparison> {
    let tree = build_tree(spec, TAIL_LIMIT)?;
    let n = tree.len();
    let model = IsingModel::new(tree, p)?;
    let big_delta = delta_profile(model.tree(), model.b())?.big_delta;
    let law = magnetization_distribution(&model)?;
    let variance = variance_magnetization(&model)?.formula;
    let points = points.clamp(2, 1000);
    let epsilon: Vec<f64> = (0..points)
        .map(|i| 0.5 * i as f64 / (points - 1) as f64)
        .collect();
    let exact = epsilon.iter().map(|&e| law.centered_tail(e)).collect();
    let nf = n as f64;
    let bound = epsilon
        .iter()
        .map(|&e| 2.0 * (-2.0 * nf * nf * e * e / (big_delta * big_delta)).exp())
        .collect();
    Ok(TailComparison {
        n,
        big_delta,
        variance,
        epsilon,
        exact,
        bound,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = growthCurves)]
pub fn growth_curves_js(
    family: &str,
    bs: &str,
    kmax: usize,
) -> std::result::Result<String, JsError> {
    to_js(growth_curves(family, bs, kmax))
}

#[wasm_bindgen(js_name = treeDelta)]
pub fn tree_delta_js(spec: &str, b: &str) -> std::result::Result<String, JsError> {
    to_js(tree_delta(spec, b))
}

#[wasm_bindgen(js_name = magnetizationTail)]
pub fn magnetization_tail_js(
    spec: &str,
    p: f64,
    points: usize,
) -> std::result::Result<String, JsError> {
    to_js(magnetization_tail(spec, p, points))
}
