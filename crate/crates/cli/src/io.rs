//! Tree sources, output sinks and the measure CSV format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;
use treeconc::broadcast::{parse_model, ExactMeasure, ModelSpec, StateSpace};
use treeconc::format::{fmt_g, round_g};
use treeconc::{GeneratorSpec, RootedTree};

use crate::Common;

/// Tree used when neither `--tree` nor `--gen` is given.
pub const DEFAULT_GENERATOR: &str = "dary:2:2";

/// Caps the global rayon pool at `TREECONC_THREADS` when set.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("TREECONC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| anyhow!("TREECONC_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")
}

pub fn read_tree_file(path: &Path) -> Result<RootedTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RootedTree::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_tree(common: &Common) -> Result<RootedTree> {
    match (&common.tree, &common.generator) {
        (Some(path), _) => read_tree_file(path),
        (None, Some(spec)) => Ok(RootedTree::generate(spec)?),
        (None, None) => {
            let spec: GeneratorSpec = DEFAULT_GENERATOR.parse()?;
            Ok(RootedTree::generate(&spec)?)
        }
    }
}

/// `b` from `--b`, or `1 - 2p` from `--p`.
pub fn resolve_b(common: &Common) -> Result<f64> {
    match (common.b, common.p) {
        (Some(b), None) => Ok(b.value),
        (None, Some(p)) => {
            if !(p > 0.0 && p <= 0.5) {
                bail!("flip probability p = {p} is outside (0, 1/2]");
            }
            Ok(1.0 - 2.0 * p)
        }
        _ => bail!("exactly one of --b or --p is required"),
    }
}

/// `p` from `--p`, or `(1 - b)/2` from `--b`.
pub fn resolve_p(common: &Common) -> Result<f64> {
    match (common.b, common.p) {
        (None, Some(p)) => Ok(p),
        (Some(b), None) => Ok((1.0 - b.value) / 2.0),
        _ => bail!("exactly one of --b or --p is required"),
    }
}

pub fn read_model(path: &Path) -> Result<ModelSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_model(&text, |name| {
        let tree_path: PathBuf = base.join(name);
        let text = fs::read_to_string(&tree_path).map_err(|e| treeconc::Error::Parse {
            line: 0,
            reason: format!("{}: {e}", tree_path.display()),
        })?;
        RootedTree::from_text(&text)
    })
    .with_context(|| format!("parsing {}", path.display()))
}

pub fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// A JSON number rounded to the serialized precision.
pub fn num(x: f64) -> Value {
    Value::from(round_g(x))
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// `rank,probability` rows for the nonzero masses.
pub fn measure_csv(mu: &ExactMeasure) -> String {
    let mut out = String::from("rank,probability\n");
    for (r, &p) in mu.probs().iter().enumerate() {
        if p != 0.0 {
            out.push_str(&format!("{r},{}\n", fmt_g(p)));
        }
    }
    out
}

/// Parses a `rank,probability` CSV; missing ranks have mass 0. Masses are
/// renormalized to absorb the rounding of the serialized values.
pub fn read_measure(path: &Path, space: &StateSpace, coords: usize) -> Result<ExactMeasure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let count = u32::try_from(coords)
        .ok()
        .and_then(|c| space.size().checked_pow(c))
        .filter(|&c| c <= 1 << 20)
        .ok_or_else(|| {
            anyhow!(
                "{} states over {coords} coordinates is too large",
                space.size()
            )
        })?;
    let mut probs = vec![0.0; count];
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "rank,probability" => {}
        _ => bail!(
            "{}: line 1: expected header 'rank,probability'",
            path.display()
        ),
    }
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (rank, prob) = line.split_once(',').ok_or_else(|| {
            anyhow!(
                "{}: line {line_no}: expected rank,probability",
                path.display()
            )
        })?;
        let rank: usize = rank
            .trim()
            .parse()
            .map_err(|_| anyhow!("{}: line {line_no}: bad rank {rank:?}", path.display()))?;
        let prob: f64 = prob.trim().parse().map_err(|_| {
            anyhow!(
                "{}: line {line_no}: bad probability {prob:?}",
                path.display()
            )
        })?;
        if rank >= count {
            bail!(
                "{}: line {line_no}: rank {rank} out of range",
                path.display()
            );
        }
        if prob < 0.0 || !prob.is_finite() {
            bail!(
                "{}: line {line_no}: probability must be finite and nonnegative",
                path.display()
            );
        }
        probs[rank] += prob;
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        bail!("{}: probabilities sum to {total}", path.display());
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(ExactMeasure::new(space.clone(), coords, probs)?)
}

/// One configuration as a string of state digits (comma-separated when
/// states exceed 10).
pub fn configuration_text(x: &[usize], states: usize) -> String {
    if states <= 10 {
        x.iter()
            .map(|&s| char::from_digit(s as u32, 10).expect("single digit"))
            .collect()
    } else {
        x.iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}
