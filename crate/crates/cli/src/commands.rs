//! One function per subcommand; each returns whether its checks passed.

use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};
use treeconc::broadcast::{exact_measure, sample_one, IsingModel, ModelSpec, StateSpace};
use treeconc::delta::{delta_profile, delta_series, TreeFamily};
use treeconc::format::{fmt_g, BValue};
use treeconc::spectral::{
    mixing_matrix_with_order, mixing_norms, q_power_norm_exact, q_power_norm_iterative,
    random_bfs_order,
};
use treeconc::transport::{wasserstein, WeightedHamming};
use treeconc::verify::{
    check_eta_matrix, check_exp_moment, check_mixing_corollary, check_optimality_chain, check_t1,
    check_tail, empirical_tail, random_lipschitz_functions, run_all, t1_family, InequalityReport,
    TestFunction, EPSILON_GRID, LAMBDA_GRID,
};

use crate::io::{
    configuration_text, json_text, load_tree, measure_csv, num, nums, read_measure, read_model,
    resolve_b, resolve_p, write_output,
};
use crate::{
    Command, Common, Family, Figure1Args, Format, ModelArgs, SampleArgs, SpectralArgs, VerifyArgs,
    VerifyTarget, WassersteinArgs,
};

/// Largest `k` accepted by `figure1` per family.
pub const THREEONE_KMAX: usize = 25;
pub const DARY2_KMAX: usize = 30;

/// Samples generated per parallel batch.
const SAMPLE_BATCH: u64 = 1 << 14;

pub fn run(command: Command) -> Result<bool> {
    match command {
        Command::GenTree(c) => gen_tree(&c),
        Command::Delta(c) => delta(&c),
        Command::DeltaSeries(c) => series(&c),
        Command::Spectral(a) => spectral(&a),
        Command::Mixing(c) => mixing(&c),
        Command::Sample(a) => sample(&a),
        Command::Exact(a) => exact(&a),
        Command::Verify(a) => verify(&a),
        Command::Figure1(a) => figure1(&a),
        Command::Wasserstein(a) => transport(&a),
    }
    .map(|passed| passed.unwrap_or(true))
}

type Outcome = Result<Option<bool>>;

fn gen_tree(c: &Common) -> Outcome {
    let tree = load_tree(c)?;
    write_output(c.out.as_deref(), &tree.to_text())?;
    Ok(None)
}

fn delta(c: &Common) -> Outcome {
    let tree = load_tree(c)?;
    let b = resolve_b(c)?;
    let p = delta_profile(&tree, b)?;
    let text = match c.format.unwrap_or(Format::Json) {
        Format::Json => json_text(&json!({
            "b": num(b),
            "n": tree.len(),
            "big_delta": num(p.big_delta),
            "delta_sq": num(p.delta_sq()),
            "max_delta": num(p.max_delta()),
            "delta": nums(&p.delta),
        })),
        Format::Csv => {
            let mut s = String::from("vertex,depth,delta\n");
            for v in tree.vertices() {
                s.push_str(&format!(
                    "{v},{},{}\n",
                    tree.depth(v),
                    fmt_g(p.delta[v.index()])
                ));
            }
            s
        }
    };
    write_output(c.out.as_deref(), &text)?;
    Ok(None)
}

fn series(c: &Common) -> Outcome {
    let tree = load_tree(c)?;
    let b = resolve_b(c)?;
    let kmax = c.kmax.unwrap_or(tree.height());
    let s = delta_series(&tree, b, kmax)?;
    let text = match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("k,n_vertices,delta,delta_sq_over_n\n");
            for i in 0..s.len() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    s.ks[i],
                    s.vertex_counts[i],
                    fmt_g(s.deltas[i]),
                    fmt_g(s.ratios[i])
                ));
            }
            out
        }
        Format::Json => json_text(&json!({
            "b": num(b),
            "k": s.ks,
            "n_vertices": s.vertex_counts,
            "delta": nums(&s.deltas),
            "delta_sq_over_n": nums(&s.ratios),
        })),
    };
    write_output(c.out.as_deref(), &text)?;
    Ok(None)
}

fn spectral(a: &SpectralArgs) -> Outcome {
    let tree = load_tree(&a.common)?;
    let seed = a.common.seed.unwrap_or(0);
    let v = json!({
        "j": a.j,
        "exact": num(q_power_norm_exact(&tree, a.j)),
        "iterative": num(q_power_norm_iterative(&tree, a.j, a.iters, seed)),
    });
    write_output(a.common.out.as_deref(), &json_text(&v))?;
    Ok(None)
}

fn mixing(c: &Common) -> Outcome {
    let tree = load_tree(c)?;
    let b = resolve_b(c)?;
    let (label, order) = match c.seed {
        Some(seed) => (
            format!("shuffled seed={seed}"),
            random_bfs_order(&tree, seed),
        ),
        None => ("canonical".to_string(), tree.bfs_order()),
    };
    let m = mixing_matrix_with_order(&tree, b, &order)?;
    let text = match c.format.unwrap_or(Format::Json) {
        Format::Json => {
            let norms = mixing_norms(&m);
            let p = delta_profile(&tree, b)?;
            let row_norm = norms.row_sums.iter().map(|x| x * x).sum::<f64>().sqrt();
            json_text(&json!({
                "b": num(b),
                "n": tree.len(),
                "order": label,
                "inf_norm": num(norms.inf_norm),
                "max_delta": num(p.max_delta()),
                "row_sum_norm": num(row_norm),
                "big_delta": num(p.big_delta),
                "two_norm": num(norms.two_norm),
                "big_delta_over_sqrt_n": num(p.big_delta / (tree.len() as f64).sqrt()),
            }))
        }
        Format::Csv => {
            let mut s = String::from("vertex");
            for v in &order {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
            for (i, v) in order.iter().enumerate() {
                s.push_str(&v.to_string());
                for x in m.row(i) {
                    s.push(',');
                    s.push_str(&fmt_g(*x));
                }
                s.push('\n');
            }
            s
        }
    };
    write_output(c.out.as_deref(), &text)?;
    Ok(None)
}

fn load_model(a: &ModelArgs) -> Result<ModelSpec> {
    match &a.model {
        Some(path) => read_model(path),
        None => {
            let tree = load_tree(&a.common)?;
            Ok(ModelSpec::Ising(IsingModel::new(
                tree,
                resolve_p(&a.common)?,
            )?))
        }
    }
}

fn sample(a: &SampleArgs) -> Outcome {
    let spec = load_model(&a.model)?;
    let model = spec.model();
    let states = model.space().size();
    let seed = a.model.common.seed.unwrap_or(0);
    let mut sink: Box<dyn Write> = match &a.model.common.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    let mut start = 0;
    while start < a.count {
        let end = (start + SAMPLE_BATCH).min(a.count);
        let lines: Vec<String> = (start..end)
            .into_par_iter()
            .map(|i| configuration_text(&sample_one(model, seed, i), states))
            .collect();
        for line in lines {
            writeln!(sink, "{line}")?;
        }
        start = end;
    }
    sink.flush()?;
    Ok(None)
}

fn exact(a: &ModelArgs) -> Outcome {
    let spec = load_model(a)?;
    let mu = exact_measure(spec.model())?;
    write_output(a.common.out.as_deref(), &measure_csv(&mu))?;
    Ok(None)
}

fn report_json(r: &InequalityReport) -> Value {
    json!({
        "name": r.name,
        "instances": r.instances,
        "worst_slack": num(r.worst_slack),
        "passed": r.passed,
        "witness": r.witness,
        "tolerance": num(r.tolerance),
    })
}

fn model_reports(c: &Common, samples: u64) -> Result<Vec<InequalityReport>> {
    let tree = load_tree(c)?;
    let p = resolve_p(c)?;
    let seed = c.seed.unwrap_or(0);
    let n = tree.len();
    let model = IsingModel::new(tree.clone(), p)?;
    let mut functions = vec![TestFunction::magnetization(n)];
    if n <= 12 {
        let metric = WeightedHamming::normalized(StateSpace::discrete(2)?, n);
        functions.extend(random_lipschitz_functions(&metric, 20, seed)?);
    }
    let mut reports = vec![check_exp_moment(model.model(), &functions, &LAMBDA_GRID)?];
    if n <= 8 {
        let nu = exact_measure(model.model())?;
        reports.push(check_t1(model.model(), &t1_family(&nu)?)?);
    }
    reports.push(check_tail(&model, &EPSILON_GRID)?);
    if samples > 0 {
        let empirical = empirical_tail(&model, &EPSILON_GRID, samples, seed);
        for (eps, freq) in EPSILON_GRID.iter().zip(empirical) {
            eprintln!(
                "advisory: empirical tail at ε={eps} over {samples} samples: {}",
                fmt_g(freq)
            );
        }
    }
    reports.extend(check_optimality_chain(&tree, p)?);
    if n <= treeconc::spectral::MIXING_MATRIX_LIMIT {
        reports.extend(check_mixing_corollary(&tree, model.b(), 3, seed)?);
    }
    if n <= 10 {
        reports.push(check_eta_matrix(&model, &random_bfs_order(&tree, seed))?);
    }
    Ok(reports)
}

fn verify(a: &VerifyArgs) -> Outcome {
    let reports = match a.target {
        VerifyTarget::All => run_all(a.common.seed.unwrap_or(0))?,
        VerifyTarget::Model => model_reports(&a.common, a.samples)?,
    };
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => json_text(&Value::Array(reports.iter().map(report_json).collect())),
        Format::Csv => {
            let mut s = String::from("name,instances,worst_slack,passed,witness\n");
            for r in &reports {
                s.push_str(&format!(
                    "{},{},{},{},\"{}\"\n",
                    r.name,
                    r.instances,
                    fmt_g(r.worst_slack),
                    r.passed,
                    r.witness.replace('"', "\"\"")
                ));
            }
            s
        }
    };
    write_output(a.common.out.as_deref(), &text)?;
    for r in reports.iter().filter(|r| !r.passed) {
        eprintln!(
            "FAILED {}: worst slack {} at {}",
            r.name,
            fmt_g(r.worst_slack),
            r.witness
        );
    }
    Ok(Some(reports.iter().all(|r| r.passed)))
}

/// Header and rows of the Figure-1 CSV.
pub fn figure1_csv(family: TreeFamily, bs: &[BValue], kmax: usize) -> Result<String> {
    if bs.is_empty() {
        bail!("at least one b value is required");
    }
    let columns: Vec<Vec<f64>> = bs
        .par_iter()
        .map(|b| Ok(family.series(b.value, kmax)?.ratios))
        .collect::<Result<_>>()?;
    let mut out = String::from("k,n_vertices");
    for b in bs {
        out.push_str(&format!(",{b}"));
    }
    out.push('\n');
    for k in 0..=kmax {
        let count = family.vertex_count(k).expect("budget checked");
        out.push_str(&format!("{k},{count}"));
        for col in &columns {
            out.push_str(&format!(",{}", fmt_g(col[k])));
        }
        out.push('\n');
    }
    Ok(out)
}

fn figure1(a: &Figure1Args) -> Outcome {
    let (family, limit) = match a.family {
        Family::Threeone => (TreeFamily::ThreeOne, THREEONE_KMAX),
        Family::Dary2 => (TreeFamily::Dary(2), DARY2_KMAX),
    };
    if a.kmax > limit {
        let vertices = family
            .vertex_count(a.kmax)
            .map_or("overflowing".to_string(), |c| c.to_string());
        let bytes = family
            .working_bytes(a.kmax)
            .map_or("overflowing".to_string(), |c| c.to_string());
        bail!(
            "kmax {} exceeds the budget of {limit} for this family: \
             the deepest truncation has {vertices} vertices and needs {bytes} bytes per b",
            a.kmax
        );
    }
    for b in &a.b {
        if !(0.0..1.0).contains(&b.value) {
            bail!("b = {b} is outside [0, 1)");
        }
    }
    write_output(a.out.as_deref(), &figure1_csv(family, &a.b, a.kmax)?)?;
    Ok(None)
}

fn transport(a: &WassersteinArgs) -> Outcome {
    let space = StateSpace::discrete(a.states)?;
    let mu = read_measure(&a.mu, &space, a.coords)?;
    let nu = read_measure(&a.nu, &space, a.coords)?;
    let metric = match &a.weights {
        Some(w) => {
            if w.len() != a.coords {
                bail!("{} weights for {} coordinates", w.len(), a.coords);
            }
            WeightedHamming::new(space, w.clone())?
        }
        None => WeightedHamming::normalized(space, a.coords),
    };
    let (distance, plan) = wasserstein(&mu, &nu, &metric)?;
    let entries: Vec<Value> = plan
        .entries
        .iter()
        .map(|&(i, j, w)| json!([plan.support_mu[i], plan.support_nu[j], num(w)]))
        .collect();
    let v = json!({
        "distance": num(distance),
        "dual_slack": num(plan.dual_slack),
        "duality_gap": num(plan.duality_gap),
        "dropped_mass": [num(plan.dropped_mass.0), num(plan.dropped_mass.1)],
        "plan": entries,
    });
    write_output(a.out.as_deref(), &json_text(&v))?;
    Ok(None)
}
