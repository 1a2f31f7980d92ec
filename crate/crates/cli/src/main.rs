//! `lfv`: command line front end for the chart-local Lorentz-Finsler engine
//! and its verification harness.
//!
//! Exit codes: 0 = pass, 1 = witnessed violation, 2 = error.  All sampling
//! derives from one 64-bit seed through labeled substreams, so a fixed
//! configuration reproduces its report byte for byte.  `LFV_WORKERS` caps
//! the worker pool used by parallel scans.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::json;

use lorentz_finsler::connection::{berwald_report, berwald_threshold};
use lorentz_finsler::curvature::flag_curvature;
use lorentz_finsler::fundamental::{classify, metric_at, CausalClass};
use lorentz_finsler::geodesics::{solve_bvp, time_separation};
use lorentz_finsler::models::{build_model, ModelConfig};
use lorentz_finsler::rng;
use lorentz_finsler::verify::{run_verify, CheckSelect, RunConfig};
use lorentz_finsler::Spacetime;
use transport_variance::{check_sqrt_var_convexity, w2_distance, DiscreteMeasure, GroundSpace};

#[derive(Parser)]
#[command(name = "lfv", version, about = "Lorentz-Finsler geometry and verification toolkit")]
struct Cli {
    /// Force machine-readable JSON output
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List or inspect the model zoo
    Zoo {
        #[command(subcommand)]
        cmd: ZooCmd,
    },
    /// Causal character of a tangent vector
    Classify(PointVector),
    /// Fundamental tensor g_v at (x, v)
    Metric(PointVector),
    /// Geodesic between two chart points, with time separation
    Geodesic(GeodesicArgs),
    /// Sample flag curvatures over the chart
    CurvatureScan(CurvatureArgs),
    /// Direction-dependence of the Chern coefficients
    BerwaldCheck(BerwaldArgs),
    /// Run verification checks (theorem matrix and friends)
    Verify(VerifyArgs),
    /// sqrt-variance along a W2 geodesic between two discrete measures
    VarianceDemo(VarianceArgs),
}

#[derive(Subcommand)]
enum ZooCmd {
    /// Print the zoo model names
    List,
    /// Print a ready-to-edit config for a zoo model
    Show { name: String },
}

#[derive(Args)]
struct PointVector {
    /// Zoo model name or path to a model JSON file
    #[arg(long)]
    model: String,
    /// Chart point, comma separated
    #[arg(long)]
    point: String,
    /// Tangent vector, comma separated
    #[arg(long)]
    vector: String,
}

#[derive(Args)]
struct GeodesicArgs {
    #[arg(long)]
    model: String,
    /// Start point, comma separated
    #[arg(long)]
    from: String,
    /// End point, comma separated
    #[arg(long)]
    to: String,
    /// CSV output path (columns t, x^i, v^i)
    #[arg(long, default_value = "geodesic.csv")]
    out: String,
}

#[derive(Args)]
struct CurvatureArgs {
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CSV output path (columns x^i, v^i, w^i, K)
    #[arg(long, default_value = "curvature_scan.csv")]
    out: String,
}

#[derive(Args)]
struct BerwaldArgs {
    #[arg(long)]
    model: String,
    /// Chart points to probe
    #[arg(long, default_value_t = 16)]
    points: usize,
    /// Reference directions per point
    #[arg(long, default_value_t = 8)]
    dirs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    All,
    Flags,
    Concavity,
    Capsule,
    Berwald,
    Parallel,
}

#[derive(Clone, Copy, ValueEnum)]
enum Budget {
    Full,
    Medium,
    Quick,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which check family to run
    #[arg(value_enum)]
    check: CheckArg,
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Sampling budget preset
    #[arg(long, value_enum, default_value_t = Budget::Full)]
    budget: Budget,
    /// Also write the JSON report to this path
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct VarianceArgs {
    /// Ground space JSON, e.g. '{"dim":2,"norm":"euclidean"}' or '{"dim":2,"norm":{"p":3.0}}'
    #[arg(long)]
    space: String,
    /// Path to the source measure JSON {"atoms": [[..]], "weights": [..]}
    #[arg(long)]
    mu: String,
    /// Path to the target measure JSON
    #[arg(long)]
    nu: String,
    /// Grid points along the geodesic
    #[arg(long, default_value_t = 17)]
    grid: usize,
    /// CSV output path (columns t, sqrt_var)
    #[arg(long, default_value = "variance_demo.csv")]
    out: String,
}

fn main() -> ExitCode {
    if let Ok(s) = std::env::var("LFV_WORKERS") {
        if let Ok(n) = s.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Zoo { cmd } => zoo(cmd, cli.json),
        Cmd::Classify(a) => cmd_classify(a, cli.json),
        Cmd::Metric(a) => cmd_metric(a, cli.json),
        Cmd::Geodesic(a) => cmd_geodesic(a, cli.json),
        Cmd::CurvatureScan(a) => cmd_curvature_scan(a, cli.json),
        Cmd::BerwaldCheck(a) => cmd_berwald(a, cli.json),
        Cmd::Verify(a) => cmd_verify(a, cli.json),
        Cmd::VarianceDemo(a) => cmd_variance(a, cli.json),
    }
}

const ZOO_NAMES: [&str; 6] = [
    "minkowski",
    "de_sitter",
    "product_hyperbolic",
    "product_sphere",
    "flat_finsler",
    "perturbed_finsler",
];

fn load_model(spec: &str) -> Result<Arc<dyn Spacetime>> {
    let cfg: ModelConfig = if Path::new(spec).is_file() {
        serde_json::from_str(&fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?)
            .with_context(|| format!("parsing model config {spec}"))?
    } else {
        ModelConfig::named(spec)
    };
    Ok(build_model(&cfg)?)
}

fn parse_vec(s: &str, what: &str) -> Result<DVector<f64>> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("parsing {what} entry {t:?}")))
        .collect::<Result<Vec<f64>>>()?;
    anyhow::ensure!(!vals.is_empty(), "{what} is empty");
    Ok(DVector::from_vec(vals))
}

fn floats(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn emit(json_mode: bool, value: &serde_json::Value, human: &str) {
    if json_mode {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable report"));
    } else {
        println!("{human}");
    }
}

fn zoo(cmd: ZooCmd, json_mode: bool) -> Result<ExitCode> {
    match cmd {
        ZooCmd::List => {
            if json_mode {
                println!("{}", serde_json::to_string_pretty(&json!(ZOO_NAMES))?);
            } else {
                for name in ZOO_NAMES {
                    println!("{name}");
                }
            }
        }
        ZooCmd::Show { name } => {
            let model = load_model(&name)?;
            let chart = model.chart();
            let value = json!({
                "name": name,
                "dim": model.dim(),
                "chart_min": chart.min,
                "chart_max": chart.max,
            });
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(a: PointVector, json_mode: bool) -> Result<ExitCode> {
    let model = load_model(&a.model)?;
    let x = parse_vec(&a.point, "--point")?;
    let v = parse_vec(&a.vector, "--vector")?;
    let cls = classify(model.as_ref(), &x, &v)?;
    let l = lorentz_finsler::eval_l(model.as_ref(), &x, &v)?;
    let class = match cls.class {
        CausalClass::Timelike => "timelike",
        CausalClass::Lightlike => "lightlike",
        CausalClass::Spacelike => "spacelike",
    };
    let orient = match cls.future {
        Some(true) => "future",
        Some(false) => "past",
        None => "none",
    };
    emit(
        json_mode,
        &json!({ "class": class, "orientation": orient, "l": l }),
        &format!("{class} ({orient}), L = {l:.9e}"),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_metric(a: PointVector, json_mode: bool) -> Result<ExitCode> {
    let model = load_model(&a.model)?;
    let x = parse_vec(&a.point, "--point")?;
    let v = parse_vec(&a.vector, "--vector")?;
    let g = metric_at(model.as_ref(), &x, &v)?;
    let n = model.dim();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| g.g()[(i, j)]).collect()).collect();
    if json_mode {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "g": rows, "cond_inf": g.cond_inf() }))?
        );
    } else {
        for row in &rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.6e}")).collect();
            println!("{}", cells.join(" "));
        }
        println!("cond_inf = {:.3e}", g.cond_inf());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_geodesic(a: GeodesicArgs, json_mode: bool) -> Result<ExitCode> {
    let model = load_model(&a.model)?;
    let x = parse_vec(&a.from, "--from")?;
    let y = parse_vec(&a.to, "--to")?;
    let (velocity, path) = solve_bvp(&model, &x, &y)?;
    let tau = time_separation(&model, &x, &y)?;

    let n = model.dim();
    let mut csv = String::from("t");
    for i in 0..n {
        csv.push_str(&format!(",x{i}"));
    }
    for i in 0..n {
        csv.push_str(&format!(",v{i}"));
    }
    csv.push('\n');
    for t in path.knots() {
        let p = path.position(t);
        let v = path.velocity(t);
        csv.push_str(&format!("{t:.12e}"));
        for c in p.iter().chain(v.iter()) {
            csv.push_str(&format!(",{c:.12e}"));
        }
        csv.push('\n');
    }
    fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out))?;

    emit(
        json_mode,
        &json!({ "velocity": floats(&velocity), "tau": tau, "path_csv": a.out }),
        &format!(
            "velocity = {:?}\ntau = {tau:.9e}\npath written to {}",
            floats(&velocity),
            a.out
        ),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_curvature_scan(a: CurvatureArgs, json_mode: bool) -> Result<ExitCode> {
    let model = load_model(&a.model)?;
    let mut rg = rng::substream(a.seed, "curvature_scan");
    let mut draws = Vec::with_capacity(a.samples);
    let mut attempts = 0usize;
    while draws.len() < a.samples && attempts < a.samples * 40 {
        attempts += 1;
        let Ok((x, v)) = rng::point_and_timelike(&mut rg, model.as_ref(), 0.12) else {
            continue;
        };
        let Ok(g) = metric_at(model.as_ref(), &x, &v) else { continue };
        let Ok(w) = rng::flag_complement(&mut rg, &g, &v) else { continue };
        draws.push((x, v, w));
    }
    anyhow::ensure!(
        draws.len() == a.samples,
        "sampling exhausted after {attempts} attempts ({} flags found)",
        draws.len()
    );

    let values: Vec<Option<f64>> = draws
        .par_iter()
        .map(|(x, v, w)| flag_curvature(model.as_ref(), x, v, w).ok())
        .collect();

    let n = model.dim();
    let mut csv = String::new();
    for (prefix, count) in [("x", n), ("v", n), ("w", n)] {
        for i in 0..count {
            if !csv.is_empty() {
                csv.push(',');
            }
            csv.push_str(&format!("{prefix}{i}"));
        }
    }
    csv.push_str(",K\n");
    let mut written = 0usize;
    let mut min_k = f64::INFINITY;
    let mut argmin = None;
    for ((x, v, w), k) in draws.iter().zip(&values) {
        let Some(k) = *k else { continue };
        for (idx, c) in x.iter().chain(v.iter()).chain(w.iter()).enumerate() {
            if idx > 0 {
                csv.push(',');
            }
            csv.push_str(&format!("{c:.12e}"));
        }
        csv.push_str(&format!(",{k:.12e}\n"));
        written += 1;
        if k < min_k {
            min_k = k;
            argmin = Some(json!({ "x": floats(x), "v": floats(v), "w": floats(w) }));
        }
    }
    fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out))?;

    emit(
        json_mode,
        &json!({ "min_k": min_k, "argmin": argmin, "samples": written, "csv": a.out }),
        &format!("min K = {min_k:.6e} over {written} flags; rows written to {}", a.out),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_berwald(a: BerwaldArgs, json_mode: bool) -> Result<ExitCode> {
    let model = load_model(&a.model)?;
    let mut rg = rng::substream(a.seed, "berwald_points");
    let chart = model.chart().shrunk(0.1);
    let mut max_dev = 0.0_f64;
    let mut chern = 0.0_f64;
    for _ in 0..a.points.max(1) {
        let x = rng::point_in_box(&mut rg, &chart);
        let rep = berwald_report(model.as_ref(), &x, a.dirs, a.seed)?;
        max_dev = max_dev.max(rep.max_deviation);
        chern = chern.max(rep.chern_norm);
    }
    let threshold = berwald_threshold(chern);
    let berwald = max_dev <= threshold;
    emit(
        json_mode,
        &json!({
            "max_deviation": max_dev,
            "threshold": threshold,
            "verdict": if berwald { "berwald" } else { "not_berwald" },
        }),
        &format!(
            "max deviation {max_dev:.3e} vs threshold {threshold:.3e}: {}",
            if berwald { "berwald" } else { "not berwald" }
        ),
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs, json_mode: bool) -> Result<ExitCode> {
    let model = load_model(&a.model)?;
    let cfg = match a.budget {
        Budget::Full => RunConfig::new(a.seed),
        Budget::Medium => RunConfig::medium(a.seed),
        Budget::Quick => RunConfig::quick(a.seed),
    };
    let sel = match a.check {
        CheckArg::All => CheckSelect::All,
        CheckArg::Flags => CheckSelect::Flags,
        CheckArg::Concavity => CheckSelect::Concavity,
        CheckArg::Capsule => CheckSelect::Capsule,
        CheckArg::Berwald => CheckSelect::Berwald,
        CheckArg::Parallel => CheckSelect::Parallel,
    };
    let report = run_verify(&model, &cfg, sel)?;
    let value = serde_json::to_value(&report)?;
    if let Some(out) = &a.out {
        fs::write(out, serde_json::to_string_pretty(&value)?)
            .with_context(|| format!("writing {out}"))?;
    }
    if json_mode {
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        println!("model {} | overall {}", report.model, report.verdict);
        if let Some(w) = &report.warning {
            println!("warning: {w}");
        }
        for c in &report.checks {
            println!(
                "  {:<20} {}  worst_deficit={:+.4e}{}",
                c.check,
                c.verdict,
                c.worst_deficit,
                if c.witness.is_some() { "  (witness recorded)" } else { "" }
            );
        }
    }
    Ok(if report.verdict.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_variance(a: VarianceArgs, json_mode: bool) -> Result<ExitCode> {
    let space: GroundSpace =
        serde_json::from_str(&a.space).context("parsing --space JSON")?;
    let mu: DiscreteMeasure = serde_json::from_str(
        &fs::read_to_string(&a.mu).with_context(|| format!("reading {}", a.mu))?,
    )
    .with_context(|| format!("parsing measure {}", a.mu))?;
    let nu: DiscreteMeasure = serde_json::from_str(
        &fs::read_to_string(&a.nu).with_context(|| format!("reading {}", a.nu))?,
    )
    .with_context(|| format!("parsing measure {}", a.nu))?;

    let (w2, _) = w2_distance(&space, &mu, &nu)?;
    let report = check_sqrt_var_convexity(&space, &mu, &nu, a.grid)?;

    let mut csv = String::from("t,sqrt_var\n");
    for (t, s) in report.ts.iter().zip(&report.sqrt_var) {
        csv.push_str(&format!("{t:.12e},{s:.12e}\n"));
    }
    fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out))?;

    emit(
        json_mode,
        &json!({
            "w2": w2,
            "pass": report.pass,
            "min_gap": report.min_gap,
            "csv": a.out,
        }),
        &format!(
            "W2 = {w2:.9e}; sqrt-var convexity {} (min gap {:+.3e}); values written to {}",
            if report.pass { "pass" } else { "FAIL" },
            report.min_gap,
            a.out
        ),
    );
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
