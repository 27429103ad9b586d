//! `orlicz-lab`: experiments on weighted Orlicz maximal functions over
//! Carleson squares.
//!
//! Exit codes: 0 on success or PASS, 1 when an asserted check fails, 2 on
//! usage or configuration errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use orlicz_core::config::{ExperimentConfig, TheoremId};
use orlicz_core::field::{FieldSpec, GridField};
use orlicz_core::grid::{cover_interval, two_adjacent_cover, Interval, IntervalFamily, Shift, Tessellation};
use orlicz_core::maximal::{brute_force_maximal, dyadic_maximal, kmu_field, two_grid_maximal, MaximalField};
use orlicz_core::stopping::{DyadicNorms, StoppingFamily};
use orlicz_core::suite::run_suite;
use orlicz_core::verify::{lambda_ladder, theorem_report};
use orlicz_core::weights::{bekolle_constant, binfty_constant, WeightDescriptor};
use orlicz_core::young::{YoungFunction, YoungSpec};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "orlicz-lab", version, about = "Weighted Orlicz maximal functions over Carleson squares")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (JSON report, or CSV where the subcommand says so).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated depths, e.g. 6,7,8.
    #[arg(long, global = true, value_delimiter = ',')]
    depths: Option<Vec<u32>>,
    /// Seed of the test-function family and of default seeded fields, in hex.
    #[arg(long, global = true, value_parser = parse_hex)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Smaller, faster battery.
    #[arg(long, global = true)]
    quick: bool,
}

fn parse_hex(s: &str) -> std::result::Result<u64, String> {
    let digits = s.trim_start_matches("0x").trim_start_matches("0X");
    u64::from_str_radix(digits, 16).map_err(|e| format!("invalid hex seed `{s}`: {e}"))
}

#[derive(Subcommand)]
enum Command {
    /// Young function diagnostics: values, conjugate, Δ₂ and B_p membership.
    Young(YoungArgs),
    /// Tessellation summary; `--out` writes one CSV row per cell.
    Grid(GridArgs),
    /// Békollè–Bonami and B_∞ constants of the configured ω.
    Weights(WeightsArgs),
    /// Maximal function field; `--out` writes CSV rows `level,index,value`.
    Maximal(MaximalArgs),
    /// Stopping family at a threshold; `--out` writes the family as JSON.
    Stopping(StoppingArgs),
    /// Theorem report across depths.
    Verify(VerifyArgs),
    /// The full check battery with theorem instances and negative controls.
    Suite,
}

#[derive(Args)]
struct YoungArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Exponent of the B_p test.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Lower limit of the B_p integral.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    bp_check: bool,
    /// Comma-separated points at which to tabulate Φ, Ψ and their inverses.
    #[arg(long, value_delimiter = ',')]
    at: Option<Vec<f64>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Power,
    #[value(name = "power_log", alias = "power-log")]
    PowerLog,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Report the one-third cover and the two-adjacent cover of `[a, b)`.
    #[arg(long, value_delimiter = ',')]
    cover: Option<Vec<f64>>,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated subset of b1, bp, binf.
    #[arg(long, value_delimiter = ',', default_value = "bp")]
    classes: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    Dyadic,
    Brute,
    TwoGrid,
    Kmu,
}

#[derive(Args)]
struct MaximalArgs {
    #[arg(long, value_enum, default_value = "dyadic")]
    op: Op,
    /// Grid shift for `--op dyadic`: 0 or 1/3.
    #[arg(long, default_value = "0")]
    beta: String,
}

#[derive(Args)]
struct StoppingArgs {
    #[arg(long)]
    lambda: f64,
    /// CSV of the λ-ladder: `lambda,boxes,stopping_mass,superlevel_cells`.
    #[arg(long)]
    ladder: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    thm: Option<String>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Assertion(Value),
    Config(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<orlicz_core::Error> for Failure {
    fn from(e: orlicz_core::Error) -> Self {
        Failure::Config(e.into())
    }
}

type Outcome = std::result::Result<Value, Failure>;

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &common.depths {
        cfg.depths = d.clone();
    }
    if let Some(s) = common.seed {
        cfg.family.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

/// Configured grid at the configured depth, with `ω` and `f`.
struct Fields {
    tess: Arc<Tessellation>,
    omega: GridField,
    f: GridField,
}

fn fields(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Fields> {
    let tess = cfg.tessellation(cfg.grid.depth)?;
    let omega = GridField::from_spec(&cfg.omega, tess.clone(), "omega")?;
    let f_spec = cfg.f.clone().unwrap_or(FieldSpec::Seeded {
        seed: seed.unwrap_or(cfg.family.seed),
        law: "loguniform".into(),
        range: cfg.family.range,
        support: None,
    });
    let f = GridField::from_spec(&f_spec, tess.clone(), "f")?;
    let f = if f.is_analytic() { f.to_cells(cfg.alpha)? } else { f };
    Ok(Fields { tess, omega, f })
}

fn young(args: &YoungArgs, common: &Common) -> Outcome {
    let spec = match args.family {
        Some(FamilyArg::Power) => YoungSpec::Power {
            a: args.a.context("--a is required for --family power")?,
        },
        Some(FamilyArg::PowerLog) => YoungSpec::PowerLog {
            a: args.a.context("--a is required for --family power_log")?,
            b: args.b.unwrap_or(1.0),
        },
        None => load_config(common)?.phi,
    };
    let phi = YoungFunction::from_spec(&spec)?;
    let psi = phi.conjugate();
    let mut report = json!({
        "phi": spec,
        "label": phi.label(),
        "delta2": phi.delta2_default(1e6),
    });
    if args.bp_check {
        let bp = phi.bp_check(args.p, args.c)?;
        report["p"] = json!(args.p);
        report["bp"] = serde_json::to_value(bp).expect("json");
        report["member"] = json!(bp.member);
    }
    if let Some(points) = &args.at {
        let rows = points
            .iter()
            .map(|&t| {
                Ok(json!({
                    "t": t,
                    "phi": phi.eval(t)?,
                    "psi": psi.eval(t)?,
                    "phi_inverse": phi.inverse(t)?,
                    "psi_inverse": psi.inverse(t)?,
                }))
            })
            .collect::<orlicz_core::Result<Vec<_>>>()?;
        report["table"] = json!(rows);
    }
    Ok(report)
}

fn grid(args: &GridArgs, common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let tess = cfg.tessellation(cfg.grid.depth)?;
    let mut total = orlicz_core::numeric::CompensatedSum::new();
    for c in 0..tess.num_cells() {
        total.add(tess.cell_alpha_measure(c, args.alpha)?);
    }
    let expected = tess.roots() as f64 * tess.root_len().powf(args.alpha + 2.0) / (args.alpha + 1.0);
    let mut report = json!({
        "domain": tess.domain(),
        "roots": tess.roots(),
        "depth": tess.depth(),
        "cells": tess.num_cells(),
        "tiling": {
            "alpha": args.alpha,
            "total": total.value(),
            "expected": expected,
            "relative_error": ((total.value() - expected) / expected).abs(),
        },
        "shifted_intervals": {
            "0": tess.shifted_intervals(Shift::Zero).len(),
            "1/3": tess.shifted_intervals(Shift::Third).len(),
        },
    });
    if let Some(c) = &args.cover {
        if c.len() != 2 {
            return Err(anyhow::anyhow!("config error at `cover`: expected two endpoints `a,b`").into());
        }
        let i = Interval::new(c[0], c[1])?;
        let (shift, j) = cover_interval(&i)?;
        let (j1, j2) = two_adjacent_cover(&i)?;
        report["cover"] = json!({
            "interval": i,
            "shift": shift,
            "cover": j,
            "ratio": j.len() / i.len(),
            "two_adjacent": [j1, j2],
        });
    }
    if let Some(out) = &common.out {
        let mut csv = String::from("level,index,a,b,y0,y1,alpha_measure\n");
        for c in 0..tess.num_cells() {
            let (k, i) = tess.locate(c);
            let iv = tess.interval(c);
            let (y0, y1) = tess.strip(k);
            csv.push_str(&format!(
                "{k},{i},{},{},{y0},{y1},{}\n",
                iv.a,
                iv.b,
                tess.cell_alpha_measure(c, args.alpha)?
            ));
        }
        write_file(out, &csv)?;
    }
    Ok(report)
}

fn weights(args: &WeightsArgs, common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let p = args.p.unwrap_or(cfg.p);
    let alpha = args.alpha.unwrap_or(cfg.alpha);
    let tess = cfg.tessellation(cfg.grid.depth)?;
    let w = WeightDescriptor::new(GridField::from_spec(&cfg.omega, tess, "omega")?)?;
    let family = IntervalFamily::DyadicAndLattice {
        depth: cfg.lattice_depth.min(cfg.grid.depth),
    };
    let mut classes = serde_json::Map::new();
    for class in &args.classes {
        let rep = match class.as_str() {
            "b1" => bekolle_constant(&w, 1.0, alpha, family)?,
            "bp" => bekolle_constant(&w, p, alpha, family)?,
            "binf" => binfty_constant(&w, alpha, cfg.lattice_depth.min(cfg.grid.depth))?,
            other => {
                return Err(Failure::Config(anyhow::anyhow!(
                    "config error at `classes`: unknown class `{other}`, expected b1, bp or binf"
                )))
            }
        };
        classes.insert(
            class.clone(),
            json!({
                "constant": rep.constant,
                "witness_interval": rep.witness,
                "family_size": rep.family_size,
            }),
        );
    }
    let mut report = json!({ "p": p, "alpha": alpha, "omega": cfg.omega, "classes": classes });
    if let Some(s) = w.power {
        report["predicted_bp"] = json!(orlicz_core::weights::predicted_power_constant(s, alpha, p));
    }
    Ok(report)
}

fn maximal(args: &MaximalArgs, common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let fl = fields(&cfg, common.seed)?;
    let phi = YoungFunction::from_spec(&cfg.phi)?;
    let alpha = cfg.alpha;
    let m: MaximalField = match args.op {
        Op::Dyadic => dyadic_maximal(&fl.f, &phi, &fl.omega, alpha, Shift::parse(&args.beta)?)?,
        Op::Brute => brute_force_maximal(&fl.f, &phi, &fl.omega, alpha, cfg.lattice_depth.min(cfg.grid.depth))?,
        Op::TwoGrid => two_grid_maximal(&fl.f, &phi, &fl.omega, alpha)?,
        Op::Kmu => {
            let mu = GridField::from_spec(&cfg.mu, fl.tess.clone(), "mu")?;
            kmu_field(&mu, &fl.omega, alpha, IntervalFamily::Dyadic)?
        }
    };
    if let Some(out) = &common.out {
        let mut csv = String::from("level,index,value\n");
        for (c, v) in m.values().iter().enumerate() {
            let (k, i) = fl.tess.locate(c);
            csv.push_str(&format!("{k},{i},{v}\n"));
        }
        write_file(out, &csv)?;
    }
    let max = m.values().iter().cloned().fold(0.0, f64::max);
    Ok(json!({
        "provenance": m.provenance,
        "family_size": m.family_size,
        "skipped_boxes": m.skipped,
        "cells": m.values().len(),
        "max": max,
        "lp_norm": m.field.lp_norm(&fl.omega, alpha, cfg.p)?,
    }))
}

fn stopping(args: &StoppingArgs, common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let fl = fields(&cfg, common.seed)?;
    let phi = YoungFunction::from_spec(&cfg.phi)?;
    let norms = DyadicNorms::compute(&fl.f, &phi, &fl.omega, cfg.alpha)?;
    let maximal = norms.maximal();
    let fam = StoppingFamily::from_norms(&norms, args.lambda)?;
    let checks = fam.check(&norms, &maximal);
    let intervals: Vec<Value> = fam
        .cells
        .iter()
        .zip(&fam.norms)
        .map(|(&c, n)| {
            let (k, i) = fl.tess.locate(c);
            json!({ "level": k, "index": i, "norm": n })
        })
        .collect();
    let family = json!({
        "lambda": args.lambda,
        "intervals": intervals,
        "checks": {
            "disjoint": checks.disjoint,
            "threshold": checks.threshold,
            "maximal": checks.maximal,
            "union": checks.union,
        },
    });
    if let Some(out) = &common.out {
        write_file(out, &pretty(&family))?;
    }
    if let Some(path) = &args.ladder {
        let top = maximal.iter().cloned().fold(0.0, f64::max);
        let mut csv = String::from("lambda,boxes,stopping_mass,superlevel_cells\n");
        for l in lambda_ladder(top, 20) {
            let f = StoppingFamily::from_norms(&norms, l)?;
            let cells = maximal.iter().filter(|&&m| m > l).count();
            csv.push_str(&format!("{l},{},{},{cells}\n", f.cells.len(), f.mass(&fl.omega, cfg.alpha)?));
        }
        write_file(path, &csv)?;
    }
    if checks.all() {
        Ok(family)
    } else {
        Err(Failure::Assertion(family))
    }
}

fn verify(args: &VerifyArgs, common: &Common) -> Outcome {
    let mut cfg = load_config(common)?;
    if let Some(t) = &args.thm {
        cfg.theorem = Some(t.parse::<TheoremId>()?);
    }
    cfg.validate()?;
    let report = theorem_report(&cfg)?;
    let value = serde_json::to_value(&report).expect("json");
    if let Some(out) = &common.out {
        write_file(out, &pretty(&value))?;
    }
    if report.passed() {
        Ok(value)
    } else {
        Err(Failure::Assertion(value))
    }
}

fn suite(common: &Common) -> Outcome {
    let report = run_suite(common.quick)?;
    let value = serde_json::to_value(&report).expect("json");
    if let Some(out) = &common.out {
        write_file(out, &pretty(&value))?;
    }
    let summary = json!({
        "pass": report.pass,
        "quick": report.quick,
        "depths": report.depths,
        "checks": report.checks,
        "theorems": report.theorems.iter().map(|t| json!({
            "name": t.name,
            "expected": t.expected,
            "verdict": t.verdict,
            "ok": t.ok,
        })).collect::<Vec<_>>(),
        "runtime_ms": report.runtime_ms,
    });
    if report.pass {
        Ok(summary)
    } else {
        Err(Failure::Assertion(summary))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let common = &cli.common;
    let outcome = match &cli.command {
        Command::Young(a) => young(a, common),
        Command::Grid(a) => grid(a, common),
        Command::Weights(a) => weights(a, common),
        Command::Maximal(a) => maximal(a, common),
        Command::Stopping(a) => stopping(a, common),
        Command::Verify(a) => verify(a, common),
        Command::Suite => suite(common),
    };
    match outcome {
        Ok(v) => {
            print!("{}", pretty(&v));
            ExitCode::SUCCESS
        }
        Err(Failure::Assertion(v)) => {
            print!("{}", pretty(&v));
            eprintln!("FAIL: at least one asserted check failed");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
