//! `hessian-lab` command line: loads a configuration, runs one experiment and
//! writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::capacity::{cap_estimate, EstimatorKind};
use crate::config::{parse_config, CheckSpec, ConfigError, Overrides, RunConfig, Subcommand};
use crate::error::Error;
use crate::expr::{Env, Var};
use crate::forms::hessian_measure;
use crate::grid::{norm_sq, sup_norm_diff, GridFunction, HermitianField};
use crate::io::{records_csv, write_field};
use crate::picard::{picard_run, sandwich_check, SourceFunction};
use crate::properties::{
    bump, check_comparison, check_demailly, check_max_principle, check_weak_convergence, random_admissible,
    random_measure_ordered_pair, GeneratorConfig, PropertyReport, WeakConvergenceConfig,
};
use crate::solver::solve_dirichlet;
use crate::stability::{run_stability, StabilityExperiment};

#[derive(Parser, Debug)]
#[command(name = "hessian-lab", version, about = "Complex Hessian equation experiments on the unit ball")]
pub struct Args {
    /// Expected subcommand; must match the configuration when given.
    pub subcommand: Option<String>,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the artifacts of an earlier run in the output directory.
    #[arg(long)]
    pub force: bool,
    /// Grid spacing override, e.g. `1/16`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Solver tolerance override.
    #[arg(long)]
    pub tol: Option<f64>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Machine-readable failure printed on standard error.
#[derive(Clone, Debug, Serialize)]
pub struct CliError {
    pub kind: String,
    pub path: String,
    pub message: String,
}

impl CliError {
    fn new(kind: &str, path: &str, message: impl Into<String>) -> Self {
        Self { kind: kind.into(), path: path.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind.as_str() {
            "parse" | "schema" | "domain" | "usage" | "output" => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self }).to_string()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        Self { kind, path: e.path, message: e.message }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::new("runtime", "", e.to_string())
    }
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub success: bool,
    pub summary: String,
    pub out_dir: PathBuf,
    pub artifacts: Vec<String>,
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Writer {
    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), body).map_err(|e| CliError::new("io", name, e.to_string()))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(v).map_err(|e| CliError::new("io", name, e.to_string()))?;
        self.text(name, &body)
    }

    fn field(&mut self, name: &str, u: &GridFunction) -> Result<(), CliError> {
        let files = write_field(&self.dir, name, u.grid(), u.values())?;
        self.artifacts.extend(files);
        Ok(())
    }
}

/// Prepares the output directory, clearing an earlier run only with `force`.
fn prepare_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    let manifest = dir.join("manifest.json");
    if manifest.exists() {
        if !force {
            return Err(CliError::new(
                "output",
                "out_dir",
                format!("{} already holds a run; pass --force to replace it", dir.display()),
            ));
        }
        let old: Value = fs::read_to_string(&manifest)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or(Value::Null);
        if let Some(list) = old["artifacts"].as_array() {
            for name in list.iter().filter_map(Value::as_str) {
                // Only plain file names recorded by an earlier run.
                if !name.contains('/') && !name.contains("..") {
                    let _ = fs::remove_file(dir.join(name));
                }
            }
        }
        fs::remove_file(&manifest).map_err(|e| CliError::new("output", "out_dir", e.to_string()))?;
    }
    fs::create_dir_all(dir).map_err(|e| CliError::new("output", "out_dir", e.to_string()))
}

fn run_solve(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String), CliError> {
    let f = cfg.rhs_density()?;
    let rep = solve_dirichlet(&f, &cfg.phi_fn(), &cfg.omega, cfg.m(), &cfg.solver)?;
    let reference = GridFunction::from_fn(&cfg.grid, |x| norm_sq(x) - 1.0);
    let deviation = sup_norm_diff(&rep.solution, &reference)?;
    let density = hessian_measure(&rep.solution, &cfg.omega, cfg.m())?;
    w.field("solution", &rep.solution)?;
    w.field("density", &GridFunction::new(cfg.grid.clone(), density.values().to_vec(), crate::grid::BoundaryFn::constant(0.0))?)?;
    w.json(
        "report.json",
        &json!({
            "solve": rep.to_json(),
            "fallback_sweeps": rep.fallback_sweeps,
            "max_abs_diff_from_norm_sq_minus_one": deviation,
        }),
    )?;
    let summary = format!(
        "solve: converged={} iterations={} residual={:.3e} violations={} max|u-(|z|^2-1)|={:.3e}",
        rep.converged, rep.iterations, rep.residual, rep.violations, deviation
    );
    Ok((rep.converged, summary))
}

fn run_picard(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String), CliError> {
    let spec = cfg.problem_spec()?;
    let (state, reports) = picard_run(&spec)?;
    let sandwich = sandwich_check(&state, &state.subsolution);
    w.text(
        "trace.csv",
        &records_csv(&["j", "sup_step", "residual", "cap_metric", "bracket_gap", "wall_time_s"], &state.trace)?,
    )?;
    w.field("solution", state.current())?;
    w.field("u0", state.u0())?;
    w.field("subsolution", &state.subsolution)?;
    let inner: Vec<Value> = reports.iter().map(|r| serde_json::to_value(r.to_json()).unwrap_or(Value::Null)).collect();
    w.json(
        "report.json",
        &json!({
            "status": state.status,
            "iterations": state.steps.len(),
            "terminal_residual": state.terminal_residual,
            "sandwich": sandwich,
            "relaxed_from": state.relaxed_from,
            "log": state.log,
            "eps_grid": state.eps_grid,
            "inner": inner,
        }),
    )?;
    let ok = state.converged();
    let summary = format!(
        "picard: status={:?} iterations={} terminal_residual={:.3e} sandwich={}",
        state.status,
        state.steps.len(),
        state.terminal_residual,
        sandwich
    );
    Ok((ok, summary))
}

fn run_stability_cmd(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String), CliError> {
    let sec = cfg.raw.stability.clone().expect("validated");
    let spec = cfg.problem_spec()?;
    let fam = crate::expr::Expr::parse(&sec.family).expect("validated");
    let bound = spec.source.bound().clone();
    let monotone = spec.source.monotone();
    let mut exp = StabilityExperiment::new(spec, move |j| {
        let e = fam.clone();
        let jf = j as f64;
        SourceFunction::new(move |t, x| e.eval(&Env::at(x).with_t(t).with_j(jf)), bound.clone(), monotone)
    });
    exp.indices = sec.indices.clone();
    exp.deltas = sec.deltas.clone();
    exp.threshold = sec.threshold;
    exp.k_radius = sec.k_radius;
    let rep = run_stability(&exp)?;
    w.text("stability.csv", &records_csv(&["j", "delta", "cap_metric", "sup_diff", "iterations"], &rep.rows)?)?;
    w.json("report.json", &serde_json::to_value(&rep).unwrap_or(Value::Null))?;
    let last = rep.rows.last().map_or(f64::NAN, |r| r.cap_metric);
    let summary = format!(
        "stability: pass={} complete={} final cap_metric={:.3e} sandwich={}",
        rep.pass,
        rep.complete,
        last,
        rep.sandwich.iter().all(|(_, ok)| *ok)
    );
    Ok((rep.pass, summary))
}

#[derive(Serialize)]
struct CapacityRow {
    set_id: usize,
    kind: String,
    value: f64,
    ratio: Option<f64>,
}

fn run_capacity(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String), CliError> {
    let sec = cfg.raw.capacity.clone().expect("validated");
    let zero = HermitianField::zeros(&cfg.grid);
    let mut rows = Vec::new();
    let mut sets = Vec::new();
    for (k, s) in sec.sets.iter().enumerate() {
        let set = cfg.set(&format!("capacity.sets[{k}]"), s)?;
        let est = cap_estimate(&set, &cfg.omega, cfg.m())?;
        let ratio = if sec.probe {
            let plain = cap_estimate(&set, &zero, cfg.m())?.value;
            Some(plain / est.value)
        } else {
            None
        };
        let kind = match est.kind {
            EstimatorKind::RelativeExtremal => "relative-extremal",
            EstimatorKind::WitnessSample => "witness-sample",
        };
        if let Some(u) = &est.extremal {
            w.field(&format!("extremal_{k}"), u)?;
        }
        rows.push(CapacityRow { set_id: k, kind: kind.into(), value: est.value, ratio });
        sets.push(set);
    }
    // Inclusion monotonicity over every nested pair.
    let mut inversions = Vec::new();
    for a in 0..sets.len() {
        for b in 0..sets.len() {
            if a != b && sets[a].is_subset_of(&sets[b])? && rows[a].value > rows[b].value + 1e-9 {
                inversions.push((a, b));
            }
        }
    }
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let envelope = (!ratios.is_empty()).then(|| {
        (ratios.iter().copied().fold(f64::INFINITY, f64::min), ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    });
    w.text("capacity.csv", &records_csv(&["set_id", "kind", "value", "ratio"], &rows)?)?;
    w.json(
        "report.json",
        &json!({
            "values": rows.iter().map(|r| r.value).collect::<Vec<_>>(),
            "monotonicity_inversions": inversions,
            "ratio_envelope": envelope,
            "estimator": "lower bound from the relative extremal witness",
        }),
    )?;
    let finite = rows.iter().all(|r| r.value.is_finite() && r.value >= 0.0)
        && ratios.iter().all(|r| r.is_finite() && *r > 0.0);
    let ok = finite && inversions.is_empty();
    let values: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.value)).collect();
    Ok((ok, format!("capacity: values=[{}] monotone={} ratios={:?}", values.join(", "), inversions.is_empty(), envelope)))
}

fn run_properties(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String), CliError> {
    let sec = cfg.raw.properties.clone().expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed());
    let (omega, m) = (&cfg.omega, cfg.m());
    let mut reports = Vec::new();
    for (k, check) in sec.checks.iter().enumerate() {
        let p = format!("properties.checks[{k}]");
        let rep = match check {
            CheckSpec::Comparison { u, v, tol } => check_comparison(
                &cfg.function(&format!("{p}.u"), u)?,
                &cfg.function(&format!("{p}.v"), v)?,
                omega,
                m,
                tol.unwrap_or(1e-9),
            )?,
            CheckSpec::MaxPrinciple { u, v, band } => check_max_principle(
                &cfg.function(&format!("{p}.u"), u)?,
                &cfg.function(&format!("{p}.v"), v)?,
                omega,
                m,
                *band,
            )?,
            CheckSpec::Demailly { u, v, band } => check_demailly(
                &cfg.function(&format!("{p}.u"), u)?,
                &cfg.function(&format!("{p}.v"), v)?,
                omega,
                m,
                *band,
            )?,
            CheckSpec::RandomComparison { pairs } => {
                let tol = 10.0 * cfg.solver.tolerance;
                let mut all = Vec::new();
                for _ in 0..*pairs {
                    let (u, v) = random_measure_ordered_pair(&cfg.grid, omega, m, &mut rng, &cfg.solver)?;
                    all.push(check_comparison(&u, &v, omega, m, tol)?);
                }
                PropertyReport::merge("random_comparison", &all)
            }
            CheckSpec::RandomDemailly { pairs, band } => {
                let gen = GeneratorConfig::default();
                let mut all = Vec::new();
                for _ in 0..*pairs {
                    let u = random_admissible(&cfg.grid, omega, m, &mut rng, &gen)?;
                    let v = random_admissible(&cfg.grid, omega, m, &mut rng, &gen)?;
                    all.push(check_demailly(&u, &v, omega, m, *band)?);
                }
                PropertyReport::merge("random_demailly", &all)
            }
            CheckSpec::WeakConvergence { family, limit, indices, tests, rel_tol } => {
                let fam = crate::expr::Expr::parse(family).expect("validated");
                debug_assert!(!fam.uses(Var::T));
                let seq: Vec<GridFunction> = indices
                    .iter()
                    .map(|&j| {
                        let e = fam.clone();
                        GridFunction::from_fn(&cfg.grid, move |x| e.eval(&Env::at(x).with_j(j as f64)))
                    })
                    .collect();
                let chis: Vec<GridFunction> = tests.iter().map(|b| bump(&cfg.grid, &b.center, b.radius)).collect();
                let wc = WeakConvergenceConfig { rel_tol: rel_tol.unwrap_or(0.01), ..WeakConvergenceConfig::default() };
                check_weak_convergence(&seq, &cfg.function(&format!("{p}.limit"), limit)?, omega, m, &chis, &wc)?
            }
        };
        reports.push(rep);
    }
    #[derive(Serialize)]
    struct Row<'a> {
        name: &'a str,
        trials: usize,
        failures: usize,
        worst: f64,
        applicable: bool,
        pass: bool,
    }
    let rows: Vec<Row> = reports
        .iter()
        .map(|r| Row {
            name: &r.name,
            trials: r.trials,
            failures: r.failures,
            worst: r.worst.as_ref().map_or(0.0, |v| v.magnitude),
            applicable: r.applicable,
            pass: r.pass,
        })
        .collect();
    w.text("properties.csv", &records_csv(&["name", "trials", "failures", "worst", "applicable", "pass"], &rows)?)?;
    w.json("report.json", &json!({ "properties": reports }))?;
    let failed: Vec<&str> = reports.iter().filter(|r| r.applicable && !r.pass).map(|r| r.name.as_str()).collect();
    let applicable = reports.iter().filter(|r| r.applicable).count();
    let ok = failed.is_empty() && applicable > 0;
    Ok((ok, format!("properties: {applicable} applicable, failed={failed:?}")))
}

/// Runs a validated configuration into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path, force: bool) -> Result<Outcome, CliError> {
    let start = Instant::now();
    prepare_dir(out_dir, force)?;
    let mut w = Writer { dir: out_dir.to_path_buf(), artifacts: Vec::new() };
    let (success, summary) = match cfg.subcommand() {
        Subcommand::Solve => run_solve(cfg, &mut w)?,
        Subcommand::Picard => run_picard(cfg, &mut w)?,
        Subcommand::Stability => run_stability_cmd(cfg, &mut w)?,
        Subcommand::Capacity => run_capacity(cfg, &mut w)?,
        Subcommand::Properties => run_properties(cfg, &mut w)?,
    };
    let manifest = json!({
        "tool": "hessian-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cfg.subcommand().name(),
        "seed": cfg.seed(),
        "config": cfg.raw,
        "success": success,
        "summary": summary,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "artifacts": w.artifacts,
    });
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::new("io", "manifest.json", e.to_string()))?;
    fs::write(out_dir.join("manifest.json"), body).map_err(|e| CliError::new("io", "manifest.json", e.to_string()))?;
    Ok(Outcome { success, summary, out_dir: out_dir.to_path_buf(), artifacts: w.artifacts })
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let err = CliError::new("usage", "", e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(&args) {
        Ok(out) => {
            println!("{}", out.summary);
            if out.success {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

fn execute(args: &Args) -> Result<Outcome, CliError> {
    let overrides = Overrides { seed: args.seed, grid: args.grid.clone(), tol: args.tol };
    let cfg = parse_config(&args.config, &overrides)?;
    if let Some(sub) = &args.subcommand {
        if sub != cfg.subcommand().name() {
            return Err(CliError::new(
                "usage",
                "subcommand",
                format!("command line asks for `{sub}` but the configuration is for `{}`", cfg.subcommand().name()),
            ));
        }
    }
    let out = args
        .out_dir
        .clone()
        .or_else(|| cfg.raw.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("hessian-lab-out"));
    run(&cfg, &out, args.force)
}
