//! Run configuration: JSON schema, validation and construction of the numerical objects.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::capacity::GridSet;
use crate::expr::{Env, Expr, Var};
use crate::forms::MeasureDensity;
use crate::grid::{max_divisions, BallGrid, BoundaryFn, GridFunction, HermitianField};
use crate::hermitian::HermitianMatrix;
use crate::picard::{PicardConfig, ProblemSpec, SourceFunction};
use crate::solver::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigErrorKind {
    Parse,
    Schema,
    Domain,
}

/// A configuration failure, naming the offending field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} error at `{}`: {}", self.kind, self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn domain(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { kind: ConfigErrorKind::Domain, path: path.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Solve,
    Picard,
    Stability,
    Capacity,
    Properties,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::Picard => "picard",
            Subcommand::Stability => "stability",
            Subcommand::Capacity => "capacity",
            Subcommand::Properties => "properties",
        }
    }
}

/// A number or an expression string such as `"1/32"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberOrExpr {
    Number(f64),
    Expr(String),
}

/// Matrix entry: a real number or `[re, im]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    /// Only `"zero"` is accepted.
    Named(String),
    Form(OmegaForm),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaForm {
    ScaledIdentity(f64),
    Matrix(Vec<Vec<Entry>>),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub solver: Option<f64>,
    pub picard: Option<f64>,
    pub capacity: Option<f64>,
    pub max_newton: Option<usize>,
    pub max_outer: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    #[serde(default)]
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Ball(BallSpec),
    /// Points where the expression is ≤ 0.
    Sublevel(String),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    #[serde(default)]
    pub sets: Vec<SetSpec>,
    /// Also report `C_m / Cap_ω` per set.
    #[serde(default)]
    pub probe: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    /// Expression for `F_j` in `t`, the coordinates and `j`.
    pub family: String,
    #[serde(default = "default_indices")]
    pub indices: Vec<usize>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_k_radius")]
    pub k_radius: f64,
}

fn default_indices() -> Vec<usize> {
    vec![1, 2, 4, 8, 16, 32]
}

fn default_deltas() -> Vec<f64> {
    vec![0.05]
}

fn default_threshold() -> f64 {
    1e-3
}

fn default_k_radius() -> f64 {
    0.9
}

fn default_band() -> usize {
    crate::properties::DEFAULT_BAND
}

fn default_pairs() -> usize {
    20
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Comparison {
        u: String,
        v: String,
        #[serde(default)]
        tol: Option<f64>,
    },
    MaxPrinciple {
        u: String,
        v: String,
        #[serde(default = "default_band")]
        band: usize,
    },
    Demailly {
        u: String,
        v: String,
        #[serde(default = "default_band")]
        band: usize,
    },
    RandomComparison {
        #[serde(default = "default_pairs")]
        pairs: usize,
    },
    RandomDemailly {
        #[serde(default = "default_pairs")]
        pairs: usize,
        #[serde(default = "default_band")]
        band: usize,
    },
    WeakConvergence {
        /// Sequence expression in the coordinates and `j`.
        family: String,
        limit: String,
        indices: Vec<usize>,
        tests: Vec<BallSpec>,
        #[serde(default)]
        rel_tol: Option<f64>,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertiesSection {
    pub checks: Vec<CheckSpec>,
}

/// The configuration file as written.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub subcommand: Subcommand,
    pub n: usize,
    pub m: usize,
    pub h: NumberOrExpr,
    #[serde(default = "default_omega")]
    pub omega: OmegaSpec,
    #[serde(default = "default_one")]
    pub mu: String,
    #[serde(rename = "F", default = "default_zero")]
    pub f: String,
    #[serde(rename = "G", default)]
    pub g: Option<String>,
    #[serde(default = "default_zero")]
    pub phi: String,
    #[serde(default)]
    pub monotone: Option<bool>,
    #[serde(default)]
    pub pure_scheme: bool,
    #[serde(default)]
    pub bracket_window: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub capacity: Option<CapacitySection>,
    #[serde(default)]
    pub stability: Option<StabilitySection>,
    #[serde(default)]
    pub properties: Option<PropertiesSection>,
}

fn default_omega() -> OmegaSpec {
    OmegaSpec::Named("zero".into())
}

fn default_one() -> String {
    "1".into()
}

fn default_zero() -> String {
    "0".into()
}

/// Command-line overrides applied before validation.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<String>,
    pub tol: Option<f64>,
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub grid: Arc<BallGrid>,
    pub omega: HermitianField,
    pub omega_is_zero: bool,
    pub mu: Expr,
    pub f: Expr,
    pub g: Expr,
    pub phi: Expr,
    pub solver: SolverConfig,
    pub picard: PicardConfig,
}

pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError {
        kind: ConfigErrorKind::Parse,
        path: String::new(),
        message: format!("{e}"),
    })?;
    if !value.is_object() {
        return Err(ConfigError {
            kind: ConfigErrorKind::Schema,
            path: String::new(),
            message: "configuration must be a JSON object".into(),
        });
    }
    let mut raw: RawConfig = serde_path_to_error::deserialize(value).map_err(|e| ConfigError {
        kind: ConfigErrorKind::Schema,
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if let Some(s) = overrides.seed {
        raw.seed = s;
    }
    if let Some(h) = &overrides.grid {
        raw.h = match h.parse::<f64>() {
            Ok(v) => NumberOrExpr::Number(v),
            Err(_) => NumberOrExpr::Expr(h.clone()),
        };
    }
    if let Some(t) = overrides.tol {
        raw.tolerances.solver = Some(t);
    }
    validate(raw)
}

pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        kind: ConfigErrorKind::Parse,
        path: String::new(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config_str(&text, overrides)
}

fn expr(path: &str, src: &str) -> Result<Expr, ConfigError> {
    Expr::parse(src).map_err(|e| domain(path, format!("cannot parse `{src}`: {e}")))
}

/// Rejects variables that do not exist in this context.
fn check_vars(path: &str, e: &Expr, n: usize, allow_t: bool, allow_j: bool) -> Result<(), ConfigError> {
    for v in e.variables() {
        let ok = match v {
            Var::T => allow_t,
            Var::J => allow_j,
            Var::X2 | Var::Y2 => n >= 2,
            _ => true,
        };
        if !ok {
            return Err(domain(path, format!("variable {v:?} is not available here (n = {n})").to_lowercase()));
        }
    }
    Ok(())
}

fn positive(path: &str, v: Option<f64>) -> Result<(), ConfigError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(domain(path, format!("must be positive, got {x}"))),
        _ => Ok(()),
    }
}

fn divisions(h: &NumberOrExpr, n: usize) -> Result<usize, ConfigError> {
    let value = match h {
        NumberOrExpr::Number(v) => *v,
        NumberOrExpr::Expr(s) => expr("h", s)?
            .constant_value()
            .ok_or_else(|| domain("h", "grid spacing must be a constant"))?,
    };
    if !(value > 0.0 && value.is_finite()) {
        return Err(domain("h", format!("grid spacing must be positive, got {value}")));
    }
    let inv = 1.0 / value;
    let d = inv.round();
    if (inv - d).abs() > 1e-9 * inv {
        return Err(domain("h", format!("1/h must be an integer, got {inv}")));
    }
    let d = d as usize;
    let max = max_divisions(n);
    if d < 2 || d > max {
        return Err(domain("h", format!("1/h = {d} outside the supported range [2, {max}] for n = {n}")));
    }
    Ok(d)
}

fn omega_matrix(spec: &OmegaSpec, n: usize) -> Result<(HermitianMatrix, bool), ConfigError> {
    match spec {
        OmegaSpec::Named(s) if s == "zero" => Ok((HermitianMatrix::zeros(n), true)),
        OmegaSpec::Named(s) => Err(domain("omega", format!("unknown form `{s}`; expected \"zero\", scaled_identity or matrix"))),
        OmegaSpec::Form(OmegaForm::ScaledIdentity(c)) => {
            if !c.is_finite() {
                return Err(domain("omega.scaled_identity", "must be finite"));
            }
            Ok((HermitianMatrix::scaled_identity(n, *c), *c == 0.0))
        }
        OmegaSpec::Form(OmegaForm::Matrix(rows)) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(domain("omega.matrix", format!("must be {n}×{n}")));
            }
            let rows: Vec<Vec<Complex64>> = rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|e| match e {
                            Entry::Real(x) => Complex64::new(*x, 0.0),
                            Entry::Complex([a, b]) => Complex64::new(*a, *b),
                        })
                        .collect()
                })
                .collect();
            let a = HermitianMatrix::new(&rows).map_err(|e| domain("omega.matrix", e.to_string()))?;
            let zero = a.frobenius_norm() == 0.0;
            Ok((a, zero))
        }
    }
}

fn validate(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let n = raw.n;
    if !(1..=2).contains(&n) {
        return Err(domain("n", format!("n must be 1 or 2, got {n}")));
    }
    if raw.m == 0 || raw.m > n {
        return Err(domain("m", format!("1 ≤ m ≤ n required, got m = {} with n = {n}", raw.m)));
    }
    let d = divisions(&raw.h, n)?;
    let grid = BallGrid::new(n, d).map_err(|e| domain("h", e.to_string()))?;
    let (om, omega_is_zero) = omega_matrix(&raw.omega, n)?;
    let omega = HermitianField::constant(&grid, om).map_err(|e| domain("omega", e.to_string()))?;

    let t_source = matches!(raw.subcommand, Subcommand::Picard | Subcommand::Stability);
    let mu = expr("mu", &raw.mu)?;
    check_vars("mu", &mu, n, false, false)?;
    let f = expr("F", &raw.f)?;
    check_vars("F", &f, n, t_source, false)?;
    let g_src = raw.g.clone().unwrap_or_else(|| raw.f.clone());
    let g = expr("G", &g_src)?;
    check_vars("G", &g, n, false, false)?;
    let phi = expr("phi", &raw.phi)?;
    check_vars("phi", &phi, n, false, false)?;
    if t_source && raw.g.is_none() && f.uses(Var::T) {
        return Err(domain("G", "a bound G is required when F depends on t"));
    }

    let tol = &raw.tolerances;
    positive("tolerances.solver", tol.solver)?;
    positive("tolerances.picard", tol.picard)?;
    positive("tolerances.capacity", tol.capacity)?;
    if tol.max_newton == Some(0) {
        return Err(domain("tolerances.max_newton", "must be at least 1"));
    }
    if tol.max_outer == Some(0) {
        return Err(domain("tolerances.max_outer", "must be at least 1"));
    }
    let mut solver = SolverConfig::default();
    if let Some(t) = tol.solver {
        solver.tolerance = t;
    }
    if let Some(k) = tol.max_newton {
        solver.max_newton = k;
    }
    let mut picard = PicardConfig { solver: solver.clone(), pure_scheme: raw.pure_scheme, ..PicardConfig::default() };
    if let Some(t) = tol.picard {
        picard.tolerance = t;
    }
    if let Some(t) = tol.capacity {
        picard.cap_tolerance = t;
    }
    if let Some(k) = tol.max_outer {
        picard.max_iterations = k;
    }
    if let Some(w) = raw.bracket_window {
        if w == 0 {
            return Err(domain("bracket_window", "must be at least 1"));
        }
        picard.bracket_window = Some(w);
    }

    let cfg = RunConfig { raw, grid, omega, omega_is_zero, mu, f, g, phi, solver, picard };
    cfg.check_densities()?;
    cfg.check_sections()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn subcommand(&self) -> Subcommand {
        self.raw.subcommand
    }

    pub fn n(&self) -> usize {
        self.raw.n
    }

    pub fn m(&self) -> usize {
        self.raw.m
    }

    pub fn seed(&self) -> u64 {
        self.raw.seed
    }

    fn field(&self, path: &str, e: &Expr) -> Result<MeasureDensity, ConfigError> {
        let values: Vec<f64> = (0..self.grid.len())
            .map(|i| e.eval(&Env::at(&self.grid.point(i)[..self.grid.real_dim()])))
            .collect();
        MeasureDensity::new(self.grid.clone(), values).map_err(|err| domain(path, err.to_string()))
    }

    pub fn mu_density(&self) -> Result<MeasureDensity, ConfigError> {
        self.field("mu", &self.mu)
    }

    pub fn g_density(&self) -> Result<MeasureDensity, ConfigError> {
        self.field("G", &self.g)
    }

    /// `F·μ` for a `t`-independent `F`.
    pub fn rhs_density(&self) -> Result<MeasureDensity, ConfigError> {
        if self.f.uses(Var::T) {
            return Err(domain("F", "the solve subcommand needs F independent of t"));
        }
        let f = self.field("F", &self.f)?;
        f.product(&self.mu_density()?).map_err(|e| domain("F", e.to_string()))
    }

    pub fn phi_fn(&self) -> BoundaryFn {
        let e = self.phi.clone();
        BoundaryFn::new(move |x| e.eval(&Env::at(x)))
    }

    pub fn function(&self, path: &str, src: &str) -> Result<GridFunction, ConfigError> {
        let e = expr(path, src)?;
        check_vars(path, &e, self.n(), false, false)?;
        Ok(GridFunction::from_fn(&self.grid, move |x| e.eval(&Env::at(x))))
    }

    pub fn set(&self, path: &str, spec: &SetSpec) -> Result<GridSet, ConfigError> {
        let set = match spec {
            SetSpec::Ball(b) => {
                if b.center.len() > self.grid.real_dim() {
                    return Err(domain(format!("{path}.ball.center"), "more coordinates than the ball has"));
                }
                if !(b.radius > 0.0) {
                    return Err(domain(format!("{path}.ball.radius"), "must be positive"));
                }
                GridSet::ball(&self.grid, &b.center, b.radius)
            }
            SetSpec::Sublevel(src) => {
                let e = expr(&format!("{path}.sublevel"), src)?;
                check_vars(&format!("{path}.sublevel"), &e, self.n(), false, false)?;
                GridSet::from_predicate(&self.grid, move |x| e.eval(&Env::at(x)) <= 0.0)
            }
        };
        if set.is_empty() {
            return Err(domain(path, "set contains no grid points"));
        }
        Ok(set)
    }

    /// Sphere range of φ, used for the configuration-time `F ≤ G` band.
    fn phi_range(&self) -> (f64, f64) {
        let b = self.phi_fn().sample(&self.grid);
        let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn check_densities(&self) -> Result<(), ConfigError> {
        let mu = self.mu_density()?;
        let g = self.g_density()?;
        let gmu = g.product(&mu).map_err(|e| domain("G", e.to_string()))?;
        let c = gmu.max().max(0.0).powf(1.0 / self.m() as f64);
        let (lo, hi) = self.phi_range();
        let omega_shift = if self.omega_is_zero { 0.0 } else { self.omega.max_eigenvalue().abs() };
        let band = (lo - c - omega_shift - 1.0, hi + omega_shift + 1.0);
        let dim = self.grid.real_dim();
        let samples = crate::picard::BOUND_SAMPLES;
        let ts: Vec<f64> = if self.f.uses(Var::T) {
            (0..samples).map(|s| band.0 + (band.1 - band.0) * s as f64 / (samples - 1) as f64).collect()
        } else {
            vec![0.0]
        };
        for i in 0..self.grid.len() {
            let x = &self.grid.point(i)[..dim];
            for &t in &ts {
                let v = self.f.eval(&Env::at(x).with_t(t));
                if !v.is_finite() || v < 0.0 {
                    return Err(domain("F", format!("F = {v} at t = {t}, z = {x:?}; must be finite and ≥ 0")));
                }
                if v > g.values()[i] + crate::picard::BOUND_SLACK {
                    return Err(domain("F", format!("bound F ≤ G violated: F = {v} > G = {} at t = {t}, z = {x:?}", g.values()[i])));
                }
            }
        }
        Ok(())
    }

    fn check_sections(&self) -> Result<(), ConfigError> {
        match self.subcommand() {
            Subcommand::Capacity => {
                let sec = self.raw.capacity.as_ref().ok_or_else(|| domain("capacity", "section required"))?;
                if sec.sets.is_empty() {
                    return Err(domain("capacity.sets", "at least one set required"));
                }
                for (k, s) in sec.sets.iter().enumerate() {
                    self.set(&format!("capacity.sets[{k}]"), s)?;
                }
            }
            Subcommand::Stability => {
                let sec = self.raw.stability.as_ref().ok_or_else(|| domain("stability", "section required"))?;
                let fam = expr("stability.family", &sec.family)?;
                check_vars("stability.family", &fam, self.n(), true, true)?;
                if sec.indices.is_empty() || sec.indices.contains(&0) {
                    return Err(domain("stability.indices", "indices must be nonempty and ≥ 1"));
                }
                if sec.deltas.is_empty() || sec.deltas.iter().any(|d| !(*d > 0.0)) {
                    return Err(domain("stability.deltas", "δ values must be positive"));
                }
                positive("stability.threshold", Some(sec.threshold))?;
            }
            Subcommand::Properties => {
                let sec = self.raw.properties.as_ref().ok_or_else(|| domain("properties", "section required"))?;
                if sec.checks.is_empty() {
                    return Err(domain("properties.checks", "at least one check required"));
                }
                for (k, c) in sec.checks.iter().enumerate() {
                    let p = format!("properties.checks[{k}]");
                    match c {
                        CheckSpec::Comparison { u, v, .. } | CheckSpec::MaxPrinciple { u, v, .. } | CheckSpec::Demailly { u, v, .. } => {
                            self.function(&format!("{p}.u"), u)?;
                            self.function(&format!("{p}.v"), v)?;
                        }
                        CheckSpec::WeakConvergence { family, limit, indices, tests, .. } => {
                            let fam = expr(&format!("{p}.family"), family)?;
                            check_vars(&format!("{p}.family"), &fam, self.n(), false, true)?;
                            self.function(&format!("{p}.limit"), limit)?;
                            if indices.is_empty() || indices.contains(&0) {
                                return Err(domain(format!("{p}.indices"), "indices must be nonempty and ≥ 1"));
                            }
                            if tests.is_empty() {
                                return Err(domain(format!("{p}.tests"), "at least one test function required"));
                            }
                        }
                        CheckSpec::RandomComparison { pairs } | CheckSpec::RandomDemailly { pairs, .. } => {
                            if *pairs == 0 {
                                return Err(domain(format!("{p}.pairs"), "must be at least 1"));
                            }
                        }
                    }
                }
            }
            Subcommand::Solve => {
                if self.f.uses(Var::T) {
                    return Err(domain("F", "the solve subcommand needs F independent of t"));
                }
            }
            Subcommand::Picard => {}
        }
        Ok(())
    }

    /// The Picard problem described by the configuration.
    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let f = self.f.clone();
        let source = SourceFunction::new(
            move |t, x| f.eval(&Env::at(x).with_t(t)),
            self.g_density()?,
            self.raw.monotone.unwrap_or(false),
        );
        ProblemSpec::new(
            self.m(),
            self.omega.clone(),
            self.mu_density()?,
            source,
            self.phi_fn(),
            None,
            self.picard.clone(),
        )
        .map_err(|e| domain("", e.to_string()))
    }
}
