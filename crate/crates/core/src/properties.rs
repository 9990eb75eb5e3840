//! Numerical checks of comparison, locality of the Hessian measure, the
//! Demailly-type lower bound and weak convergence, on grid data.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{cap_metric, GridSet};
use crate::error::{argument, Error, Result};
use crate::forms::{hessian_measure, MeasureDensity};
use crate::grid::{max_of, norm_sq, BallGrid, BoundaryFn, GridFunction, HermitianField, Slot};
use crate::solver::{solve_dirichlet, SolverConfig};

/// Default interface band for the locality checks.
pub const DEFAULT_BAND: usize = 2;
/// Pointwise tolerance for the locality checks.
pub const LOCALITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub magnitude: f64,
    pub index: usize,
    pub point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    pub worst: Option<Violation>,
    pub tolerance: f64,
    pub band: Option<usize>,
    /// False when the inputs do not meet the hypotheses; such reports never pass.
    pub applicable: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl PropertyReport {
    fn new(name: &str, tolerance: f64, band: Option<usize>) -> Self {
        Self {
            name: name.into(),
            trials: 0,
            failures: 0,
            worst: None,
            tolerance,
            band,
            applicable: true,
            pass: false,
            notes: Vec::new(),
        }
    }

    fn inapplicable(mut self, why: impl Into<String>) -> Self {
        self.applicable = false;
        self.pass = false;
        self.notes.push(why.into());
        self
    }

    /// Records one trial; `gap < 0` is a failure of size `-gap`.
    fn trial(&mut self, grid: &BallGrid, i: usize, gap: f64) {
        self.trials += 1;
        if gap < 0.0 {
            self.failures += 1;
            if self.worst.as_ref().map_or(true, |w| -gap > w.magnitude) {
                self.worst = Some(Violation { magnitude: -gap, index: i, point: grid.point(i)[..grid.real_dim()].to_vec() });
            }
        }
    }

    fn finish(mut self) -> Self {
        if self.trials == 0 {
            return self.inapplicable("no trials in the test region");
        }
        self.pass = self.applicable && self.failures == 0;
        self
    }

    /// Folds several reports of the same property into one.
    pub fn merge(name: &str, reports: &[PropertyReport]) -> PropertyReport {
        let tol = reports.first().map_or(0.0, |r| r.tolerance);
        let band = reports.first().and_then(|r| r.band);
        let mut out = PropertyReport::new(name, tol, band);
        let live: Vec<&PropertyReport> = reports.iter().filter(|r| r.applicable).collect();
        for r in &live {
            out.trials += r.trials;
            out.failures += r.failures;
            if let Some(w) = &r.worst {
                if out.worst.as_ref().map_or(true, |o| w.magnitude > o.magnitude) {
                    out.worst = Some(w.clone());
                }
            }
        }
        let skipped = reports.len() - live.len();
        if skipped > 0 {
            out.notes.push(format!("{skipped} of {} cases inapplicable", reports.len()));
        }
        if live.is_empty() {
            return out.inapplicable("every case was inapplicable");
        }
        out.finish()
    }
}

fn admissible_pair(
    u: &GridFunction,
    v: &GridFunction,
    omega: &HermitianField,
    m: usize,
) -> Result<Option<(MeasureDensity, MeasureDensity)>> {
    if !u.grid().same_as(v.grid()) {
        return Err(Error::GridMismatch("property check arguments live on different grids".into()));
    }
    let hu = hessian_measure(u, omega, m)?;
    let hv = hessian_measure(v, omega, m)?;
    if !hu.is_admissible() || !hv.is_admissible() {
        return Ok(None);
    }
    Ok(Some((hu, hv)))
}

/// Comparison: with `H(v) ≥ H(u)` and `u ≥ v` on the sphere, `u ≥ v` inside.
/// Violations of either hypothesis count as failures too.
pub fn check_comparison(u: &GridFunction, v: &GridFunction, omega: &HermitianField, m: usize, tol: f64) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new("comparison", tol, None);
    let Some((hu, hv)) = admissible_pair(u, v, omega, m)? else {
        return Ok(rep.inapplicable("an argument is not admissible"));
    };
    let grid = u.grid().clone();
    let (bu, bv) = (u.boundary_values(), v.boundary_values());
    let mut boundary_bad = 0;
    for (a, b) in bu.iter().zip(&bv) {
        if a - b < -tol {
            boundary_bad += 1;
        }
    }
    if boundary_bad > 0 {
        rep.failures += boundary_bad;
        rep.trials += boundary_bad;
        rep.notes.push(format!("u < v − tol at {boundary_bad} boundary nodes"));
    }
    let mut order_bad = 0;
    for i in 0..grid.len() {
        let gap = hv.values()[i] - hu.values()[i] + tol;
        if gap < 0.0 {
            order_bad += 1;
            rep.trial(&grid, i, gap);
        }
    }
    if order_bad > 0 {
        rep.notes.push(format!("H(v) < H(u) − tol at {order_bad} points"));
    }
    for i in 0..grid.len() {
        rep.trial(&grid, i, u.values()[i] - v.values()[i] + tol);
    }
    Ok(rep.finish())
}

/// Points at lattice distance ≥ `band` from `other` whose stencil boundary
/// nodes also satisfy `side(φ_u, φ_v)`.
fn clear_region(
    grid: &BallGrid,
    mine: &[bool],
    band: usize,
    bu: &[f64],
    bv: &[f64],
    side: impl Fn(f64, f64) -> bool,
) -> Vec<bool> {
    let other: Vec<bool> = mine.iter().map(|&b| !b).collect();
    let dist = grid.distance_to(&other);
    (0..grid.len())
        .map(|i| {
            mine[i]
                && dist[i] >= band
                && grid.lines(i).iter().all(|l| {
                    [l.minus, l.plus].iter().all(|s| match *s {
                        Slot::Boundary(b) => side(bu[b as usize], bv[b as usize]),
                        Slot::Interior(_) => true,
                    })
                })
        })
        .collect()
}

/// On `{u > v}` away from the interface, `H(max(u, v)) = H(u)`.
pub fn check_max_principle(u: &GridFunction, v: &GridFunction, omega: &HermitianField, m: usize, band: usize) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new("max_principle", LOCALITY_TOL, Some(band));
    let Some((hu, _)) = admissible_pair(u, v, omega, m)? else {
        return Ok(rep.inapplicable("an argument is not admissible"));
    };
    let grid = u.grid().clone();
    let hmax = hessian_measure(&max_of(u, v)?, omega, m)?;
    let above: Vec<bool> = u.values().iter().zip(v.values()).map(|(a, b)| a > b).collect();
    let region = clear_region(&grid, &above, band, &u.boundary_values(), &v.boundary_values(), |a, b| a > b);
    for i in (0..grid.len()).filter(|&i| region[i]) {
        let diff = (hmax.values()[i] - hu.values()[i]).abs();
        rep.trial(&grid, i, LOCALITY_TOL - diff);
    }
    if rep.trials == 0 {
        return Ok(rep.inapplicable("{u > v} has no points clear of the interface band"));
    }
    Ok(rep.finish())
}

/// `H(max(u, v)) ≥ 1_{u>v} H(u) + 1_{u≤v} H(v)` away from the interface and
/// `H(max(u, v)) ≥ 0` inside the band.
pub fn check_demailly(u: &GridFunction, v: &GridFunction, omega: &HermitianField, m: usize, band: usize) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new("demailly", LOCALITY_TOL, Some(band));
    let Some((hu, hv)) = admissible_pair(u, v, omega, m)? else {
        return Ok(rep.inapplicable("an argument is not admissible"));
    };
    let grid = u.grid().clone();
    let hmax = hessian_measure(&max_of(u, v)?, omega, m)?;
    let (bu, bv) = (u.boundary_values(), v.boundary_values());
    let above: Vec<bool> = u.values().iter().zip(v.values()).map(|(a, b)| a > b).collect();
    let below: Vec<bool> = above.iter().map(|&b| !b).collect();
    let region_u = clear_region(&grid, &above, band, &bu, &bv, |a, b| a > b);
    let region_v = clear_region(&grid, &below, band, &bu, &bv, |a, b| a <= b);
    let mut in_band = 0;
    for i in 0..grid.len() {
        let d = hmax.values()[i];
        let floor = if region_u[i] {
            hu.values()[i]
        } else if region_v[i] {
            hv.values()[i]
        } else {
            in_band += 1;
            0.0
        };
        rep.trial(&grid, i, d - floor + LOCALITY_TOL);
    }
    rep.notes.push(format!(
        "{in_band} points inside the interface band checked for nonnegativity only; mass on the contact set is not resolved"
    ));
    Ok(rep.finish())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakConvergenceConfig {
    /// Allowed relative gap between the last pairing and the limit pairing.
    pub rel_tol: f64,
    pub delta: f64,
    pub cap_threshold: f64,
    pub k_radius: f64,
}

impl Default for WeakConvergenceConfig {
    fn default() -> Self {
        Self { rel_tol: 0.01, delta: 0.05, cap_threshold: 1e-3, k_radius: 0.9 }
    }
}

/// `∫ χ dH(u)` in Lebesgue units.
pub fn pairing(chi: &GridFunction, u: &GridFunction, omega: &HermitianField, m: usize) -> Result<f64> {
    let h = hessian_measure(u, omega, m)?;
    let grid = u.grid();
    let fact: f64 = (1..=grid.n()).map(|k| k as f64).product();
    Ok(chi.values().iter().zip(h.values()).map(|(a, b)| a * b).sum::<f64>() * grid.cell_volume() * fact)
}

/// Smooth bump `exp(1 − 1/(1 − s²))`, `s = ‖z − c‖/r`, zero outside the ball of radius `r`.
pub fn bump(grid: &Arc<BallGrid>, center: &[f64], r: f64) -> GridFunction {
    let c: Vec<f64> = (0..grid.real_dim()).map(|k| center.get(k).copied().unwrap_or(0.0)).collect();
    GridFunction::from_fn(grid, move |x| {
        let s2 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (r * r);
        if s2 < 1.0 {
            (1.0 - 1.0 / (1.0 - s2)).exp()
        } else {
            0.0
        }
    })
}

/// Pairings of the last member of `sequence` approach those of `limit`.
pub fn check_weak_convergence(
    sequence: &[GridFunction],
    limit: &GridFunction,
    omega: &HermitianField,
    m: usize,
    tests: &[GridFunction],
    cfg: &WeakConvergenceConfig,
) -> Result<PropertyReport> {
    let mut rep = PropertyReport::new("weak_convergence", cfg.rel_tol, None);
    if sequence.is_empty() || tests.is_empty() {
        return Err(argument("weak convergence check needs a sequence and test functions"));
    }
    let grid = limit.grid().clone();
    let k = GridSet::ball(&grid, &[], cfg.k_radius);
    let metrics: Vec<f64> = sequence
        .iter()
        .map(|u| cap_metric(u, limit, cfg.delta, &k, omega, m))
        .collect::<Result<_>>()?;
    let last_metric = *metrics.last().unwrap();
    rep.notes.push(format!("capacity metric at δ = {}: {:?}", cfg.delta, metrics));
    if last_metric > cfg.cap_threshold {
        return Ok(rep.inapplicable(format!("capacity metric {last_metric:.3e} above {}", cfg.cap_threshold)));
    }
    let last = sequence.last().unwrap();
    for (t, chi) in tests.iter().enumerate() {
        let target = pairing(chi, limit, omega, m)?;
        let got = pairing(chi, last, omega, m)?;
        let rel = if target.abs() > 0.0 { (got - target).abs() / target.abs() } else { (got - target).abs() };
        rep.notes.push(format!("test function {t}: pairing {got:.6e} vs limit {target:.6e}"));
        // Locate the failure at the test function's peak.
        let peak = chi.values().iter().enumerate().fold(0, |b, (i, &x)| if x > chi.values()[b] { i } else { b });
        rep.trial(&grid, peak, cfg.rel_tol - rel);
    }
    Ok(rep.finish())
}

/// Settings of the random admissible generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub bumps: usize,
    pub max_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { bumps: 3, max_attempts: 1000 }
    }
}

/// `a(‖z‖² − 1) + Σ b_i ψ_i` with Gaussian bumps `ψ_i`, `a ∈ [1, 2]`,
/// `|b_i| ≤ a/10`, rejection-sampled until the closed-cone mask is all true.
pub fn random_admissible(
    grid: &Arc<BallGrid>,
    omega: &HermitianField,
    m: usize,
    rng: &mut impl Rng,
    cfg: &GeneratorConfig,
) -> Result<GridFunction> {
    let dim = grid.real_dim();
    for _ in 0..cfg.max_attempts {
        let a: f64 = rng.gen_range(1.0..=2.0);
        let mut bumps = Vec::with_capacity(cfg.bumps);
        for _ in 0..cfg.bumps {
            let b: f64 = rng.gen_range(-a / 10.0..=a / 10.0);
            let s: f64 = rng.gen_range(0.3..0.6);
            let c: Vec<f64> = loop {
                let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.7..0.7)).collect();
                if norm_sq(&c) < 0.49 {
                    break c;
                }
            };
            bumps.push((b, s, c));
        }
        let u = GridFunction::from_fn(grid, move |x| {
            let mut v = a * (norm_sq(x) - 1.0);
            for (b, s, c) in &bumps {
                let d2: f64 = x.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum();
                v += b * (-d2 / (2.0 * s * s)).exp();
            }
            v
        });
        if hessian_measure(&u, omega, m)?.is_admissible() {
            return Ok(u);
        }
    }
    Err(Error::Validation(format!("no admissible sample in {} attempts", cfg.max_attempts)))
}

/// A solved pair with `H(u) = f ≤ g = H(v)` and `φ_u ≥ φ_v`, so `u ≥ v` is expected.
pub fn random_measure_ordered_pair(
    grid: &Arc<BallGrid>,
    omega: &HermitianField,
    m: usize,
    rng: &mut impl Rng,
    solver: &SolverConfig,
) -> Result<(GridFunction, GridFunction)> {
    let dim = grid.real_dim();
    let wave = |rng: &mut dyn rand::RngCore| -> (Vec<f64>, f64) {
        let k: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        (k, rng.gen_range(0.0..std::f64::consts::TAU))
    };
    let (ku, pu) = wave(rng);
    let (kv, pv) = wave(rng);
    let amp_u: f64 = rng.gen_range(0.0..0.5);
    let extra: f64 = rng.gen_range(0.0..0.5);
    let lift: f64 = rng.gen_range(0.0..0.2);
    let (bk, bp) = wave(rng);
    let f_u = MeasureDensity::from_fn(grid, |x| {
        1.0 + amp_u * (x.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>() + pu).sin()
    })?;
    let f_v = MeasureDensity::from_fn(grid, |x| {
        let base = 1.0 + amp_u * (x.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>() + pu).sin();
        base + extra * (1.0 + (x.iter().zip(&kv).map(|(a, b)| a * b).sum::<f64>() + pv).sin()) / 2.0
    })?;
    let phi_v = BoundaryFn::new(move |x| 0.3 * (x.iter().zip(&bk).map(|(a, b)| a * b).sum::<f64>() + bp).cos());
    let pv2 = phi_v.clone();
    let phi_u = BoundaryFn::new(move |x| pv2.eval(x) + lift);
    let u = solve_dirichlet(&f_u, &phi_u, omega, m, solver)?;
    let v = solve_dirichlet(&f_v, &phi_v, omega, m, solver)?;
    if !u.converged || !v.converged {
        return Err(Error::Solver("random comparison pair did not solve".into()));
    }
    Ok((u.solution, v.solution))
}
