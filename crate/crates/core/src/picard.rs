//! Picard iteration for `H_{m,ω}(u) = F(u, z) μ`, `u = φ` on the sphere.
//!
//! `u₀` solves the homogeneous problem, and each step solves the Dirichlet
//! problem with the right-hand side frozen at the previous iterate. The state
//! keeps every iterate so the sandwich and envelope diagnostics can be
//! evaluated afterwards.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::{cap_metric, GridSet};
use crate::error::{argument, configuration, validation, Error, Result};
use crate::forms::{hessian_measure, MeasureDensity};
use crate::grid::{norm_sq, sup_norm_diff, BallGrid, BoundaryFn, GridFunction, HermitianField};
use crate::hermitian::check_order;
use crate::solver::{max_principle_solve, solve_dirichlet_from, SolveReport, SolverConfig};

/// Number of `t` samples used when validating `F ≤ G`.
pub const BOUND_SAMPLES: usize = 100;
/// Slack allowed in `F ≤ G`.
pub const BOUND_SLACK: f64 = 1e-12;

type SourceFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// A right-hand side `F(t, z) ≥ 0` together with its bound `G(z)`.
#[derive(Clone)]
pub struct SourceFunction {
    eval: Arc<SourceFn>,
    bound: MeasureDensity,
    monotone: bool,
}

impl fmt::Debug for SourceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceFunction").field("monotone", &self.monotone).finish_non_exhaustive()
    }
}

impl SourceFunction {
    pub fn new(f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static, bound: MeasureDensity, monotone: bool) -> Self {
        Self { eval: Arc::new(f), bound, monotone }
    }

    /// `F` independent of `t`, bounded by itself.
    pub fn constant_in_t(grid: &Arc<BallGrid>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let f = Arc::new(f);
        let g = f.clone();
        let bound = MeasureDensity::from_fn(grid, move |x| g(x))?;
        Ok(Self::new(move |_, x| f(x), bound, true))
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (self.eval)(t, x)
    }

    pub fn bound(&self) -> &MeasureDensity {
        &self.bound
    }

    pub fn monotone(&self) -> bool {
        self.monotone
    }

    /// `F(u(z), z)` at every interior point.
    pub fn sample(&self, u: &GridFunction) -> Vec<f64> {
        let grid = u.grid();
        let dim = grid.real_dim();
        u.values().iter().enumerate().map(|(i, &t)| self.eval(t, &grid.point(i)[..dim])).collect()
    }

    /// Checks `0 ≤ F(t, z) ≤ G(z)` on an even sample of `[t_lo, t_hi]`.
    pub fn validate(&self, t_lo: f64, t_hi: f64) -> Result<()> {
        let grid = self.bound.grid();
        let dim = grid.real_dim();
        for s in 0..BOUND_SAMPLES {
            let t = t_lo + (t_hi - t_lo) * s as f64 / (BOUND_SAMPLES - 1) as f64;
            for i in 0..grid.len() {
                let x = &grid.point(i)[..dim];
                let v = self.eval(t, x);
                let g = self.bound.values()[i];
                if !v.is_finite() || v < 0.0 {
                    return Err(validation(format!("F({t}, {x:?}) = {v} is not a finite nonnegative number")));
                }
                if v > g + BOUND_SLACK {
                    return Err(validation(format!("F({t}, {x:?}) = {v} exceeds G = {g}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PicardConfig {
    /// Stop when the sup-norm step falls to this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Threshold and radius of the capacity metric recorded per step.
    pub cap_delta: f64,
    pub cap_radius: f64,
    pub cap_tolerance: f64,
    /// Also stop once the capacity metric is below `cap_tolerance`.
    pub stop_on_capacity: bool,
    pub record_cap_metric: bool,
    /// Window for the per-step bracket gap; `None` skips the two extra solves.
    pub bracket_window: Option<usize>,
    /// Disables the relaxed update on oscillation.
    pub pure_scheme: bool,
    pub relaxation: f64,
    pub oscillation_window: usize,
    /// Margin added around the sandwich band when validating `F ≤ G`.
    pub t_margin: f64,
    /// Perturbs every inner starting guess with a random psh term.
    pub inner_seed: Option<u64>,
    pub solver: SolverConfig,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 100,
            cap_delta: 0.05,
            cap_radius: 0.9,
            cap_tolerance: 1e-3,
            stop_on_capacity: false,
            record_cap_metric: true,
            bracket_window: None,
            pure_scheme: false,
            relaxation: 0.5,
            oscillation_window: 10,
            t_margin: 1.0,
            inner_seed: None,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub m: usize,
    pub omega: HermitianField,
    pub mu: MeasureDensity,
    pub source: SourceFunction,
    pub phi: BoundaryFn,
    pub subsolution: Option<GridFunction>,
    pub config: PicardConfig,
}

impl ProblemSpec {
    pub fn new(
        m: usize,
        omega: HermitianField,
        mu: MeasureDensity,
        source: SourceFunction,
        phi: BoundaryFn,
        subsolution: Option<GridFunction>,
        config: PicardConfig,
    ) -> Result<Self> {
        let grid = mu.grid().clone();
        omega.check_grid(&grid)?;
        check_order(m, grid.n())?;
        if !source.bound().grid().same_as(&grid) {
            return Err(Error::GridMismatch("G lives on a different grid than μ".into()));
        }
        if !(config.tolerance > 0.0) || config.max_iterations == 0 {
            return Err(argument("Picard tolerance must be positive and the budget nonzero"));
        }
        if !(config.relaxation > 0.0 && config.relaxation <= 1.0) {
            return Err(argument("relaxation factor must lie in (0, 1]"));
        }
        config.solver.validate()?;
        let spec = Self { m, omega, mu, source, phi, subsolution, config };
        if let Some(v) = &spec.subsolution {
            spec.check_subsolution(v)?;
        }
        Ok(spec)
    }

    pub fn grid(&self) -> &Arc<BallGrid> {
        self.mu.grid()
    }

    /// `G·μ` pointwise.
    pub fn g_mu(&self) -> Result<MeasureDensity> {
        self.source.bound().product(&self.mu)
    }

    /// Condition (a): `H_m(v) ≥ G·μ` with `ω = 0`, and `v` admissible.
    pub fn check_subsolution(&self, v: &GridFunction) -> Result<()> {
        let hm = hessian_measure(v, &HermitianField::zeros(self.grid()), self.m)?;
        if !hm.is_admissible() {
            return Err(validation(format!("subsolution is not admissible at {} points", hm.violations())));
        }
        let gmu = self.g_mu()?;
        if let Some(i) = (0..hm.values().len()).find(|&i| hm.values()[i] < gmu.values()[i] - 1e-9) {
            return Err(validation(format!(
                "subsolution density {} is below G·μ = {} at point {i}",
                hm.values()[i],
                gmu.values()[i]
            )));
        }
        Ok(())
    }

    /// The measure set `K = {‖z‖ ≤ cap_radius}` used by the capacity metric.
    pub fn metric_set(&self) -> GridSet {
        GridSet::ball(self.grid(), &[], self.config.cap_radius)
    }

    /// `ε_grid = 10·(solver tolerance + h²)`.
    pub fn eps_grid(&self) -> f64 {
        let h = self.grid().h();
        10.0 * (self.config.solver.tolerance + h * h)
    }
}

/// `v = c(‖z‖² − 1)` with `c = (max G·μ)^{1/m}`.
pub fn build_subsolution(spec: &ProblemSpec) -> Result<GridFunction> {
    let gmu = spec.g_mu()?;
    let top = gmu.max();
    if !top.is_finite() {
        return Err(configuration("G·μ is unbounded on the grid"));
    }
    let c = top.max(0.0).powf(1.0 / spec.m as f64);
    Ok(GridFunction::from_fn(spec.grid(), move |x| c * (norm_sq(x) - 1.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub j: usize,
    pub sup_step: f64,
    pub residual: f64,
    pub cap_metric: f64,
    pub bracket_gap: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardStatus {
    Converged,
    BudgetExhausted,
    InnerFailure(String),
}

/// Snapshot of a Picard run.
#[derive(Clone, Debug)]
pub struct PicardState {
    /// `u₀, u₁, …, u_j`.
    pub iterates: Vec<GridFunction>,
    /// Sup-norm steps `‖u_{k+1} − u_k‖`.
    pub steps: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub subsolution: GridFunction,
    pub status: PicardStatus,
    /// Iteration at which the relaxed update was switched on.
    pub relaxed_from: Option<usize>,
    /// Departures from the plain scheme, in order.
    pub log: Vec<String>,
    /// `max |H(u) − F(u)μ|` at the last iterate.
    pub terminal_residual: f64,
    pub eps_grid: f64,
}

impl PicardState {
    pub fn j(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn u0(&self) -> &GridFunction {
        &self.iterates[0]
    }

    pub fn current(&self) -> &GridFunction {
        self.iterates.last().unwrap()
    }

    pub fn converged(&self) -> bool {
        self.status == PicardStatus::Converged
    }
}

/// `max |H_{m,ω}(u) − F(u)·μ|`.
pub fn residual(spec: &ProblemSpec, u: &GridFunction) -> Result<f64> {
    let h = hessian_measure(u, &spec.omega, spec.m)?;
    let f = spec.source.sample(u);
    Ok(h.values()
        .iter()
        .zip(&f)
        .zip(spec.mu.values())
        .map(|((a, b), w)| (a - b * w).abs())
        .fold(0.0, f64::max))
}

fn frozen_density(spec: &ProblemSpec, u: &GridFunction) -> Result<MeasureDensity> {
    let f = spec.source.sample(u);
    MeasureDensity::new(spec.grid().clone(), f.iter().zip(spec.mu.values()).map(|(a, b)| a * b).collect())
}

pub fn picard_run(spec: &ProblemSpec) -> Result<(PicardState, Vec<SolveReport>)> {
    let start = Instant::now();
    let cfg = &spec.config;
    let grid = spec.grid().clone();
    let v = match &spec.subsolution {
        Some(v) => v.clone(),
        None => build_subsolution(spec)?,
    };
    let seed = max_principle_solve(&spec.phi, &spec.omega, spec.m, &cfg.solver)?;
    let mut state = PicardState {
        iterates: vec![seed.solution.clone()],
        steps: Vec::new(),
        trace: Vec::new(),
        subsolution: v.clone(),
        status: PicardStatus::BudgetExhausted,
        relaxed_from: None,
        log: Vec::new(),
        terminal_residual: f64::NAN,
        eps_grid: spec.eps_grid(),
    };
    let mut reports = vec![seed.clone()];
    if !seed.converged {
        state.status = PicardStatus::InnerFailure(format!("seed solve stopped at residual {:.3e}", seed.residual));
        return Ok((state, reports));
    }

    let u0 = &state.iterates[0];
    let lower = u0.values().iter().zip(v.values()).map(|(a, b)| a + b).fold(f64::INFINITY, f64::min);
    spec.source.validate(lower - cfg.t_margin, u0.max() + cfg.t_margin)?;

    let k = spec.metric_set();
    let mut rng = cfg.inner_seed.map(ChaCha8Rng::seed_from_u64);
    let mut relaxed = false;
    for j in 0..cfg.max_iterations {
        let prev = state.iterates[j].clone();
        let f = frozen_density(spec, &prev)?;
        let mut guess = prev.values().to_vec();
        if let Some(rng) = rng.as_mut() {
            let s: f64 = rng.gen_range(0.05..0.5);
            for (i, g) in guess.iter_mut().enumerate() {
                *g += s * (grid.norm_sq(i) - 1.0);
            }
        }
        let rep = solve_dirichlet_from(&f, &spec.phi, &spec.omega, spec.m, &cfg.solver, Some(&guess))?;
        reports.push(rep.clone());
        if !rep.converged {
            state.status = PicardStatus::InnerFailure(format!(
                "inner solve {} stopped at residual {:.3e} with {} violations",
                j + 1,
                rep.residual,
                rep.violations
            ));
            break;
        }
        let next = if relaxed {
            rep.solution.linear_combination(cfg.relaxation, &prev, 1.0 - cfg.relaxation)?
        } else {
            rep.solution
        };
        let step = sup_norm_diff(&next, &prev)?;
        let res = residual(spec, &next)?;
        let cap = if cfg.record_cap_metric {
            cap_metric(&next, &prev, cfg.cap_delta, &k, &spec.omega, spec.m)?
        } else {
            f64::NAN
        };
        state.iterates.push(next);
        state.steps.push(step);

        let gap = match cfg.bracket_window {
            Some(w) if state.iterates.len() > w => {
                let b = envelope_brackets(&state, spec, w)?;
                sup_norm_diff(&b.v1, &b.v2)?
            }
            _ => f64::NAN,
        };
        state.trace.push(TraceRow {
            j: j + 1,
            sup_step: step,
            residual: res,
            cap_metric: cap,
            bracket_gap: gap,
            wall_time_s: start.elapsed().as_secs_f64(),
        });

        if step <= cfg.tolerance || (cfg.stop_on_capacity && cap <= cfg.cap_tolerance) {
            state.status = PicardStatus::Converged;
            break;
        }
        let w = cfg.oscillation_window;
        let n = state.steps.len();
        if !cfg.pure_scheme && !relaxed && n > w && state.steps[n - 1] >= state.steps[n - 1 - w] {
            relaxed = true;
            state.relaxed_from = Some(j + 1);
            state.log.push(format!(
                "steps did not decrease over {w} iterations; relaxed update θ = {} from iteration {}",
                cfg.relaxation,
                j + 2
            ));
        }
    }
    state.terminal_residual = residual(spec, state.current())?;
    Ok((state, reports))
}

/// `v + u₀ − ε ≤ u_j ≤ u₀ + ε` for every recorded iterate.
pub fn sandwich_check(state: &PicardState, v: &GridFunction) -> bool {
    let u0 = state.u0();
    let eps = state.eps_grid;
    state.iterates.iter().all(|u| {
        u.values()
            .iter()
            .zip(u0.values())
            .zip(v.values())
            .all(|((&x, &top), &sub)| x >= sub + top - eps && x <= top + eps)
    })
}

/// Running envelopes of `F(u_k)·μ` over a window and the Dirichlet solutions they drive.
#[derive(Clone, Debug)]
pub struct Brackets {
    pub j: usize,
    pub window: usize,
    pub phi1: MeasureDensity,
    pub phi2: MeasureDensity,
    pub v1: GridFunction,
    pub v2: GridFunction,
}

impl Brackets {
    /// `v² − ε ≤ u_{j+1} ≤ v¹ + ε`.
    pub fn contains(&self, state: &PicardState) -> bool {
        let Some(u) = state.iterates.get(self.j + 1) else { return false };
        let eps = state.eps_grid;
        u.values()
            .iter()
            .zip(self.v1.values())
            .zip(self.v2.values())
            .all(|((&x, &hi), &lo)| x >= lo - eps && x <= hi + eps)
    }
}

/// Envelopes over `k ∈ [j, j + window − 1]`.
pub fn envelope_fields(state: &PicardState, spec: &ProblemSpec, j: usize, window: usize) -> Result<(MeasureDensity, MeasureDensity)> {
    if window == 0 || j + window > state.iterates.len() {
        return Err(argument(format!(
            "envelope window [{j}, {}] exceeds the {} recorded iterates",
            j + window,
            state.iterates.len()
        )));
    }
    let len = spec.grid().len();
    let mut lo = vec![f64::INFINITY; len];
    let mut hi = vec![f64::NEG_INFINITY; len];
    for u in &state.iterates[j..j + window] {
        for (i, f) in spec.source.sample(u).into_iter().enumerate() {
            let v = f * spec.mu.values()[i];
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    let g = spec.grid().clone();
    Ok((MeasureDensity::new(g.clone(), lo)?, MeasureDensity::new(g, hi)?))
}

/// Brackets at an explicit index.
pub fn envelope_brackets_at(state: &PicardState, spec: &ProblemSpec, j: usize, window: usize) -> Result<Brackets> {
    let (phi1, phi2) = envelope_fields(state, spec, j, window)?;
    let cfg = &spec.config.solver;
    let guess = state.iterates.get(j + 1).unwrap_or(&state.iterates[j]).values().to_vec();
    let solve = |f: &MeasureDensity| -> Result<GridFunction> {
        let rep = solve_dirichlet_from(f, &spec.phi, &spec.omega, spec.m, cfg, Some(&guess))?;
        if !rep.converged {
            return Err(Error::Solver(format!("bracket solve stopped at residual {:.3e}", rep.residual)));
        }
        Ok(rep.solution)
    };
    let v1 = solve(&phi1)?;
    let v2 = solve(&phi2)?;
    Ok(Brackets { j, window, phi1, phi2, v1, v2 })
}

/// Brackets for the latest index whose successor is recorded.
pub fn envelope_brackets(state: &PicardState, spec: &ProblemSpec, window: usize) -> Result<Brackets> {
    let last = state.iterates.len() - 1;
    if window == 0 || window > last {
        return Err(argument(format!("window {window} needs at least {window} iterates after the seed")));
    }
    envelope_brackets_at(state, spec, last - window, window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exponential_spec(div: usize, tol: f64) -> ProblemSpec {
        let g = BallGrid::new(1, div).unwrap();
        let e2 = std::f64::consts::E.powi(2);
        let bound = MeasureDensity::constant(&g, e2 + 1.0).unwrap();
        let f = SourceFunction::new(|t, x| (t - (norm_sq(x) - 1.0)).exp(), bound, true);
        let cfg = PicardConfig { tolerance: tol, ..PicardConfig::default() };
        ProblemSpec::new(
            1,
            HermitianField::zeros(&g),
            MeasureDensity::constant(&g, 1.0).unwrap(),
            f,
            BoundaryFn::constant(0.0),
            None,
            cfg,
        )
        .unwrap()
    }

    #[test]
    fn subsolution_examples() {
        let g = BallGrid::new(2, 4).unwrap();
        for (gmu, m, c) in [(1.0, 1, 1.0), (1.5, 2, 1.5f64.sqrt()), (0.0, 2, 0.0)] {
            let src = SourceFunction::constant_in_t(&g, move |_| gmu).unwrap();
            let spec = ProblemSpec::new(
                m,
                HermitianField::zeros(&g),
                MeasureDensity::constant(&g, 1.0).unwrap(),
                src,
                BoundaryFn::constant(0.0),
                None,
                PicardConfig::default(),
            )
            .unwrap();
            let v = build_subsolution(&spec).unwrap();
            let exact = GridFunction::from_fn(&g, move |x| c * (norm_sq(x) - 1.0));
            assert!(sup_norm_diff(&v, &exact).unwrap() < 1e-14);
            spec.check_subsolution(&v).unwrap();
        }
    }

    #[test]
    fn bad_subsolution_rejected() {
        let g = BallGrid::new(1, 8).unwrap();
        let src = SourceFunction::constant_in_t(&g, |_| 2.0).unwrap();
        let v = GridFunction::from_fn(&g, |x| norm_sq(x) - 1.0);
        let r = ProblemSpec::new(
            1,
            HermitianField::zeros(&g),
            MeasureDensity::constant(&g, 1.0).unwrap(),
            src,
            BoundaryFn::constant(0.0),
            Some(v),
            PicardConfig::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn constant_source_takes_one_step() {
        let g = BallGrid::new(1, 16).unwrap();
        let src = SourceFunction::constant_in_t(&g, |_| 1.0).unwrap();
        let spec = ProblemSpec::new(
            1,
            HermitianField::zeros(&g),
            MeasureDensity::constant(&g, 1.0).unwrap(),
            src,
            BoundaryFn::constant(0.0),
            None,
            PicardConfig::default(),
        )
        .unwrap();
        let (state, _) = picard_run(&spec).unwrap();
        assert!(state.converged());
        // u₁ is the solution; u₂ repeats it and triggers the stop.
        assert_eq!(state.iterates.len(), 3);
        assert!(state.steps[1] <= spec.config.tolerance);
        let exact = GridFunction::from_fn(&g, |x| norm_sq(x) - 1.0);
        assert!(sup_norm_diff(&state.iterates[1], &exact).unwrap() < 1e-6);

        let b = envelope_brackets(&state, &spec, 1).unwrap();
        assert_eq!(b.phi1.values(), b.phi2.values());
        assert!(sup_norm_diff(&b.v1, &b.v2).unwrap() < 1e-12);
        assert!(b.contains(&state));
    }

    #[test]
    fn zero_source_stays_at_seed() {
        let g = BallGrid::new(1, 8).unwrap();
        let src = SourceFunction::constant_in_t(&g, |_| 0.0).unwrap();
        let spec = ProblemSpec::new(
            1,
            HermitianField::zeros(&g),
            MeasureDensity::constant(&g, 1.0).unwrap(),
            src,
            BoundaryFn::constant(0.0),
            None,
            PicardConfig::default(),
        )
        .unwrap();
        let (state, _) = picard_run(&spec).unwrap();
        let v = build_subsolution(&spec).unwrap();
        assert!(sandwich_check(&state, &v));
        assert!(state.iterates.iter().all(|u| sup_norm_diff(u, state.u0()).unwrap() < 1e-9));
    }

    #[test]
    fn exponential_source_converges_with_sandwich_and_brackets() {
        let spec = exponential_spec(16, 1e-7);
        let (mut state, _) = picard_run(&spec).unwrap();
        assert!(state.converged(), "{:?}", state.status);
        let exact = GridFunction::from_fn(spec.grid(), |x| norm_sq(x) - 1.0);
        let h = spec.grid().h();
        assert!(sup_norm_diff(state.current(), &exact).unwrap() <= 5.0 * h * h + 1e-7);
        assert!(state.terminal_residual <= 1e-6);
        assert!(sandwich_check(&state, &state.subsolution.clone()));

        // Direct recomputation of the envelopes over a window.
        let (lo, hi) = envelope_fields(&state, &spec, 2, 3).unwrap();
        for i in 0..spec.grid().len() {
            let vals: Vec<f64> = (2..5).map(|k| spec.source.sample(&state.iterates[k])[i]).collect();
            assert_eq!(lo.values()[i], vals.iter().copied().fold(f64::INFINITY, f64::min));
            assert_eq!(hi.values()[i], vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        let narrow = envelope_fields(&state, &spec, 2, 2).unwrap();
        assert!(lo.values().iter().zip(narrow.0.values()).all(|(a, b)| a <= b));
        assert!(hi.values().iter().zip(narrow.1.values()).all(|(a, b)| a >= b));
        assert!(envelope_brackets_at(&state, &spec, 2, 3).unwrap().contains(&state));

        let v = state.subsolution.clone();
        let bumped = state.iterates[1].with_values(state.u0().values().iter().map(|x| x + 1.0).collect()).unwrap();
        state.iterates[1] = bumped;
        assert!(!sandwich_check(&state, &v));
    }

    #[test]
    fn bound_violation_is_reported() {
        let g = BallGrid::new(1, 8).unwrap();
        let bound = MeasureDensity::constant(&g, std::f64::consts::E + 1.0).unwrap();
        let f = SourceFunction::new(|t, x| (t - (norm_sq(x) - 1.0)).exp(), bound, true);
        assert!(f.validate(-3.0, 1.0).is_err());
        assert!(f.validate(-3.0, -0.5).is_ok());
    }
}
