//! Dirichlet solver for `σ_m(λ(ω + Hess u)) / C(n,m) = f` with `u = φ` on the sphere.
//!
//! Damped Newton on the grid residual, linearized through the σ_m gradient.
//! Every accepted step keeps the iterate in the closed Γ_m cone; when halving
//! the step does not help, a block of pointwise nonlinear Gauss–Seidel sweeps
//! (admissible root of the scalar equation, neighbours frozen) moves the
//! iterate before Newton resumes.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::forms::MeasureDensity;
use crate::grid::{BallGrid, BoundaryFn, GridFunction, HermitianField, Slot};
use crate::hermitian::{binomial, check_order, closed_cone_test, elementary_symmetric, gradient_from_eigen, HermitianMatrix};
use crate::linalg::{self, Csr};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Max-norm tolerance on the density residual.
    pub tolerance: f64,
    pub max_newton: usize,
    /// Smallest step fraction tried before falling back to pointwise sweeps.
    pub damping_min: f64,
    pub damping_max: f64,
    /// Relative slack of the closed-cone test.
    pub cone_slack: f64,
    /// Solve `m = 1` through the trace directly, without eigendecompositions.
    pub linear_shortcut: bool,
    pub linear_tolerance: f64,
    pub fallback_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_newton: 200,
            damping_min: 0.1,
            damping_max: 1.0,
            cone_slack: 1e-10,
            linear_shortcut: true,
            linear_tolerance: 1e-10,
            fallback_sweeps: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(argument("solver tolerance must be positive"));
        }
        if !(self.damping_min > 0.0 && self.damping_min <= self.damping_max && self.damping_max <= 1.0) {
            return Err(argument("damping range must satisfy 0 < min ≤ max ≤ 1"));
        }
        if !(self.cone_slack >= 0.0) {
            return Err(argument("cone slack must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: GridFunction,
    pub iterations: usize,
    /// Max-norm of the density mismatch at the returned solution.
    pub residual: f64,
    /// Points outside the closed Γ_m cone at the returned solution.
    pub violations: usize,
    pub wall_time_s: f64,
    pub converged: bool,
    /// Pointwise Gauss–Seidel sweeps spent in fallbacks.
    pub fallback_sweeps: usize,
    pub m: usize,
}

/// JSON form of a [`SolveReport`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolveReportJson {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub violations: usize,
    pub wall_time_s: f64,
    pub grid_h: f64,
    pub n: usize,
    pub m: usize,
}

impl SolveReport {
    pub fn to_json(&self) -> SolveReportJson {
        let grid = self.solution.grid();
        SolveReportJson {
            converged: self.converged,
            iterations: self.iterations,
            residual: self.residual,
            violations: self.violations,
            wall_time_s: self.wall_time_s,
            grid_h: grid.h(),
            n: grid.n(),
            m: self.m,
        }
    }
}

/// A frozen Dirichlet problem on a grid.
pub(crate) struct Discrete<'a> {
    pub grid: Arc<BallGrid>,
    pub omega: &'a HermitianField,
    pub f: Vec<f64>,
    pub boundary: Vec<f64>,
    pub m: usize,
    pub slack: f64,
    cnm: f64,
}

impl<'a> Discrete<'a> {
    pub fn new(grid: Arc<BallGrid>, omega: &'a HermitianField, f: Vec<f64>, boundary: Vec<f64>, m: usize, slack: f64) -> Self {
        let cnm = binomial(grid.n(), m);
        Self { grid, omega, f, boundary, m, slack, cnm }
    }

    fn matrix_at(&self, i: usize, u: &[f64]) -> HermitianMatrix {
        *self.omega.get(i) + self.grid.hessian_at(i, u, &self.boundary)
    }

    /// Residual and admissibility at every point.
    pub fn evaluate(&self, u: &[f64], trace_only: bool) -> (Vec<f64>, usize) {
        let n = self.grid.n() as f64;
        let out: Vec<(f64, bool)> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let a = self.matrix_at(i, u);
                if trace_only {
                    let d = a.trace() / n;
                    (d - self.f[i], d >= -self.slack * (1.0 + d.abs() * n))
                } else {
                    let e = elementary_symmetric(a.eigenvalues().as_slice());
                    (e[self.m] / self.cnm - self.f[i], closed_cone_test(&e, self.m, self.slack))
                }
            })
            .collect();
        let violations = out.iter().filter(|(_, ok)| !ok).count();
        (out.into_iter().map(|(r, _)| r).collect(), violations)
    }

    /// Newton matrix `∂R/∂u` at `u`.
    fn jacobian(&self, u: &[f64], trace_only: bool) -> Csr {
        let grid = &self.grid;
        let basis = grid.basis();
        let n = grid.n();
        let rows: Vec<Vec<(u32, f64)>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let g = if trace_only {
                    HermitianMatrix::scaled_identity(n, 1.0 / n as f64)
                } else {
                    gradient_from_eigen(&self.matrix_at(i, u).eigen(), self.m) * (1.0 / self.cnm)
                };
                let mut row = Vec::with_capacity(2 * basis.len() + 1);
                let mut diag = 0.0;
                for (line, e) in grid.lines(i).iter().zip(basis) {
                    let w = g.frobenius_dot(e);
                    if w == 0.0 {
                        continue;
                    }
                    let (am, ap) = line.weights();
                    diag -= w * (am + ap);
                    if let Slot::Interior(j) = line.minus {
                        row.push((j, w * am));
                    }
                    if let Slot::Interior(j) = line.plus {
                        row.push((j, w * ap));
                    }
                }
                row.push((i as u32, diag));
                row
            })
            .collect();
        let mut a = Csr::with_capacity(grid.len(), rows.iter().map(Vec::len).sum());
        for mut row in rows {
            a.push_row(&mut row);
        }
        a
    }

    /// Largest `t` such that setting `u_i = t` keeps point `i` in the closed
    /// cone with density at least `f_i` (neighbours frozen).
    pub fn local_root(&self, i: usize, u: &[f64]) -> Option<f64> {
        let m0 = self.matrix_at(i, u);
        let w = self.grid.self_coefficient(i);
        let ui = u[i];
        let fi = self.f[i].max(0.0);
        if self.m == 1 {
            let n = self.grid.n() as f64;
            let slope = w.trace() / n;
            if slope >= 0.0 {
                return None;
            }
            return Some(ui + (fi - m0.trace() / n) / slope);
        }
        let ok = |t: f64| {
            let mut a = m0;
            a.add_scaled(t - ui, &w);
            let e = elementary_symmetric(a.eigenvalues().as_slice());
            closed_cone_test(&e, self.m, self.slack) && e[self.m] / self.cnm >= fi
        };
        let step = self.grid.h() * self.grid.h();
        let (mut lo, mut hi);
        if ok(ui) {
            lo = ui;
            hi = ui + step;
            let mut k = 0;
            while ok(hi) {
                lo = hi;
                k += 1;
                if k > 60 {
                    return None;
                }
                hi = ui + step * 2f64.powi(k);
            }
        } else {
            hi = ui;
            lo = ui - step;
            let mut k = 0;
            while !ok(lo) {
                hi = lo;
                k += 1;
                if k > 60 {
                    return None;
                }
                lo = ui - step * 2f64.powi(k);
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    /// Pointwise nonlinear Gauss–Seidel sweeps in index order.
    pub fn sweeps(&self, u: &mut [f64], count: usize) {
        for _ in 0..count {
            for i in 0..self.grid.len() {
                if let Some(t) = self.local_root(i, u) {
                    u[i] = t;
                }
            }
        }
    }
}

struct NewtonOutcome {
    iterations: usize,
    residual: f64,
    violations: usize,
    converged: bool,
    sweeps: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn newton(problem: &Discrete<'_>, u: &mut Vec<f64>, cfg: &SolverConfig) -> NewtonOutcome {
    let trace_only = problem.m == 1 && cfg.linear_shortcut;
    let mut sweeps = 0;
    let (mut res, mut viol) = problem.evaluate(u, trace_only);
    let mut iterations = 0;
    while iterations < cfg.max_newton {
        let r_max = max_abs(&res);
        if r_max <= cfg.tolerance && viol == 0 {
            return NewtonOutcome { iterations, residual: r_max, violations: viol, converged: true, sweeps };
        }
        iterations += 1;

        let jac = problem.jacobian(u, trace_only);
        let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        let mut delta = vec![0.0; u.len()];
        let lin = linalg::solve(&jac, &rhs, &mut delta, cfg.linear_tolerance);
        let usable = delta.iter().all(|d| d.is_finite()) && lin.relative_residual < 1e-2;

        let mut accepted = false;
        if usable {
            let mut alpha = cfg.damping_max;
            while alpha >= cfg.damping_min {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(x, d)| x + alpha * d).collect();
                let (r_new, v_new) = problem.evaluate(&trial, trace_only);
                if v_new <= viol && v_new == 0 || v_new < viol {
                    *u = trial;
                    res = r_new;
                    viol = v_new;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            problem.sweeps(u, cfg.fallback_sweeps);
            sweeps += cfg.fallback_sweeps;
            let (r_new, v_new) = problem.evaluate(u, trace_only);
            res = r_new;
            viol = v_new;
        }
    }
    let r_max = max_abs(&res);
    let converged = r_max <= cfg.tolerance && viol == 0;
    NewtonOutcome { iterations, residual: r_max, violations: viol, converged, sweeps }
}

fn check_density(f: &MeasureDensity) -> Result<()> {
    if let Some(i) = f.values().iter().position(|&v| v < 0.0 || !v.is_finite()) {
        return Err(argument(format!("right-hand side density is {} at point {i}; must be ≥ 0", f.values()[i])));
    }
    Ok(())
}

/// Solves the Dirichlet problem from the default start (the `m = 1` trace
/// solution with right-hand side `f^{1/m}`).
pub fn solve_dirichlet(
    f: &MeasureDensity,
    phi: &BoundaryFn,
    omega: &HermitianField,
    m: usize,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    solve_dirichlet_from(f, phi, omega, m, cfg, None)
}

/// Like [`solve_dirichlet`], starting Newton from `guess` when given.
pub fn solve_dirichlet_from(
    f: &MeasureDensity,
    phi: &BoundaryFn,
    omega: &HermitianField,
    m: usize,
    cfg: &SolverConfig,
    guess: Option<&[f64]>,
) -> Result<SolveReport> {
    let start = Instant::now();
    cfg.validate()?;
    let grid = f.grid().clone();
    omega.check_grid(&grid)?;
    check_order(m, grid.n())?;
    check_density(f)?;
    if let Some(g) = guess {
        if g.len() != grid.len() {
            return Err(argument("initial guess length does not match the grid"));
        }
    }
    let boundary = phi.sample(&grid);

    let mut u = match guess {
        Some(g) => g.to_vec(),
        None => vec![0.0; grid.len()],
    };
    let mut extra_iterations = 0;
    let mut extra_sweeps = 0;
    if guess.is_none() && m > 1 {
        let root: Vec<f64> = f.values().iter().map(|v| v.powf(1.0 / m as f64)).collect();
        let seed_problem = Discrete::new(grid.clone(), omega, root, boundary.clone(), 1, cfg.cone_slack);
        let out = newton(&seed_problem, &mut u, cfg);
        extra_iterations = out.iterations;
        extra_sweeps = out.sweeps;
    }

    let problem = Discrete::new(grid.clone(), omega, f.values().to_vec(), boundary, m, cfg.cone_slack);
    let out = newton(&problem, &mut u, cfg);
    let solution = GridFunction::new(grid, u, phi.clone())?;
    Ok(SolveReport {
        solution,
        iterations: out.iterations + extra_iterations,
        residual: out.residual,
        violations: out.violations,
        wall_time_s: start.elapsed().as_secs_f64(),
        converged: out.converged,
        fallback_sweeps: out.sweeps + extra_sweeps,
        m,
    })
}

/// The homogeneous problem `H_{m,ω}(h) = 0`, `h = φ` on the sphere.
pub fn max_principle_solve(
    phi: &BoundaryFn,
    omega: &HermitianField,
    m: usize,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let zero = MeasureDensity::constant(omega.grid(), 0.0)?;
    solve_dirichlet(&zero, phi, omega, m, cfg)
}
