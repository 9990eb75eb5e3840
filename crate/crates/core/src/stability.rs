//! Solves a family of problems with sources `F_j → F` and tracks how far the
//! solutions stay from the limit solution in the capacity metric.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::capacity::{cap_metric, GridSet};
use crate::error::{argument, Result};
use crate::grid::sup_norm_diff;
use crate::picard::{build_subsolution, picard_run, PicardStatus, ProblemSpec, SourceFunction, BOUND_SAMPLES};

type Family = dyn Fn(usize) -> SourceFunction + Send + Sync;

#[derive(Clone)]
pub struct StabilityExperiment {
    pub base: ProblemSpec,
    family: Arc<Family>,
    pub indices: Vec<usize>,
    pub deltas: Vec<f64>,
    /// Capacity metric allowed at the last index.
    pub threshold: f64,
    /// Radius of `K = {‖z‖ ≤ r}`.
    pub k_radius: f64,
}

impl fmt::Debug for StabilityExperiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StabilityExperiment")
            .field("indices", &self.indices)
            .field("deltas", &self.deltas)
            .field("threshold", &self.threshold)
            .finish_non_exhaustive()
    }
}

impl StabilityExperiment {
    pub fn new(base: ProblemSpec, family: impl Fn(usize) -> SourceFunction + Send + Sync + 'static) -> Self {
        Self {
            base,
            family: Arc::new(family),
            indices: vec![1, 2, 4, 8, 16, 32],
            deltas: vec![0.05],
            threshold: 1e-3,
            k_radius: 0.9,
        }
    }

    pub fn source(&self, j: usize) -> SourceFunction {
        (self.family)(j)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub j: usize,
    pub delta: f64,
    pub cap_metric: f64,
    pub sup_diff: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// `max |F_j − F|` over the sandwich band and the grid, per index.
    pub perturbation: Vec<(usize, f64)>,
    pub perturbation_decreasing: bool,
    /// `v + h − ε ≤ u_j ≤ h + ε` per index.
    pub sandwich: Vec<(usize, bool)>,
    pub terminal_metric_ok: bool,
    pub complete: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

pub fn run_stability(exp: &StabilityExperiment) -> Result<StabilityReport> {
    if exp.indices.is_empty() || exp.deltas.is_empty() {
        return Err(argument("stability experiment needs indices and δ values"));
    }
    if exp.deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(argument("capacity metric thresholds δ must be positive"));
    }
    let base = &exp.base;
    let grid = base.grid().clone();
    let (reference, _) = picard_run(base)?;
    let mut notes = Vec::new();
    if !reference.converged() {
        return Ok(StabilityReport {
            rows: Vec::new(),
            perturbation: Vec::new(),
            perturbation_decreasing: false,
            sandwich: Vec::new(),
            terminal_metric_ok: false,
            complete: false,
            pass: false,
            notes: vec![format!("limit problem did not converge: {:?}", reference.status)],
        });
    }
    let u = reference.current().clone();
    let h = reference.u0().clone();
    let v = match &base.subsolution {
        Some(v) => v.clone(),
        None => build_subsolution(base)?,
    };
    let eps = reference.eps_grid;
    let k = GridSet::ball(&grid, &[], exp.k_radius);

    let t_lo = h.values().iter().zip(v.values()).map(|(a, b)| a + b).fold(f64::INFINITY, f64::min) - base.config.t_margin;
    let t_hi = h.max() + base.config.t_margin;
    let dim = grid.real_dim();

    let mut rows = Vec::new();
    let mut perturbation = Vec::new();
    let mut sandwich = Vec::new();
    let mut complete = true;
    for &j in &exp.indices {
        let fj = exp.source(j);
        let mut worst: f64 = 0.0;
        for s in 0..BOUND_SAMPLES {
            let t = t_lo + (t_hi - t_lo) * s as f64 / (BOUND_SAMPLES - 1) as f64;
            for i in 0..grid.len() {
                let x = &grid.point(i)[..dim];
                worst = worst.max((fj.eval(t, x) - base.source.eval(t, x)).abs());
            }
        }
        perturbation.push((j, worst));

        let spec = ProblemSpec { source: fj, ..base.clone() };
        let (state, _) = match picard_run(&spec) {
            Ok(r) => r,
            Err(e) => {
                notes.push(format!("j = {j}: {e}"));
                complete = false;
                break;
            }
        };
        if state.status != PicardStatus::Converged {
            notes.push(format!("j = {j}: Picard run ended with {:?}", state.status));
            complete = false;
        }
        let uj = state.current();
        let ok = uj
            .values()
            .iter()
            .zip(h.values())
            .zip(v.values())
            .all(|((&x, &top), &sub)| x >= sub + top - eps && x <= top + eps);
        sandwich.push((j, ok));
        let sup = sup_norm_diff(uj, &u)?;
        for &delta in &exp.deltas {
            rows.push(StabilityRow {
                j,
                delta,
                cap_metric: cap_metric(uj, &u, delta, &k, &base.omega, base.m)?,
                sup_diff: sup,
                iterations: state.steps.len(),
            });
        }
    }
    let perturbation_decreasing = perturbation.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-15);
    let last = *exp.indices.last().unwrap();
    let terminal_metric_ok = complete
        && rows.iter().filter(|r| r.j == last).all(|r| r.cap_metric <= exp.threshold)
        && rows.iter().any(|r| r.j == last);
    let sandwich_ok = sandwich.iter().all(|(_, ok)| *ok);
    if !perturbation_decreasing {
        notes.push("max |F_j − F| is not decreasing along the index list".into());
    }
    Ok(StabilityReport {
        pass: complete && terminal_metric_ok && sandwich_ok && perturbation_decreasing,
        rows,
        perturbation,
        perturbation_decreasing,
        sandwich,
        terminal_metric_ok,
        complete,
        notes,
    })
}
