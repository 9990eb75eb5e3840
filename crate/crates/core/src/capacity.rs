//! Relative extremal functions, capacity estimators and the capacity metric.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::forms::hessian_measure;
use crate::grid::{BallGrid, BoundaryFn, GridFunction, HermitianField};
use crate::hermitian::check_order;
use crate::solver::Discrete;

/// Membership flag per interior point.
#[derive(Clone, Debug)]
pub struct GridSet {
    grid: Arc<BallGrid>,
    members: Vec<bool>,
}

impl GridSet {
    pub fn new(grid: Arc<BallGrid>, members: Vec<bool>) -> Result<Self> {
        if members.len() != grid.len() {
            return Err(argument("set membership length does not match the grid"));
        }
        Ok(Self { grid, members })
    }

    pub fn from_predicate(grid: &Arc<BallGrid>, pred: impl Fn(&[f64]) -> bool) -> Self {
        let dim = grid.real_dim();
        let members = (0..grid.len()).map(|i| pred(&grid.point(i)[..dim])).collect();
        Self { grid: grid.clone(), members }
    }

    /// Closed ball `‖z − c‖ ≤ r` (the centre is zero-padded).
    pub fn ball(grid: &Arc<BallGrid>, center: &[f64], r: f64) -> Self {
        let c: Vec<f64> = (0..grid.real_dim()).map(|k| center.get(k).copied().unwrap_or(0.0)).collect();
        Self::from_predicate(grid, move |x| x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r * r)
    }

    pub fn all(grid: &Arc<BallGrid>) -> Self {
        Self { grid: grid.clone(), members: vec![true; grid.len()] }
    }

    pub fn grid(&self) -> &Arc<BallGrid> {
        &self.grid
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&b| b)
    }

    fn check(&self, other: &GridSet) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("sets live on different grids".into()));
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &GridSet) -> Result<bool> {
        self.check(other)?;
        Ok(self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b))
    }

    pub fn union(&self, other: &GridSet) -> Result<GridSet> {
        self.check(other)?;
        let members = self.members.iter().zip(&other.members).map(|(&a, &b)| a || b).collect();
        Ok(GridSet { grid: self.grid.clone(), members })
    }

    pub fn intersection(&self, other: &GridSet) -> Result<GridSet> {
        self.check(other)?;
        let members = self.members.iter().zip(&other.members).map(|(&a, &b)| a && b).collect();
        Ok(GridSet { grid: self.grid.clone(), members })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    RelativeExtremal,
    WitnessSample,
}

/// A lower-bound estimate of the capacity of a set.
#[derive(Clone, Debug)]
pub struct CapacityEstimate {
    pub value: f64,
    pub kind: EstimatorKind,
    pub extremal: Option<GridFunction>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstacleConfig {
    pub relaxation: f64,
    /// Stop when the largest update of a sweep is at most this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub cone_slack: f64,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        Self { relaxation: 1.5, tolerance: 1e-9, max_sweeps: 200_000, cone_slack: 1e-10 }
    }
}

/// Largest admissible `u ≤ 0` with `u ≤ −1` on `K` and zero Hessian measure off `K`.
pub fn relative_extremal(k: &GridSet, omega: &HermitianField, m: usize) -> Result<GridFunction> {
    relative_extremal_with(k, omega, m, &ObstacleConfig::default()).map(|(u, _)| u)
}

/// [`relative_extremal`] with explicit obstacle-solver settings; also returns the sweep count.
pub fn relative_extremal_with(
    k: &GridSet,
    omega: &HermitianField,
    m: usize,
    cfg: &ObstacleConfig,
) -> Result<(GridFunction, usize)> {
    if k.is_empty() {
        return Err(argument("relative extremal function of an empty set"));
    }
    let grid = k.grid.clone();
    omega.check_grid(&grid)?;
    check_order(m, grid.n())?;
    if !(cfg.relaxation > 0.0 && cfg.relaxation < 2.0) {
        return Err(argument("over-relaxation factor must lie in (0, 2)"));
    }
    let problem = Discrete::new(
        grid.clone(),
        omega,
        vec![0.0; grid.len()],
        vec![0.0; grid.boundary_node_count()],
        m,
        cfg.cone_slack,
    );
    let psi: Vec<f64> = k.members.iter().map(|&b| if b { -1.0 } else { 0.0 }).collect();
    let mut u = psi.clone();
    let mut sweeps = 0;
    loop {
        let mut worst: f64 = 0.0;
        for i in 0..grid.len() {
            let Some(t) = problem.local_root(i, &u) else { continue };
            let next = (u[i] + cfg.relaxation * (t - u[i])).min(psi[i]).max(-1.0);
            worst = worst.max((next - u[i]).abs());
            u[i] = next;
        }
        sweeps += 1;
        if worst <= cfg.tolerance {
            break;
        }
        if sweeps >= cfg.max_sweeps {
            return Err(Error::Solver(format!("obstacle sweeps did not settle (last update {worst:.3e})")));
        }
    }
    Ok((GridFunction::new(grid, u, BoundaryFn::constant(0.0))?, sweeps))
}

/// Hessian mass over `K` of the witness `1 + u_K`.
pub fn cap_estimate(k: &GridSet, omega: &HermitianField, m: usize) -> Result<CapacityEstimate> {
    let u = relative_extremal(k, omega, m)?;
    let witness = GridFunction::new(k.grid.clone(), u.values().iter().map(|x| x + 1.0).collect(), BoundaryFn::constant(1.0))?;
    let d = hessian_measure(&witness, omega, m)?;
    let clipped: Vec<f64> = d.values().iter().map(|v| v.max(0.0)).collect();
    let value = crate::forms::MeasureDensity::new(k.grid.clone(), clipped)?.mass_on(&k.members);
    Ok(CapacityEstimate { value, kind: EstimatorKind::RelativeExtremal, extremal: Some(u) })
}

/// Capacity estimate of `K ∩ {|u − v| ≥ δ}`; zero when that set is empty.
pub fn cap_metric(u: &GridFunction, v: &GridFunction, delta: f64, k: &GridSet, omega: &HermitianField, m: usize) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(argument("capacity metric threshold δ must be positive"));
    }
    if !u.grid().same_as(v.grid()) {
        return Err(Error::GridMismatch("cap_metric arguments live on different grids".into()));
    }
    let far: Vec<bool> = u.values().iter().zip(v.values()).map(|(a, b)| (a - b).abs() >= delta).collect();
    let far = GridSet::new(u.grid().clone(), far)?;
    let s = k.intersection(&far)?;
    if s.is_empty() {
        return Ok(0.0);
    }
    Ok(cap_estimate(&s, omega, m)?.value)
}

/// `(min, max)` of `C_m(E) / Cap_ω(E)` over the sets, `C_m` being the `ω = 0` estimator.
pub fn cap_equivalence_probe(sets: &[GridSet], omega: &HermitianField, m: usize) -> Result<(f64, f64)> {
    if sets.is_empty() {
        return Err(argument("capacity equivalence probe needs at least one set"));
    }
    let zero = HermitianField::zeros(omega.grid());
    let ratios: Vec<Option<f64>> = sets
        .par_iter()
        .map(|s| -> Result<Option<f64>> {
            let plain = cap_estimate(s, &zero, m)?.value;
            let with = cap_estimate(s, omega, m)?.value;
            if plain <= 0.0 && with <= 0.0 {
                Ok(None)
            } else {
                Ok(Some(plain / with))
            }
        })
        .collect::<Result<_>>()?;
    let live: Vec<f64> = ratios.into_iter().flatten().collect();
    if live.is_empty() {
        return Err(argument("every set in the probe has zero capacity under both estimators"));
    }
    let lo = live.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = live.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::HermitianMatrix;

    /// Capacity of the disk of radius `r` from a finite-difference solve of the
    /// radial equation `(s w')' = 0` on `[r, 1]`, `w(r) = -1`, `w(1) = 0`.
    fn radial_capacity(r: f64) -> f64 {
        let cells = 4000;
        let ds = (1.0 - r) / cells as f64;
        // Flux s w' is constant; integrate 1/s with the midpoint rule.
        let resistance: f64 = (0..cells).map(|k| ds / (r + (k as f64 + 0.5) * ds)).sum();
        let flux = 1.0 / resistance;
        // Δu/4 integrates to 2π·flux/4.
        2.0 * std::f64::consts::PI * flux / 4.0
    }

    #[test]
    fn whole_interior_binds() {
        let g = BallGrid::new(1, 8).unwrap();
        let u = relative_extremal(&GridSet::all(&g), &HermitianField::zeros(&g), 1).unwrap();
        assert!(u.values().iter().all(|&x| x == -1.0));
        assert!(relative_extremal(&GridSet::new(g.clone(), vec![false; g.len()]).unwrap(), &HermitianField::zeros(&g), 1).is_err());
    }

    #[test]
    fn disk_extremal_and_capacity() {
        let g = BallGrid::new(1, 32).unwrap();
        let k = GridSet::ball(&g, &[0.0, 0.0], 0.5);
        let zero = HermitianField::zeros(&g);
        let est = cap_estimate(&k, &zero, 1).unwrap();
        let u = est.extremal.as_ref().unwrap();
        assert!(u.values().iter().all(|&x| (-1.0..=0.0).contains(&x)));
        let exact = GridFunction::from_fn(&g, |x| (crate::grid::norm_sq(x).sqrt().ln() / 2f64.ln()).max(-1.0));
        let err = crate::grid::sup_norm_diff(u, &exact).unwrap();
        assert!(err <= 3.0 * g.h(), "err {err}");
        let oracle = radial_capacity(0.5);
        assert!((est.value - oracle).abs() <= 0.1 * oracle, "{} vs {oracle}", est.value);
        // No mass off K beyond solver noise.
        let witness = GridFunction::new(g.clone(), u.values().iter().map(|x| x + 1.0).collect(), BoundaryFn::constant(1.0)).unwrap();
        let d = hessian_measure(&witness, &zero, 1).unwrap();
        let off: Vec<bool> = k.members().iter().map(|&b| !b).collect();
        assert!(d.mass_on(&off).abs() <= 1e-6 * g.len() as f64);
    }

    #[test]
    fn nested_balls_are_monotone() {
        let g = BallGrid::new(1, 16).unwrap();
        let zero = HermitianField::zeros(&g);
        let caps: Vec<f64> = [0.3, 0.5, 0.7]
            .iter()
            .map(|&r| cap_estimate(&GridSet::ball(&g, &[0.0], r), &zero, 1).unwrap().value)
            .collect();
        assert!(caps[0] <= caps[1] + 1e-9 && caps[1] <= caps[2] + 1e-9, "{caps:?}");
    }

    #[test]
    fn subadditive_on_two_disks() {
        let g = BallGrid::new(1, 16).unwrap();
        let zero = HermitianField::zeros(&g);
        let a = GridSet::ball(&g, &[0.3, 0.0], 0.25);
        let b = GridSet::ball(&g, &[-0.3, 0.1], 0.25);
        let ab = a.union(&b).unwrap();
        let (ca, cb, cab) = (
            cap_estimate(&a, &zero, 1).unwrap().value,
            cap_estimate(&b, &zero, 1).unwrap().value,
            cap_estimate(&ab, &zero, 1).unwrap().value,
        );
        assert!(cab <= ca + cb + 1e-6);
        assert!(ca <= cab + 1e-6 && cb <= cab + 1e-6);
    }

    #[test]
    fn metric_examples() {
        let g = BallGrid::new(1, 16).unwrap();
        let zero = HermitianField::zeros(&g);
        let k = GridSet::all(&g);
        let u = GridFunction::from_fn(&g, |x| crate::grid::norm_sq(x) - 1.0);
        assert_eq!(cap_metric(&u, &u, 0.05, &k, &zero, 1).unwrap(), 0.0);
        let near = u.with_values(u.values().iter().map(|x| x + 0.01).collect()).unwrap();
        assert_eq!(cap_metric(&u, &near, 0.05, &k, &zero, 1).unwrap(), 0.0);

        let disk = GridSet::ball(&g, &[0.0], 0.5);
        let bumped = u
            .with_values(u.values().iter().enumerate().map(|(i, x)| if disk.contains(i) { x + 0.1 } else { *x }).collect())
            .unwrap();
        let metric = cap_metric(&bumped, &u, 0.05, &k, &zero, 1).unwrap();
        assert!((metric - cap_estimate(&disk, &zero, 1).unwrap().value).abs() < 1e-12);
        assert!(cap_metric(&bumped, &u, 0.2, &k, &zero, 1).unwrap() <= metric);
    }

    #[test]
    fn equivalence_probe_examples() {
        let g = BallGrid::new(1, 16).unwrap();
        let sets: Vec<GridSet> = [0.3, 0.5, 0.7].iter().map(|&r| GridSet::ball(&g, &[0.0], r)).collect();
        let (lo, hi) = cap_equivalence_probe(&sets, &HermitianField::zeros(&g), 1).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let ident = HermitianField::constant(&g, HermitianMatrix::identity(1)).unwrap();
        let (lo, hi) = cap_equivalence_probe(&sets, &ident, 1).unwrap();
        assert!(lo.is_finite() && lo > 0.0 && hi.is_finite() && hi >= lo);
        let eps = HermitianField::constant(&g, HermitianMatrix::scaled_identity(1, 1e-3)).unwrap();
        let (lo, hi) = cap_equivalence_probe(&sets[1..2], &eps, 1).unwrap();
        assert!((lo - 1.0).abs() < 0.05 && (hi - 1.0).abs() < 0.05);
    }

    #[test]
    fn rotated_set_keeps_its_capacity() {
        let g = BallGrid::new(1, 32).unwrap();
        let zero = HermitianField::zeros(&g);
        let c = [0.35, 0.0];
        let (s, co) = (std::f64::consts::FRAC_PI_6.sin(), std::f64::consts::FRAC_PI_6.cos());
        let rotated = [co * c[0] - s * c[1], s * c[0] + co * c[1]];
        let a = cap_estimate(&GridSet::ball(&g, &c, 0.3), &zero, 1).unwrap().value;
        let b = cap_estimate(&GridSet::ball(&g, &rotated, 0.3), &zero, 1).unwrap().value;
        assert!((a - b).abs() <= 0.02 * a, "{a} vs {b}");
    }
}
