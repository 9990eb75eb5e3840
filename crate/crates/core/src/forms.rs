//! Pointwise Hessian measures `(ω + dd^c u)^m ∧ β^{n-m}` as densities
//! relative to `β^n`, and the mixed-form (polarized) expansion through a
//! strictly plurisubharmonic potential `ρ` with `dd^c ρ ≥ ω`.
//!
//! Normalization: density = `σ_m(λ(ω + Hess u)) / C(n, m)`, so `‖z‖² - 1` has
//! density one for every `(n, m)`. Lebesgue mass uses `β^n = n!·dV_{2n}`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{argument, validation, Error, Result};
use crate::grid::{complex_hessian, BallGrid, GridFunction, HermitianField};
use crate::hermitian::{binomial, check_order, closed_cone_test, elementary_symmetric, HermitianMatrix, CLOSED_CONE_SLACK};

/// Tolerance below zero accepted before a density is clamped.
pub const DENSITY_FLOOR: f64 = -1e-10;

/// A scalar density per interior point, relative to `β^n`.
#[derive(Clone, Debug)]
pub struct MeasureDensity {
    grid: Arc<BallGrid>,
    values: Vec<f64>,
    admissible: Option<Vec<bool>>,
    total_mass: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl MeasureDensity {
    /// A nonnegative density; values down to [`DENSITY_FLOOR`] are clamped to zero.
    pub fn new(grid: Arc<BallGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(argument("density length does not match the grid"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < DENSITY_FLOOR) {
            return Err(validation(format!("density at point {i} is {} (must be finite and ≥ 0)", values[i])));
        }
        let values = values.into_iter().map(|v| v.max(0.0)).collect();
        Ok(Self::raw(grid, values, None))
    }

    fn raw(grid: Arc<BallGrid>, values: Vec<f64>, admissible: Option<Vec<bool>>) -> Self {
        let n = grid.n();
        let total_mass = values.iter().sum::<f64>() * grid.cell_volume() * factorial(n);
        Self { grid, values, admissible, total_mass }
    }

    pub fn from_fn(grid: &Arc<BallGrid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.real_dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..dim])).collect();
        Self::new(grid.clone(), values)
    }

    pub fn constant(grid: &Arc<BallGrid>, c: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Arc<BallGrid> {
        &self.grid
    }

    /// Values as computed (a Hessian measure may carry negative entries where
    /// the function is not admissible).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Closed-cone membership per point, when the density came from a Hessian.
    pub fn admissible(&self) -> Option<&[bool]> {
        self.admissible.as_deref()
    }

    pub fn is_admissible(&self) -> bool {
        self.admissible.as_ref().map_or(true, |m| m.iter().all(|&b| b))
    }

    pub fn violations(&self) -> usize {
        self.admissible.as_ref().map_or(0, |m| m.iter().filter(|&&b| !b).count())
    }

    /// Lebesgue mass: sum × `h^{2n}` × `n!`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Mass restricted to the points where `mask` is set.
    pub fn mass_on(&self, mask: &[bool]) -> f64 {
        let s: f64 = self.values.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v).sum();
        s * self.grid.cell_volume() * factorial(self.grid.n())
    }

    /// Validates against [`DENSITY_FLOOR`] and clamps to a nonnegative density.
    pub fn clamped(&self) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.clone())
    }

    /// Pointwise product with another density (e.g. `F·μ`).
    pub fn product(&self, other: &MeasureDensity) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("densities live on different grids".into()));
        }
        Self::new(self.grid.clone(), self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `σ_m(λ(A)) / C(n, m)` and closed-cone membership of `A`.
pub fn density_of(a: &HermitianMatrix, m: usize, slack: f64) -> (f64, bool) {
    let n = a.dim();
    let e = elementary_symmetric(a.eigenvalues().as_slice());
    (e[m] / binomial(n, m), closed_cone_test(&e, m, slack))
}

/// Pointwise Hessian measure of `u` relative to `ω`, with its admissibility mask.
pub fn hessian_measure(u: &GridFunction, omega: &HermitianField, m: usize) -> Result<MeasureDensity> {
    let grid = u.grid().clone();
    omega.check_grid(&grid)?;
    check_order(m, grid.n())?;
    let hess = complex_hessian(u);
    let (values, mask): (Vec<f64>, Vec<bool>) = (0..grid.len())
        .into_par_iter()
        .map(|i| density_of(&(*omega.get(i) + *hess.get(i)), m, CLOSED_CONE_SLACK))
        .unzip();
    Ok(MeasureDensity::raw(grid, values, Some(mask)))
}

/// Polarized `σ_m` of `m` Hermitian `n×n` matrices, normalized by `C(n, m)`.
///
/// Uses inclusion–exclusion over nonempty subsets `S`:
/// `P(A_1..A_m) = (1/m!) Σ_S (-1)^{m-|S|} σ_m(Σ_{i∈S} A_i)`.
pub fn mixed_sigma(matrices: &[HermitianMatrix], n: usize) -> Result<f64> {
    let m = matrices.len();
    check_order(m, n)?;
    if let Some(a) = matrices.iter().find(|a| a.dim() != n) {
        return Err(argument(format!("mixed_sigma expects {n}×{n} matrices, got {0}×{0}", a.dim())));
    }
    let mut acc = 0.0;
    for subset in 1u32..(1 << m) {
        let mut sum = HermitianMatrix::zeros(n);
        for (i, a) in matrices.iter().enumerate() {
            if subset & (1 << i) != 0 {
                sum = sum + *a;
            }
        }
        let sign = if (m - subset.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * elementary_symmetric(sum.eigenvalues().as_slice())[m];
    }
    Ok(acc / factorial(m) / binomial(n, m))
}

/// The potential `ρ` and `τ = dd^c ρ - ω` of the mixed expansion.
#[derive(Clone, Debug)]
pub struct MixedExpansionConfig {
    rho: GridFunction,
    tau: HermitianField,
}

impl MixedExpansionConfig {
    /// Validates `dd^c ρ - ω ≥ 0` (eigenvalues ≥ -1e-10) at every interior point.
    pub fn new(rho: GridFunction, omega: &HermitianField) -> Result<Self> {
        omega.check_grid(rho.grid())?;
        let hess = complex_hessian(&rho);
        let mats: Vec<HermitianMatrix> =
            (0..rho.grid().len()).map(|i| *hess.get(i) - *omega.get(i)).collect();
        for (i, t) in mats.iter().enumerate() {
            let low = t.eigenvalues().as_slice()[0];
            if low < -1e-10 {
                return Err(validation(format!(
                    "dd^c rho - omega has eigenvalue {low:e} < 0 at point {i}; rho does not dominate omega"
                )));
            }
        }
        let tau = HermitianField::new(rho.grid().clone(), mats)?;
        Ok(Self { rho, tau })
    }

    /// `ρ = c‖z‖²` with `c` one above the largest eigenvalue of `ω`.
    pub fn default_for(omega: &HermitianField) -> Result<Self> {
        let c = omega.max_eigenvalue().max(0.0) + 1.0;
        let rho = GridFunction::from_fn(omega.grid(), move |x| c * crate::grid::norm_sq(x));
        Self::new(rho, omega)
    }

    pub fn rho(&self) -> &GridFunction {
        &self.rho
    }

    pub fn tau(&self) -> &HermitianField {
        &self.tau
    }
}

/// `Σ_k C(m,k)(-1)^{m-k} [dd^c(u+ρ)]^k ∧ τ^{m-k} ∧ β^{n-m}` evaluated pointwise.
pub fn binomial_expansion_density(
    u: &GridFunction,
    omega: &HermitianField,
    m: usize,
    cfg: &MixedExpansionConfig,
) -> Result<MeasureDensity> {
    let grid = u.grid().clone();
    omega.check_grid(&grid)?;
    cfg.tau.check_grid(&grid)?;
    let n = grid.n();
    check_order(m, n)?;
    let shifted = u.linear_combination(1.0, &cfg.rho, 1.0)?;
    let b = complex_hessian(&shifted);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            let mut args = Vec::with_capacity(m);
            for k in 0..=m {
                args.clear();
                args.extend(std::iter::repeat(*b.get(i)).take(k));
                args.extend(std::iter::repeat(*cfg.tau.get(i)).take(m - k));
                let sign = if (m - k) % 2 == 0 { 1.0 } else { -1.0 };
                acc += binomial(m, k) * sign * mixed_sigma(&args, n)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MeasureDensity::raw(grid, values, None))
}
