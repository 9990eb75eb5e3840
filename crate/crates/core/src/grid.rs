//! Uniform lattice discretization of the unit ball in `ℂⁿ ≅ ℝ^{2n}`.
//!
//! Every second derivative is a three-point difference along a lattice line
//! through the point. Arms that would leave the interior are cut at the exact
//! intersection with the unit sphere, where the Dirichlet datum is evaluated
//! (Shortley–Weller). Mixed derivatives `∂_{ab}` come from the two diagonal
//! lines `e_a ± e_b`, `∂_{ab} = (Q_{a+b} - Q_{a-b}) / 4`, which is the usual
//! four-point cross stencil away from the sphere.
//!
//! Real coordinates are ordered `(x_1, y_1, ..., x_n, y_n)`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{argument, configuration, Error, Result};
use crate::hermitian::HermitianMatrix;

/// Largest supported complex dimension of a grid.
pub const MAX_GRID_DIM: usize = 2;

/// Desk-scale resolution limit (`1/h`) per complex dimension.
pub fn max_divisions(n: usize) -> usize {
    match n {
        1 => 64,
        2 => 10,
        _ => 0,
    }
}

/// A lattice point `p + t·step` at which a value is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Interior(u32),
    Boundary(u32),
}

/// Three-point stencil along one lattice direction.
#[derive(Clone, Copy, Debug)]
pub struct Line {
    pub minus: Slot,
    pub plus: Slot,
    /// Parameter distance to the minus arm (the point is `p - t_minus·step`).
    pub t_minus: f64,
    pub t_plus: f64,
}

impl Line {
    /// Weights `(α₋, α₊)` of the non-uniform second difference
    /// `α₊(u₊ - u₀) + α₋(u₋ - u₀)`.
    #[inline]
    pub fn weights(&self) -> (f64, f64) {
        let s = self.t_minus + self.t_plus;
        (2.0 / (self.t_minus * s), 2.0 / (self.t_plus * s))
    }

    pub fn touches_boundary(&self) -> bool {
        matches!(self.minus, Slot::Boundary(_)) || matches!(self.plus, Slot::Boundary(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionKind {
    Axis(usize),
    /// `e_a + sign·e_b`.
    Diagonal { a: usize, b: usize, sign: i32 },
}

#[derive(Clone, Copy, Debug)]
pub struct Direction {
    pub step: [i32; 2 * MAX_GRID_DIM],
    pub kind: DirectionKind,
}

/// The interior lattice `{|z| < 1 - h/2}` with precomputed stencils.
pub struct BallGrid {
    n: usize,
    divisions: usize,
    h: f64,
    side: usize,
    lattice: Vec<[i32; 2 * MAX_GRID_DIM]>,
    lookup: Vec<u32>,
    directions: Vec<Direction>,
    basis: Vec<HermitianMatrix>,
    lines: Vec<Line>,
    nodes: Vec<[f64; 2 * MAX_GRID_DIM]>,
    boundary_cross_lines: usize,
}

impl fmt::Debug for BallGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BallGrid")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("interior_points", &self.lattice.len())
            .field("boundary_nodes", &self.nodes.len())
            .finish()
    }
}

const NONE: u32 = u32::MAX;

fn directions_for(n: usize) -> Vec<Direction> {
    let dim = 2 * n;
    let mut out = Vec::new();
    for a in 0..dim {
        let mut step = [0; 2 * MAX_GRID_DIM];
        step[a] = 1;
        out.push(Direction { step, kind: DirectionKind::Axis(a) });
    }
    // Only the pairs that enter ∂²/∂z_j∂z̄_k for j ≠ k.
    for j in 0..n {
        for k in (j + 1)..n {
            for (a, b) in [(2 * j, 2 * k), (2 * j + 1, 2 * k + 1), (2 * j, 2 * k + 1), (2 * j + 1, 2 * k)] {
                for sign in [1, -1] {
                    let mut step = [0; 2 * MAX_GRID_DIM];
                    step[a] = 1;
                    step[b] = sign;
                    out.push(Direction { step, kind: DirectionKind::Diagonal { a, b, sign } });
                }
            }
        }
    }
    out
}

/// Complex Hessian `∂²/∂z_j∂z̄_k` from a real symmetric Hessian.
fn complex_from_real(n: usize, r: &[[f64; 2 * MAX_GRID_DIM]; 2 * MAX_GRID_DIM]) -> HermitianMatrix {
    let mut m = HermitianMatrix::zeros(n);
    for j in 0..n {
        for k in j..n {
            let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
            let re = 0.25 * (r[xj][xk] + r[yj][yk]);
            let im = 0.25 * (r[xj][yk] - r[yj][xk]);
            m.set(j, k, Complex64::new(re, im));
        }
    }
    m
}

fn basis_for(n: usize, directions: &[Direction]) -> Vec<HermitianMatrix> {
    directions
        .iter()
        .map(|d| {
            let mut r = [[0.0; 2 * MAX_GRID_DIM]; 2 * MAX_GRID_DIM];
            match d.kind {
                DirectionKind::Axis(a) => r[a][a] = 1.0,
                DirectionKind::Diagonal { a, b, sign } => {
                    let w = 0.25 * sign as f64;
                    r[a][b] = w;
                    r[b][a] = w;
                }
            }
            complex_from_real(n, &r)
        })
        .collect()
}

/// Positive root `t` of `|p + t s|² = 1` for `|p| < 1`.
fn sphere_hit(p: &[f64], s: &[f64]) -> f64 {
    let a: f64 = s.iter().map(|x| x * x).sum();
    let b: f64 = 2.0 * p.iter().zip(s).map(|(x, y)| x * y).sum::<f64>();
    let c: f64 = p.iter().map(|x| x * x).sum::<f64>() - 1.0;
    let disc = (b * b - 4.0 * a * c).sqrt();
    if b > 0.0 {
        -2.0 * c / (b + disc)
    } else {
        (-b + disc) / (2.0 * a)
    }
}

impl BallGrid {
    /// Builds the grid with spacing `h = 1/divisions`.
    pub fn new(n: usize, divisions: usize) -> Result<Arc<Self>> {
        if n == 0 || n > MAX_GRID_DIM {
            return Err(configuration(format!("grid dimension n must be 1 or 2, got {n}")));
        }
        if divisions < 2 {
            return Err(configuration(format!(
                "grid too coarse: 1/h = {divisions} leaves fewer than 3 interior points per axis"
            )));
        }
        if divisions > max_divisions(n) {
            return Err(configuration(format!(
                "1/h = {divisions} exceeds the desk-scale limit {} for n = {n}",
                max_divisions(n)
            )));
        }
        let dim = 2 * n;
        let nn = divisions as i64;
        let side = 2 * divisions + 1;
        let total = side.pow(dim as u32);
        let limit = (2 * nn - 1) * (2 * nn - 1);

        let mut lookup = vec![NONE; total];
        let mut lattice = Vec::new();
        for flat in 0..total {
            let mut rem = flat;
            let mut k = [0i32; 2 * MAX_GRID_DIM];
            for slot in k.iter_mut().take(dim) {
                *slot = (rem % side) as i32 - divisions as i32;
                rem /= side;
            }
            let r2: i64 = k.iter().map(|&x| (x as i64) * (x as i64)).sum();
            if 4 * r2 < limit {
                lookup[flat] = lattice.len() as u32;
                lattice.push(k);
            }
        }

        let directions = directions_for(n);
        let basis = basis_for(n, &directions);
        let h = 1.0 / divisions as f64;
        let mut grid = Self {
            n,
            divisions,
            h,
            side,
            lattice,
            lookup,
            directions,
            basis,
            lines: Vec::new(),
            nodes: Vec::new(),
            boundary_cross_lines: 0,
        };
        grid.build_lines();
        Ok(Arc::new(grid))
    }

    /// Builds the grid from a spacing that must be the reciprocal of an integer.
    pub fn with_spacing(n: usize, h: f64) -> Result<Arc<Self>> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(configuration(format!("grid spacing must be positive, got {h}")));
        }
        let inv = (1.0 / h).round();
        if ((1.0 / h) - inv).abs() > 1e-9 * inv {
            return Err(configuration(format!("grid spacing must be 1/integer, got {h}")));
        }
        Self::new(n, inv as usize)
    }

    fn flat_index(&self, k: &[i32]) -> Option<usize> {
        let mut flat = 0usize;
        let mut mult = 1usize;
        for &x in k.iter().take(2 * self.n) {
            let shifted = x + self.divisions as i32;
            if shifted < 0 || shifted as usize >= self.side {
                return None;
            }
            flat += shifted as usize * mult;
            mult *= self.side;
        }
        Some(flat)
    }

    /// Interior index of a lattice point, if it is interior.
    pub fn index_of(&self, k: &[i32]) -> Option<usize> {
        let flat = self.flat_index(k)?;
        match self.lookup[flat] {
            NONE => None,
            i => Some(i as usize),
        }
    }

    fn build_lines(&mut self) {
        let dim = 2 * self.n;
        let mut lines = Vec::with_capacity(self.lattice.len() * self.directions.len());
        let mut nodes = Vec::new();
        let mut cross = 0usize;
        for i in 0..self.lattice.len() {
            let k = self.lattice[i];
            let p = self.point(i);
            for dir in &self.directions {
                let mut arms = [(Slot::Interior(0), 0.0); 2];
                for (slot, sgn) in arms.iter_mut().zip([-1i32, 1]) {
                    let mut q = k;
                    for a in 0..dim {
                        q[a] += sgn * dir.step[a];
                    }
                    *slot = match self.index_of(&q) {
                        Some(j) => (Slot::Interior(j as u32), self.h),
                        None => {
                            let s: Vec<f64> = (0..dim).map(|a| (sgn * dir.step[a]) as f64).collect();
                            let t = sphere_hit(&p[..dim], &s);
                            let mut x = [0.0; 2 * MAX_GRID_DIM];
                            for a in 0..dim {
                                x[a] = p[a] + t * s[a];
                            }
                            let norm = x[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
                            for v in x.iter_mut().take(dim) {
                                *v /= norm;
                            }
                            nodes.push(x);
                            (Slot::Boundary((nodes.len() - 1) as u32), t)
                        }
                    };
                }
                let line = Line { minus: arms[0].0, plus: arms[1].0, t_minus: arms[0].1, t_plus: arms[1].1 };
                if matches!(dir.kind, DirectionKind::Diagonal { .. }) && line.touches_boundary() {
                    cross += 1;
                }
                lines.push(line);
            }
        }
        self.lines = lines;
        self.nodes = nodes;
        self.boundary_cross_lines = cross;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn real_dim(&self) -> usize {
        2 * self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Lebesgue volume of one lattice cell, `h^{2n}`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(2 * self.n as i32)
    }

    pub fn lattice(&self, i: usize) -> &[i32] {
        &self.lattice[i][..2 * self.n]
    }

    /// Real coordinates of interior point `i` (trailing entries are zero).
    pub fn point(&self, i: usize) -> [f64; 2 * MAX_GRID_DIM] {
        let mut x = [0.0; 2 * MAX_GRID_DIM];
        for (a, v) in x.iter_mut().enumerate().take(2 * self.n) {
            *v = self.lattice[i][a] as f64 * self.h;
        }
        x
    }

    pub fn norm_sq(&self, i: usize) -> f64 {
        self.point(i).iter().map(|x| x * x).sum()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Complex-Hessian contribution of a unit second difference along each direction.
    pub fn basis(&self) -> &[HermitianMatrix] {
        &self.basis
    }

    pub fn lines(&self, i: usize) -> &[Line] {
        let l = self.directions.len();
        &self.lines[i * l..(i + 1) * l]
    }

    pub fn boundary_node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn boundary_node(&self, b: usize) -> &[f64] {
        &self.nodes[b][..2 * self.n]
    }

    /// Number of diagonal (mixed-derivative) lines cut by the sphere.
    pub fn boundary_cross_lines(&self) -> usize {
        self.boundary_cross_lines
    }

    pub fn same_as(&self, other: &BallGrid) -> bool {
        std::ptr::eq(self, other) || (self.n == other.n && self.divisions == other.divisions)
    }

    #[inline]
    fn read(slot: Slot, u: &[f64], b: &[f64]) -> f64 {
        match slot {
            Slot::Interior(j) => u[j as usize],
            Slot::Boundary(j) => b[j as usize],
        }
    }

    /// Second differences along every direction at point `i`.
    pub fn second_differences(&self, i: usize, u: &[f64], b: &[f64], out: &mut [f64]) {
        let u0 = u[i];
        for (q, line) in out.iter_mut().zip(self.lines(i)) {
            let (am, ap) = line.weights();
            *q = ap * (Self::read(line.plus, u, b) - u0) + am * (Self::read(line.minus, u, b) - u0);
        }
    }

    /// Discrete complex Hessian at point `i` given interior values and boundary-node values.
    pub fn hessian_at(&self, i: usize, u: &[f64], b: &[f64]) -> HermitianMatrix {
        let mut q = [0.0; 16];
        let nd = self.directions.len();
        self.second_differences(i, u, b, &mut q[..nd]);
        let mut m = HermitianMatrix::zeros(self.n);
        for (qd, e) in q[..nd].iter().zip(&self.basis) {
            if *qd != 0.0 {
                m.add_scaled(*qd, e);
            }
        }
        m
    }

    /// Coefficient of `u_i` in the Hessian at point `i`.
    pub fn self_coefficient(&self, i: usize) -> HermitianMatrix {
        let mut m = HermitianMatrix::zeros(self.n);
        for (line, e) in self.lines(i).iter().zip(&self.basis) {
            let (am, ap) = line.weights();
            m.add_scaled(-(am + ap), e);
        }
        m
    }

    /// Interior indices within Chebyshev lattice distance 1 of `i` (excluding `i`).
    pub fn chebyshev_neighbors(&self, i: usize) -> Vec<usize> {
        let dim = 2 * self.n;
        let k = self.lattice[i];
        let mut out = Vec::new();
        let count = 3usize.pow(dim as u32);
        for code in 0..count {
            let mut rem = code;
            let mut q = k;
            let mut zero = true;
            for v in q.iter_mut().take(dim) {
                let off = (rem % 3) as i32 - 1;
                rem /= 3;
                if off != 0 {
                    zero = false;
                }
                *v += off;
            }
            if zero {
                continue;
            }
            if let Some(j) = self.index_of(&q) {
                out.push(j);
            }
        }
        out
    }

    /// Chebyshev lattice distance from every point to the set `mask == true`
    /// (0 on the set, `usize::MAX` if the set is empty).
    pub fn distance_to(&self, mask: &[bool]) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.len()];
        let mut frontier: Vec<usize> = (0..self.len()).filter(|&i| mask[i]).collect();
        for &i in &frontier {
            dist[i] = 0;
        }
        let mut d = 0;
        while !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for &i in &frontier {
                for j in self.chebyshev_neighbors(i) {
                    if dist[j] == usize::MAX {
                        dist[j] = d;
                        next.push(j);
                    }
                }
            }
            frontier = next;
        }
        dist
    }
}

/// A continuous function evaluated on the unit sphere (and, for analytic
/// fields, anywhere in the closed ball).
#[derive(Clone)]
pub struct BoundaryFn(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl fmt::Debug for BoundaryFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryFn(..)")
    }
}

impl BoundaryFn {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }

    /// Values at every boundary node of `grid`.
    pub fn sample(&self, grid: &BallGrid) -> Vec<f64> {
        (0..grid.boundary_node_count()).map(|b| self.eval(grid.boundary_node(b))).collect()
    }
}

/// Values on the interior lattice plus a boundary evaluator.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<BallGrid>,
    values: Vec<f64>,
    boundary: BoundaryFn,
}

impl GridFunction {
    pub fn new(grid: Arc<BallGrid>, values: Vec<f64>, boundary: BoundaryFn) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(argument(format!(
                "grid function has {} values but the grid has {} interior points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(crate::error::validation(format!("grid function value at point {i} is not finite")));
        }
        Ok(Self { grid, values, boundary })
    }

    /// Samples a function defined on the closed ball; it also serves as the boundary datum.
    pub fn from_fn(grid: &Arc<BallGrid>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let boundary = BoundaryFn::new(f);
        let dim = grid.real_dim();
        let values = (0..grid.len()).map(|i| boundary.eval(&grid.point(i)[..dim])).collect();
        Self { grid: grid.clone(), values, boundary }
    }

    pub fn constant(grid: &Arc<BallGrid>, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()], boundary: BoundaryFn::constant(c) }
    }

    pub fn grid(&self) -> &Arc<BallGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary(&self) -> &BoundaryFn {
        &self.boundary
    }

    pub fn boundary_values(&self) -> Vec<f64> {
        self.boundary.sample(&self.grid)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values, self.boundary.clone())
    }

    fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// `a·self + b·other`, boundary evaluators combined the same way.
    pub fn linear_combination(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        let (f, g) = (self.boundary.clone(), other.boundary.clone());
        Ok(Self {
            grid: self.grid.clone(),
            values,
            boundary: BoundaryFn::new(move |x| a * f.eval(x) + b * g.eval(x)),
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        let f = self.boundary.clone();
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|x| a * x).collect(),
            boundary: BoundaryFn::new(move |x| a * f.eval(x)),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One Hermitian matrix per interior point.
#[derive(Clone, Debug)]
pub struct HermitianField {
    grid: Arc<BallGrid>,
    mats: Vec<HermitianMatrix>,
}

impl HermitianField {
    pub fn new(grid: Arc<BallGrid>, mats: Vec<HermitianMatrix>) -> Result<Self> {
        if mats.len() != grid.len() {
            return Err(argument("Hermitian field length does not match the grid"));
        }
        if mats.iter().any(|m| m.dim() != grid.n()) {
            return Err(argument(format!("Hermitian field entries must be {0}×{0}", grid.n())));
        }
        Ok(Self { grid, mats })
    }

    pub fn constant(grid: &Arc<BallGrid>, a: HermitianMatrix) -> Result<Self> {
        Self::new(grid.clone(), vec![a; grid.len()])
    }

    pub fn zeros(grid: &Arc<BallGrid>) -> Self {
        Self { grid: grid.clone(), mats: vec![HermitianMatrix::zeros(grid.n()); grid.len()] }
    }

    pub fn grid(&self) -> &Arc<BallGrid> {
        &self.grid
    }

    pub fn get(&self, i: usize) -> &HermitianMatrix {
        &self.mats[i]
    }

    pub fn matrices(&self) -> &[HermitianMatrix] {
        &self.mats
    }

    pub(crate) fn check_grid(&self, grid: &BallGrid) -> Result<()> {
        if !self.grid.same_as(grid) {
            return Err(Error::GridMismatch("Hermitian field lives on a different grid".into()));
        }
        Ok(())
    }

    /// Largest eigenvalue over the field.
    pub fn max_eigenvalue(&self) -> f64 {
        self.mats
            .iter()
            .map(|m| *m.eigenvalues().as_slice().last().unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Finite-difference complex Hessian `∂²u/∂z_j∂z̄_k`, normalized so the
/// Hessian of `‖z‖²` is the identity.
pub fn complex_hessian(u: &GridFunction) -> HermitianField {
    let grid = u.grid.clone();
    let b = u.boundary_values();
    let mats = (0..grid.len()).into_par_iter().map(|i| grid.hessian_at(i, &u.values, &b)).collect();
    HermitianField { grid, mats }
}

/// `max_i |u_i - v_i|` over interior points.
pub fn sup_norm_diff(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    u.check_same_grid(v)?;
    Ok(u.values.iter().zip(&v.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Pointwise maximum; boundary evaluators are combined pointwise as well.
pub fn max_of(u: &GridFunction, v: &GridFunction) -> Result<GridFunction> {
    u.check_same_grid(v)?;
    let values = u.values.iter().zip(&v.values).map(|(a, b)| a.max(*b)).collect();
    let (f, g) = (u.boundary.clone(), v.boundary.clone());
    Ok(GridFunction {
        grid: u.grid.clone(),
        values,
        boundary: BoundaryFn::new(move |x| f.eval(x).max(g.eval(x))),
    })
}

/// `‖z‖²` for a real coordinate slice.
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
