//! Sparse matrices and Krylov solvers for the Newton systems.

/// Compressed sparse row matrix, square.
#[derive(Clone, Debug, Default)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self { n, row_ptr, cols: Vec::with_capacity(nnz), vals: Vec::with_capacity(nnz) }
    }

    /// Appends a row; duplicate column entries are summed.
    pub fn push_row(&mut self, entries: &mut Vec<(u32, f64)>) {
        entries.sort_by_key(|e| e.0);
        let mut last: Option<u32> = None;
        for &(c, v) in entries.iter() {
            if last == Some(c) {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = Some(c);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *out = acc;
        }
    }

    pub fn mul_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate().take(self.n) {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.cols[k] as usize] += self.vals[k] * xr;
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (r, dr) in d.iter_mut().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] as usize == r {
                    *dr = self.vals[k];
                }
            }
        }
        d
    }

    /// Squared column norms, the diagonal of `AᵀA`.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for k in 0..self.vals.len() {
            d[self.cols[k] as usize] += self.vals[k] * self.vals[k];
        }
        d
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LinearOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(a: &Csr, x: &[f64], b: &[f64], r: &mut [f64]) {
    a.mul(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Right-preconditioned BiCGSTAB with a diagonal preconditioner.
pub fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> LinearOutcome {
    let n = a.dim();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let b_norm = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    residual(a, x, b, &mut r);
    let r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut res = norm(&r) / b_norm;
    if res <= rel_tol {
        return LinearOutcome { iterations: 0, relative_residual: res, converged: true };
    }
    for it in 1..=max_iter {
        let rho = dot(&r_hat, &r);
        if rho == 0.0 || !rho.is_finite() {
            return LinearOutcome { iterations: it, relative_residual: res, converged: false };
        }
        let beta = (rho / rho_old) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * inv_diag[i];
        }
        a.mul(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return LinearOutcome { iterations: it, relative_residual: res, converged: false };
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / b_norm <= rel_tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            residual(a, x, b, &mut r);
            res = norm(&r) / b_norm;
            return LinearOutcome { iterations: it, relative_residual: res, converged: res <= 10.0 * rel_tol };
        }
        for i in 0..n {
            z[i] = s[i] * inv_diag[i];
        }
        a.mul(&z, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return LinearOutcome { iterations: it, relative_residual: res, converged: false };
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / b_norm;
        if res <= rel_tol {
            // Guard against drift between the recursive and true residual.
            residual(a, x, b, &mut r);
            res = norm(&r) / b_norm;
            if res <= 10.0 * rel_tol {
                return LinearOutcome { iterations: it, relative_residual: res, converged: true };
            }
        }
        if omega == 0.0 || !omega.is_finite() {
            return LinearOutcome { iterations: it, relative_residual: res, converged: false };
        }
        rho_old = rho;
    }
    LinearOutcome { iterations: max_iter, relative_residual: res, converged: false }
}

/// Conjugate gradients on the normal equations `AᵀA x = Aᵀb`, preconditioned by
/// the diagonal of `AᵀA`. Slow but free of breakdown for nonsingular `A`.
pub fn cgnr(a: &Csr, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> LinearOutcome {
    let n = a.dim();
    let inv_diag: Vec<f64> =
        a.column_norms_sq().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = vec![0.0; n];
    residual(a, x, b, &mut r);
    let mut g = vec![0.0; n];
    a.mul_transpose(&r, &mut g);
    let mut atb = vec![0.0; n];
    a.mul_transpose(b, &mut atb);
    let g0 = norm(&atb).max(f64::MIN_POSITIVE);
    let mut zv: Vec<f64> = g.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = zv.clone();
    let mut q = vec![0.0; n];
    let mut gz = dot(&g, &zv);
    let b_norm = norm(b).max(f64::MIN_POSITIVE);
    for it in 1..=max_iter {
        if norm(&g) / g0 <= rel_tol {
            let res = norm(&r) / b_norm;
            return LinearOutcome { iterations: it - 1, relative_residual: res, converged: true };
        }
        a.mul(&p, &mut q);
        let qq = dot(&q, &q);
        if qq == 0.0 || !qq.is_finite() {
            break;
        }
        let alpha = gz / qq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        a.mul_transpose(&r, &mut g);
        for i in 0..n {
            zv[i] = g[i] * inv_diag[i];
        }
        let gz_new = dot(&g, &zv);
        let beta = gz_new / gz;
        gz = gz_new;
        for i in 0..n {
            p[i] = zv[i] + beta * p[i];
        }
    }
    residual(a, x, b, &mut r);
    let res = norm(&r) / b_norm;
    LinearOutcome { iterations: max_iter, relative_residual: res, converged: norm(&g) / g0 <= rel_tol }
}

/// BiCGSTAB first, CGNR from the original guess if it stalls.
pub fn solve(a: &Csr, b: &[f64], x: &mut [f64], rel_tol: f64) -> LinearOutcome {
    let start = x.to_vec();
    let n = a.dim();
    let out = bicgstab(a, b, x, rel_tol, 20 * n.max(50));
    if out.converged {
        return out;
    }
    x.copy_from_slice(&start);
    let second = cgnr(a, b, x, rel_tol, 50 * n.max(50));
    LinearOutcome { iterations: out.iterations + second.iterations, ..second }
}
