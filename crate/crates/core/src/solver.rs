//! Compressed-row sparse matrices and the preconditioned conjugate gradient
//! solver used for every subdomain solve.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from unsorted triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < rows && c < cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.rows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
    }

    /// `y -= A x`
    pub fn sub_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.rows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] -= s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.rows];
        for (r, dr) in d.iter_mut().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    *dr = self.values[k];
                }
            }
        }
        d
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    /// Largest absolute asymmetry `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    #[default]
    Jacobi,
    /// Zero fill-in incomplete Cholesky.
    IncompleteCholesky,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcgConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub preconditioner: PreconditionerKind,
}

impl PcgConfig {
    pub fn new(max_iterations: usize, tolerance: f64) -> Result<Self> {
        if max_iterations < 1 {
            return Err(Error::Config(
                "PCG max iterations must be at least 1".into(),
            ));
        }
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(Error::Config(format!(
                "PCG tolerance must lie in (0, 1), got {tolerance}"
            )));
        }
        Ok(PcgConfig {
            max_iterations,
            tolerance,
            preconditioner: PreconditionerKind::Jacobi,
        })
    }

    pub fn with_preconditioner(mut self, kind: PreconditionerKind) -> Self {
        self.preconditioner = kind;
        self
    }
}

/// A factored preconditioner `M ≈ A`, applied as `z = M⁻¹ r`.
#[derive(Clone, Debug, PartialEq)]
pub enum Preconditioner {
    Jacobi {
        inv_diag: Vec<f64>,
    },
    /// Lower factor with the diagonal stored last in each row.
    IncompleteCholesky {
        l: CsrMatrix,
    },
}

/// Diagonal shifts tried, relative to the diagonal, when the zero fill-in
/// factorization meets a non-positive pivot.
const IC_SHIFTS: [f64; 4] = [0.0, 1e-3, 1e-2, 1e-1];

impl Preconditioner {
    pub fn build(a: &CsrMatrix, kind: PreconditionerKind) -> Result<Self> {
        let diag = a.diagonal();
        for (i, &d) in diag.iter().enumerate() {
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "zero or non-finite diagonal entry at row {i}"
                )));
            }
        }
        if kind == PreconditionerKind::IncompleteCholesky {
            for shift in IC_SHIFTS {
                if let Some(l) = incomplete_cholesky(a, &diag, shift) {
                    return Ok(Preconditioner::IncompleteCholesky { l });
                }
            }
        }
        Ok(Preconditioner::Jacobi {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        })
    }

    pub fn kind(&self) -> PreconditionerKind {
        match self {
            Preconditioner::Jacobi { .. } => PreconditionerKind::Jacobi,
            Preconditioner::IncompleteCholesky { .. } => PreconditionerKind::IncompleteCholesky,
        }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Jacobi { inv_diag } => {
                for ((z, r), d) in z.iter_mut().zip(r).zip(inv_diag) {
                    *z = r * d;
                }
            }
            Preconditioner::IncompleteCholesky { l } => {
                let (ptr, col, val) = (&l.row_ptr, &l.col_idx, &l.values);
                for i in 0..l.rows {
                    let end = ptr[i + 1] - 1;
                    let mut s = r[i];
                    for k in ptr[i]..end {
                        s -= val[k] * z[col[k]];
                    }
                    z[i] = s / val[end];
                }
                for i in (0..l.rows).rev() {
                    let end = ptr[i + 1] - 1;
                    z[i] /= val[end];
                    let zi = z[i];
                    for k in ptr[i]..end {
                        z[col[k]] -= val[k] * zi;
                    }
                }
            }
        }
    }
}

/// `L` on the lower pattern of `A` with `A_ii` scaled by `1 + shift`, or
/// `None` at a non-positive pivot.
fn incomplete_cholesky(a: &CsrMatrix, diag: &[f64], shift: f64) -> Option<CsrMatrix> {
    let n = a.rows;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    row_ptr.push(0);
    // position of column j in the current row, for the sparse dot products
    let mut pos = vec![usize::MAX; n];
    for i in 0..n {
        let start = col_idx.len();
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let c = a.col_idx[k];
            if c < i {
                col_idx.push(c);
                values.push(a.values[k]);
            }
        }
        for (off, &c) in col_idx[start..].iter().enumerate() {
            pos[c] = start + off;
        }
        for k in start..col_idx.len() {
            let j = col_idx[k];
            let (js, je) = (row_ptr[j], row_ptr[j + 1] - 1);
            let mut s = values[k];
            for m in js..je {
                let p = pos[col_idx[m]];
                if p != usize::MAX && p < k {
                    s -= values[p] * values[m];
                }
            }
            values[k] = s / values[je];
        }
        let mut d = diag[i] * (1.0 + shift);
        for v in &values[start..] {
            d -= v * v;
        }
        for &c in &col_idx[start..] {
            pos[c] = usize::MAX;
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        col_idx.push(i);
        values.push(d.sqrt());
        row_ptr.push(col_idx.len());
    }
    Some(CsrMatrix {
        rows: n,
        cols: n,
        row_ptr,
        col_idx,
        values,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` in place, starting from the contents of `x`.
///
/// Stops when `‖r‖/‖b‖ ≤ tol` on the true (unpreconditioned) residual.
pub fn pcg_solve(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    config: &PcgConfig,
) -> Result<SolveReport> {
    let m = Preconditioner::build(a, config.preconditioner)?;
    pcg_solve_traced(a, &m, b, x, config, |_, _| {})
}

/// As [`pcg_solve`] with a prebuilt preconditioner.
pub fn pcg_solve_with(
    a: &CsrMatrix,
    m: &Preconditioner,
    b: &[f64],
    x: &mut [f64],
    config: &PcgConfig,
) -> Result<SolveReport> {
    pcg_solve_traced(a, m, b, x, config, |_, _| {})
}

/// As [`pcg_solve_with`], calling `trace(iteration, x)` after each iteration.
pub fn pcg_solve_traced(
    a: &CsrMatrix,
    m: &Preconditioner,
    b: &[f64],
    x: &mut [f64],
    config: &PcgConfig,
    mut trace: impl FnMut(usize, &[f64]),
) -> Result<SolveReport> {
    let n = a.rows;
    if b.len() != n || x.len() != n || a.cols != n {
        return Err(Error::Numerical(format!(
            "PCG dimension mismatch: matrix {}x{}, rhs {}, guess {}",
            a.rows,
            a.cols,
            b.len(),
            x.len()
        )));
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport {
            iterations: 0,
            residual: 0.0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let mut r = b.to_vec();
    a.sub_mul_vec(x, &mut r);
    let mut rnorm = dot(&r, &r).sqrt();
    if rnorm / bnorm <= config.tolerance {
        return Ok(SolveReport {
            iterations: 0,
            residual: rnorm,
            relative_residual: rnorm / bnorm,
            converged: true,
        });
    }
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while it < config.max_iterations {
        it += 1;
        a.mul_vec(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Numerical(format!(
                "PCG breakdown at iteration {it}: p·Ap = {pq:.3e} (matrix not SPD?)"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rnorm = dot(&r, &r).sqrt();
        trace(it, x);
        if rnorm / bnorm <= config.tolerance {
            break;
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = rnorm / bnorm;
    Ok(SolveReport {
        iterations: it,
        residual: rnorm,
        relative_residual: rel,
        converged: rel <= config.tolerance,
    })
}
