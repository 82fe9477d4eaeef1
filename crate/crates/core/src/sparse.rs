//! Compressed sparse rows and a Jacobi-preconditioned conjugate gradient solver.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len() / 2);
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|(j, _)| *j == i).map_or(0.0, |(_, v)| v)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().with_min_len(512).for_each(|(i, yi)| {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_iter: 20_000 }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` for symmetric positive definite `A`. Fails with [`Error::Indefinite`] as
/// soon as a search direction with `pᵀAp ≤ 0` is met.
pub fn pcg(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, opts: CgOptions) -> Result<CgOutcome> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::SizeMismatch { expected: n, got: b.len() });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    let mut r = a.mul_vec(&x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / b_norm;
    for it in 0..opts.max_iter {
        if res <= opts.rel_tol {
            return Ok(CgOutcome { x, iterations: it, residual: res });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Indefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / b_norm;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= opts.rel_tol {
        Ok(CgOutcome { x, iterations: opts.max_iter, residual: res })
    } else {
        Err(Error::LinearSolver { iterations: opts.max_iter, residual: res })
    }
}
