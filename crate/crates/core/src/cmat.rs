//! Small dense complex-matrix type used for per-subcarrier blocks.
//!
//! The matrices handled here are at most a few hundred rows (antenna-sized
//! blocks, or stacked space-time covariances at desk scale), so a plain
//! row-major `Vec` with textbook algorithms is sufficient.

use crate::error::{Error, Result};
use crate::C64;
use std::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let lhs_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in lhs_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum::<C64>()
            })
            .collect()
    }

    pub fn add_assign(&mut self, rhs: &CMat) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    pub fn sub(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> CMat {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += w * v * u^H` (rank-one accumulation).
    pub fn accumulate_outer(&mut self, v: &[C64], u: &[C64], w: f64) {
        assert_eq!(self.rows, v.len());
        assert_eq!(self.cols, u.len());
        for r in 0..self.rows {
            let vr = v[r] * w;
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (o, &uc) in row.iter_mut().zip(u) {
                *o += vr * uc.conj();
            }
        }
    }

    pub fn trace(&self) -> C64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            for c in r..self.cols {
                if (self[(r, c)] - self[(c, r)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Real quadratic form `v^T self conj(v)` (radiated power along a
    /// steering vector); `self` must be Hermitian for the result to be real.
    pub fn quadratic_form_transpose(&self, v: &[C64]) -> f64 {
        assert_eq!(self.rows, v.len());
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..self.rows {
            let vr = v[r];
            for c in 0..self.cols {
                acc += vr * self[(r, c)] * v[c].conj();
            }
        }
        acc.re
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Solves `A X = B` by LU with partial pivoting.
///
/// Signals rank deficiency when the pivot spread exceeds `1e12`, the guard
/// used by the zero-forcing precoder.
pub fn solve_lu(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.rows != a.cols {
        return Err(Error::Dimension("solve_lu requires a square matrix".into()));
    }
    if a.rows != b.rows {
        return Err(Error::Dimension(format!(
            "solve_lu: lhs is {}x{} but rhs has {} rows",
            a.rows, a.cols, b.rows
        )));
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut x = b.clone();
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let (mut best, mut best_mag) = (col, lu[(col, col)].norm());
        for r in col + 1..n {
            let mag = lu[(r, col)].norm();
            if mag > best_mag {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag == 0.0 {
            return Err(Error::Numerical("singular matrix in solve_lu".into()));
        }
        if best != col {
            for c in 0..n {
                let tmp = lu[(col, c)];
                lu[(col, c)] = lu[(best, c)];
                lu[(best, c)] = tmp;
            }
            for c in 0..x.cols {
                let tmp = x[(col, c)];
                x[(col, c)] = x[(best, c)];
                x[(best, c)] = tmp;
            }
        }
        max_pivot = max_pivot.max(best_mag);
        min_pivot = min_pivot.min(best_mag);
        let pivot = lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] / pivot;
            if factor == C64::new(0.0, 0.0) {
                continue;
            }
            lu[(r, col)] = factor;
            for c in col + 1..n {
                let upper = lu[(col, c)];
                lu[(r, c)] -= factor * upper;
            }
            for c in 0..x.cols {
                let upper = x[(col, c)];
                x[(r, c)] -= factor * upper;
            }
        }
    }
    if max_pivot / min_pivot > 1e12 {
        return Err(Error::Numerical(format!(
            "ill-conditioned system (pivot spread {:.3e})",
            max_pivot / min_pivot
        )));
    }
    // Back substitution.
    for col in (0..n).rev() {
        let pivot = lu[(col, col)];
        for c in 0..x.cols {
            let mut acc = x[(col, c)];
            for k in col + 1..n {
                acc -= lu[(col, k)] * x[(k, c)];
            }
            x[(col, c)] = acc / pivot;
        }
    }
    Ok(x)
}

/// Cholesky factor `L` (lower triangular, `A = L L^H`) of a Hermitian
/// positive semidefinite matrix.
///
/// Pivots within `tol` of zero are treated as exactly zero (semidefinite
/// directions); pivots below `-tol` reject the matrix as not PSD.
pub fn cholesky_psd(a: &CMat, tol: f64) -> Result<CMat> {
    if a.rows != a.cols {
        return Err(Error::Dimension("cholesky requires a square matrix".into()));
    }
    let n = a.rows;
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d < -tol {
            return Err(Error::Numerical(format!(
                "matrix is not positive semidefinite (pivot {d:.3e})"
            )));
        }
        if d <= tol {
            continue; // semidefinite direction, leave the column zero
        }
        let dj = d.sqrt();
        l[(j, j)] = C64::new(dj, 0.0);
        for i in j + 1..n {
            let mut acc = a[(i, j)];
            for k in 0..j {
                let ljk = l[(j, k)].conj();
                acc -= l[(i, k)] * ljk;
            }
            l[(i, j)] = acc / dj;
        }
    }
    Ok(l)
}
