//! Minimal dense linear algebra: a row-major matrix and a Cholesky
//! factorization with an explicit pivot-rejection threshold.
//!
//! The systems solved here are small (a few hundred columns), symmetric and
//! positive definite on valid inputs. Rolling the factorization by hand keeps
//! the singularity contract explicit: a pivot below [`PIVOT_REL_TOL`] times
//! the largest diagonal entry of the input is rejected as singular rather
//! than propagated as garbage.

use crate::error::{Error, Result};

/// Relative pivot threshold for the Cholesky factorization.
pub const PIVOT_REL_TOL: f64 = 1e-10;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { nrows, ncols, data }
    }

    /// Builds from a flat row-major buffer.
    pub fn from_vec(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `A v` for a length-`ncols` vector.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.ncols);
        (0..self.nrows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ v` for a length-`nrows` vector.
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let row = self.row(i);
            let vi = v[i];
            for (o, &r) in out.iter_mut().zip(row) {
                *o += vi * r;
            }
        }
        out
    }

    /// `AᵀA`, accumulated row by row (never materializes `Aᵀ`).
    pub fn gram(&self) -> Matrix {
        let d = self.ncols;
        let mut g = Matrix::zeros(d, d);
        for i in 0..self.nrows {
            let row = self.row(i);
            for a in 0..d {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                let grow = &mut g.data[a * d..(a + 1) * d];
                for b in a..d {
                    grow[b] += ra * row[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g.data[a * d + b] = g.data[b * d + a];
            }
        }
        g
    }

    /// `self + s * other`, elementwise.
    pub fn add_scaled(&self, s: f64, other: &Matrix) -> Matrix {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + s * b)
            .collect();
        Matrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
    condition_estimate: f64,
}

impl Cholesky {
    /// Factors `g = L Lᵀ`. Rejects a pivot below `PIVOT_REL_TOL` times the
    /// largest diagonal entry of `g` as [`Error::SingularSystem`].
    pub fn factor(g: &Matrix) -> Result<Self> {
        assert_eq!(g.nrows(), g.ncols(), "cholesky needs a square matrix");
        let d = g.nrows();
        let max_diag = (0..d).map(|j| g.get(j, j)).fold(0.0_f64, f64::max);
        let threshold = PIVOT_REL_TOL * max_diag;
        let mut l = Matrix::zeros(d, d);
        for j in 0..d {
            let mut pivot = g.get(j, j);
            for m in 0..j {
                let ljm = l.get(j, m);
                pivot -= ljm * ljm;
            }
            if !(pivot > threshold) {
                return Err(Error::SingularSystem { pivot, threshold });
            }
            let ljj = pivot.sqrt();
            l.set(j, j, ljj);
            for i in (j + 1)..d {
                let mut s = g.get(i, j);
                for m in 0..j {
                    s -= l.get(i, m) * l.get(j, m);
                }
                l.set(i, j, s / ljj);
            }
        }
        let mut lmin = f64::INFINITY;
        let mut lmax = 0.0_f64;
        for j in 0..d {
            let v = l.get(j, j);
            lmin = lmin.min(v);
            lmax = lmax.max(v);
        }
        let condition_estimate = (lmax / lmin) * (lmax / lmin);
        Ok(Self {
            l,
            condition_estimate,
        })
    }

    /// Cheap condition-number indicator: squared ratio of extreme pivots.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let d = self.l.nrows();
        assert_eq!(x.len(), d);
        // forward: L c = b
        for i in 0..d {
            let mut s = x[i];
            let row = self.l.row(i);
            for (m, xm) in x[..i].iter().enumerate() {
                s -= row[m] * xm;
            }
            x[i] = s / row[i];
        }
        // backward: Lᵀ y = c
        for i in (0..d).rev() {
            let mut s = x[i];
            for m in (i + 1)..d {
                s -= self.l.get(m, i) * x[m];
            }
            x[i] = s / self.l.get(i, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let g = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let chol = Cholesky::factor(&g).unwrap();
        let x = chol.solve(&[1.0, 2.0]);
        // exact solution (1/11, 7/11)
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_rank_deficient() {
        let g = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        match Cholesky::factor(&g) {
            Err(Error::SingularSystem { .. }) => {}
            other => panic!("expected SingularSystem, got {other:?}"),
        }
    }

    #[test]
    fn gram_matches_direct_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let g = a.gram();
        assert_eq!(g.get(0, 0), 35.0);
        assert_eq!(g.get(0, 1), 44.0);
        assert_eq!(g.get(1, 0), 44.0);
        assert_eq!(g.get(1, 1), 56.0);
    }

    #[test]
    fn transpose_matvec() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(a.t_matvec(&[1.0, 1.0]), vec![4.0, 6.0]);
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![3.0, 7.0]);
    }
}
