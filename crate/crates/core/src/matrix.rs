//! Row-major dense matrices and the thin SVD used by every thresholding step.

use std::fmt;
use std::ops::{Index, IndexMut};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self as faer_svd, ComputeSvdVectors};
use faer::diag::Diag;
use faer::{Mat, Par};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::thresholding::SingularSpectrum;

/// Dense real matrix stored row-major in a flat `Vec<f64>`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                format!("{} entries for {rows}x{cols}", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(
                    format!("row {i} of length {cols}"),
                    format!("length {}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// `rows x cols` matrix with `diag` on the main diagonal.
    pub fn from_diag(rows: usize, cols: usize, diag: &[f64]) -> Result<Self> {
        if diag.len() > rows.min(cols) {
            return Err(Error::shape(
                format!("at most {} diagonal entries", rows.min(cols)),
                diag.len(),
            ));
        }
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Frobenius inner product `<self, other>`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// `self + alpha * other`, in place.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `||self - other||_F`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        self.matmul_with(rhs, Execution::Sequential)
    }

    /// Matrix product, rows distributed according to `exec`.
    pub fn matmul_with(&self, rhs: &Self, exec: Execution) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                format!("rhs with {} rows", self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        let inner = self.cols;
        exec.for_each_row(&mut out.data, rhs.cols, |i, out_row| {
            let lhs_row = &self.data[i * inner..(i + 1) * inner];
            for (k, &l) in lhs_row.iter().enumerate() {
                if l == 0.0 {
                    continue;
                }
                for (o, r) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += l * r;
                }
            }
        });
        Ok(out)
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    /// Thin SVD `self = U diag(s) V^T` with `min(m, n)` singular values,
    /// sorted non-increasing.
    pub fn svd(&self) -> Result<Svd> {
        let (m, n) = self.shape();
        let k = m.min(n);
        if !self.is_finite() {
            return Err(Error::Numerical("SVD input contains non-finite entries".into()));
        }
        let mut s = Diag::<f64>::zeros(k);
        let mut u = Mat::<f64>::zeros(m, k);
        let mut v = Mat::<f64>::zeros(n, k);
        if k > 0 {
            let par = Par::Seq;
            let req = faer_svd::svd_scratch::<f64>(
                m,
                n,
                ComputeSvdVectors::Thin,
                ComputeSvdVectors::Thin,
                par,
                Default::default(),
            );
            let mut buf = MemBuffer::new(req);
            faer_svd::svd(
                self.to_faer().as_ref(),
                s.as_mut(),
                Some(u.as_mut()),
                Some(v.as_mut()),
                par,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
        }
        let values = (0..k).map(|i| s.column_vector()[i].max(0.0)).collect();
        Ok(Svd {
            u: Self::from_fn(m, k, |i, j| u[(i, j)]),
            s: SingularSpectrum::new(values)?,
            v: Self::from_fn(n, k, |i, j| v[(i, j)]),
        })
    }

    /// Singular values only, sorted non-increasing.
    pub fn singular_values(&self) -> Result<SingularSpectrum> {
        let (m, n) = self.shape();
        let k = m.min(n);
        if !self.is_finite() {
            return Err(Error::Numerical("SVD input contains non-finite entries".into()));
        }
        let mut s = Diag::<f64>::zeros(k);
        if k > 0 {
            let par = Par::Seq;
            let req = faer_svd::svd_scratch::<f64>(
                m,
                n,
                ComputeSvdVectors::No,
                ComputeSvdVectors::No,
                par,
                Default::default(),
            );
            let mut buf = MemBuffer::new(req);
            faer_svd::svd(
                self.to_faer().as_ref(),
                s.as_mut(),
                None,
                None,
                par,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
        }
        SingularSpectrum::new((0..k).map(|i| s.column_vector()[i].max(0.0)).collect())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            let row = self.row(i);
            let shown: Vec<String> = row.iter().take(8).map(|v| format!("{v:.6}")).collect();
            let more = if self.cols > 8 { ", ..." } else { "" };
            writeln!(f, "  [{}{more}]", shown.join(", "))?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

/// Thin singular value decomposition: `U` is `m x k`, `V` is `n x k`,
/// `k = min(m, n)`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: SingularSpectrum,
    pub v: DenseMatrix,
}

impl Svd {
    /// `U diag(weights) V^T`. Columns with a zero weight are skipped, so
    /// the cost scales with the number of retained singular values.
    pub fn reconstruct(&self, weights: &[f64], exec: Execution) -> Result<DenseMatrix> {
        let k = self.s.len();
        if weights.len() != k {
            return Err(Error::shape(format!("{k} weights"), weights.len()));
        }
        let (m, n) = (self.u.rows(), self.v.rows());
        let active: Vec<usize> = (0..k).filter(|&i| weights[i] != 0.0).collect();
        // V^T restricted to the active columns, stored row-major for contiguous axpys.
        let vt: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| (0..n).map(|q| self.v[(q, i)]).collect())
            .collect();
        let mut out = DenseMatrix::zeros(m, n);
        exec.for_each_row(&mut out.data, n, |p, row| {
            for (slot, &i) in active.iter().enumerate() {
                let c = self.u[(p, i)] * weights[i];
                for (o, v) in row.iter_mut().zip(&vt[slot]) {
                    *o += c * v;
                }
            }
        });
        Ok(out)
    }
}
