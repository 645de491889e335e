//! Dense vectors and matrices, orthonormalization, sphere sampling and
//! seeded random streams.
//!
//! Everything here is deliberately small: the optimizers only need
//! matrix-vector products, a Gram–Schmidt pass over a handful of Jacobian
//! columns, and a symmetric eigensolver for matrices of latent dimension.

mod eigen;
mod gram_schmidt;
mod rng;

use std::ops::{Deref, Index};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use gram_schmidt::{gram_schmidt, Orthonormalized};
pub use rng::{purpose, RngStream};

/// A real vector of positive dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    /// Builds a vector, rejecting empty or non-finite data.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("vector dimension must be positive"));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("vector entry {v} is not finite")));
        }
        Ok(DenseVector(data))
    }

    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty());
        DenseVector(data)
    }

    pub fn zeros(dim: usize) -> Self {
        DenseVector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        DenseVector(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        dot(&self.0, &other.0)
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &DenseVector) -> Result<()> {
        check_dims(self.dim(), x.dim())?;
        axpy_slice(alpha, &x.0, &mut self.0);
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> DenseVector {
        DenseVector(self.0.iter().map(|v| alpha * v).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Row-major dense matrix. Zero-column matrices are allowed so that a fully
/// rank-deficient orthonormalization can be represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dims(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            check_dims(rows, c.len())?;
            for (i, v) in c.iter().enumerate() {
                data[i * cols + j] = *v;
            }
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `A v`.
    pub fn matvec(&self, v: &[f64]) -> Result<DenseVector> {
        check_dims(self.cols, v.len())?;
        Ok(DenseVector(
            (0..self.rows).map(|i| dot_unchecked(self.row(i), v)).collect(),
        ))
    }

    /// `Aᵀ v`.
    pub fn mat_t_vec(&self, v: &[f64]) -> Result<DenseVector> {
        check_dims(self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            axpy_slice(*vi, self.row(i), &mut out);
        }
        Ok(DenseVector(out))
    }

    /// `A B`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dims(self.cols, other.rows)?;
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a != 0.0 {
                    let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                    axpy_slice(a, other.row(k), dst);
                }
            }
        }
        Ok(out)
    }
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a.len(), b.len())?;
    Ok(dot_unchecked(a, b))
}

/// `y += alpha * x` on equal-length slices.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) -> Result<()> {
    check_dims(y.len(), x.len())?;
    axpy_slice(alpha, x, y);
    Ok(())
}

pub fn matvec(m: &DenseMatrix, v: &[f64]) -> Result<DenseVector> {
    m.matvec(v)
}

pub fn mat_t_vec(m: &DenseMatrix, v: &[f64]) -> Result<DenseVector> {
    m.mat_t_vec(v)
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy_slice(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot_unchecked(a, a).sqrt()
}

/// Uniform sample from the unit sphere in `dim` dimensions, drawn as a
/// normalized standard Gaussian vector.
pub fn sample_unit_sphere(dim: usize, rng: &RngStream) -> Result<DenseVector> {
    if dim == 0 {
        return Err(Error::invalid("sphere dimension must be at least 1"));
    }
    let mut g = rng.generator();
    loop {
        let v: Vec<f64> = (0..dim).map(|_| g.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-150 {
            return Ok(DenseVector(v.into_iter().map(|x| x / n).collect()));
        }
    }
}

/// `dim` i.i.d. standard normal values.
pub fn standard_normal_vec(dim: usize, rng: &RngStream) -> Vec<f64> {
    let mut g = rng.generator();
    (0..dim).map(|_| g.sample(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_axpy() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let mut y = vec![1.0, 1.0];
        axpy(2.0, &[1.0, -1.0], &mut y).unwrap();
        assert_eq!(y, vec![3.0, -1.0]);
        assert!(matches!(
            dot(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matvec_identity_and_diagonal() {
        let v = [0.3, -1.7, 2.5];
        assert_eq!(DenseMatrix::identity(3).matvec(&v).unwrap().as_slice(), &v);
        let d = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(d.matvec(&[1.0, 1.0]).unwrap().as_slice(), &[2.0, 3.0]);
        assert!(d.matvec(&[1.0]).is_err());
    }

    #[test]
    fn transpose_products_agree() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let v = [1.0, -2.0];
        assert_eq!(
            m.mat_t_vec(&v).unwrap(),
            m.transpose().matvec(&v).unwrap()
        );
        let p = m.matmul(&m.transpose()).unwrap();
        assert_eq!(p.as_slice(), &[14.0, 32.0, 32.0, 77.0]);
    }

    #[test]
    fn vector_rejects_bad_data() {
        assert!(DenseVector::new(vec![]).is_err());
        assert!(DenseVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(DenseVector::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn sphere_dim_one_is_sign() {
        for i in 0..20 {
            let s = sample_unit_sphere(1, &RngStream::new(i)).unwrap();
            assert!(s[0] == 1.0 || s[0] == -1.0);
        }
    }

    #[test]
    fn sphere_unit_norm() {
        for i in 0..50 {
            let s = sample_unit_sphere(5, &RngStream::new(7).derive(i)).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
        assert!(sample_unit_sphere(0, &RngStream::new(0)).is_err());
    }

    #[test]
    fn sphere_moments_dim3() {
        let root = RngStream::new(2024);
        let n = 100_000;
        let mut mean = [0.0; 3];
        let mut sq = 0.0;
        for i in 0..n {
            let s = sample_unit_sphere(3, &root.derive(i)).unwrap();
            for k in 0..3 {
                mean[k] += s[k] / n as f64;
            }
            sq += s[0] * s[0] / n as f64;
        }
        for m in mean {
            assert!(m.abs() < 0.02, "{m}");
        }
        assert!((sq - 1.0 / 3.0).abs() < 0.02, "{sq}");
    }

    #[test]
    fn sphere_sequences_reproducible() {
        let a: Vec<_> = (0..10)
            .map(|i| sample_unit_sphere(4, &RngStream::new(5).derive(i)).unwrap())
            .collect();
        let b: Vec<_> = (0..10)
            .map(|i| sample_unit_sphere(4, &RngStream::new(5).derive(i)).unwrap())
            .collect();
        assert_eq!(a, b);
    }
}
