use super::DenseMatrix;
use crate::error::{Error, Result};

/// Eigen-decomposition `A = V diag(λ) Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub vectors: DenseMatrix,
}

impl SymmetricEigen {
    /// Rebuilds `V diag(λ) Vᵀ`, optionally with modified eigenvalues.
    pub fn compose(&self, values: &[f64]) -> DenseMatrix {
        let n = self.values.len();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n)
                    .map(|k| self.vectors.get(i, k) * values[k] * self.vectors.get(j, k))
                    .sum();
                out.set(i, j, s);
            }
        }
        out
    }
}

/// Cyclic Jacobi eigensolver. Intended for the small latent-dimension
/// matrices used by the synthetic problems.
pub fn symmetric_eigen(m: &DenseMatrix) -> Result<SymmetricEigen> {
    let n = m.rows();
    if n != m.cols() {
        return Err(Error::invalid("eigensolver needs a square matrix"));
    }
    let mut a = m.clone();
    for i in 0..n {
        for j in 0..i {
            if (a.get(i, j) - a.get(j, i)).abs() > 1e-12 * (1.0 + a.get(i, j).abs()) {
                return Err(Error::invalid("eigensolver needs a symmetric matrix"));
            }
        }
    }
    let mut v = DenseMatrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        let scale: f64 = a.as_slice().iter().map(|x| x * x).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let values = (0..n).map(|i| a.get(i, i)).collect();
    Ok(SymmetricEigen { values, vectors: v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let m = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let e = symmetric_eigen(&m).unwrap();
        let mut vals = e.values.clone();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![-1.0, 3.0]);
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let m = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, -2.0, 0.5],
            vec![1.0, 2.0, 0.0, 1.0],
            vec![-2.0, 0.0, 3.0, -1.5],
            vec![0.5, 1.0, -1.5, -1.0],
        ])
        .unwrap();
        let e = symmetric_eigen(&m).unwrap();
        for k in 0..4 {
            let v = e.vectors.column(k);
            let av = m.matvec(&v).unwrap();
            for i in 0..4 {
                assert!((av[i] - e.values[k] * v[i]).abs() < 1e-10);
            }
        }
        let back = e.compose(&e.values);
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(symmetric_eigen(&m).is_err());
    }
}
