use super::{axpy_slice, dot_unchecked, norm, DenseMatrix};

/// Relative residual below which a column is treated as dependent.
const REJECT_TOL: f64 = 1e-10;
const NORM_FLOOR: f64 = 1e-300;

/// Result of orthonormalizing the columns of a `d × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Orthonormalized {
    /// `d × rank` matrix with orthonormal columns.
    pub q: DenseMatrix,
    /// Number of numerically independent columns retained.
    pub rank: usize,
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
///
/// A column is rejected when its residual after both passes is below
/// `1e-10 × max(‖column‖, 1e-300)`. An all-zero input yields `rank == 0` and a
/// `d × 0` matrix; callers pick their own fallback.
pub fn gram_schmidt(m: &DenseMatrix) -> Orthonormalized {
    let d = m.rows();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let original = m.column(j);
        let scale = norm(&original).max(NORM_FLOOR);
        let mut v = original;
        for _ in 0..2 {
            for q in &basis {
                let c = dot_unchecked(q, &v);
                axpy_slice(-c, q, &mut v);
            }
        }
        let r = norm(&v);
        if r < REJECT_TOL * scale || r == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= r);
        basis.push(v);
    }
    let rank = basis.len();
    let q = DenseMatrix::from_columns(d, &basis).expect("columns have d rows");
    Orthonormalized { q, rank }
}
