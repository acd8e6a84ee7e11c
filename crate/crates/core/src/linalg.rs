//! Dense eigen/SVD helpers over `ndarray` matrices, backed by nalgebra.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

fn to_nalgebra(a: ArrayView2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending algebraic
/// order and unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

pub fn symmetric_eigen(a: ArrayView2<f64>) -> Result<SymmetricEigen> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::ShapeMismatch(format!("eigen of non-square {r} x {c}")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in eigen input".into()));
    }
    // Symmetrize to guard against round-off asymmetry in callers.
    let sym = Array2::from_shape_fn((r, r), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = nalgebra::SymmetricEigen::new(to_nalgebra(sym.view()));
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((r, r), |(i, k)| eig.eigenvectors[(i, order[k])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Leading `k` singular triplets: `U` (m x k), singular values, `V^T` (k x n).
pub struct TruncatedSvd {
    pub u: Array2<f64>,
    pub s: Vec<f64>,
    pub vt: Array2<f64>,
}

pub fn truncated_svd(a: ArrayView2<f64>, k: usize) -> Result<TruncatedSvd> {
    let (m, n) = a.dim();
    if k > m.min(n) {
        return Err(Error::RankTooLarge { p: k, max: m.min(n) });
    }
    let svd = nalgebra::SVD::try_new(to_nalgebra(a), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(vt)) => (from_nalgebra(u), from_nalgebra(vt)),
        _ => return Err(Error::Numerical("SVD factors missing".into())),
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    order.truncate(k);
    Ok(TruncatedSvd {
        u: u.select(Axis(1), &order),
        s: order.iter().map(|&i| svd.singular_values[i]).collect(),
        vt: vt.select(Axis(0), &order),
    })
}

pub fn column_means(a: ArrayView2<f64>) -> Array1<f64> {
    if a.nrows() == 0 {
        return Array1::zeros(a.ncols());
    }
    a.mean_axis(Axis(0)).expect("non-empty rows")
}

/// Sample covariance of the rows of `a` (divisor `rows - 1`), centered on the
/// column means. Fewer than two rows give the zero matrix.
pub fn covariance(a: ArrayView2<f64>) -> Array2<f64> {
    let (m, c) = a.dim();
    if m < 2 {
        return Array2::zeros((c, c));
    }
    let centered = &a - &column_means(a);
    centered.t().dot(&centered) / (m as f64 - 1.0)
}
