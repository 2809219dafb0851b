use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Condition number above which a matrix is treated as singular.
pub(crate) const MAX_CONDITION: f64 = 1e12;

pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Inverse of a square matrix via SVD, refusing ill-conditioned input.
pub(crate) fn invert(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    assert!(m.is_square(), "invert needs a square matrix");
    let condition = condition_number(m);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::NonInvertible { condition });
    }
    m.clone().svd(true, true).pseudo_inverse(0.0).map_err(|_| Error::NonInvertible { condition })
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
