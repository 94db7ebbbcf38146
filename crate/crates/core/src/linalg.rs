//! Small complex-matrix helpers shared by the solver, precoder and metrics.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `M×K` overall precoding matrix `V`; column `k` is `v_k = sqrt(p_k) w_k`.
pub type PrecodingMatrix = DMatrix<Complex64>;

pub(crate) const POWER_ITERATIONS: usize = 50;
pub(crate) const POWER_ITERATION_RTOL: f64 = 1e-10;

pub(crate) fn column_norms(v: &DMatrix<Complex64>) -> Vec<f64> {
    v.column_iter().map(|c| c.norm()).collect()
}

/// Sum of the column Euclidean norms.
pub fn l21_norm(v: &DMatrix<Complex64>) -> f64 {
    v.column_iter().map(|c| c.norm()).sum()
}

/// `‖V‖_{2,0}`: columns with at least one nonzero entry, compared exactly.
pub fn nonzero_columns(v: &DMatrix<Complex64>) -> usize {
    v.column_iter()
        .filter(|c| c.iter().any(|z| z.re != 0.0 || z.im != 0.0))
        .count()
}

pub(crate) fn conj(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.map(|z| z.conj())
}

pub(crate) fn all_finite(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub(crate) fn check_same_shape(
    expected: (usize, usize),
    found: (usize, usize),
) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        });
    }
    Ok(())
}

/// `HᵀV − βI_K`.
pub(crate) fn residual(h: &DMatrix<Complex64>, v: &DMatrix<Complex64>, beta: f64) -> DMatrix<Complex64> {
    let mut r = h.tr_mul(v);
    for k in 0..r.nrows().min(r.ncols()) {
        r[(k, k)] -= Complex64::new(beta, 0.0);
    }
    r
}

/// Largest squared singular value of `h` by power iteration on `HᴴH`.
///
/// Stops after [`POWER_ITERATIONS`] steps or once the Rayleigh quotient moves
/// by less than [`POWER_ITERATION_RTOL`] relative. The result is a lower bound
/// on the true value.
pub(crate) fn sigma_max_sq(h: &DMatrix<Complex64>) -> f64 {
    let k = h.ncols();
    let mut x = DVector::from_fn(k, |i, _| {
        Complex64::new(1.0, 0.5 * ((i + 1) as f64).sin())
    });
    x /= Complex64::new(x.norm(), 0.0);
    let mut estimate = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let hx = h * &x;
        let next = hx.norm_squared();
        let y = h.ad_mul(&hx);
        let ny = y.norm();
        if ny == 0.0 {
            return next;
        }
        x = y / Complex64::new(ny, 0.0);
        let done = (next - estimate).abs() <= POWER_ITERATION_RTOL * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn power_iteration_diag() {
        let h = DMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)]);
        assert!((sigma_max_sq(&h) - 9.0).abs() < 1e-8);
    }

    #[test]
    fn power_iteration_zero_matrix() {
        let h = DMatrix::<Complex64>::zeros(3, 2);
        assert_eq!(sigma_max_sq(&h), 0.0);
    }

    #[test]
    fn nonzero_columns_counts_exact_zeros() {
        let mut v = DMatrix::<Complex64>::zeros(2, 3);
        v[(1, 0)] = c(1e-300, 0.0);
        v[(0, 2)] = c(0.0, -2.0);
        assert_eq!(nonzero_columns(&v), 2);
        assert!((l21_norm(&v) - (1e-300 + 2.0)).abs() < 1e-15);
    }

    #[test]
    fn residual_subtracts_scaled_identity() {
        let h = DMatrix::from_element(2, 2, c(1.0, 0.0));
        let v = DMatrix::<Complex64>::zeros(2, 2);
        let r = residual(&h, &v, 2.0);
        assert_eq!(r[(0, 0)], c(-2.0, 0.0));
        assert_eq!(r[(0, 1)], c(0.0, 0.0));
    }
}
