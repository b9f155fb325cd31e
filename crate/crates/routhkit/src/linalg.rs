//! Small dense helpers shared by the modules: conditioned solves, finite
//! differences and a pivoted inverse that works over dual numbers.

use nalgebra::{DMatrix, DVector};
use num_dual::DualNum;

use crate::error::{Result, RouthError};

/// Relative finite-difference step for first derivatives.
pub const FD_STEP_FIRST: f64 = 1e-5;
/// Relative finite-difference step for second derivatives.
pub const FD_STEP_SECOND: f64 = 1e-4;

/// Step for coordinate value `c`, scaled by `1 + |c|`.
pub fn fd_step(base: f64, c: f64) -> f64 {
    base * (1.0 + c.abs())
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a square matrix together with its 1-norm condition number.
///
/// Fails with a regularity error when the matrix is singular or its condition
/// number exceeds `max_cond`. Never falls back to a pseudo-inverse.
pub fn checked_inverse(
    m: &DMatrix<f64>,
    max_cond: f64,
    what: &'static str,
) -> Result<(DMatrix<f64>, f64)> {
    if m.nrows() != m.ncols() {
        return Err(RouthError::Argument(format!("{what}: matrix is not square")));
    }
    if m.nrows() == 0 {
        return Ok((DMatrix::zeros(0, 0), 1.0));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(RouthError::NonFinite(what.to_string()));
    }
    let inv = m
        .clone()
        .try_inverse()
        .ok_or(RouthError::Regularity { what, cond: f64::INFINITY })?;
    let cond = norm1(m) * norm1(&inv);
    if !cond.is_finite() || cond > max_cond {
        return Err(RouthError::Regularity { what, cond });
    }
    Ok((inv, cond))
}

/// Solve `m x = b` with the same regularity policy as [`checked_inverse`].
pub fn checked_solve(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    max_cond: f64,
    what: &'static str,
) -> Result<(DVector<f64>, f64)> {
    let (inv, cond) = checked_inverse(m, max_cond, what)?;
    Ok((inv * b, cond))
}

/// Central-difference Jacobian of `f` at `p`; column `k` is the derivative
/// along coordinate `k`.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64]) -> DMatrix<f64> {
    let f0 = f(p);
    let mut jac = DMatrix::zeros(f0.len(), p.len());
    let mut work = p.to_vec();
    for k in 0..p.len() {
        let h = fd_step(FD_STEP_FIRST, p[k]);
        work[k] = p[k] + h;
        let fp = f(&work);
        work[k] = p[k] - h;
        let fm = f(&work);
        work[k] = p[k];
        for r in 0..f0.len() {
            jac[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}

/// Finite-difference Lie bracket `[X, Y]` of two vector fields given by their
/// coordinate components.
pub fn fd_lie_bracket(
    xf: &dyn Fn(&[f64]) -> Vec<f64>,
    yf: &dyn Fn(&[f64]) -> Vec<f64>,
    p: &[f64],
) -> Vec<f64> {
    let xv = xf(p);
    let yv = yf(p);
    let jx = fd_jacobian(xf, p);
    let jy = fd_jacobian(yf, p);
    let xv = DVector::from_vec(xv);
    let yv = DVector::from_vec(yv);
    (jy * xv - jx * yv).iter().copied().collect()
}

/// Inverse of a row-major `n x n` matrix over any dual number type, by
/// Gauss-Jordan elimination with partial pivoting on the real parts.
pub fn generic_inverse<D: DualNum<Primitive = f64> + Copy>(a: &[D], n: usize) -> Option<Vec<D>> {
    let mut m = a.to_vec();
    let mut inv = vec![D::from(0.0); n * n];
    for i in 0..n {
        inv[i * n + i] = D::from(1.0);
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| {
            let ra = m[r * n + col].re().abs();
            let sa = m[s * n + col].re().abs();
            ra.partial_cmp(&sa).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot * n + col].re() == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
        }
        let d = m[col * n + col].recip();
        for k in 0..n {
            m[col * n + k] *= d;
            inv[col * n + k] *= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f.re() == 0.0 && f == D::from(0.0) {
                continue;
            }
            for k in 0..n {
                let mk = m[col * n + k];
                let ik = inv[col * n + k];
                m[r * n + k] -= f * mk;
                inv[r * n + k] -= f * ik;
            }
        }
    }
    Some(inv)
}

/// Row-major product `a (r x k) * b (k x c)` over dual numbers.
pub fn generic_matmul<D: DualNum<Primitive = f64> + Copy>(
    a: &[D],
    b: &[D],
    r: usize,
    k: usize,
    c: usize,
) -> Vec<D> {
    let mut out = vec![D::from(0.0); r * c];
    for i in 0..r {
        for j in 0..c {
            let mut s = D::from(0.0);
            for l in 0..k {
                s += a[i * k + l] * b[l * c + j];
            }
            out[i * c + j] = s;
        }
    }
    out
}

/// Row-major transpose.
pub fn generic_transpose<D: Copy>(a: &[D], r: usize, c: usize) -> Vec<D> {
    let mut out = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            out.push(a[i * c + j]);
        }
    }
    out
}

/// Convert a row-major slice to an nalgebra matrix.
pub fn to_dmatrix(a: &[f64], r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_dual::Dual64;

    #[test]
    fn generic_inverse_matches_nalgebra() {
        let a: [f64; 9] = [4.0, 1.0, 2.0, 0.5, 3.0, 1.0, 2.0, 0.0, 5.0];
        let inv = generic_inverse(&a, 3).unwrap();
        let ref_inv = DMatrix::from_row_slice(3, 3, &a).try_inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((inv[i * 3 + j] - ref_inv[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn generic_inverse_derivative_is_minus_inv_da_inv() {
        // d(A^-1) = -A^-1 dA A^-1 for A(s) = A0 + s E_01.
        let a0 = [2.0, 1.0, 0.0, 3.0];
        let a: Vec<Dual64> = a0
            .iter()
            .enumerate()
            .map(|(k, &v)| Dual64::new(v, if k == 1 { 1.0 } else { 0.0 }))
            .collect();
        let inv = generic_inverse(&a, 2).unwrap();
        let ai = DMatrix::from_row_slice(2, 2, &a0).try_inverse().unwrap();
        let e = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let d = -&ai * e * &ai;
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv[i * 2 + j].eps - d[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let err = checked_inverse(&m, 1e12, "test").unwrap_err();
        assert!(matches!(err, RouthError::Regularity { .. }));
    }

    #[test]
    fn bracket_of_coordinate_fields_vanishes() {
        let x = |_: &[f64]| vec![1.0, 0.0];
        let y = |_: &[f64]| vec![0.0, 1.0];
        let b = fd_lie_bracket(&x, &y, &[0.3, -0.2]);
        assert!(b.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn bracket_of_rotation_and_translation() {
        // [d/dx, -y d/dx + x d/dy] = d/dy
        let x = |_: &[f64]| vec![1.0, 0.0];
        let r = |p: &[f64]| vec![-p[1], p[0]];
        let b = fd_lie_bracket(&x, &r, &[0.7, 0.4]);
        assert!((b[0]).abs() < 1e-9 && (b[1] - 1.0).abs() < 1e-9);
    }
}
