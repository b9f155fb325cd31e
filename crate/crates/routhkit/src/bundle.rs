//! Trivial principal bundles `M = S × G` with a principal connection.
//!
//! The standard frame is `X_i = ∂/∂x^i − Λ^a_i ∂/∂θ^a` together with the
//! fundamental fields `Ẽ_a = K^b_a ∂/∂θ^b`. Quasi-velocities `(v^i, v^a)` are
//! the components of a tangent vector in this frame.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RouthError};
use crate::lie::GroupChart;
use crate::linalg::fd_lie_bracket;

/// `(x, θ) ↦ Λ^a_i(x, θ)` as an `m × n` matrix.
pub type LambdaFn = dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync;

/// Exact curvature rule, returning `R^a_ij` in the layout of [`Curvature`].
pub type CurvatureFn = dyn Fn(&[f64], &[f64]) -> Curvature + Send + Sync;

/// Principal connection on `S × G`.
#[derive(Clone)]
pub struct BundleConnection {
    base_dim: usize,
    group: Arc<dyn GroupChart>,
    lambda: Arc<LambdaFn>,
    curvature_rule: Option<Arc<CurvatureFn>>,
}

impl std::fmt::Debug for BundleConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BundleConnection")
            .field("base_dim", &self.base_dim)
            .field("group", &self.group.name())
            .field("exact_curvature", &self.curvature_rule.is_some())
            .finish()
    }
}

impl BundleConnection {
    pub fn new(base_dim: usize, group: Arc<dyn GroupChart>, lambda: Arc<LambdaFn>) -> Self {
        Self { base_dim, group, lambda, curvature_rule: None }
    }

    /// The trivial connection `Λ = 0`.
    pub fn trivial(base_dim: usize, group: Arc<dyn GroupChart>) -> Self {
        let m = group.dim();
        Self::new(base_dim, group, Arc::new(move |_, _| DMatrix::zeros(m, base_dim)))
    }

    /// Register an exact curvature rule, preferred over finite differences.
    pub fn with_curvature(mut self, rule: Arc<CurvatureFn>) -> Self {
        self.curvature_rule = Some(rule);
        self
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn group_dim(&self) -> usize {
        self.group.dim()
    }

    pub fn group(&self) -> &Arc<dyn GroupChart> {
        &self.group
    }

    pub fn lambda(&self, x: &[f64], theta: &[f64]) -> DMatrix<f64> {
        (self.lambda)(x, theta)
    }

    /// Coordinate components of `X_i` at `q = (x, θ)`.
    pub fn horizontal_field(&self, i: usize, q: &[f64]) -> Vec<f64> {
        let n = self.base_dim;
        let lam = self.lambda(&q[..n], &q[n..]);
        let mut out = vec![0.0; q.len()];
        out[i] = 1.0;
        for a in 0..self.group_dim() {
            out[n + a] = -lam[(a, i)];
        }
        out
    }

    /// Coordinate components of `Ẽ_a` at `q = (x, θ)`.
    pub fn fundamental_field(&self, a: usize, q: &[f64]) -> Vec<f64> {
        let n = self.base_dim;
        let k = self.group.fundamental(&q[n..]);
        let mut out = vec![0.0; q.len()];
        for b in 0..self.group_dim() {
            out[n + b] = k[(b, a)];
        }
        out
    }

    fn check_dims(&self, x: &[f64], theta: &[f64]) -> Result<()> {
        if x.len() != self.base_dim || theta.len() != self.group_dim() {
            return Err(RouthError::Argument(format!(
                "expected (x, θ) of dimensions ({}, {}), got ({}, {})",
                self.base_dim,
                self.group_dim(),
                x.len(),
                theta.len()
            )));
        }
        Ok(())
    }

    /// Worst component of `[Ẽ_a, X_i]` at the point; zero for a principal
    /// connection.
    pub fn invariance_defect(&self, x: &[f64], theta: &[f64]) -> f64 {
        let q: Vec<f64> = x.iter().chain(theta).copied().collect();
        let mut worst = 0.0f64;
        for a in 0..self.group_dim() {
            for i in 0..self.base_dim {
                let ea = |p: &[f64]| self.fundamental_field(a, p);
                let xi = |p: &[f64]| self.horizontal_field(i, p);
                let b = fd_lie_bracket(&ea, &xi, &q);
                worst = b.iter().fold(worst, |w, v| w.max(v.abs()));
            }
        }
        worst
    }
}

/// Curvature components `R^a_ij` with `[X_i, X_j] = R^a_ij Ẽ_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl Curvature {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self { m, n, data: vec![0.0; m * n * n] }
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, j: usize) -> f64 {
        self.data[(a * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, a: usize, i: usize, j: usize, v: f64) {
        self.data[(a * self.n + i) * self.n + j] = v;
    }

    pub fn group_dim(&self) -> usize {
        self.m
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    /// `μ_a R^a_ij v^j` for each `i`.
    pub fn contract(&self, mu: &[f64], v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut s = 0.0;
                for a in 0..self.m {
                    for j in 0..self.n {
                        s += mu[a] * self.get(a, i, j) * v[j];
                    }
                }
                s
            })
            .collect()
    }

    /// Worst `|R^a_ij + R^a_ji|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.m {
            for i in 0..self.n {
                for j in 0..self.n {
                    worst = worst.max((self.get(a, i, j) + self.get(a, j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |w, v| w.max(v.abs()))
    }
}

/// Curvature of the connection at `(x, θ)`. Uses the registered exact rule
/// when present, otherwise central differences of the frame coefficients
/// followed by the solve `K R_ij = [X_i, X_j]^θ`.
pub fn curvature(conn: &BundleConnection, x: &[f64], theta: &[f64]) -> Result<Curvature> {
    conn.check_dims(x, theta)?;
    conn.group.check_domain(theta)?;
    if let Some(rule) = &conn.curvature_rule {
        return Ok(rule(x, theta));
    }
    let n = conn.base_dim;
    let m = conn.group_dim();
    let mut r = Curvature::zeros(m, n);
    if n < 2 {
        return Ok(r);
    }
    let k = conn.group.fundamental(theta);
    let k_lu = k.clone().lu();
    let q: Vec<f64> = x.iter().chain(theta).copied().collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let xi = |p: &[f64]| conn.horizontal_field(i, p);
            let xj = |p: &[f64]| conn.horizontal_field(j, p);
            let br = fd_lie_bracket(&xi, &xj, &q);
            let rhs = DVector::from_column_slice(&br[n..]);
            let sol = k_lu
                .solve(&rhs)
                .ok_or_else(|| RouthError::Chart("fundamental-field matrix K is singular".into()))?;
            for a in 0..m {
                r.set(a, i, j, sol[a]);
                r.set(a, j, i, -sol[a]);
            }
        }
    }
    Ok(r)
}

/// A point of `TM` in quasi-velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub v_base: Vec<f64>,
    pub v_group: Vec<f64>,
}

impl FullState {
    pub fn new(x: Vec<f64>, theta: Vec<f64>, v_base: Vec<f64>, v_group: Vec<f64>) -> Result<Self> {
        if x.len() != v_base.len() || theta.len() != v_group.len() {
            return Err(RouthError::Argument("state dimensions are inconsistent".into()));
        }
        Ok(Self { x, theta, v_base, v_group })
    }

    pub fn base_dim(&self) -> usize {
        self.x.len()
    }

    pub fn group_dim(&self) -> usize {
        self.theta.len()
    }

    /// `q = (x, θ)`.
    pub fn q(&self) -> Vec<f64> {
        self.x.iter().chain(&self.theta).copied().collect()
    }

    /// `v = (v^i, v^a)`.
    pub fn v(&self) -> Vec<f64> {
        self.v_base.iter().chain(&self.v_group).copied().collect()
    }

    /// Flat layout `(x, θ, v^i, v^a)` used by the integrators.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.q();
        out.extend_from_slice(&self.v_base);
        out.extend_from_slice(&self.v_group);
        out
    }

    pub fn from_slice(n: usize, m: usize, s: &[f64]) -> Result<Self> {
        if s.len() != 2 * (n + m) {
            return Err(RouthError::Argument(format!(
                "flat state has length {}, expected {}",
                s.len(),
                2 * (n + m)
            )));
        }
        Ok(Self {
            x: s[..n].to_vec(),
            theta: s[n..n + m].to_vec(),
            v_base: s[n + m..2 * n + m].to_vec(),
            v_group: s[2 * n + m..].to_vec(),
        })
    }

    /// Worst componentwise distance between two states.
    pub fn max_abs_diff(&self, other: &FullState) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .fold(0.0f64, |w, (a, b)| w.max((a - b).abs()))
    }
}

/// `v^i = ẋ^i` and `K v_group = θ̇ + Λ ẋ`.
pub fn to_quasi_velocities(
    conn: &BundleConnection,
    x: &[f64],
    theta: &[f64],
    xdot: &[f64],
    thetadot: &[f64],
) -> Result<FullState> {
    conn.check_dims(x, theta)?;
    if xdot.len() != x.len() || thetadot.len() != theta.len() {
        return Err(RouthError::Argument("velocity dimensions are inconsistent".into()));
    }
    conn.group.check_domain(theta)?;
    let k = conn.group.fundamental(theta);
    let lam = conn.lambda(x, theta);
    let rhs = DVector::from_column_slice(thetadot) + &lam * DVector::from_column_slice(xdot);
    let vg = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| RouthError::Chart("fundamental-field matrix K is singular".into()))?;
    FullState::new(x.to_vec(), theta.to_vec(), xdot.to_vec(), vg.iter().copied().collect())
}

/// `ẋ = v^i` and `θ̇ = K v_group − Λ v_base`.
pub fn from_quasi_velocities(conn: &BundleConnection, state: &FullState) -> (Vec<f64>, Vec<f64>) {
    let thetadot = theta_rate(conn, &state.x, &state.theta, &state.v_base, &state.v_group);
    (state.v_base.clone(), thetadot)
}

/// `θ̇ = K v_group − Λ v_base`.
pub fn theta_rate(conn: &BundleConnection, x: &[f64], theta: &[f64], vb: &[f64], vg: &[f64]) -> Vec<f64> {
    let k = conn.group.fundamental(theta);
    let lam = conn.lambda(x, theta);
    let td = k * DVector::from_column_slice(vg) - lam * DVector::from_column_slice(vb);
    td.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{AbelianChart, Se2Chart};

    fn abelian_conn() -> BundleConnection {
        // Λ^0_0 = x1², Λ^0_1 = x0 x1.
        BundleConnection::new(
            2,
            Arc::new(AbelianChart::new(1)),
            Arc::new(|x: &[f64], _: &[f64]| DMatrix::from_row_slice(1, 2, &[x[1] * x[1], x[0] * x[1]])),
        )
    }

    #[test]
    fn trivial_connection_is_flat() {
        let c = BundleConnection::trivial(2, Arc::new(Se2Chart::new()));
        let r = curvature(&c, &[0.2, -0.4], &[0.1, 0.5, 1.0]).unwrap();
        assert!(r.max_abs() < 1e-10);
    }

    #[test]
    fn abelian_curvature_matches_formula() {
        let c = abelian_conn();
        let x = [0.7, -0.3];
        let r = curvature(&c, &x, &[0.0]).unwrap();
        // R^a_01 = ∂Λ_0/∂x1 − ∂Λ_1/∂x0 = 2 x1 − x1 = x1
        assert!((r.get(0, 0, 1) - x[1]).abs() < 1e-9);
        assert!(r.antisymmetry_defect() < 1e-12);
    }

    #[test]
    fn quasi_round_trip_se2() {
        let c = BundleConnection::new(
            1,
            Arc::new(Se2Chart::new()),
            Arc::new(|x: &[f64], _: &[f64]| DMatrix::from_column_slice(3, 1, &[x[0], 0.5, -x[0]])),
        );
        let (x, th, xd, thd) = ([0.3], [0.1, -0.2, 0.9], [1.2], [0.4, -0.5, 0.25]);
        let s = to_quasi_velocities(&c, &x, &th, &xd, &thd).unwrap();
        let (xd2, thd2) = from_quasi_velocities(&c, &s);
        assert!((xd2[0] - xd[0]).abs() < 1e-15);
        for k in 0..3 {
            assert!((thd2[k] - thd[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_state_round_trip() {
        let s = FullState::new(vec![1.0], vec![2.0, 3.0], vec![4.0], vec![5.0, 6.0]).unwrap();
        assert_eq!(FullState::from_slice(1, 2, &s.to_vec()).unwrap(), s);
        assert!(FullState::from_slice(1, 2, &[0.0; 5]).is_err());
    }

    #[test]
    fn abelian_connection_is_invariant() {
        let c = abelian_conn();
        assert!(c.invariance_defect(&[0.2, 0.4], &[1.0]) < 1e-9);
    }
}
