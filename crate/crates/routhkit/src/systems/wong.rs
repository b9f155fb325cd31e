//! Wong's equations for a particle in a Yang-Mills field, and the geodesic
//! Lagrangian on `S × G` whose Routh reduction produces them.
//!
//! The base metric is conformally constant, `g_ij = (1 + κ|x|²) g⁰_ij`, and
//! the gauge potential is affine, `γ^a_i(x) = γ⁰^a_i + Σ_k γ^a_{ik} x^k`.
//! The full Lagrangian in quasi-velocities is
//! `L = ½ g_ij v^i v^j + ½ h_ab v^a v^b` with the connection
//! `ω = ḣh⁻¹ + Ad_h γ(x) ẋ`, so `Λ = K 𝒜 γ` and `w = 𝒜⁻¹ v_group`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_dual::DualNum;

use crate::bundle::{BundleConnection, Curvature, FullState};
use crate::error::{Result, RouthError};
use crate::integrate::{rk4, Trajectory};
use crate::lagrangian::{LagrangianSystem, QuadraticCoefficients, QuadraticForm, QuadraticModel};
use crate::lie::{AbelianChart, GroupChart, LieAlgebra, So3Chart};
use crate::routh::{ChartSplit, MomentumLevel};

/// Structure group of a Wong system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WongGroup {
    /// SU(2)-type constants `C^c_ab = ε_abc`, charted as SO(3).
    So3,
    Abelian(usize),
}

impl WongGroup {
    pub fn chart(&self) -> Arc<dyn GroupChart> {
        match *self {
            WongGroup::So3 => Arc::new(So3Chart::new()),
            WongGroup::Abelian(m) => Arc::new(AbelianChart::new(m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WongSpec {
    pub group: WongGroup,
    /// `h_ab`, constant and symmetric positive-definite.
    pub h: DMatrix<f64>,
    /// `g⁰_ij`.
    pub base_metric: DMatrix<f64>,
    /// `κ`.
    pub conformal: f64,
    /// `γ⁰`, `m × n`.
    pub gauge_const: DMatrix<f64>,
    /// `gauge_linear[k][(a, i)] = ∂γ^a_i/∂x^k`.
    pub gauge_linear: Vec<DMatrix<f64>>,
}

impl WongSpec {
    pub fn base_dim(&self) -> usize {
        self.base_metric.nrows()
    }

    pub fn group_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn algebra(&self) -> LieAlgebra {
        match self.group {
            WongGroup::So3 => LieAlgebra::so3(),
            WongGroup::Abelian(m) => LieAlgebra::abelian(m),
        }
    }

    /// Worst violation of `h_ad C^d_bc + h_bd C^d_ac = 0`.
    pub fn skew_defect(&self) -> f64 {
        let alg = self.algebra();
        let m = self.group_dim();
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let v: f64 = (0..m)
                        .map(|d| self.h[(a, d)] * alg.structure(d, b, c) + self.h[(b, d)] * alg.structure(d, a, c))
                        .sum();
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.base_dim();
        let m = self.group_dim();
        let gm = match self.group {
            WongGroup::So3 => 3,
            WongGroup::Abelian(k) => k,
        };
        if m != gm || self.h.ncols() != m {
            return Err(RouthError::Spec(format!("h_ab must be {gm} × {gm}")));
        }
        if self.base_metric.ncols() != n || n == 0 {
            return Err(RouthError::Spec("base metric must be square and nonempty".into()));
        }
        if self.gauge_const.shape() != (m, n)
            || self.gauge_linear.len() != n
            || self.gauge_linear.iter().any(|g| g.shape() != (m, n))
        {
            return Err(RouthError::Spec("gauge coefficients have the wrong shape".into()));
        }
        let all = self
            .h
            .iter()
            .chain(self.base_metric.iter())
            .chain(self.gauge_const.iter())
            .chain(self.gauge_linear.iter().flat_map(|g| g.iter()))
            .chain(std::iter::once(&self.conformal));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(RouthError::Spec("Wong coefficients must be finite".into()));
        }
        for (mat, what) in [(&self.h, "h_ab"), (&self.base_metric, "base metric")] {
            if (mat - mat.transpose()).amax() > 1e-12 || mat.clone().cholesky().is_none() {
                return Err(RouthError::Spec(format!("{what} must be symmetric positive-definite")));
            }
        }
        if self.conformal < 0.0 {
            return Err(RouthError::Spec("conformal factor coefficient must be nonnegative".into()));
        }
        let skew = self.skew_defect();
        if skew > 1e-12 {
            return Err(RouthError::Spec(format!("h_ab violates the skew condition (defect {skew:e})")));
        }
        Ok(())
    }

    fn conformal_factor<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> D {
        let r2 = x.iter().fold(D::from(0.0), |acc, &v| acc + v * v);
        D::from(1.0) + r2 * self.conformal
    }

    /// `g_ij(x)`.
    pub fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        &self.base_metric * self.conformal_factor(x)
    }

    /// `γ^a_i(x)`, `m × n`.
    pub fn gauge(&self, x: &[f64]) -> DMatrix<f64> {
        let mut g = self.gauge_const.clone();
        for (k, xk) in x.iter().enumerate() {
            g += &self.gauge_linear[k] * *xk;
        }
        g
    }

    /// `F^c_ij = ∂_j γ^c_i − ∂_i γ^c_j + C^c_ab γ^a_i γ^b_j`.
    pub fn field_strength(&self, x: &[f64]) -> Curvature {
        let n = self.base_dim();
        let m = self.group_dim();
        let alg = self.algebra();
        let g = self.gauge(x);
        let mut f = Curvature::zeros(m, n);
        for c in 0..m {
            for i in 0..n {
                for j in 0..n {
                    let mut v = self.gauge_linear[j][(c, i)] - self.gauge_linear[i][(c, j)];
                    for a in 0..m {
                        for b in 0..m {
                            v += alg.structure(c, a, b) * g[(a, i)] * g[(b, j)];
                        }
                    }
                    f.set(c, i, j, v);
                }
            }
        }
        f
    }

    /// Christoffel symbols, `gamma[i][j][k] = Γ^i_jk`.
    pub fn christoffel(&self, x: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let n = self.base_dim();
        let phi = self.conformal_factor(x);
        let dphi: Vec<f64> = x.iter().map(|v| 2.0 * self.conformal * v).collect();
        let g0inv = self.base_metric.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        // Γ^i_jk = (δ^i_k ∂_jφ + δ^i_j ∂_kφ − g0^{il} ∂_lφ g0_jk) / 2φ
        let grad_up = &g0inv * DVector::from_column_slice(&dphi);
        let mut out = vec![vec![vec![0.0; n]; n]; n];
        for (i, oi) in out.iter_mut().enumerate() {
            for j in 0..n {
                for k in 0..n {
                    let mut v = -grad_up[i] * self.base_metric[(j, k)];
                    if i == k {
                        v += dphi[j];
                    }
                    if i == j {
                        v += dphi[k];
                    }
                    oi[j][k] = v / (2.0 * phi);
                }
            }
        }
        out
    }
}

/// Wong's equations on the state `(x, ẋ, w)`:
/// `ẍ^i = −Γ^i_jk ẋ^j ẋ^k + g^{im} h_bc F^c_lm ẋ^l w^b` and
/// `ẇ^a = −γ^c_j C^a_bc ẋ^j w^b`.
pub fn wong_field(spec: &WongSpec, state: &[f64]) -> Result<Vec<f64>> {
    let n = spec.base_dim();
    let m = spec.group_dim();
    if state.len() != 2 * n + m {
        return Err(RouthError::Argument(format!("Wong state has length {}, expected {}", state.len(), 2 * n + m)));
    }
    let x = &state[..n];
    let xd = &state[n..2 * n];
    let w = &state[2 * n..];
    let g = spec.metric(x);
    let ginv = g
        .clone()
        .try_inverse()
        .filter(|gi| gi.iter().all(|v| v.is_finite()))
        .ok_or_else(|| RouthError::Spec(format!("base metric is singular at x = {x:?}")))?;
    let chr = spec.christoffel(x);
    let f = spec.field_strength(x);
    let hw = &spec.h * DVector::from_column_slice(w);
    // Force covector: h_bc F^c_lm ẋ^l w^b, indexed by m.
    let force = DVector::from_iterator(
        n,
        (0..n).map(|mm| (0..m).map(|c| hw[c] * (0..n).map(|l| f.get(c, l, mm) * xd[l]).sum::<f64>()).sum()),
    );
    let acc_force = ginv * force;
    let mut out = Vec::with_capacity(2 * n + m);
    out.extend_from_slice(xd);
    for i in 0..n {
        let mut a = acc_force[i];
        for j in 0..n {
            for k in 0..n {
                a -= chr[i][j][k] * xd[j] * xd[k];
            }
        }
        out.push(a);
    }
    let alg = spec.algebra();
    let gam = spec.gauge(x);
    for a in 0..m {
        let mut v = 0.0;
        for c in 0..m {
            let gc: f64 = (0..n).map(|j| gam[(c, j)] * xd[j]).sum();
            for b in 0..m {
                v -= gc * alg.structure(a, b, c) * w[b];
            }
        }
        out.push(v);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(RouthError::NonFinite("Wong field".into()));
    }
    Ok(out)
}

/// RK4 integration of [`wong_field`], with an `h_norm` diagnostic
/// `h_ab w^a w^b`.
pub fn integrate_wong(spec: &WongSpec, y0: &[f64], t0: f64, tf: f64, dt: f64) -> Result<Trajectory> {
    let mut traj = rk4(|_t, y: &[f64]| wong_field(spec, y), y0, t0, tf, dt)?;
    let n = spec.base_dim();
    let norms = traj
        .states
        .iter()
        .map(|y| {
            let w = DVector::from_column_slice(&y[2 * n..]);
            w.dot(&(&spec.h * &w))
        })
        .collect();
    traj.set_diagnostic("h_norm", norms)?;
    Ok(traj)
}

struct WongModel(Arc<WongSpec>);

impl QuadraticCoefficients for WongModel {
    fn dims(&self) -> (usize, usize) {
        (self.0.base_dim(), self.0.group_dim())
    }

    fn coefficients<D: DualNum<Primitive = f64> + Copy>(&self, q: &[D]) -> QuadraticForm<D> {
        let n = self.0.base_dim();
        let m = self.0.group_dim();
        let nn = n + m;
        let phi = self.0.conformal_factor(&q[..n]);
        let mut metric = vec![D::from(0.0); nn * nn];
        for i in 0..n {
            for j in 0..n {
                metric[i * nn + j] = phi * self.0.base_metric[(i, j)];
            }
        }
        for a in 0..m {
            for b in 0..m {
                metric[(n + a) * nn + n + b] = D::from(self.0.h[(a, b)]);
            }
        }
        QuadraticForm { metric, linear: vec![D::from(0.0); nn], potential: D::from(0.0) }
    }
}

/// The geodesic Lagrangian on `S × G` for `spec`, with the curvature
/// `R = 𝒜 F` registered as the exact rule.
pub fn make_wong_system(name: &str, spec: WongSpec) -> Result<LagrangianSystem> {
    spec.validate()?;
    let spec = Arc::new(spec);
    let chart = spec.group.chart();
    let (s1, c1) = (spec.clone(), chart.clone());
    let lambda = move |x: &[f64], th: &[f64]| c1.fundamental(th) * c1.adjoint(th) * s1.gauge(x);
    let (s2, c2) = (spec.clone(), chart.clone());
    let curv = move |x: &[f64], th: &[f64]| {
        let f = s2.field_strength(x);
        let adj = c2.adjoint(th);
        let (n, m) = (s2.base_dim(), s2.group_dim());
        let mut r = Curvature::zeros(m, n);
        for a in 0..m {
            for i in 0..n {
                for j in 0..n {
                    r.set(a, i, j, (0..m).map(|b| adj[(a, b)] * f.get(b, i, j)).sum());
                }
            }
        }
        r
    };
    let conn = BundleConnection::new(spec.base_dim(), chart, Arc::new(lambda)).with_curvature(Arc::new(curv));
    Ok(LagrangianSystem::new(name, conn, Arc::new(QuadraticModel(WongModel(spec))))?.mark_simple_mechanical())
}

/// `(x, ẋ, w)` with `w = 𝒜(θ)⁻¹ v_group`.
pub fn wong_state_from_full(sys: &LagrangianSystem, s: &FullState) -> Result<Vec<f64>> {
    let adj = sys.chart().adjoint(&s.theta);
    let w = adj
        .lu()
        .solve(&DVector::from_column_slice(&s.v_group))
        .ok_or_else(|| RouthError::Chart("adjoint matrix is singular".into()))?;
    Ok(s.x.iter().chain(&s.v_base).copied().chain(w.iter().copied()).collect())
}

/// Parameters of the packaged instance on `ℝ² × SU(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WongParams {
    /// `μ₃`; the momentum is `(0, 0, μ₃)`.
    pub mu3: f64,
    pub conformal: f64,
    /// Constant part of the gauge potential.
    pub coupling: f64,
    /// Linear part of the gauge potential.
    pub field: f64,
    pub x0: [f64; 2],
    pub xdot0: [f64; 2],
}

impl Default for WongParams {
    fn default() -> Self {
        Self { mu3: 1.0, conformal: 0.1, coupling: 0.15, field: 0.1, x0: [0.5, 0.0], xdot0: [0.0, 0.4] }
    }
}

impl WongParams {
    /// `h = δ`, `g⁰ = δ`, `γ_·1 = (0, c, f x²)`, `γ_·2 = (c, 0, −f x¹)`.
    pub fn spec(&self) -> WongSpec {
        let mut gauge_const = DMatrix::zeros(3, 2);
        gauge_const[(1, 0)] = self.coupling;
        gauge_const[(0, 1)] = self.coupling;
        let mut d1 = DMatrix::zeros(3, 2);
        d1[(2, 1)] = -self.field;
        let mut d2 = DMatrix::zeros(3, 2);
        d2[(2, 0)] = self.field;
        WongSpec {
            group: WongGroup::So3,
            h: DMatrix::identity(3, 3),
            base_metric: DMatrix::identity(2, 2),
            conformal: self.conformal,
            gauge_const,
            gauge_linear: vec![d1, d2],
        }
    }
}

/// The packaged Wong system with its level and initial state.
#[derive(Debug, Clone)]
pub struct WongSystem {
    pub params: WongParams,
    pub spec: WongSpec,
    pub system: Arc<LagrangianSystem>,
    pub level: MomentumLevel,
    pub initial: FullState,
}

pub fn wong_demo(params: WongParams) -> Result<WongSystem> {
    if params.mu3 == 0.0 || !params.mu3.is_finite() {
        return Err(RouthError::Argument("mu3 must be finite and nonzero".into()));
    }
    let spec = params.spec();
    let system = Arc::new(make_wong_system("wong", spec.clone())?);
    let mu = [0.0, 0.0, params.mu3];
    let level = MomentumLevel::new(&system, &mu, ChartSplit { algebra_iso: vec![2], coord_iso: vec![0] })?;
    let theta = vec![0.0; 3];
    let vg = crate::routh::solve_level_set(&system, &level, &params.x0, &theta, &params.xdot0, None)?;
    let initial = FullState::new(params.x0.to_vec(), theta, params.xdot0.to_vec(), vg)?;
    Ok(WongSystem { params, spec, system, level, initial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::curvature;

    #[test]
    fn flat_zero_field_gives_straight_lines() {
        let mut p = WongParams { coupling: 0.0, field: 0.0, conformal: 0.0, ..Default::default() };
        p.x0 = [0.0, 0.0];
        let spec = p.spec();
        let y = [0.1, 0.2, 1.0, -0.5, 0.3, 0.4, 0.5];
        let d = wong_field(&spec, &y).unwrap();
        assert_eq!(&d[..2], &[1.0, -0.5]);
        assert!(d[2..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn skew_condition_rejects_anisotropic_h() {
        let mut spec = WongParams::default().spec();
        spec.h[(0, 0)] = 2.0;
        assert!(spec.skew_defect() > 0.5);
        assert!(matches!(spec.validate(), Err(RouthError::Spec(_))));
    }

    #[test]
    fn exact_curvature_matches_finite_differences() {
        let sys = make_wong_system("wong", WongParams::default().spec()).unwrap();
        let x = [0.3, -0.4];
        let th = [0.4, 0.2, -0.7];
        let exact = curvature(sys.connection(), &x, &th).unwrap();
        let c = sys.connection().clone();
        let plain = BundleConnection::new(2, sys.chart().clone(), Arc::new(move |x: &[f64], t: &[f64]| c.lambda(x, t)));
        let fd = curvature(&plain, &x, &th).unwrap();
        assert!(exact.max_abs() > 0.05);
        for a in 0..3 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (exact.get(a, i, j) - fd.get(a, i, j)).abs() < 1e-7,
                        "R^{a}_{i}{j}: exact {} fd {}",
                        exact.get(a, i, j),
                        fd.get(a, i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn connection_is_principal() {
        let sys = make_wong_system("wong", WongParams::default().spec()).unwrap();
        assert!(sys.connection().invariance_defect(&[0.3, -0.4], &[0.4, 0.2, -0.7]) < 1e-8);
    }

    #[test]
    fn christoffel_symbols_match_metric_derivatives() {
        let spec = WongParams::default().spec();
        let x = [0.7, -0.2];
        let chr = spec.christoffel(&x);
        let h = 1e-6;
        let dg = |k: usize| {
            let mut p = x;
            let mut q = x;
            p[k] += h;
            q[k] -= h;
            (spec.metric(&p) - spec.metric(&q)) / (2.0 * h)
        };
        let d = [dg(0), dg(1)];
        let ginv = spec.metric(&x).try_inverse().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let v: f64 = (0..2)
                        .map(|l| 0.5 * ginv[(i, l)] * (d[j][(l, k)] + d[k][(l, j)] - d[l][(j, k)]))
                        .sum();
                    assert!((v - chr[i][j][k]).abs() < 1e-8);
                }
            }
        }
    }
}
