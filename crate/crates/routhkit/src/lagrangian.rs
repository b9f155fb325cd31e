//! Regular Lagrangians in quasi-velocities and their Euler-Lagrange field.
//!
//! A model evaluates `L(q, v)` with `q = (x, θ)` and `v = (v^i, v^a)` the
//! quasi-velocities of the standard frame. The EL field is assembled from
//! the frame's action on quasi-velocities:
//!
//! - `∂c X_i(v^j) = 0`, `∂c X_i(v^a) = −R^a_ij v^j`
//! - `∂c Ẽ_a(v^i) = 0`, `∂c Ẽ_a(v^b) = C^b_ac v^c`

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_dual::{Dual64, DualNum, HyperDual64};

use crate::bundle::{curvature, theta_rate, BundleConnection, Curvature, FullState};
use crate::error::{Result, RouthError};
use crate::integrate::{rk4, Trajectory};
use crate::lie::{GroupChart, LieAlgebra};
use crate::linalg::{checked_inverse, checked_solve, fd_step, FD_STEP_FIRST, FD_STEP_SECOND};

/// Derivatives of `L` at a point of `TM`, in the `(q, v)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    /// `∂L/∂v^α`
    pub p: DVector<f64>,
    /// `∂L/∂q^k`
    pub lq: DVector<f64>,
    /// `∂²L/∂v^α∂v^β`
    pub h: DMatrix<f64>,
    /// `∂²L/∂q^k∂v^α`, row `k`, column `α`.
    pub mqv: DMatrix<f64>,
}

/// Fibre data only: value, momenta and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Fiber {
    pub value: f64,
    pub p: DVector<f64>,
    pub h: DMatrix<f64>,
}

/// A Lagrangian in quasi-velocities.
pub trait LagrangianModel: Send + Sync {
    /// `(n, m)`: base and group dimensions.
    fn dims(&self) -> (usize, usize);

    fn value(&self, q: &[f64], v: &[f64]) -> f64;

    fn jet(&self, q: &[f64], v: &[f64]) -> Jet {
        fd_jet(self, q, v)
    }

    fn fiber(&self, q: &[f64], v: &[f64]) -> Fiber {
        let j = self.jet(q, v);
        Fiber { value: j.value, p: j.p, h: j.h }
    }

    /// True when the fibre Hessian does not depend on `v`.
    fn velocity_quadratic(&self) -> bool {
        false
    }
}

/// Central-difference jet with relative steps 1e-5 (first derivatives) and
/// 1e-4 (second derivatives).
pub fn fd_jet<M: LagrangianModel + ?Sized>(model: &M, q: &[f64], v: &[f64]) -> Jet {
    let nq = q.len();
    let nv = v.len();
    let f = |q: &[f64], v: &[f64]| model.value(q, v);
    let value = f(q, v);
    let mut qw = q.to_vec();
    let mut vw = v.to_vec();

    let mut p = DVector::zeros(nv);
    for a in 0..nv {
        let h = fd_step(FD_STEP_FIRST, v[a]);
        vw[a] = v[a] + h;
        let fp = f(q, &vw);
        vw[a] = v[a] - h;
        let fm = f(q, &vw);
        vw[a] = v[a];
        p[a] = (fp - fm) / (2.0 * h);
    }
    let mut lq = DVector::zeros(nq);
    for k in 0..nq {
        let h = fd_step(FD_STEP_FIRST, q[k]);
        qw[k] = q[k] + h;
        let fp = f(&qw, v);
        qw[k] = q[k] - h;
        let fm = f(&qw, v);
        qw[k] = q[k];
        lq[k] = (fp - fm) / (2.0 * h);
    }
    let mut hm = DMatrix::zeros(nv, nv);
    for a in 0..nv {
        let ha = fd_step(FD_STEP_SECOND, v[a]);
        vw[a] = v[a] + ha;
        let fp = f(q, &vw);
        vw[a] = v[a] - ha;
        let fm = f(q, &vw);
        vw[a] = v[a];
        hm[(a, a)] = (fp - 2.0 * value + fm) / (ha * ha);
        for b in (a + 1)..nv {
            let hb = fd_step(FD_STEP_SECOND, v[b]);
            let mut corner = |sa: f64, sb: f64| {
                vw[a] = v[a] + sa * ha;
                vw[b] = v[b] + sb * hb;
                let r = f(q, &vw);
                vw[a] = v[a];
                vw[b] = v[b];
                r
            };
            let d = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * ha * hb);
            hm[(a, b)] = d;
            hm[(b, a)] = d;
        }
    }
    let mut mqv = DMatrix::zeros(nq, nv);
    for k in 0..nq {
        let hk = fd_step(FD_STEP_SECOND, q[k]);
        for a in 0..nv {
            let ha = fd_step(FD_STEP_SECOND, v[a]);
            let mut corner = |sk: f64, sa: f64| {
                qw[k] = q[k] + sk * hk;
                vw[a] = v[a] + sa * ha;
                let r = f(&qw, &vw);
                qw[k] = q[k];
                vw[a] = v[a];
                r
            };
            mqv[(k, a)] = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * hk * ha);
        }
    }
    Jet { value, p, lq, h: hm, mqv }
}

/// A Lagrangian given by an arbitrary closure, differentiated numerically.
pub struct FnModel {
    dims: (usize, usize),
    f: Box<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
}

impl FnModel {
    pub fn new(n: usize, m: usize, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dims: (n, m), f: Box::new(f) }
    }
}

impl LagrangianModel for FnModel {
    fn dims(&self) -> (usize, usize) {
        self.dims
    }
    fn value(&self, q: &[f64], v: &[f64]) -> f64 {
        (self.f)(q, v)
    }
}

/// Coefficients of `L = ½ vᵀ 𝔾(q) v + b(q)·v − U(q)`.
#[derive(Debug, Clone)]
pub struct QuadraticForm<D> {
    /// Row-major `N × N`, `N = n + m`.
    pub metric: Vec<D>,
    pub linear: Vec<D>,
    pub potential: D,
}

/// Lagrangians quadratic in the quasi-velocities, with coefficients written
/// once over any dual number type so their `q`-derivatives are exact.
pub trait QuadraticCoefficients: Send + Sync {
    fn dims(&self) -> (usize, usize);
    fn coefficients<D: DualNum<Primitive = f64> + Copy>(&self, q: &[D]) -> QuadraticForm<D>;
}

/// Adapter turning [`QuadraticCoefficients`] into a [`LagrangianModel`] with
/// exact jets.
pub struct QuadraticModel<Q>(pub Q);

impl<Q: QuadraticCoefficients> QuadraticModel<Q> {
    fn eval_form(form: &QuadraticForm<f64>, v: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let nn = v.len();
        let g = DMatrix::from_row_slice(nn, nn, &form.metric);
        let vv = DVector::from_column_slice(v);
        let gv = &g * &vv;
        let b = DVector::from_column_slice(&form.linear);
        let value = 0.5 * vv.dot(&gv) + b.dot(&vv) - form.potential;
        (value, gv + b, g)
    }
}

impl<Q: QuadraticCoefficients> LagrangianModel for QuadraticModel<Q> {
    fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    fn value(&self, q: &[f64], v: &[f64]) -> f64 {
        Self::eval_form(&self.0.coefficients(q), v).0
    }

    fn fiber(&self, q: &[f64], v: &[f64]) -> Fiber {
        let (value, p, h) = Self::eval_form(&self.0.coefficients(q), v);
        Fiber { value, p, h }
    }

    fn jet(&self, q: &[f64], v: &[f64]) -> Jet {
        let nq = q.len();
        let nv = v.len();
        let (value, p, h) = Self::eval_form(&self.0.coefficients(q), v);
        let mut lq = DVector::zeros(nq);
        let mut mqv = DMatrix::zeros(nq, nv);
        let mut qd: Vec<Dual64> = q.iter().map(|&c| Dual64::from(c)).collect();
        for k in 0..nq {
            qd[k] = Dual64::new(q[k], 1.0);
            let form = self.0.coefficients(&qd);
            qd[k] = Dual64::from(q[k]);
            let mut quad = 0.0;
            for a in 0..nv {
                let mut row = 0.0;
                for b in 0..nv {
                    row += form.metric[a * nv + b].eps * v[b];
                }
                quad += v[a] * row;
                mqv[(k, a)] = row + form.linear[a].eps;
            }
            let lin: f64 = (0..nv).map(|a| form.linear[a].eps * v[a]).sum();
            lq[k] = 0.5 * quad + lin - form.potential.eps;
        }
        Jet { value, p, lq, h, mqv }
    }

    fn velocity_quadratic(&self) -> bool {
        true
    }
}

/// A general Lagrangian written once over any dual number type.
pub trait ScalarLagrangian: Send + Sync {
    fn dims(&self) -> (usize, usize);
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, q: &[D], v: &[D]) -> D;
}

/// Adapter giving exact jets of a [`ScalarLagrangian`] via hyper-dual numbers.
pub struct AutoDiffModel<S>(pub S);

impl<S: ScalarLagrangian> AutoDiffModel<S> {
    fn seeded(q: &[f64], v: &[f64], a: Option<usize>, b: Option<usize>) -> (Vec<HyperDual64>, Vec<HyperDual64>) {
        // Indices run over q then v.
        let nq = q.len();
        let mk = |k: usize, c: f64| {
            let e1 = if a == Some(k) { 1.0 } else { 0.0 };
            let e2 = if b == Some(k) { 1.0 } else { 0.0 };
            HyperDual64::new(c, e1, e2, 0.0)
        };
        let qd = q.iter().enumerate().map(|(k, &c)| mk(k, c)).collect();
        let vd = v.iter().enumerate().map(|(k, &c)| mk(nq + k, c)).collect();
        (qd, vd)
    }
}

impl<S: ScalarLagrangian> LagrangianModel for AutoDiffModel<S> {
    fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    fn value(&self, q: &[f64], v: &[f64]) -> f64 {
        self.0.eval(q, v)
    }

    fn jet(&self, q: &[f64], v: &[f64]) -> Jet {
        let nq = q.len();
        let nv = v.len();
        let value = self.0.eval(q, v);
        let mut grad = vec![0.0; nq + nv];
        for (k, g) in grad.iter_mut().enumerate() {
            let (qd, vd) = Self::seeded(q, v, Some(k), None);
            *g = self.0.eval(&qd, &vd).eps1;
        }
        let mut h = DMatrix::zeros(nv, nv);
        for a in 0..nv {
            for b in a..nv {
                let (qd, vd) = Self::seeded(q, v, Some(nq + a), Some(nq + b));
                let d = self.0.eval(&qd, &vd).eps1eps2;
                h[(a, b)] = d;
                h[(b, a)] = d;
            }
        }
        let mut mqv = DMatrix::zeros(nq, nv);
        for k in 0..nq {
            for a in 0..nv {
                let (qd, vd) = Self::seeded(q, v, Some(k), Some(nq + a));
                mqv[(k, a)] = self.0.eval(&qd, &vd).eps1eps2;
            }
        }
        Jet {
            value,
            p: DVector::from_column_slice(&grad[nq..]),
            lq: DVector::from_column_slice(&grad[..nq]),
            h,
            mqv,
        }
    }
}

/// Hessian of `L` in the fibre directions, split by the standard frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlocks {
    pub g_ij: DMatrix<f64>,
    pub g_ia: DMatrix<f64>,
    pub g_ab: DMatrix<f64>,
}

impl HessianBlocks {
    pub fn from_full(h: &DMatrix<f64>, n: usize) -> Self {
        let m = h.nrows() - n;
        Self {
            g_ij: h.view((0, 0), (n, n)).into_owned(),
            g_ia: h.view((0, n), (n, m)).into_owned(),
            g_ab: h.view((n, n), (m, m)).into_owned(),
        }
    }

    pub fn full(&self) -> DMatrix<f64> {
        let n = self.g_ij.nrows();
        let m = self.g_ab.nrows();
        let mut h = DMatrix::zeros(n + m, n + m);
        h.view_mut((0, 0), (n, n)).copy_from(&self.g_ij);
        h.view_mut((0, n), (n, m)).copy_from(&self.g_ia);
        h.view_mut((n, 0), (m, n)).copy_from(&self.g_ia.transpose());
        h.view_mut((n, n), (m, m)).copy_from(&self.g_ab);
        h
    }

    pub fn determinant(&self) -> f64 {
        self.full().determinant()
    }

    /// `ḡ_ij = g_ij − g_ia g^{ab} g_jb` given `g^{ab}`.
    pub fn reduced_metric(&self, g_ab_inv: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g_ij - &self.g_ia * g_ab_inv * self.g_ia.transpose()
    }

    pub fn symmetry_defect(&self) -> f64 {
        let f = self.full();
        (&f - f.transpose()).amax()
    }
}

/// A Lagrangian system on a trivial principal bundle.
#[derive(Clone)]
pub struct LagrangianSystem {
    name: String,
    connection: BundleConnection,
    model: Arc<dyn LagrangianModel>,
    regularity_tol: f64,
    simple_mechanical: bool,
}

impl std::fmt::Debug for LagrangianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianSystem")
            .field("name", &self.name)
            .field("connection", &self.connection)
            .field("regularity_tol", &self.regularity_tol)
            .field("simple_mechanical", &self.simple_mechanical)
            .finish()
    }
}

/// Quantities shared by the full and reduced fields at one state.
#[derive(Debug, Clone)]
pub struct FrameTerms {
    pub jet: Jet,
    pub k: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub curvature: Curvature,
    /// `(ẋ, θ̇)`
    pub qdot: DVector<f64>,
    /// `X_i(L)` at fixed quasi-velocities: `∂L/∂x^i − Λ^a_i ∂L/∂θ^a`.
    pub x_l: DVector<f64>,
    /// `Ẽ_a(L)` at fixed quasi-velocities: `K^b_a ∂L/∂θ^b`.
    pub e_l: DVector<f64>,
    /// `Σ_k q̇^k ∂²L/∂q^k∂v^α`, the drift of the fibre derivatives.
    pub drift: DVector<f64>,
}

impl LagrangianSystem {
    pub fn new(name: impl Into<String>, connection: BundleConnection, model: Arc<dyn LagrangianModel>) -> Result<Self> {
        let (n, m) = model.dims();
        if n != connection.base_dim() || m != connection.group_dim() {
            return Err(RouthError::Spec(format!(
                "model dimensions ({n}, {m}) do not match the bundle ({}, {})",
                connection.base_dim(),
                connection.group_dim()
            )));
        }
        Ok(Self { name: name.into(), connection, model, regularity_tol: 1e-12, simple_mechanical: false })
    }

    /// Reciprocal of the largest acceptable Hessian condition number.
    pub fn with_regularity_tol(mut self, tol: f64) -> Self {
        self.regularity_tol = tol;
        self
    }

    /// Tag the system as `T − V` with `g_ia = 0` in its frame.
    pub fn mark_simple_mechanical(mut self) -> Self {
        self.simple_mechanical = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_simple_mechanical(&self) -> bool {
        self.simple_mechanical
    }

    pub fn connection(&self) -> &BundleConnection {
        &self.connection
    }

    pub fn model(&self) -> &Arc<dyn LagrangianModel> {
        &self.model
    }

    pub fn chart(&self) -> &Arc<dyn GroupChart> {
        self.connection.group()
    }

    pub fn algebra(&self) -> &LieAlgebra {
        self.connection.group().algebra()
    }

    pub fn base_dim(&self) -> usize {
        self.connection.base_dim()
    }

    pub fn group_dim(&self) -> usize {
        self.connection.group_dim()
    }

    pub fn max_condition(&self) -> f64 {
        1.0 / self.regularity_tol
    }

    fn check_state(&self, s: &FullState) -> Result<()> {
        if s.x.len() != self.base_dim() || s.theta.len() != self.group_dim() {
            return Err(RouthError::Argument(format!(
                "state dimensions ({}, {}) do not match the system ({}, {})",
                s.x.len(),
                s.theta.len(),
                self.base_dim(),
                self.group_dim()
            )));
        }
        self.chart().check_domain(&s.theta)
    }

    pub fn lagrangian(&self, s: &FullState) -> f64 {
        self.model.value(&s.q(), &s.v())
    }

    pub fn jet(&self, s: &FullState) -> Jet {
        self.model.jet(&s.q(), &s.v())
    }

    pub fn fiber(&self, s: &FullState) -> Fiber {
        self.model.fiber(&s.q(), &s.v())
    }

    pub fn hessian(&self, s: &FullState) -> Result<HessianBlocks> {
        self.check_state(s)?;
        let f = self.fiber(s);
        if f.h.iter().any(|v| !v.is_finite()) {
            return Err(RouthError::NonFinite("Hessian".into()));
        }
        Ok(HessianBlocks::from_full(&f.h, self.base_dim()))
    }

    /// `p_a = ∂L/∂v^a`.
    pub fn momentum(&self, s: &FullState) -> Vec<f64> {
        let f = self.fiber(s);
        f.p.rows(self.base_dim(), self.group_dim()).iter().copied().collect()
    }

    /// `E = v^α ∂L/∂v^α − L`.
    pub fn energy(&self, s: &FullState) -> f64 {
        let f = self.fiber(s);
        DVector::from_vec(s.v()).dot(&f.p) - f.value
    }

    pub fn frame_terms(&self, s: &FullState) -> Result<FrameTerms> {
        self.check_state(s)?;
        let n = self.base_dim();
        let m = self.group_dim();
        let jet = self.jet(s);
        if !jet.value.is_finite() || jet.p.iter().chain(jet.lq.iter()).any(|v| !v.is_finite()) {
            return Err(RouthError::NonFinite("Lagrangian derivatives".into()));
        }
        let k = self.chart().fundamental(&s.theta);
        let lambda = self.connection.lambda(&s.x, &s.theta);
        let curvature = curvature(&self.connection, &s.x, &s.theta)?;
        let thetadot = theta_rate(&self.connection, &s.x, &s.theta, &s.v_base, &s.v_group);
        let qdot = DVector::from_iterator(n + m, s.v_base.iter().chain(&thetadot).copied());
        let l_x = jet.lq.rows(0, n).into_owned();
        let l_th = jet.lq.rows(n, m).into_owned();
        let x_l = &l_x - lambda.transpose() * &l_th;
        let e_l = k.transpose() * &l_th;
        let drift = jet.mqv.transpose() * &qdot;
        Ok(FrameTerms { jet, k, lambda, curvature, qdot, x_l, e_l, drift })
    }

    /// Fibre accelerations `(v̇^i, v̇^a)` together with the frame terms.
    pub fn accelerations(&self, s: &FullState) -> Result<(DVector<f64>, FrameTerms)> {
        let n = self.base_dim();
        let m = self.group_dim();
        let t = self.frame_terms(s)?;
        let p_g = t.jet.p.rows(n, m).into_owned();
        let alg = self.algebra();
        let curv = t.curvature.contract(p_g.as_slice(), &s.v_base);
        let mut rhs = DVector::zeros(n + m);
        for i in 0..n {
            rhs[i] = t.x_l[i] - curv[i] - t.drift[i];
        }
        for a in 0..m {
            let mut c_term = 0.0;
            for b in 0..m {
                for c in 0..m {
                    c_term += alg.structure(b, a, c) * s.v_group[c] * p_g[b];
                }
            }
            rhs[n + a] = t.e_l[a] + c_term - t.drift[n + a];
        }
        let (acc, _cond) = checked_solve(&t.jet.h, &rhs, self.max_condition(), "Hessian")?;
        Ok((acc, t))
    }

    /// The Euler-Lagrange second-order field at `s`, in the flat layout
    /// `(ẋ, θ̇, v̇^i, v̇^a)`.
    pub fn el_field(&self, s: &FullState) -> Result<Vec<f64>> {
        let (acc, t) = self.accelerations(s)?;
        let mut out: Vec<f64> = t.qdot.iter().copied().collect();
        out.extend(acc.iter());
        Ok(out)
    }

    /// Condition number of the full Hessian at `s`.
    pub fn hessian_condition(&self, s: &FullState) -> Result<f64> {
        let f = self.fiber(s);
        Ok(checked_inverse(&f.h, f64::INFINITY, "Hessian")?.1)
    }

    /// `∂c Ẽ_a` of a function on `TM`, by a central difference along the
    /// complete lift of `Ẽ_a`.
    pub fn complete_lift_derivative(&self, s: &FullState, a: usize, f: &dyn Fn(&FullState) -> f64) -> f64 {
        let n = self.base_dim();
        let m = self.group_dim();
        let k = self.chart().fundamental(&s.theta);
        let alg = self.algebra();
        let dir_theta: Vec<f64> = (0..m).map(|b| k[(b, a)]).collect();
        let dir_vg: Vec<f64> = (0..m)
            .map(|b| (0..m).map(|c| alg.structure(b, a, c) * s.v_group[c]).sum())
            .collect();
        let scale = s.theta.iter().chain(&s.v_group).fold(0.0f64, |w, v| w.max(v.abs()));
        let h = fd_step(FD_STEP_FIRST, scale);
        let shifted = |sign: f64| {
            let mut t = s.clone();
            for b in 0..m {
                t.theta[b] += sign * h * dir_theta[b];
                t.v_group[b] += sign * h * dir_vg[b];
            }
            t
        };
        let _ = n;
        (f(&shifted(1.0)) - f(&shifted(-1.0))) / (2.0 * h)
    }

    /// Worst `|∂c Ẽ_a(L)|`; zero for a `G`-invariant Lagrangian.
    pub fn invariance_defect(&self, s: &FullState) -> f64 {
        (0..self.group_dim())
            .map(|a| self.complete_lift_derivative(s, a, &|t| self.lagrangian(t)).abs())
            .fold(0.0, f64::max)
    }

    /// Worst violation of `∂c Ẽ_a(p_b) = −C^c_ab p_c`, by finite differences.
    pub fn momentum_equivariance_defect(&self, s: &FullState) -> f64 {
        let m = self.group_dim();
        let p = self.momentum(s);
        let alg = self.algebra();
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                let lhs = self.complete_lift_derivative(s, a, &|t| self.momentum(t)[b]);
                let rhs: f64 = -(0..m).map(|c| alg.structure(c, a, b) * p[c]).sum::<f64>();
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst
    }

    /// RK4 integration of the EL field with momentum-drift and energy
    /// diagnostics (`dp_a = p_a(t) − p_a(t0)` and `energy`).
    pub fn simulate(&self, s0: &FullState, t0: f64, tf: f64, dt: f64) -> Result<Trajectory> {
        let n = self.base_dim();
        let m = self.group_dim();
        self.check_state(s0)?;
        let field = |_t: f64, y: &[f64]| self.el_field(&FullState::from_slice(n, m, y)?);
        let mut traj = rk4(field, &s0.to_vec(), t0, tf, dt)?;
        self.attach_diagnostics(&mut traj, &self.momentum(s0))?;
        Ok(traj)
    }

    /// Adds `dp_a = p_a − reference_a` and `energy` columns to a full-state
    /// trajectory.
    pub fn attach_diagnostics(&self, traj: &mut Trajectory, reference: &[f64]) -> Result<()> {
        let n = self.base_dim();
        let m = self.group_dim();
        let mut dp = vec![Vec::with_capacity(traj.len()); m];
        let mut energy = Vec::with_capacity(traj.len());
        for y in &traj.states {
            let s = FullState::from_slice(n, m, y)?;
            let p = self.momentum(&s);
            for a in 0..m {
                dp[a].push(p[a] - reference[a]);
            }
            energy.push(self.energy(&s));
        }
        for (a, col) in dp.into_iter().enumerate() {
            traj.set_diagnostic(&format!("dp_{a}"), col)?;
        }
        traj.set_diagnostic("energy", energy)
    }
}

/// Worst mismatch between a five-point time derivative of a sampled
/// full-state trajectory and the EL field, over interior samples.
pub fn el_residual(sys: &LagrangianSystem, traj: &Trajectory) -> Result<f64> {
    let (n, m) = (sys.base_dim(), sys.group_dim());
    if traj.len() < 5 {
        return Err(RouthError::Argument("need at least five samples".into()));
    }
    let h = traj.times[1] - traj.times[0];
    let y = &traj.states;
    let mut worst = 0.0f64;
    for k in 2..traj.len() - 2 {
        let f = sys.el_field(&FullState::from_slice(n, m, &y[k])?)?;
        for (c, fc) in f.iter().enumerate() {
            let d = (y[k - 2][c] - 8.0 * y[k - 1][c] + 8.0 * y[k + 1][c] - y[k + 2][c]) / (12.0 * h);
            worst = worst.max((d - fc).abs());
        }
    }
    Ok(worst)
}

/// Worst absolute momentum drift recorded in a trajectory's `dp_*` columns.
pub fn max_momentum_drift(traj: &Trajectory) -> f64 {
    traj.diagnostics
        .iter()
        .filter(|(k, _)| k.starts_with("dp_"))
        .flat_map(|(_, v)| v.iter())
        .fold(0.0f64, |w, v| w.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{AbelianChart, Se2Chart};

    struct FreeParticle;
    impl QuadraticCoefficients for FreeParticle {
        fn dims(&self) -> (usize, usize) {
            (1, 1)
        }
        fn coefficients<D: DualNum<Primitive = f64> + Copy>(&self, _q: &[D]) -> QuadraticForm<D> {
            let o = D::from(1.0);
            let z = D::from(0.0);
            QuadraticForm { metric: vec![o, z, z, o], linear: vec![z, z], potential: z }
        }
    }

    // A non-quadratic Lagrangian on R × R with a position-dependent metric.
    struct Quartic;
    impl ScalarLagrangian for Quartic {
        fn dims(&self) -> (usize, usize) {
            (1, 1)
        }
        fn eval<D: DualNum<Primitive = f64> + Copy>(&self, q: &[D], v: &[D]) -> D {
            let k2 = v[0] * v[0] + v[1] * v[1];
            k2 * (D::from(1.0) + q[0] * q[0]) * 0.5 + k2 * k2 * 0.1 + v[0] * v[1] * q[0].sin() * 0.2
                - q[0] * q[0] * 0.5
        }
    }

    fn quartic_sys() -> LagrangianSystem {
        let conn = BundleConnection::trivial(1, Arc::new(AbelianChart::new(1)));
        LagrangianSystem::new("quartic", conn, Arc::new(AutoDiffModel(Quartic))).unwrap()
    }

    #[test]
    fn free_particle_has_zero_acceleration() {
        let conn = BundleConnection::trivial(1, Arc::new(AbelianChart::new(1)));
        let sys = LagrangianSystem::new("free", conn, Arc::new(QuadraticModel(FreeParticle))).unwrap();
        let s = FullState::new(vec![0.3], vec![1.0], vec![2.0], vec![-1.0]).unwrap();
        let f = sys.el_field(&s).unwrap();
        assert_eq!(f, vec![2.0, -1.0, 0.0, 0.0]);
        let h = sys.hessian(&s).unwrap();
        assert_eq!(h.full(), DMatrix::identity(2, 2));
    }

    #[test]
    fn autodiff_jet_agrees_with_fd() {
        let q = [0.4, 0.1];
        let v = [0.7, -0.3];
        let exact = AutoDiffModel(Quartic).jet(&q, &v);
        let fnm = FnModel::new(1, 1, |q, v| AutoDiffModel(Quartic).value(q, v));
        let approx = fnm.jet(&q, &v);
        assert!((exact.p - approx.p).amax() < 1e-9);
        assert!((exact.lq - approx.lq).amax() < 1e-9);
        assert!((exact.h - approx.h).amax() < 1e-6);
        assert!((exact.mqv - approx.mqv).amax() < 1e-6);
    }

    #[test]
    fn quadratic_jet_agrees_with_autodiff() {
        struct Q;
        impl QuadraticCoefficients for Q {
            fn dims(&self) -> (usize, usize) {
                (1, 1)
            }
            fn coefficients<D: DualNum<Primitive = f64> + Copy>(&self, q: &[D]) -> QuadraticForm<D> {
                let a = D::from(2.0) + q[0].sin();
                let c = q[0] * q[1] * 0.3;
                QuadraticForm {
                    metric: vec![a, c, c, D::from(1.5)],
                    linear: vec![q[1] * 0.2, q[0]],
                    potential: q[0] * q[0],
                }
            }
        }
        struct S;
        impl ScalarLagrangian for S {
            fn dims(&self) -> (usize, usize) {
                (1, 1)
            }
            fn eval<D: DualNum<Primitive = f64> + Copy>(&self, q: &[D], v: &[D]) -> D {
                let a = D::from(2.0) + q[0].sin();
                let c = q[0] * q[1] * 0.3;
                (a * v[0] * v[0] + c * v[0] * v[1] * 2.0 + v[1] * v[1] * 1.5) * 0.5 + q[1] * 0.2 * v[0]
                    + q[0] * v[1]
                    - q[0] * q[0]
            }
        }
        let (q, v) = ([0.3, -0.8], [1.1, 0.4]);
        let a = QuadraticModel(Q).jet(&q, &v);
        let b = AutoDiffModel(S).jet(&q, &v);
        assert!((a.value - b.value).abs() < 1e-14);
        assert!((a.lq - b.lq).amax() < 1e-13);
        assert!((a.mqv - b.mqv).amax() < 1e-13);
        assert!((a.h - b.h).amax() < 1e-13);
    }

    #[test]
    fn quartic_conserves_momentum_and_energy() {
        let sys = quartic_sys();
        let s0 = FullState::new(vec![0.5], vec![0.0], vec![0.2], vec![0.6]).unwrap();
        let tr = sys.simulate(&s0, 0.0, 5.0, 1e-3).unwrap();
        assert!(max_momentum_drift(&tr) < 1e-10);
        let e = &tr.diagnostics["energy"];
        let drift = e.iter().fold(0.0f64, |w, v| w.max((v - e[0]).abs()));
        assert!(drift < 1e-9, "energy drift {drift}");
    }

    #[test]
    fn singular_hessian_reports_condition() {
        let conn = BundleConnection::trivial(1, Arc::new(AbelianChart::new(1)));
        let sys = LagrangianSystem::new("degenerate", conn, Arc::new(FnModel::new(1, 1, |_, v| 0.5 * (v[0] + v[1]).powi(2))))
            .unwrap();
        let s = FullState::new(vec![0.0], vec![0.0], vec![1.0], vec![0.0]).unwrap();
        match sys.el_field(&s) {
            Err(RouthError::Regularity { what, cond }) => {
                assert_eq!(what, "Hessian");
                assert!(cond > 1e12);
            }
            other => panic!("expected regularity error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let conn = BundleConnection::trivial(2, Arc::new(Se2Chart::new()));
        assert!(LagrangianSystem::new("bad", conn, Arc::new(QuadraticModel(FreeParticle))).is_err());
    }
}
