//! A free body on `ℝ × SE(2)` with a velocity coupling:
//! `L = ½ẋ² + ½ẏ² + ½ż² + ½θ̇² + A(sin θ ż + cos θ ẏ) θ̇`.
//!
//! The packaged version works in the chart `y' = y`, `z' = z − μy` and the
//! algebra basis `E₁ = e₁ + μe₂`, `E₂ = e₂`, `E₃ = e₃`, in which the momentum
//! is `(1 + μ², μ, 0)` and its isotropy algebra is spanned by `E₁`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_dual::DualNum;

use crate::bundle::{to_quasi_velocities, BundleConnection, FullState};
use crate::error::{Result, RouthError};
use crate::lagrangian::{LagrangianSystem, QuadraticCoefficients, QuadraticForm, QuadraticModel};
use crate::lie::{AdaptedChart, GroupChart, Se2Chart};
use crate::routh::{ChartSplit, MomentumLevel};

/// Free parameters; the remaining initial constants follow from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se2Params {
    pub a: f64,
    pub mu: f64,
    pub thetadot0: f64,
    pub x0: f64,
    pub y0: f64,
    pub xdot0: f64,
}

impl Default for Se2Params {
    fn default() -> Self {
        Self { a: 0.5, mu: 0.3, thetadot0: 1.0, x0: 0.0, y0: 0.0, xdot0: 1.0 }
    }
}

impl Se2Params {
    pub fn ydot0(&self) -> f64 {
        1.0 - self.a * self.thetadot0
    }
    pub fn zdot0(&self) -> f64 {
        self.mu
    }
    pub fn z0(&self) -> f64 {
        self.mu * self.y0 + self.a * self.ydot0() + self.thetadot0
    }

    fn validate(&self) -> Result<()> {
        let fields = [self.a, self.mu, self.thetadot0, self.x0, self.y0, self.xdot0];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(RouthError::Argument("SE(2) parameters must be finite".into()));
        }
        if (1.0 - self.a * self.a).abs() < 1e-12 {
            return Err(RouthError::Regularity { what: "SE(2) Hessian (A² = 1)", cond: f64::INFINITY });
        }
        Ok(())
    }
}

/// Quasi-velocity coefficients in a chart `θ' = T θ` with algebra basis `P`.
/// `mu` is the shear of the adapted chart; zero gives the original chart.
#[derive(Debug, Clone, Copy)]
struct Se2Model {
    a: f64,
    mu: f64,
}

impl QuadraticCoefficients for Se2Model {
    fn dims(&self) -> (usize, usize) {
        (1, 3)
    }

    fn coefficients<D: DualNum<Primitive = f64> + Copy>(&self, q: &[D]) -> QuadraticForm<D> {
        let (o, z) = (D::from(1.0), D::from(0.0));
        let y = q[1];
        let zz = q[2] + q[1] * self.mu;
        let th = q[3];
        let (s, c) = (th.sin() * self.a, th.cos() * self.a);
        // Columns of K P in original coordinates (ẏ, ż, θ̇).
        let f = [[o, D::from(self.mu), z], [z, o, z], [-zz, y, o]];
        let g = [[o, z, c], [z, o, s], [c, s, o]];
        let mut metric = vec![z; 16];
        metric[0] = o;
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = z;
                for r in 0..3 {
                    for t in 0..3 {
                        acc += f[a][r] * g[r][t] * f[b][t];
                    }
                }
                metric[(1 + a) * 4 + 1 + b] = acc;
            }
        }
        QuadraticForm { metric, linear: vec![z; 4], potential: z }
    }
}

/// The packaged SE(2) system with its momentum level and closed forms.
#[derive(Debug, Clone)]
pub struct Se2System {
    pub params: Se2Params,
    pub system: Arc<LagrangianSystem>,
    pub level: MomentumLevel,
    /// Initial state in the adapted chart.
    pub initial: FullState,
}

/// Coordinate change `T` and algebra basis `P` of the adapted chart.
pub fn adapted_matrices(mu: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let t = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, -mu, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let p = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, mu, 1.0, 0.0, 0.0, 0.0, 1.0]);
    (t, p)
}

pub fn make_se2(params: Se2Params) -> Result<Se2System> {
    params.validate()?;
    let (t, p) = adapted_matrices(params.mu);
    let chart: Arc<dyn GroupChart> = Arc::new(AdaptedChart::new(Arc::new(Se2Chart::new()), t, p)?);
    let conn = BundleConnection::trivial(1, chart);
    let model = Se2Model { a: params.a, mu: params.mu };
    let system = Arc::new(LagrangianSystem::new("se2", conn, Arc::new(QuadraticModel(model)))?.mark_simple_mechanical());
    let mu_adapted = [1.0 + params.mu * params.mu, params.mu, 0.0];
    let level = MomentumLevel::new(&system, &mu_adapted, ChartSplit { algebra_iso: vec![0], coord_iso: vec![0] })?;
    let theta = [params.y0, params.z0() - params.mu * params.y0, 0.0];
    let thetadot = [params.ydot0(), params.zdot0() - params.mu * params.ydot0(), params.thetadot0];
    let initial = to_quasi_velocities(system.connection(), &[params.x0], &theta, &[params.xdot0], &thetadot)?;
    let mismatch = level.momentum_residual(&system, &initial);
    if mismatch > level.membership_tol() {
        return Err(RouthError::Spec(format!("SE(2) initial state is off the level set by {mismatch:e}")));
    }
    Ok(Se2System { params, system, level, initial })
}

/// The same Lagrangian in the original chart `(y, z, θ)` and basis
/// `(e₁, e₂, e₃)`.
pub fn make_se2_original(a: f64) -> Result<LagrangianSystem> {
    Se2Params { a, ..Default::default() }.validate()?;
    let conn = BundleConnection::trivial(1, Arc::new(Se2Chart::new()));
    Ok(LagrangianSystem::new("se2-original", conn, Arc::new(QuadraticModel(Se2Model { a, mu: 0.0 })))?.mark_simple_mechanical())
}

impl Se2System {
    /// Original coordinates `(y, z, θ)` of adapted ones.
    pub fn to_original(&self, theta: &[f64]) -> [f64; 3] {
        [theta[0], theta[1] + self.params.mu * theta[0], theta[2]]
    }

    /// `(x, y, z, θ)(t)` for `θ₀ = 0`.
    pub fn closed_form_full(&self, t: f64) -> [f64; 4] {
        let p = &self.params;
        let w = p.thetadot0 * t;
        [
            p.xdot0 * t + p.x0,
            -p.a * w.sin() + (p.ydot0() + p.a * p.thetadot0) * t + p.y0,
            p.a * w.cos() + p.zdot0() * t + p.z0() - p.a,
            w,
        ]
    }

    /// `(z', θ)(t)` on the reduced space.
    pub fn closed_form_reduced(&self, t: f64) -> [f64; 2] {
        let p = &self.params;
        let w = p.thetadot0 * t;
        [p.a * w.cos() + p.a * p.mu * w.sin() + (1.0 - p.a * p.a) * p.thetadot0, w]
    }

    /// `y` along the horizontal lift through `y(0) = y₀`.
    pub fn closed_form_lift_y(&self, t: f64) -> f64 {
        -self.params.a * (self.params.thetadot0 * t).sin() + self.params.y0
    }

    /// `y₁` of the development curve in `G_μ`.
    pub fn closed_form_development_y1(&self, t: f64) -> f64 {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_momentum_is_one_plus_mu_squared() {
        let s = make_se2(Se2Params::default()).unwrap();
        let p = s.system.momentum(&s.initial);
        assert!((p[0] - 1.09).abs() < 1e-14 && (p[1] - 0.3).abs() < 1e-14 && p[2].abs() < 1e-14);
    }

    #[test]
    fn isotropy_is_spanned_by_the_first_vector() {
        let s = make_se2(Se2Params::default()).unwrap();
        assert_eq!(s.level.isotropy_dim(), 1);
        assert_eq!(s.level.algebra_comp(), &[1, 2]);
    }

    #[test]
    fn unit_coupling_is_rejected() {
        let r = make_se2(Se2Params { a: 1.0, ..Default::default() });
        assert!(matches!(r, Err(RouthError::Regularity { .. })));
    }

    #[test]
    fn closed_forms_agree_at_zero() {
        let s = make_se2(Se2Params::default()).unwrap();
        let full = s.closed_form_full(0.0);
        let orig = s.to_original(&s.initial.theta);
        assert!((full[1] - orig[0]).abs() < 1e-15 && (full[2] - orig[1]).abs() < 1e-15);
        let red = s.closed_form_reduced(0.0);
        assert!((red[0] - s.initial.theta[1]).abs() < 1e-14);
    }
}
