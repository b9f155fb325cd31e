//! Reconstruction of full trajectories from reduced ones.
//!
//! A reduced curve is lifted horizontally into `N_μ` with respect to one of
//! two principal connections for the `G_μ`-action, the vertical part
//! `ξ(t) = Φ^A(t) E_A` of the dynamics is evaluated along the lift and
//! developed into `g(t) ∈ G_μ`, and the full trajectory is `g(t) · lift(t)`.
//!
//! Development uses `g⁻¹ ġ = ξ`, which in the chart reads `θ̇ = K 𝒜 ξ`.

use nalgebra::{DMatrix, DVector};

use crate::bundle::{theta_rate, FullState};
use crate::error::{Result, RouthError};
use crate::integrate::{rk4_on_grid, HermiteCurve, Trajectory};
use crate::lagrangian::{HessianBlocks, LagrangianSystem};
use crate::lie::development_rate;
use crate::linalg::checked_inverse;
use crate::routh::{full_state_from_reduced, reduced_field_at, solve_level_set, MomentumLevel, ReducedState};

/// The two connections on `N_μ → N_μ/G_μ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelConnectionKind {
    /// Horizontal space is the Hessian-orthogonal complement of the `G_μ`
    /// directions.
    Mechanical,
    /// Induced from the bundle connection and the isotropy splitting.
    VerticalLift,
}

impl std::str::FromStr for LevelConnectionKind {
    type Err = RouthError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mechanical" => Ok(Self::Mechanical),
            "vertical-lift" | "vertical_lift" => Ok(Self::VerticalLift),
            other => Err(RouthError::Argument(format!("unknown connection kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for LevelConnectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mechanical => "mechanical",
            Self::VerticalLift => "vertical-lift",
        })
    }
}

/// `G^{AB}`, `Υ^B_α = G^{AB} g_Aα` and `Υ^B_i = G^{AB} g_Ai`.
///
/// Layouts: `upsilon_alpha[(B, α)]`, `upsilon_i[(B, i)]`, with `α` running
/// over the complement indices of the level in order.
#[derive(Debug, Clone, PartialEq)]
pub struct UpsilonCoefficients {
    pub g_ab_inv: DMatrix<f64>,
    pub upsilon_alpha: DMatrix<f64>,
    pub upsilon_i: DMatrix<f64>,
    /// `‖G^{AB} g_BC − δ‖_max`
    pub inverse_residual: f64,
}

fn upsilon_from_blocks(sys: &LagrangianSystem, level: &MomentumLevel, blocks: &HessianBlocks) -> Result<UpsilonCoefficients> {
    let n = sys.base_dim();
    let iso = level.algebra_iso();
    let comp = level.algebra_comp();
    let k = iso.len();
    let g_aa = DMatrix::from_fn(k, k, |r, c| blocks.g_ab[(iso[r], iso[c])]);
    let (g_ab_inv, _) = checked_inverse(&g_aa, sys.max_condition(), "isotropy block (g_AB)")?;
    let g_a_alpha = DMatrix::from_fn(k, comp.len(), |r, c| blocks.g_ab[(iso[r], comp[c])]);
    let g_a_i = DMatrix::from_fn(k, n, |r, i| blocks.g_ia[(i, iso[r])]);
    let inverse_residual = (&g_ab_inv * &g_aa - DMatrix::identity(k, k)).amax();
    Ok(UpsilonCoefficients {
        upsilon_alpha: &g_ab_inv * g_a_alpha,
        upsilon_i: &g_ab_inv * g_a_i,
        g_ab_inv,
        inverse_residual,
    })
}

/// Υ coefficients at `s`, in the level's adapted basis.
pub fn upsilon(sys: &LagrangianSystem, level: &MomentumLevel, s: &FullState) -> Result<UpsilonCoefficients> {
    let blocks = sys.hessian(s)?;
    upsilon_from_blocks(sys, level, &blocks)
}

/// Vertical part of the dynamics on `N_μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalPart {
    /// `Φ^A`, components along `𝔤_μ`.
    pub phi: Vec<f64>,
    /// `Ψ^α = Ā^α_β ι^β`.
    pub psi: Vec<f64>,
}

/// `Φ^A = ι^A + Υ^A_α ι^α` (vertical lift) or with `+ Υ^A_i v^i`
/// (mechanical), and `Ψ^α`.
pub fn vertical_part(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    s: &FullState,
    kind: LevelConnectionKind,
) -> Result<VerticalPart> {
    let r = level.momentum_residual(sys, s);
    if r > level.membership_tol() {
        return Err(RouthError::Domain(format!("state is off the level set (|p − μ| = {r:e})")));
    }
    let ups = upsilon(sys, level, s)?;
    let phi = phi_from(level, &ups, s, kind);
    let comp = level.algebra_comp();
    let psi = if comp.is_empty() {
        Vec::new()
    } else {
        let adj = sys.chart().adjoint(&s.theta);
        let block = DMatrix::from_fn(comp.len(), comp.len(), |r, c| adj[(comp[r], comp[c])]);
        let (abar, _) = checked_inverse(&block, sys.max_condition(), "adjoint block (𝒜^α_β)")?;
        let iota_alpha = DVector::from_iterator(comp.len(), comp.iter().map(|&a| s.v_group[a]));
        (abar * iota_alpha).iter().copied().collect()
    };
    Ok(VerticalPart { phi, psi })
}

fn phi_from(level: &MomentumLevel, ups: &UpsilonCoefficients, s: &FullState, kind: LevelConnectionKind) -> Vec<f64> {
    let iso = level.algebra_iso();
    let comp = level.algebra_comp();
    (0..iso.len())
        .map(|a| {
            let mut v = s.v_group[iso[a]];
            for (c, &al) in comp.iter().enumerate() {
                v += ups.upsilon_alpha[(a, c)] * s.v_group[al];
            }
            if kind == LevelConnectionKind::Mechanical {
                for (i, vi) in s.v_base.iter().enumerate() {
                    v += ups.upsilon_i[(a, i)] * vi;
                }
            }
            v
        })
        .collect()
}

/// A sampled reduced trajectory, interpolated by cubic Hermite polynomials
/// whose slopes come from the reduced field.
#[derive(Debug, Clone)]
pub struct ReducedCurve {
    curve: HermiteCurve,
    n: usize,
    r: usize,
}

impl ReducedCurve {
    pub fn new(sys: &LagrangianSystem, level: &MomentumLevel, traj: &Trajectory) -> Result<Self> {
        traj.validate()?;
        if traj.is_empty() {
            return Err(RouthError::Argument("empty reduced trajectory".into()));
        }
        let n = sys.base_dim();
        let r = level.quotient_dim();
        let mut slopes = Vec::with_capacity(traj.len());
        let mut warm: Option<Vec<f64>> = None;
        for y in &traj.states {
            let rs = ReducedState::from_slice(n, r, y)?;
            let s = full_state_from_reduced(sys, level, &rs, None, warm.as_deref())?;
            warm = Some(s.v_group.clone());
            slopes.push(reduced_field_at(sys, level, &s)?.derivative);
        }
        let curve = HermiteCurve::new(traj.times.clone(), traj.states.clone(), slopes)?;
        Ok(Self { curve, n, r })
    }

    pub fn times(&self) -> &[f64] {
        self.curve.times()
    }

    pub fn eval(&self, t: f64) -> ReducedState {
        ReducedState::from_slice(self.n, self.r, &self.curve.eval(t)).expect("consistent dimensions")
    }

    pub fn sample(&self, k: usize) -> ReducedState {
        ReducedState::from_slice(self.n, self.r, self.curve.value_at(k)).expect("consistent dimensions")
    }
}

/// The generator developed into `G_μ` along the lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Generator {
    Vertical(LevelConnectionKind),
    LockedInertia,
}

struct LiftContext<'a> {
    sys: &'a LagrangianSystem,
    level: &'a MomentumLevel,
    kind: LevelConnectionKind,
    k_iso: usize,
}

impl<'a> LiftContext<'a> {
    /// Full state on `N_μ` over the reduced state with `θ^A = theta_iso`.
    fn lift_state(&self, rs: &ReducedState, theta_iso: &[f64], warm: Option<&[f64]>) -> Result<FullState> {
        let theta = self.level.join_theta(theta_iso, &rs.theta_alpha);
        let vg = solve_level_set(self.sys, self.level, &rs.x, &theta, &rs.v_base, warm)?;
        FullState::new(rs.x.clone(), theta, rs.v_base.clone(), vg)
    }

    /// `(θ̇^A of the horizontal lift, ξ^A)` at a lift state.
    fn rates(&self, s: &FullState, gen: Generator) -> Result<(Vec<f64>, Vec<f64>)> {
        let sys = self.sys;
        let level = self.level;
        let blocks = sys.hessian(s)?;
        let ups = upsilon_from_blocks(sys, level, &blocks)?;
        let phi = phi_from(level, &ups, s, self.kind);
        let thetadot = theta_rate(sys.connection(), &s.x, &s.theta, &s.v_base, &s.v_group);
        let k = sys.chart().fundamental(&s.theta);
        let ci = level.coord_iso();
        let ai = level.algebra_iso();
        let lift_rate = (0..self.k_iso)
            .map(|r| thetadot[ci[r]] - (0..self.k_iso).map(|c| k[(ci[r], ai[c])] * phi[c]).sum::<f64>())
            .collect();
        let xi = match gen {
            Generator::Vertical(kind) if kind == self.kind => phi,
            Generator::Vertical(kind) => phi_from(level, &ups, s, kind),
            Generator::LockedInertia => {
                let mu_a = DVector::from_iterator(self.k_iso, ai.iter().map(|&a| level.mu[a]));
                (&ups.g_ab_inv * mu_a).iter().copied().collect()
            }
        };
        Ok((lift_rate, xi))
    }
}

/// Result of [`reconstruct`].
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Full states `(x, θ, v^i, v^a)` on `N_μ`.
    pub full: Trajectory,
    /// The horizontal lift, as full states.
    pub lift: Trajectory,
    /// The developed curve `g(t)` in `G_μ`, in full chart coordinates.
    pub group: Trajectory,
}

fn run_reconstruction(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    reduced: &Trajectory,
    kind: LevelConnectionKind,
    gen: Generator,
    g0: Option<&[f64]>,
    seed: Option<&[f64]>,
    develop: bool,
) -> Result<Reconstruction> {
    let m = sys.group_dim();
    let k_iso = level.isotropy_dim();
    let chart = sys.chart();
    let id = chart.identity();
    let g0 = g0.map(|g| g.to_vec()).unwrap_or_else(|| id.clone());
    if g0.len() != m {
        return Err(RouthError::Argument("g0 has the wrong dimension".into()));
    }
    for &al in level.coord_comp() {
        if (g0[al] - id[al]).abs() > 1e-12 {
            return Err(RouthError::Argument("g0 is not in the isotropy subgroup chart".into()));
        }
    }
    let seed = seed.map(|s| s.to_vec()).unwrap_or_else(|| level.gauge_default().to_vec());
    if seed.len() != k_iso {
        return Err(RouthError::Argument("lift seed has the wrong dimension".into()));
    }
    let curve = ReducedCurve::new(sys, level, reduced)?;
    let ctx = LiftContext { sys, level, kind, k_iso };
    let ai = level.algebra_iso().to_vec();

    let mut warm: Option<Vec<f64>> = None;
    let field = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let rs = curve.eval(t);
        let s = ctx.lift_state(&rs, &y[..k_iso], warm.as_deref())?;
        warm = Some(s.v_group.clone());
        let (lift_rate, xi_iso) = ctx.rates(&s, gen)?;
        let mut out = lift_rate;
        if develop {
            let g = &y[k_iso..];
            chart.check_domain(g)?;
            let mut xi = vec![0.0; m];
            for (c, &a) in ai.iter().enumerate() {
                xi[a] = xi_iso[c];
            }
            out.extend(development_rate(chart.as_ref(), g, &xi));
        }
        Ok(out)
    };
    let mut y0 = seed.clone();
    if develop {
        y0.extend_from_slice(&g0);
    }
    let aug = rk4_on_grid(field, &y0, &reduced.times)?;

    let mut lift = Trajectory::new();
    let mut group = Trajectory::new();
    let mut full = Trajectory::new();
    let mut warm_lift: Option<Vec<f64>> = None;
    let mut warm_full: Option<Vec<f64>> = None;
    for (idx, (t, y)) in aug.times.iter().zip(&aug.states).enumerate() {
        let rs = curve.sample(idx);
        let ls = ctx.lift_state(&rs, &y[..k_iso], warm_lift.as_deref())?;
        warm_lift = Some(ls.v_group.clone());
        let g = if develop { y[k_iso..].to_vec() } else { id.clone() };
        let theta = chart.multiply(&g, &ls.theta);
        let seed_vg: Vec<f64> = match &warm_full {
            Some(w) => w.clone(),
            None => (chart.adjoint(&g) * DVector::from_column_slice(&ls.v_group)).iter().copied().collect(),
        };
        let vg = solve_level_set(sys, level, &ls.x, &theta, &ls.v_base, Some(&seed_vg))?;
        warm_full = Some(vg.clone());
        let fs = FullState::new(ls.x.clone(), theta, ls.v_base.clone(), vg)?;
        lift.push(*t, ls.to_vec());
        group.push(*t, g);
        full.push(*t, fs.to_vec());
    }
    Ok(Reconstruction { full, lift, group })
}

/// Horizontal lift of a reduced trajectory through `θ^A(t0) = seed`
/// (default: identity values). Returns full states on `N_μ`.
pub fn horizontal_lift(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    reduced: &Trajectory,
    seed: Option<&[f64]>,
    kind: LevelConnectionKind,
) -> Result<Trajectory> {
    Ok(run_reconstruction(sys, level, reduced, kind, Generator::Vertical(kind), None, seed, false)?.lift)
}

/// Lift, evaluate `ξ = Φ^A E_A` along the lift, develop it in `G_μ` from
/// `g0` (default identity) and act on the lift.
pub fn reconstruct(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    reduced: &Trajectory,
    kind: LevelConnectionKind,
    g0: Option<&[f64]>,
    seed: Option<&[f64]>,
) -> Result<Reconstruction> {
    run_reconstruction(sys, level, reduced, kind, Generator::Vertical(kind), g0, seed, true)
}

/// Reconstruction for simple mechanical systems with
/// `ξ = I_μ(c(t))⁻¹ (j* μ)`, the locked inertia tensor restricted to `𝔤_μ`
/// and evaluated along the mechanical lift.
pub fn locked_inertia_reconstruction(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    reduced: &Trajectory,
    g0: Option<&[f64]>,
    seed: Option<&[f64]>,
) -> Result<Reconstruction> {
    if !sys.is_simple_mechanical() {
        return Err(RouthError::Domain(format!("{} is not tagged simple mechanical", sys.name())));
    }
    run_reconstruction(sys, level, reduced, LevelConnectionKind::Mechanical, Generator::LockedInertia, g0, seed, true)
}

/// Worst value of the connection form applied to the tangent of a lift,
/// with the tangent taken by a five-point stencil on the samples.
pub fn lift_connection_defect(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    lift: &Trajectory,
    kind: LevelConnectionKind,
) -> Result<f64> {
    let n = sys.base_dim();
    let m = sys.group_dim();
    if lift.len() < 5 {
        return Err(RouthError::Argument("need at least five lift samples".into()));
    }
    let h = lift.times[1] - lift.times[0];
    let mut worst = 0.0f64;
    for k in 2..lift.len() - 2 {
        let s = FullState::from_slice(n, m, &lift.states[k])?;
        let d = |c: usize| {
            (lift.states[k - 2][c] - 8.0 * lift.states[k - 1][c] + 8.0 * lift.states[k + 1][c] - lift.states[k + 2][c])
                / (12.0 * h)
        };
        let xdot: Vec<f64> = (0..n).map(d).collect();
        let thetadot: Vec<f64> = (0..m).map(|a| d(n + a)).collect();
        let tangent = crate::bundle::to_quasi_velocities(sys.connection(), &s.x, &s.theta, &xdot, &thetadot)?;
        let ups = upsilon(sys, level, &s)?;
        let omega = phi_from(level, &ups, &tangent, kind);
        worst = omega.iter().fold(worst, |w, v| w.max(v.abs()));
    }
    Ok(worst)
}
