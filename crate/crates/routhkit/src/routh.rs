//! Momentum level sets, the Routhian, barred-frame coefficients and the
//! Lagrange-Routh reduced field on `N_μ/G_μ`.
//!
//! Reduction requires a chart adapted to the momentum: the working algebra
//! basis contains a basis of `𝔤_μ` among its unit vectors (indices `A`), and
//! the fundamental fields `Ẽ_A` only move the coordinates `θ^A`. The
//! remaining coordinates `θ^α` descend to `G/G_μ`. Each built-in system
//! supplies this split as a [`ChartSplit`].

use nalgebra::{DMatrix, DVector};

use crate::bundle::{FullState};
use crate::error::{Result, RouthError};
use crate::integrate::{rk4, Trajectory};
use crate::lagrangian::{FrameTerms, HessianBlocks, LagrangianSystem};
use crate::lie::{isotropy_subalgebra, IsotropySplit};
use crate::linalg::{checked_inverse, checked_solve, fd_step, FD_STEP_SECOND};

/// Which algebra basis vectors and which chart coordinates belong to `G_μ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChartSplit {
    pub algebra_iso: Vec<usize>,
    pub coord_iso: Vec<usize>,
}

impl ChartSplit {
    /// `G_μ = G`: every index is an isotropy index.
    pub fn whole(m: usize) -> Self {
        Self { algebra_iso: (0..m).collect(), coord_iso: (0..m).collect() }
    }
}

fn complement(idx: &[usize], m: usize) -> Vec<usize> {
    (0..m).filter(|k| !idx.contains(k)).collect()
}

/// The level set `N_μ = {p = μ}` with its isotropy split.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumLevel {
    pub mu: Vec<f64>,
    pub isotropy: IsotropySplit,
    pub solver_tol: f64,
    pub max_newton_iters: usize,
    algebra_iso: Vec<usize>,
    algebra_comp: Vec<usize>,
    coord_iso: Vec<usize>,
    coord_comp: Vec<usize>,
    gauge_default: Vec<f64>,
}

impl MomentumLevel {
    /// Validates that the split is the isotropy algebra of `mu` (via the SVD
    /// kernel), that `C^γ_AB = 0`, and that `K^α_A = 0` at sample points.
    pub fn new(sys: &LagrangianSystem, mu: &[f64], split: ChartSplit) -> Result<Self> {
        let m = sys.group_dim();
        let alg = sys.algebra();
        if mu.len() != m {
            return Err(RouthError::Argument(format!("μ has length {}, expected {m}", mu.len())));
        }
        let k = split.algebra_iso.len();
        if split.coord_iso.len() != k
            || split.algebra_iso.iter().chain(&split.coord_iso).any(|&i| i >= m)
        {
            return Err(RouthError::Spec("chart split indices are inconsistent".into()));
        }
        let tol = 1e-10;
        let svd_split = isotropy_subalgebra(alg, mu, tol)?;
        if svd_split.isotropy_dim() != k {
            return Err(RouthError::Spec(format!(
                "isotropy algebra of μ has dimension {}, chart split declares {k}",
                svd_split.isotropy_dim()
            )));
        }
        let algebra_comp = complement(&split.algebra_iso, m);
        let coord_comp = complement(&split.coord_iso, m);
        let unit = |idx: &[usize]| {
            let mut b = DMatrix::zeros(m, idx.len());
            for (c, &i) in idx.iter().enumerate() {
                b[(i, c)] = 1.0;
            }
            b
        };
        let isotropy =
            IsotropySplit::from_basis(alg, mu, unit(&split.algebra_iso), unit(&algebra_comp), tol)?;

        let chart = sys.chart();
        let id = chart.identity();
        let mut samples = vec![id.clone()];
        for s in 1..=3 {
            samples.push(id.iter().enumerate().map(|(j, v)| v + 0.1 * s as f64 * (1.0 + j as f64) / m as f64).collect());
        }
        for th in &samples {
            if chart.check_domain(th).is_err() {
                continue;
            }
            let kk = chart.fundamental(th);
            for &al in &coord_comp {
                for &a in &split.algebra_iso {
                    if kk[(al, a)].abs() > 1e-12 {
                        return Err(RouthError::Spec(format!(
                            "fundamental field Ẽ_{a} moves the non-isotropy coordinate {al}; the chart is not adapted"
                        )));
                    }
                }
            }
        }
        let gauge_default = split.coord_iso.iter().map(|&i| id[i]).collect();
        Ok(Self {
            mu: mu.to_vec(),
            isotropy,
            solver_tol: 1e-12,
            max_newton_iters: 50,
            algebra_iso: split.algebra_iso,
            algebra_comp,
            coord_iso: split.coord_iso,
            coord_comp,
            gauge_default,
        })
    }

    pub fn with_solver(mut self, tol: f64, max_iters: usize) -> Self {
        self.solver_tol = tol;
        self.max_newton_iters = max_iters;
        self
    }

    pub fn algebra_iso(&self) -> &[usize] {
        &self.algebra_iso
    }
    pub fn algebra_comp(&self) -> &[usize] {
        &self.algebra_comp
    }
    pub fn coord_iso(&self) -> &[usize] {
        &self.coord_iso
    }
    pub fn coord_comp(&self) -> &[usize] {
        &self.coord_comp
    }

    /// Default `θ^A`: the identity's coordinates.
    pub fn gauge_default(&self) -> &[f64] {
        &self.gauge_default
    }

    pub fn isotropy_dim(&self) -> usize {
        self.algebra_iso.len()
    }

    /// Number of `θ^α` coordinates.
    pub fn quotient_dim(&self) -> usize {
        self.coord_comp.len()
    }

    /// Tolerance for treating a state as lying on the level set.
    pub fn membership_tol(&self) -> f64 {
        1e-6 * (1.0 + self.mu.iter().fold(0.0f64, |w, v| w.max(v.abs())))
    }

    /// Worst `|p_a − μ_a|` at `s`.
    pub fn momentum_residual(&self, sys: &LagrangianSystem, s: &FullState) -> f64 {
        sys.momentum(s).iter().zip(&self.mu).fold(0.0f64, |w, (p, m)| w.max((p - m).abs()))
    }

    /// Joins `θ^A` and `θ^α` into full chart coordinates.
    pub fn join_theta(&self, theta_iso: &[f64], theta_alpha: &[f64]) -> Vec<f64> {
        let m = self.coord_iso.len() + self.coord_comp.len();
        let mut th = vec![0.0; m];
        for (k, &i) in self.coord_iso.iter().enumerate() {
            th[i] = theta_iso[k];
        }
        for (k, &i) in self.coord_comp.iter().enumerate() {
            th[i] = theta_alpha[k];
        }
        th
    }

    pub fn theta_iso(&self, theta: &[f64]) -> Vec<f64> {
        self.coord_iso.iter().map(|&i| theta[i]).collect()
    }

    pub fn theta_alpha(&self, theta: &[f64]) -> Vec<f64> {
        self.coord_comp.iter().map(|&i| theta[i]).collect()
    }
}

/// A point `(x^i, θ^α, v^i)` of `N_μ/G_μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub x: Vec<f64>,
    pub theta_alpha: Vec<f64>,
    pub v_base: Vec<f64>,
}

impl ReducedState {
    pub fn to_vec(&self) -> Vec<f64> {
        self.x.iter().chain(&self.theta_alpha).chain(&self.v_base).copied().collect()
    }

    /// `n` base and `r` quotient coordinates.
    pub fn from_slice(n: usize, r: usize, s: &[f64]) -> Result<Self> {
        if s.len() != 2 * n + r {
            return Err(RouthError::Argument(format!(
                "reduced state has length {}, expected {}",
                s.len(),
                2 * n + r
            )));
        }
        Ok(Self { x: s[..n].to_vec(), theta_alpha: s[n..n + r].to_vec(), v_base: s[n + r..].to_vec() })
    }
}

/// Projection `N_μ → N_μ/G_μ`.
pub fn project_to_reduced(level: &MomentumLevel, s: &FullState) -> ReducedState {
    ReducedState { x: s.x.clone(), theta_alpha: level.theta_alpha(&s.theta), v_base: s.v_base.clone() }
}

/// `ℛ = L − v^a p_a`.
pub fn routhian(sys: &LagrangianSystem, s: &FullState) -> f64 {
    let f = sys.fiber(s);
    let n = sys.base_dim();
    let corr: f64 = s.v_group.iter().enumerate().map(|(a, v)| v * f.p[n + a]).sum();
    f.value - corr
}

/// Solves `p_a(x, θ, v^i, v^a) = μ_a` for `v^a` by Newton's method with
/// Jacobian `(g_ab)`, seeded at `warm` or zero.
pub fn solve_level_set(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    x: &[f64],
    theta: &[f64],
    v_base: &[f64],
    warm: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let n = sys.base_dim();
    let m = sys.group_dim();
    sys.chart().check_domain(theta)?;
    let mut vg = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; m]);
    if vg.len() != m {
        return Err(RouthError::Argument("warm start has the wrong dimension".into()));
    }
    let scale = 1.0 + level.mu.iter().fold(0.0f64, |w, v| w.max(v.abs()));
    let q: Vec<f64> = x.iter().chain(theta).copied().collect();
    let mut residual = f64::INFINITY;
    for _ in 0..=level.max_newton_iters {
        let v: Vec<f64> = v_base.iter().chain(&vg).copied().collect();
        let f = sys.model().fiber(&q, &v);
        let r = DVector::from_iterator(m, (0..m).map(|a| f.p[n + a] - level.mu[a]));
        residual = r.amax();
        if !residual.is_finite() {
            return Err(RouthError::NonFinite("momentum".into()));
        }
        if residual <= level.solver_tol * scale {
            return Ok(vg);
        }
        let g_ab = f.h.view((n, n), (m, m)).into_owned();
        let (step, _) = checked_solve(&g_ab, &r, sys.max_condition(), "group Hessian (g_ab)")?;
        for a in 0..m {
            vg[a] -= step[a];
        }
    }
    Err(RouthError::LevelSet { iterations: level.max_newton_iters, residual })
}

/// The coefficients of the barred frame adapted to the level sets.
///
/// Layouts: `b[(i, a)] = B^a_i`, `c[(a, b)] = C^b_a`, `a[(i, b)] = A^b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarredCoefficients {
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub a: DMatrix<f64>,
    /// `max |g_ia + B^b_i g_ab|`, relative to the size of `g_ia`.
    pub orthogonality_residual: f64,
}

/// `B^a_i = −g^{ab} g_ib`, `C^b_a = g^{bc} C^d_ac p_d` and `A^b_i` solving
/// `∂c X_i(p_a) + A^b_i g_ab = 0`.
pub fn barred_coefficients(sys: &LagrangianSystem, s: &FullState) -> Result<BarredCoefficients> {
    let t = sys.frame_terms(s)?;
    barred_from_terms(sys, s, &t)
}

fn barred_from_terms(sys: &LagrangianSystem, s: &FullState, t: &FrameTerms) -> Result<BarredCoefficients> {
    let n = sys.base_dim();
    let m = sys.group_dim();
    let blocks = HessianBlocks::from_full(&t.jet.h, n);
    let (ginv, _) = checked_inverse(&blocks.g_ab, sys.max_condition(), "group Hessian (g_ab)")?;
    let b = -&blocks.g_ia * &ginv;
    let alg = sys.algebra();
    let p: Vec<f64> = (0..m).map(|a| t.jet.p[n + a]).collect();
    let cp = DMatrix::from_fn(m, m, |a, c| (0..m).map(|d| alg.structure(d, a, c) * p[d]).sum::<f64>());
    // c[(a, b)] = Σ_c g^{bc} cp[(a, c)]
    let c = &cp * &ginv;
    let mut xp = DMatrix::zeros(n, m);
    for i in 0..n {
        for a in 0..m {
            let mut v = t.jet.mqv[(i, n + a)];
            for bb in 0..m {
                v -= t.lambda[(bb, i)] * t.jet.mqv[(n + bb, n + a)];
            }
            for cc in 0..m {
                for j in 0..n {
                    v -= t.curvature.get(cc, i, j) * s.v_base[j] * blocks.g_ab[(cc, a)];
                }
            }
            xp[(i, a)] = v;
        }
    }
    let a = -&xp * &ginv;
    let resid = &blocks.g_ia + &b * &blocks.g_ab;
    let orthogonality_residual = resid.amax() / (1.0 + blocks.g_ia.amax());
    Ok(BarredCoefficients { b, c, a, orthogonality_residual })
}

/// `ḡ_ij = g_ij − g_ia g^{ab} g_jb` at `s`.
pub fn reduced_hessian(sys: &LagrangianSystem, s: &FullState) -> Result<DMatrix<f64>> {
    let blocks = sys.hessian(s)?;
    let (ginv, _) = checked_inverse(&blocks.g_ab, sys.max_condition(), "group Hessian (g_ab)")?;
    Ok(blocks.reduced_metric(&ginv))
}

/// Full state on `N_μ` over a reduced state, with `θ^A = gauge`.
pub fn full_state_from_reduced(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    rs: &ReducedState,
    gauge: Option<&[f64]>,
    warm: Option<&[f64]>,
) -> Result<FullState> {
    let n = sys.base_dim();
    if rs.x.len() != n || rs.v_base.len() != n || rs.theta_alpha.len() != level.quotient_dim() {
        return Err(RouthError::Argument("reduced state dimensions do not match the system".into()));
    }
    let gauge = gauge.unwrap_or(level.gauge_default());
    let theta = level.join_theta(gauge, &rs.theta_alpha);
    let vg = solve_level_set(sys, level, &rs.x, &theta, &rs.v_base, warm)?;
    FullState::new(rs.x.clone(), theta, rs.v_base.clone(), vg)
}

/// Output of [`reduced_field_at`].
#[derive(Debug, Clone)]
pub struct ReducedEvaluation {
    /// `(ẋ, θ̇^α, v̇^i)`.
    pub derivative: Vec<f64>,
    /// The full state on `N_μ` used for the evaluation.
    pub full: FullState,
    /// Condition number of `ḡ`.
    pub condition: f64,
}

/// The Lagrange-Routh field at a full state lying on `N_μ`.
///
/// `v̇^i = Γ^i` solves `ḡ_ij Γ^j = X_i(L) − μ_a R^a_ij v^j − D(p_i) − B^b_i D(p_b)`
/// where `D` is the drift of the fibre derivatives along `(ẋ, θ̇)`. This is
/// the generalized Routh equation with `∂c X̄_i(ℛ^μ)` expanded in the
/// standard frame.
pub fn reduced_field_at(sys: &LagrangianSystem, level: &MomentumLevel, s: &FullState) -> Result<ReducedEvaluation> {
    let n = sys.base_dim();
    let m = sys.group_dim();
    let t = sys.frame_terms(s)?;
    let blocks = HessianBlocks::from_full(&t.jet.h, n);
    let (ginv, _) = checked_inverse(&blocks.g_ab, sys.max_condition(), "group Hessian (g_ab)")?;
    let b = -&blocks.g_ia * &ginv;
    let gbar = blocks.reduced_metric(&ginv);
    let curv = t.curvature.contract(&level.mu, &s.v_base);
    let drift_b = t.drift.rows(0, n).into_owned();
    let drift_g = t.drift.rows(n, m).into_owned();
    let mut rhs = &t.x_l - drift_b - &b * drift_g;
    for i in 0..n {
        rhs[i] -= curv[i];
    }
    let (gamma, condition) = checked_solve(&gbar, &rhs, sys.max_condition(), "reduced Hessian (ḡ_ij)")?;
    let mut derivative = s.v_base.clone();
    derivative.extend(level.coord_comp().iter().map(|&k| t.qdot[n + k]));
    derivative.extend(gamma.iter());
    Ok(ReducedEvaluation { derivative, full: s.clone(), condition })
}

/// The Lagrange-Routh field at a reduced state, evaluated with `θ^A` set to
/// `gauge` (default: identity values). The result does not depend on the
/// gauge.
pub fn reduced_field(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    rs: &ReducedState,
    gauge: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let s = full_state_from_reduced(sys, level, rs, gauge, None)?;
    Ok(reduced_field_at(sys, level, &s)?.derivative)
}

/// Integrates the reduced field with RK4, warm-starting the level-set solve
/// from the previous evaluation. Adds a `gbar_cond` diagnostic.
pub fn integrate_reduced(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    r0: &ReducedState,
    t0: f64,
    tf: f64,
    dt: f64,
) -> Result<Trajectory> {
    let n = sys.base_dim();
    let r = level.quotient_dim();
    let mut warm: Option<Vec<f64>> = None;
    let field = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let rs = ReducedState::from_slice(n, r, y)?;
        let s = full_state_from_reduced(sys, level, &rs, None, warm.as_deref())?;
        warm = Some(s.v_group.clone());
        Ok(reduced_field_at(sys, level, &s)?.derivative)
    };
    let mut traj = rk4(field, &r0.to_vec(), t0, tf, dt)?;
    let mut conds = Vec::with_capacity(traj.len());
    let mut warm: Option<Vec<f64>> = None;
    for y in &traj.states {
        let rs = ReducedState::from_slice(n, r, y)?;
        let s = full_state_from_reduced(sys, level, &rs, None, warm.as_deref())?;
        warm = Some(s.v_group.clone());
        conds.push(reduced_field_at(sys, level, &s)?.condition);
    }
    let worst = conds.iter().copied().fold(0.0, f64::max);
    log::debug!("reduced integration: worst condition number of ḡ = {worst:e}");
    traj.set_diagnostic("gbar_cond", conds)?;
    Ok(traj)
}

/// Residuals of the generalized Routh equations at interior samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RouthResidual {
    pub times: Vec<f64>,
    pub residuals: Vec<Vec<f64>>,
}

impl RouthResidual {
    pub fn max_abs(&self) -> f64 {
        self.residuals.iter().flatten().fold(0.0f64, |w, v| w.max(v.abs()))
    }
}

fn check_samples(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    times: &[f64],
    states: &[FullState],
) -> Result<f64> {
    if times.len() != states.len() || times.len() < 5 {
        return Err(RouthError::Argument("need at least five samples with matching times".into()));
    }
    let h = times[1] - times[0];
    if !(h > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
        return Err(RouthError::Argument("residuals need uniformly spaced samples".into()));
    }
    let tol = level.membership_tol();
    for (t, s) in times.iter().zip(states) {
        let r = level.momentum_residual(sys, s);
        if r > tol {
            return Err(RouthError::Domain(format!("sample at t = {t} is off the level set (|p − μ| = {r:e})")));
        }
    }
    Ok(h)
}

fn five_point(vals: &[Vec<f64>], k: usize, i: usize, h: f64) -> f64 {
    (vals[k - 2][i] - 8.0 * vals[k - 1][i] + 8.0 * vals[k + 1][i] - vals[k + 2][i]) / (12.0 * h)
}

/// `Γ(∂v X̄_i ℛ^μ) − ∂c X̄_i ℛ^μ + μ_a R^a_ij v^j` along a sampled
/// trajectory on `N_μ`. Uses `∂v X̄_i ℛ = ∂L/∂v^i` and differentiates it in
/// time with a five-point stencil.
pub fn generalized_routh_residual(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    times: &[f64],
    states: &[FullState],
) -> Result<RouthResidual> {
    let h = check_samples(sys, level, times, states)?;
    let n = sys.base_dim();
    let pb: Vec<Vec<f64>> = states.iter().map(|s| sys.fiber(s).p.rows(0, n).iter().copied().collect()).collect();
    let mut out = RouthResidual { times: Vec::new(), residuals: Vec::new() };
    for k in 2..states.len() - 2 {
        let s = &states[k];
        let t = sys.frame_terms(s)?;
        let curv = t.curvature.contract(&level.mu, &s.v_base);
        let res = (0..n).map(|i| five_point(&pb, k, i, h) - t.x_l[i] + curv[i]).collect();
        out.times.push(times[k]);
        out.residuals.push(res);
    }
    Ok(out)
}

/// The same equations written with `Γ₀`, the part of the field along the
/// frame `{X̄_i, Ē_a}` without the fibre correction:
/// `Γ₀(∂v X̄_i ℛ^μ) − ∂c X̂_i ℛ^μ + μ_a (R^a_ij + B^b_i B^c_j C^a_bc) v^j`.
pub fn gamma0_routh_residual(
    sys: &LagrangianSystem,
    level: &MomentumLevel,
    times: &[f64],
    states: &[FullState],
) -> Result<RouthResidual> {
    let h = check_samples(sys, level, times, states)?;
    let n = sys.base_dim();
    let m = sys.group_dim();
    let alg = sys.algebra();
    let mu = &level.mu;
    let pb: Vec<Vec<f64>> = states.iter().map(|s| sys.fiber(s).p.rows(0, n).iter().copied().collect()).collect();
    let mut out = RouthResidual { times: Vec::new(), residuals: Vec::new() };
    for k in 2..states.len() - 2 {
        let s = &states[k];
        let t = sys.frame_terms(s)?;
        let bc = barred_from_terms(sys, s, &t)?;
        let hm = &t.jet.h;
        let mut res = vec![0.0; n];
        for (i, r) in res.iter_mut().enumerate() {
            // Ē^C_a(∂L/∂v^i)
            let ebar: Vec<f64> = (0..m)
                .map(|a| {
                    let mut v = 0.0;
                    for b in 0..m {
                        v += t.k[(b, a)] * t.jet.mqv[(n + b, i)];
                        for c in 0..m {
                            v += alg.structure(b, a, c) * s.v_group[c] * hm[(i, n + b)];
                        }
                        v += bc.c[(a, b)] * hm[(i, n + b)];
                    }
                    v
                })
                .collect();
            let mut g0 = five_point(&pb, k, i, h);
            for a in 0..m {
                let w: f64 = (0..n).map(|j| s.v_base[j] * bc.b[(j, a)]).sum::<f64>() + s.v_group[a];
                g0 -= w * ebar[a];
            }
            let mut xhat = t.x_l[i];
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        xhat -= bc.b[(i, a)] * alg.structure(b, a, c) * mu[b] * s.v_group[c];
                    }
                }
            }
            let mut extra = 0.0;
            for a in 0..m {
                for j in 0..n {
                    let mut coeff = t.curvature.get(a, i, j);
                    for b in 0..m {
                        for c in 0..m {
                            coeff += bc.b[(i, b)] * bc.b[(j, c)] * alg.structure(a, b, c);
                        }
                    }
                    extra += mu[a] * coeff * s.v_base[j];
                }
            }
            *r = g0 - xhat + extra;
        }
        out.times.push(times[k]);
        out.residuals.push(res);
    }
    Ok(out)
}

/// Worst violation of `∂v X̄_i ∂v X̄_j(ℛ) = ḡ_ij`, with the second
/// derivatives of the Routhian taken by central differences along the fibre
/// directions `∂/∂v^i + B^a_i ∂/∂v^a` (coefficients frozen at `s`).
pub fn routhian_hessian_defect(sys: &LagrangianSystem, s: &FullState) -> Result<f64> {
    let n = sys.base_dim();
    let m = sys.group_dim();
    let bc = barred_coefficients(sys, s)?;
    let gbar = reduced_hessian(sys, s)?;
    let dir = |i: usize| -> Vec<f64> {
        let mut d = vec![0.0; n + m];
        d[i] = 1.0;
        for a in 0..m {
            d[n + a] = bc.b[(i, a)];
        }
        d
    };
    let scale = s.v().iter().fold(0.0f64, |w, v| w.max(v.abs()));
    let h = fd_step(FD_STEP_SECOND, scale);
    let eval = |ci: f64, di: &[f64], cj: f64, dj: &[f64]| {
        let mut t = s.clone();
        for k in 0..n {
            t.v_base[k] += ci * di[k] + cj * dj[k];
        }
        for a in 0..m {
            t.v_group[a] += ci * di[n + a] + cj * dj[n + a];
        }
        routhian(sys, &t)
    };
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let (di, dj) = (dir(i), dir(j));
            let d = (eval(h, &di, h, &dj) - eval(h, &di, -h, &dj) - eval(-h, &di, h, &dj) + eval(-h, &di, -h, &dj))
                / (4.0 * h * h);
            worst = worst.max((d - gbar[(i, j)]).abs());
        }
    }
    Ok(worst)
}
