//! Lie algebras given by structure constants, coordinate charts on Lie
//! groups, isotropy subalgebras of momenta and the development ODE.
//!
//! Conventions: `[E_a, E_b] = C^c_ab E_c` is the matrix commutator of the
//! basis elements. The group acts on itself from the left, so the fundamental
//! fields `Ẽ_a` are right-invariant and satisfy `[Ẽ_a, Ẽ_b] = -C^c_ab Ẽ_c`.
//! In a chart, `Ẽ_a = K^b_a ∂/∂θ^b`, and `Ad_g E_a = 𝒜^b_a(g) E_b`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RouthError};
use crate::integrate::{rk4_on_grid, Trajectory};
use crate::linalg::{fd_jacobian, fd_lie_bracket};

/// A finite-dimensional real Lie algebra in a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    // c[(c * dim + a) * dim + b] = C^c_ab
    c: Vec<f64>,
}

impl LieAlgebra {
    /// Build from a dense array `C[c][a][b]`, checking antisymmetry and the
    /// Jacobi identity.
    pub fn new(dim: usize, structure_constants: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(RouthError::Spec("Lie algebra dimension must be positive".into()));
        }
        if structure_constants.len() != dim * dim * dim {
            return Err(RouthError::Spec(format!(
                "expected {} structure constants, got {}",
                dim * dim * dim,
                structure_constants.len()
            )));
        }
        let alg = Self { dim, c: structure_constants };
        let scale = alg.c.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let anti = alg.antisymmetry_defect();
        let jac = alg.jacobi_defect();
        if anti > 1e-12 * scale {
            return Err(RouthError::Spec(format!("structure constants not antisymmetric ({anti:e})")));
        }
        if jac > 1e-10 * scale * scale {
            return Err(RouthError::Spec(format!("Jacobi identity fails ({jac:e})")));
        }
        Ok(alg)
    }

    /// Build from a list of brackets `[E_a, E_b] = Σ value E_c` given as
    /// `(a, b, c, value)`; the antisymmetric partners are filled in.
    pub fn from_brackets(dim: usize, brackets: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut c = vec![0.0; dim * dim * dim];
        for &(a, b, k, v) in brackets {
            if a >= dim || b >= dim || k >= dim {
                return Err(RouthError::Spec(format!("bracket index out of range: ({a},{b},{k})")));
            }
            c[(k * dim + a) * dim + b] = v;
            c[(k * dim + b) * dim + a] = -v;
        }
        Self::new(dim, c)
    }

    pub fn abelian(dim: usize) -> Self {
        Self { dim, c: vec![0.0; dim * dim * dim] }
    }

    /// se(2) in the basis e1, e2 (translations) and e3 (rotation):
    /// `[e1, e3] = -e2`, `[e2, e3] = e1`, `[e1, e2] = 0`.
    pub fn se2() -> Self {
        Self::from_brackets(3, &[(0, 2, 1, -1.0), (1, 2, 0, 1.0)]).expect("se(2) is a Lie algebra")
    }

    /// so(3) ≅ su(2) with `C^c_ab = ε_abc`.
    pub fn so3() -> Self {
        Self::from_brackets(3, &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)])
            .expect("so(3) is a Lie algebra")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `C^c_ab`.
    #[inline]
    pub fn structure(&self, c: usize, a: usize, b: usize) -> f64 {
        self.c[(c * self.dim + a) * self.dim + b]
    }

    pub fn structure_constants(&self) -> &[f64] {
        &self.c
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|v| *v == 0.0)
    }

    /// `ζ^c = C^c_ab ξ^a η^b`.
    pub fn bracket(&self, xi: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim || eta.len() != self.dim {
            return Err(RouthError::Argument(format!(
                "bracket expects vectors of length {}, got {} and {}",
                self.dim,
                xi.len(),
                eta.len()
            )));
        }
        let m = self.dim;
        Ok((0..m)
            .map(|c| {
                let mut s = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        s += self.structure(c, a, b) * xi[a] * eta[b];
                    }
                }
                s
            })
            .collect())
    }

    /// Largest `|C^c_ab + C^c_ba|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let m = self.dim;
        let mut worst = 0.0f64;
        for c in 0..m {
            for a in 0..m {
                for b in 0..m {
                    worst = worst.max((self.structure(c, a, b) + self.structure(c, b, a)).abs());
                }
            }
        }
        worst
    }

    /// Largest violation of the Jacobi identity over all index tuples.
    pub fn jacobi_defect(&self) -> f64 {
        let m = self.dim;
        let mut worst = 0.0f64;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let mut s = 0.0;
                        for e in 0..m {
                            s += self.structure(e, a, b) * self.structure(d, e, c)
                                + self.structure(e, b, c) * self.structure(d, e, a)
                                + self.structure(e, c, a) * self.structure(d, e, b);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// Structure constants in the basis `E'_a = P^b_a E_b` (columns of `p`).
    pub fn in_basis(&self, p: &DMatrix<f64>) -> Result<LieAlgebra> {
        let m = self.dim;
        if p.nrows() != m || p.ncols() != m {
            return Err(RouthError::Argument("change of basis has the wrong shape".into()));
        }
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| RouthError::Argument("change of basis is singular".into()))?;
        let mut c = vec![0.0; m * m * m];
        for a in 0..m {
            for b in 0..m {
                let br = self.bracket(p.column(a).as_slice(), p.column(b).as_slice())?;
                let coords = &p_inv * DVector::from_vec(br);
                for k in 0..m {
                    c[(k * m + a) * m + b] = coords[k];
                }
            }
        }
        Ok(LieAlgebra { dim: m, c })
    }

    /// The matrix `M_ab = C^c_ab μ_c` whose kernel is the isotropy algebra.
    pub fn coadjoint_matrix(&self, mu: &[f64]) -> DMatrix<f64> {
        let m = self.dim;
        DMatrix::from_fn(m, m, |a, b| (0..m).map(|c| self.structure(c, a, b) * mu[c]).sum())
    }
}

/// Coordinate model of a Lie group.
///
/// Fundamental fields must satisfy `[ξ̃, η̃] = −[ξ, η]~` with the algebra's
/// structure constants; `fundamental_bracket_defect` checks this.
pub trait GroupChart: Send + Sync {
    fn algebra(&self) -> &LieAlgebra;

    fn dim(&self) -> usize {
        self.algebra().dim()
    }

    fn identity(&self) -> Vec<f64>;

    fn multiply(&self, a: &[f64], b: &[f64]) -> Vec<f64>;

    fn inverse(&self, a: &[f64]) -> Vec<f64>;

    /// `𝒜^b_a(g)`: column `a` holds the components of `Ad_g E_a`.
    fn adjoint(&self, theta: &[f64]) -> DMatrix<f64>;

    /// `K^b_a(θ)`: column `a` holds the coordinate components of `Ẽ_a`.
    fn fundamental(&self, theta: &[f64]) -> DMatrix<f64>;

    /// Rejects points outside the chart domain.
    fn check_domain(&self, _theta: &[f64]) -> Result<()> {
        Ok(())
    }

    fn name(&self) -> &str;
}

/// `ℝ^m` under addition.
#[derive(Debug, Clone)]
pub struct AbelianChart {
    algebra: LieAlgebra,
}

impl AbelianChart {
    pub fn new(dim: usize) -> Self {
        Self { algebra: LieAlgebra::abelian(dim) }
    }
}

impl GroupChart for AbelianChart {
    fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }
    fn identity(&self) -> Vec<f64> {
        vec![0.0; self.algebra.dim()]
    }
    fn multiply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }
    fn inverse(&self, a: &[f64]) -> Vec<f64> {
        a.iter().map(|x| -x).collect()
    }
    fn adjoint(&self, _theta: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim())
    }
    fn fundamental(&self, _theta: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim())
    }
    fn name(&self) -> &str {
        "abelian"
    }
}

static SE2_UNWRAP_WARNED: AtomicBool = AtomicBool::new(false);

/// SE(2) with coordinates `(y, z, θ)` of the matrix
/// `[[cos θ, -sin θ, y], [sin θ, cos θ, z], [0, 0, 1]]`.
#[derive(Debug, Clone)]
pub struct Se2Chart {
    algebra: LieAlgebra,
}

impl Default for Se2Chart {
    fn default() -> Self {
        Self { algebra: LieAlgebra::se2() }
    }
}

impl Se2Chart {
    pub fn new() -> Self {
        Self::default()
    }
}

impl GroupChart for Se2Chart {
    fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }
    fn identity(&self) -> Vec<f64> {
        vec![0.0; 3]
    }
    fn multiply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let (s, c) = a[2].sin_cos();
        vec![a[0] + c * b[0] - s * b[1], a[1] + s * b[0] + c * b[1], a[2] + b[2]]
    }
    fn inverse(&self, a: &[f64]) -> Vec<f64> {
        let (s, c) = a[2].sin_cos();
        vec![-(c * a[0] + s * a[1]), s * a[0] - c * a[1], -a[2]]
    }
    fn adjoint(&self, th: &[f64]) -> DMatrix<f64> {
        let (s, c) = th[2].sin_cos();
        DMatrix::from_row_slice(3, 3, &[c, -s, th[1], s, c, -th[0], 0.0, 0.0, 1.0])
    }
    fn fundamental(&self, th: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[1.0, 0.0, -th[1], 0.0, 1.0, th[0], 0.0, 0.0, 1.0])
    }
    /// The angle is never wrapped; leaving `(−π, π)` is only reported.
    fn check_domain(&self, th: &[f64]) -> Result<()> {
        if th[2].abs() > std::f64::consts::PI && !SE2_UNWRAP_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("SE(2) angle left (−π, π) (θ = {}); continuing unwrapped", th[2]);
        }
        Ok(())
    }
    fn name(&self) -> &str {
        "se2"
    }
}

fn rot_x(a: f64) -> nalgebra::Matrix3<f64> {
    let (s, c) = a.sin_cos();
    nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}
fn rot_y(a: f64) -> nalgebra::Matrix3<f64> {
    let (s, c) = a.sin_cos();
    nalgebra::Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}
fn rot_z(a: f64) -> nalgebra::Matrix3<f64> {
    let (s, c) = a.sin_cos();
    nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn nearest_branch(angle: f64, target: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    angle + ((target - angle) / tau).round() * tau
}

/// SO(3) with angles `(φ, β, γ)` of `R = Rz(φ) Rx(β) Ry(γ)`. The chart is
/// singular where `cos β = 0`.
#[derive(Debug, Clone)]
pub struct So3Chart {
    algebra: LieAlgebra,
    min_cos_beta: f64,
}

impl Default for So3Chart {
    fn default() -> Self {
        Self { algebra: LieAlgebra::so3(), min_cos_beta: 1e-6 }
    }
}

impl So3Chart {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rotation(th: &[f64]) -> nalgebra::Matrix3<f64> {
        rot_z(th[0]) * rot_x(th[1]) * rot_y(th[2])
    }

    /// Angles of a rotation matrix, with `φ` and `γ` taken on the branch
    /// nearest to the supplied hints.
    pub fn angles(r: &nalgebra::Matrix3<f64>, hint: [f64; 2]) -> Vec<f64> {
        let beta = r[(2, 1)].clamp(-1.0, 1.0).asin();
        let gamma = (-r[(2, 0)]).atan2(r[(2, 2)]);
        let phi = (-r[(0, 1)]).atan2(r[(1, 1)]);
        vec![nearest_branch(phi, hint[0]), beta, nearest_branch(gamma, hint[1])]
    }
}

impl GroupChart for So3Chart {
    fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }
    fn identity(&self) -> Vec<f64> {
        vec![0.0; 3]
    }
    fn multiply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let r = Self::rotation(a) * Self::rotation(b);
        Self::angles(&r, [a[0] + b[0], a[2] + b[2]])
    }
    fn inverse(&self, a: &[f64]) -> Vec<f64> {
        Self::angles(&Self::rotation(a).transpose(), [-a[0], -a[2]])
    }
    fn adjoint(&self, th: &[f64]) -> DMatrix<f64> {
        let r = Self::rotation(th);
        DMatrix::from_fn(3, 3, |i, j| r[(i, j)])
    }
    fn fundamental(&self, th: &[f64]) -> DMatrix<f64> {
        // Spatial angular velocity is J θ̇ with
        // J = [e_z | Rz(φ) e_x | Rz(φ) Rx(β) e_y]; Ẽ_a = J^{-1} e_a.
        let (sp, cp) = th[0].sin_cos();
        let (sb, cb) = th[1].sin_cos();
        let j = nalgebra::Matrix3::new(0.0, cp, -sp * cb, 0.0, sp, cp * cb, 1.0, 0.0, sb);
        let k = j.try_inverse().unwrap_or_else(|| nalgebra::Matrix3::from_element(f64::NAN));
        DMatrix::from_fn(3, 3, |i, jj| k[(i, jj)])
    }
    fn check_domain(&self, th: &[f64]) -> Result<()> {
        let cb = th[1].cos();
        if cb.abs() < self.min_cos_beta || !cb.is_finite() {
            return Err(RouthError::Chart(format!("SO(3) chart singular at β = {}", th[1])));
        }
        Ok(())
    }
    fn name(&self) -> &str {
        "so3"
    }
}

/// A chart obtained from another by a linear change of coordinates
/// `θ' = T θ` and a change of algebra basis `E'_a = P^b_a E_b`.
pub struct AdaptedChart {
    inner: Arc<dyn GroupChart>,
    t: DMatrix<f64>,
    t_inv: DMatrix<f64>,
    p: DMatrix<f64>,
    p_inv: DMatrix<f64>,
    algebra: LieAlgebra,
    name: String,
}

impl AdaptedChart {
    pub fn new(inner: Arc<dyn GroupChart>, t: DMatrix<f64>, p: DMatrix<f64>) -> Result<Self> {
        let m = inner.dim();
        if t.shape() != (m, m) || p.shape() != (m, m) {
            return Err(RouthError::Argument("adapted chart matrices have the wrong shape".into()));
        }
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| RouthError::Argument("coordinate change is singular".into()))?;
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| RouthError::Argument("change of basis is singular".into()))?;
        let algebra = inner.algebra().in_basis(&p)?;
        let name = format!("{}-adapted", inner.name());
        Ok(Self { inner, t, t_inv, p, p_inv, algebra, name })
    }

    fn to_inner(&self, th: &[f64]) -> Vec<f64> {
        (&self.t_inv * DVector::from_column_slice(th)).iter().copied().collect()
    }

    fn from_inner(&self, th: &[f64]) -> Vec<f64> {
        (&self.t * DVector::from_column_slice(th)).iter().copied().collect()
    }

    pub fn coordinate_change(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn change_of_basis(&self) -> &DMatrix<f64> {
        &self.p
    }
}

impl GroupChart for AdaptedChart {
    fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }
    fn identity(&self) -> Vec<f64> {
        self.from_inner(&self.inner.identity())
    }
    fn multiply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.from_inner(&self.inner.multiply(&self.to_inner(a), &self.to_inner(b)))
    }
    fn inverse(&self, a: &[f64]) -> Vec<f64> {
        self.from_inner(&self.inner.inverse(&self.to_inner(a)))
    }
    fn adjoint(&self, th: &[f64]) -> DMatrix<f64> {
        &self.p_inv * self.inner.adjoint(&self.to_inner(th)) * &self.p
    }
    fn fundamental(&self, th: &[f64]) -> DMatrix<f64> {
        &self.t * self.inner.fundamental(&self.to_inner(th)) * &self.p
    }
    fn check_domain(&self, th: &[f64]) -> Result<()> {
        self.inner.check_domain(&self.to_inner(th))
    }
    fn name(&self) -> &str {
        &self.name
    }
}

/// Worst violation of `[Ẽ_a, Ẽ_b] = -C^c_ab Ẽ_c` at `theta`, by finite
/// differences.
pub fn fundamental_bracket_defect(chart: &dyn GroupChart, theta: &[f64]) -> f64 {
    let m = chart.dim();
    let alg = chart.algebra();
    let k0 = chart.fundamental(theta);
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            let fa = |th: &[f64]| chart.fundamental(th).column(a).iter().copied().collect::<Vec<_>>();
            let fb = |th: &[f64]| chart.fundamental(th).column(b).iter().copied().collect::<Vec<_>>();
            let br = fd_lie_bracket(&fa, &fb, theta);
            for (k, brk) in br.iter().enumerate() {
                let expected: f64 = -(0..m).map(|c| alg.structure(c, a, b) * k0[(k, c)]).sum::<f64>();
                worst = worst.max((brk - expected).abs());
            }
        }
    }
    worst
}

/// Worst violation of `Ẽ_a(𝒜^c_b) = C^c_ad 𝒜^d_b` at `theta`, by finite
/// differences.
pub fn adjoint_derivative_defect(chart: &dyn GroupChart, theta: &[f64]) -> f64 {
    let m = chart.dim();
    let alg = chart.algebra();
    let k = chart.fundamental(theta);
    let adj = chart.adjoint(theta);
    let flat = |th: &[f64]| chart.adjoint(th).iter().copied().collect::<Vec<_>>();
    // Column-major flattening: entry (c, b) sits at b * m + c.
    let jac = fd_jacobian(&flat, theta);
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let lhs: f64 = (0..m).map(|l| jac[(b * m + c, l)] * k[(l, a)]).sum();
                let rhs: f64 = (0..m).map(|d| alg.structure(c, a, d) * adj[(d, b)]).sum();
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    worst
}

/// The isotropy algebra `𝔤_μ` of a covector and a complement.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropySplit {
    pub mu: Vec<f64>,
    /// Columns span `𝔤_μ`.
    pub basis_a: DMatrix<f64>,
    /// Columns complete `basis_a` to a basis.
    pub basis_alpha: DMatrix<f64>,
    /// `[basis_a | basis_alpha]`, mapping adapted components to original ones.
    pub change_of_basis: DMatrix<f64>,
    /// `μ` in the adapted dual basis, `Pᵀ μ`.
    pub mu_adapted: Vec<f64>,
}

impl IsotropySplit {
    pub fn isotropy_dim(&self) -> usize {
        self.basis_a.ncols()
    }

    /// Worst `|ξ^b C^c_ab μ_c|` over the isotropy basis vectors.
    pub fn condition_defect(&self, alg: &LieAlgebra) -> f64 {
        let mmat = alg.coadjoint_matrix(&self.mu);
        let r = mmat * &self.basis_a;
        r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Split from a user-supplied basis, for example the non-orthonormal
    /// basis `{e1 + μ e2, e2, e3}` used for SE(2).
    pub fn from_basis(
        alg: &LieAlgebra,
        mu: &[f64],
        basis_a: DMatrix<f64>,
        basis_alpha: DMatrix<f64>,
        tol: f64,
    ) -> Result<Self> {
        let m = alg.dim();
        if mu.len() != m || basis_a.nrows() != m || basis_alpha.nrows() != m {
            return Err(RouthError::Argument("isotropy basis has the wrong shape".into()));
        }
        if basis_a.ncols() + basis_alpha.ncols() != m {
            return Err(RouthError::Argument("isotropy basis is not a full basis".into()));
        }
        let mut p = DMatrix::zeros(m, m);
        p.columns_mut(0, basis_a.ncols()).copy_from(&basis_a);
        p.columns_mut(basis_a.ncols(), basis_alpha.ncols()).copy_from(&basis_alpha);
        let split = finish_split(alg, mu, basis_a, basis_alpha, p)?;
        let scale = 1.0 + mu.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if split.condition_defect(alg) > 10.0 * tol * scale {
            return Err(RouthError::Spec("supplied vectors are not in the isotropy algebra".into()));
        }
        Ok(split)
    }
}

fn finish_split(
    alg: &LieAlgebra,
    mu: &[f64],
    basis_a: DMatrix<f64>,
    basis_alpha: DMatrix<f64>,
    p: DMatrix<f64>,
) -> Result<IsotropySplit> {
    let m = alg.dim();
    let det = p.determinant();
    if !(det.abs() > 1e-12) {
        return Err(RouthError::Spec("adapted basis is singular".into()));
    }
    let k = basis_a.ncols();
    let adapted = alg.in_basis(&p)?;
    let scale = alg.structure_constants().iter().fold(1.0f64, |s, v| s.max(v.abs()));
    for g in k..m {
        for a in 0..k {
            for b in 0..k {
                if adapted.structure(g, a, b).abs() > 1e-9 * scale {
                    return Err(RouthError::Spec(format!(
                        "adapted structure constant C^{g}_{a}{b} = {} is not zero",
                        adapted.structure(g, a, b)
                    )));
                }
            }
        }
    }
    let mu_adapted = (p.transpose() * DVector::from_column_slice(mu)).iter().copied().collect();
    Ok(IsotropySplit { mu: mu.to_vec(), basis_a, basis_alpha, change_of_basis: p, mu_adapted })
}

/// Isotropy algebra of `mu`: the kernel of `ξ ↦ (a ↦ ξ^b C^c_ab μ_c)`,
/// computed by SVD with relative threshold `tol`.
pub fn isotropy_subalgebra(alg: &LieAlgebra, mu: &[f64], tol: f64) -> Result<IsotropySplit> {
    let m = alg.dim();
    if mu.len() != m {
        return Err(RouthError::Argument(format!("μ has length {}, expected {m}", mu.len())));
    }
    if !(tol > 0.0) {
        return Err(RouthError::Argument("tolerance must be positive".into()));
    }
    let mmat = alg.coadjoint_matrix(mu);
    let svd = mmat.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let threshold = tol * sigma_max.max(1.0);
    let rank = sigma.iter().filter(|&&s| s > threshold).count();
    let k = m - rank;
    let mut basis_alpha = DMatrix::zeros(m, rank);
    for (col, &i) in order.iter().take(rank).enumerate() {
        basis_alpha.set_column(col, &v_t.row(i).transpose());
    }
    let mut basis_a = DMatrix::zeros(m, k);
    for (col, &i) in order.iter().skip(rank).enumerate() {
        let mut v = v_t.row(i).transpose().into_owned();
        // Fix the sign so the largest component is positive.
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        basis_a.set_column(col, &v);
    }
    let mut p = DMatrix::zeros(m, m);
    p.columns_mut(0, k).copy_from(&basis_a);
    p.columns_mut(k, rank).copy_from(&basis_alpha);
    finish_split(alg, mu, basis_a, basis_alpha, p)
}

/// Development of an algebra curve: `g(t)` with `g⁻¹ ġ = ξ(t)`, `g(t0) = g0`,
/// integrated in chart coordinates as `θ̇ = K(θ) 𝒜(θ) ξ(t)`.
pub fn develop(
    chart: &dyn GroupChart,
    xi_of_t: &dyn Fn(f64) -> Vec<f64>,
    g0: &[f64],
    t_grid: &[f64],
) -> Result<Trajectory> {
    let m = chart.dim();
    if g0.len() != m {
        return Err(RouthError::Argument("g0 has the wrong dimension".into()));
    }
    chart.check_domain(g0)?;
    let field = |t: f64, th: &[f64]| -> Result<Vec<f64>> {
        chart.check_domain(th)?;
        let xi = xi_of_t(t);
        if xi.len() != m {
            return Err(RouthError::Argument("ξ(t) has the wrong dimension".into()));
        }
        Ok(development_rate(chart, th, &xi))
    };
    Ok(rk4_on_grid(field, g0, t_grid)?)
}

/// `θ̇ = K(θ) 𝒜(θ) ξ`, the chart velocity of `g ξ`.
pub fn development_rate(chart: &dyn GroupChart, th: &[f64], xi: &[f64]) -> Vec<f64> {
    let v = chart.fundamental(th) * (chart.adjoint(th) * DVector::from_column_slice(xi));
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::time_grid;

    #[test]
    fn se2_brackets() {
        let g = LieAlgebra::se2();
        let e = |i: usize| {
            let mut v = vec![0.0; 3];
            v[i] = 1.0;
            v
        };
        assert_eq!(g.bracket(&e(0), &e(2)).unwrap(), vec![0.0, -1.0, 0.0]);
        assert_eq!(g.bracket(&e(1), &e(2)).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(g.bracket(&e(0), &e(1)).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn se2_adapted_bracket() {
        let mu = 0.3;
        let p = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, mu, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let a = LieAlgebra::se2().in_basis(&p).unwrap();
        // [E1, E3] = μ E1 - (1 + μ²) E2
        assert!((a.structure(0, 0, 2) - mu).abs() < 1e-15);
        assert!((a.structure(1, 0, 2) + (1.0 + mu * mu)).abs() < 1e-15);
        assert_eq!(a.structure(2, 0, 2), 0.0);
    }

    #[test]
    fn abelian_bracket_vanishes() {
        let g = LieAlgebra::abelian(4);
        assert!(g.bracket(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bracket_dimension_mismatch() {
        assert!(matches!(LieAlgebra::se2().bracket(&[1.0], &[0.0; 3]), Err(RouthError::Argument(_))));
    }

    #[test]
    fn builtin_algebras_exact() {
        for g in [LieAlgebra::se2(), LieAlgebra::so3(), LieAlgebra::abelian(3)] {
            assert_eq!(g.antisymmetry_defect(), 0.0);
            assert_eq!(g.jacobi_defect(), 0.0);
        }
    }

    #[test]
    fn non_jacobi_constants_rejected() {
        // [e1,e2] = e3, [e2,e3] = e3 only: fails Jacobi.
        let r = LieAlgebra::from_brackets(3, &[(0, 1, 2, 1.0), (1, 2, 2, 1.0), (0, 2, 0, 1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn isotropy_se2_typical() {
        let s = isotropy_subalgebra(&LieAlgebra::se2(), &[1.0, 0.3, 0.0], 1e-10).unwrap();
        assert_eq!(s.isotropy_dim(), 1);
        let v = s.basis_a.column(0);
        let r = v / v[0];
        assert!((r[1] - 0.3).abs() < 1e-12 && r[2].abs() < 1e-12);
    }

    #[test]
    fn isotropy_se2_rotation_momentum_is_everything() {
        // All brackets of se(2) lie in span{e1, e2}, so μ = e3* annihilates them.
        let s = isotropy_subalgebra(&LieAlgebra::se2(), &[0.0, 0.0, 1.0], 1e-10).unwrap();
        assert_eq!(s.isotropy_dim(), 3);
    }

    #[test]
    fn isotropy_abelian_is_everything() {
        let s = isotropy_subalgebra(&LieAlgebra::abelian(2), &[0.4, -1.0], 1e-10).unwrap();
        assert_eq!(s.isotropy_dim(), 2);
        assert_eq!(s.basis_alpha.ncols(), 0);
    }

    #[test]
    fn isotropy_so3() {
        let s = isotropy_subalgebra(&LieAlgebra::so3(), &[0.0, 0.0, 2.0], 1e-10).unwrap();
        assert_eq!(s.isotropy_dim(), 1);
        assert!((s.basis_a[(2, 0)] - 1.0).abs() < 1e-12);
        assert!((s.mu_adapted[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn from_basis_accepts_unnormalized_se2_basis() {
        let mu = 0.3;
        let a = DMatrix::from_column_slice(3, 1, &[1.0, mu, 0.0]);
        let alpha = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let s = IsotropySplit::from_basis(&LieAlgebra::se2(), &[1.0, mu, 0.0], a, alpha, 1e-10).unwrap();
        assert!((s.mu_adapted[0] - (1.0 + mu * mu)).abs() < 1e-15);
        assert!((s.mu_adapted[1] - mu).abs() < 1e-15);
        assert_eq!(s.mu_adapted[2], 0.0);
    }

    #[test]
    fn from_basis_rejects_non_isotropic_vector() {
        let a = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        let alpha = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(IsotropySplit::from_basis(&LieAlgebra::se2(), &[1.0, 0.3, 0.0], a, alpha, 1e-10).is_err());
    }

    #[test]
    fn se2_chart_identities() {
        let ch = Se2Chart::new();
        let g = [0.4, -1.1, 0.7];
        assert_eq!(ch.multiply(&ch.identity(), &g), g.to_vec());
        let gi = ch.multiply(&g, &ch.inverse(&g));
        assert!(gi.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(ch.adjoint(&ch.identity()), DMatrix::identity(3, 3));
        assert!(fundamental_bracket_defect(&ch, &g) < 1e-8);
        assert!(adjoint_derivative_defect(&ch, &g) < 1e-8);
    }

    #[test]
    fn so3_chart_identities() {
        let ch = So3Chart::new();
        let g = [0.4, -0.3, 0.9];
        let h = [-1.2, 0.2, 0.3];
        let gh = ch.multiply(&g, &h);
        let lhs = ch.adjoint(&gh);
        let rhs = ch.adjoint(&g) * ch.adjoint(&h);
        assert!((lhs - rhs).amax() < 1e-12);
        assert!(fundamental_bracket_defect(&ch, &g) < 1e-7);
        assert!(adjoint_derivative_defect(&ch, &g) < 1e-7);
        assert!(ch.check_domain(&[0.0, std::f64::consts::FRAC_PI_2, 0.0]).is_err());
    }

    #[test]
    fn develop_abelian_constant() {
        let ch = AbelianChart::new(2);
        let grid = time_grid(0.0, 2.0, 0.1).unwrap();
        let tr = develop(&ch, &|_| vec![0.5, -1.0], &[0.0, 0.0], &grid).unwrap();
        let last = tr.last_state().unwrap();
        assert!((last[0] - 1.0).abs() < 1e-14 && (last[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn develop_zero_generator_is_constant() {
        let ch = Se2Chart::new();
        let grid = time_grid(0.0, 1.0, 0.1).unwrap();
        let tr = develop(&ch, &|_| vec![0.0; 3], &[0.3, 0.2, 0.1], &grid).unwrap();
        assert!(tr.states.iter().all(|s| s == &vec![0.3, 0.2, 0.1]));
    }

    #[test]
    fn develop_se2_translation() {
        let ch = Se2Chart::new();
        let grid = time_grid(0.0, 3.0, 0.01).unwrap();
        let tr = develop(&ch, &|_| vec![1.0, 0.0, 0.0], &ch.identity(), &grid).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            assert!((s[0] - t).abs() < 1e-12 && s[1].abs() < 1e-14 && s[2].abs() < 1e-14);
        }
    }
}
