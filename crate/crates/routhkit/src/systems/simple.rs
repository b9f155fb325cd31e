//! Simple mechanical systems `L = T − V` with the mechanical connection.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_dual::DualNum;

use crate::bundle::{BundleConnection, FullState};
use crate::error::{Result, RouthError};
use crate::lagrangian::{LagrangianSystem, QuadraticCoefficients, QuadraticForm, QuadraticModel};
use crate::linalg::{checked_inverse, fd_step, FD_STEP_FIRST};

/// Kinetic energy split by the mechanical connection, so `g_ia = 0` by
/// construction: `T = ½ g_ij v^i v^j + ½ g_ab v^a v^b`.
pub trait SimpleMechanicalSpec: Send + Sync {
    fn dims(&self) -> (usize, usize);
    /// `g_ij(x)`, row-major `n × n`.
    fn base_metric<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> Vec<D>;
    /// Locked inertia tensor `g_ab(x, θ)`, row-major `m × m`.
    fn locked_inertia<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D], theta: &[D]) -> Vec<D>;
    fn potential<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> D;
}

struct SimpleMechanicalModel<S>(S);

impl<S: SimpleMechanicalSpec> QuadraticCoefficients for SimpleMechanicalModel<S> {
    fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    fn coefficients<D: DualNum<Primitive = f64> + Copy>(&self, q: &[D]) -> QuadraticForm<D> {
        let (n, m) = self.0.dims();
        let nn = n + m;
        let gij = self.0.base_metric(&q[..n]);
        let gab = self.0.locked_inertia(&q[..n], &q[n..]);
        let mut metric = vec![D::from(0.0); nn * nn];
        for i in 0..n {
            for j in 0..n {
                metric[i * nn + j] = gij[i * n + j];
            }
        }
        for a in 0..m {
            for b in 0..m {
                metric[(n + a) * nn + n + b] = gab[a * m + b];
            }
        }
        QuadraticForm { metric, linear: vec![D::from(0.0); nn], potential: self.0.potential(&q[..n]) }
    }
}

fn check_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
        return Err(RouthError::Spec(format!("{what} is not symmetric")));
    }
    if m.nrows() > 0 && m.clone().cholesky().is_none() {
        return Err(RouthError::Spec(format!("{what} is not positive-definite")));
    }
    Ok(())
}

/// Builds the system and tags it simple mechanical. The metrics are checked
/// for symmetry and positive-definiteness at each of `samples`, given as
/// `(x, θ)` pairs.
pub fn make_simple_mechanical<S: SimpleMechanicalSpec + 'static>(
    name: &str,
    connection: BundleConnection,
    spec: S,
    samples: &[(Vec<f64>, Vec<f64>)],
) -> Result<LagrangianSystem> {
    let (n, m) = spec.dims();
    for (x, th) in samples {
        if x.len() != n || th.len() != m {
            return Err(RouthError::Argument("sample point has the wrong dimensions".into()));
        }
        check_spd(&DMatrix::from_row_slice(n, n, &spec.base_metric(x)), "base metric g_ij")?;
        check_spd(&DMatrix::from_row_slice(m, m, &spec.locked_inertia(x, th)), "locked inertia g_ab")?;
    }
    Ok(LagrangianSystem::new(name, connection, Arc::new(QuadraticModel(SimpleMechanicalModel(spec))))?
        .mark_simple_mechanical())
}

/// Amended potential `V + ½ g^{ab} μ_a μ_b` at `(x, θ)`, with `V = −L(q, 0)`.
pub fn amended_potential(sys: &LagrangianSystem, x: &[f64], theta: &[f64], mu: &[f64]) -> Result<f64> {
    let n = sys.base_dim();
    let m = sys.group_dim();
    let s0 = FullState::new(x.to_vec(), theta.to_vec(), vec![0.0; n], vec![0.0; m])?;
    let blocks = sys.hessian(&s0)?;
    let (ginv, _) = checked_inverse(&blocks.g_ab, sys.max_condition(), "locked inertia (g_ab)")?;
    let mu = DVector::from_column_slice(mu);
    Ok(-sys.lagrangian(&s0) + 0.5 * mu.dot(&(ginv * &mu)))
}

/// Worst violation, by central differences along the fundamental fields, of
/// the isometry conditions `Ẽ_a(g_ij) = 0` and
/// `Ẽ_a(g_bc) + C^d_ab g_cd + C^d_ac g_bd = 0`.
pub fn isometry_defect(sys: &LagrangianSystem, x: &[f64], theta: &[f64]) -> Result<f64> {
    let n = sys.base_dim();
    let m = sys.group_dim();
    let alg = sys.algebra().clone();
    let blocks_at = |th: &[f64]| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let s = FullState::new(x.to_vec(), th.to_vec(), vec![0.0; n], vec![0.0; m])?;
        let b = sys.hessian(&s)?;
        Ok((b.g_ij, b.g_ab))
    };
    let (_, g0) = blocks_at(theta)?;
    let k = sys.chart().fundamental(theta);
    let mut worst = 0.0f64;
    for a in 0..m {
        let dir: Vec<f64> = (0..m).map(|c| k[(c, a)]).collect();
        let scale = dir.iter().fold(0.0f64, |w, v| w.max(v.abs()));
        let h = fd_step(FD_STEP_FIRST, theta.iter().fold(0.0f64, |w, v| w.max(v.abs()))) / scale.max(1.0);
        let plus: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + h * d).collect();
        let minus: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t - h * d).collect();
        let (gp_ij, gp_ab) = blocks_at(&plus)?;
        let (gm_ij, gm_ab) = blocks_at(&minus)?;
        let d_ij = (gp_ij - gm_ij) / (2.0 * h);
        worst = worst.max(d_ij.amax());
        let d_ab = (gp_ab - gm_ab) / (2.0 * h);
        for b in 0..m {
            for c in 0..m {
                let mut v = d_ab[(b, c)];
                for d in 0..m {
                    v += alg.structure(d, a, b) * g0[(c, d)] + alg.structure(d, a, c) * g0[(b, d)];
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}
