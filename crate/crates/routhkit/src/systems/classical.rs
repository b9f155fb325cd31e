//! Classical Routh systems: `L = ½k_ij ẋ^i ẋ^j + k_ia ẋ^i θ̇^a + ½k_ab θ̇^a θ̇^b − V(x)`
//! on `S × ℝ^m` with all coefficients independent of `θ`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_dual::{Dual64, DualNum};

use crate::bundle::{BundleConnection, Curvature};
use crate::error::{Result, RouthError};
use crate::lagrangian::{LagrangianSystem, QuadraticCoefficients, QuadraticForm, QuadraticModel};
use crate::lie::AbelianChart;
use crate::linalg::{generic_inverse, generic_matmul};

use super::simple::{make_simple_mechanical, SimpleMechanicalSpec};

/// Coefficients of a classical Routh Lagrangian, written over dual numbers.
pub trait ClassicalSpec: Send + Sync + Clone {
    fn dims(&self) -> (usize, usize);
    /// Row-major `n × n`.
    fn k_ij<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> Vec<D>;
    /// Row-major `n × m`.
    fn k_ia<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> Vec<D>;
    /// Row-major `m × m`.
    fn k_ab<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> Vec<D>;
    fn potential<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> D;
}

/// `Λ^a_i = k^{ab} k_ib`, row-major `m × n`.
pub fn mechanical_lambda<S: ClassicalSpec, D: DualNum<Primitive = f64> + Copy>(spec: &S, x: &[D]) -> Option<Vec<D>> {
    let (n, m) = spec.dims();
    let kinv = generic_inverse(&spec.k_ab(x), m)?;
    let k_ai = crate::linalg::generic_transpose(&spec.k_ia(x), n, m);
    Some(generic_matmul(&kinv, &k_ai, m, m, n))
}

/// `B^a_ij = ∂Λ^a_i/∂x^j − ∂Λ^a_j/∂x^i`, exact via dual numbers.
pub fn classical_curvature<S: ClassicalSpec>(spec: &S, x: &[f64]) -> Curvature {
    let (n, m) = spec.dims();
    let mut dl = Vec::with_capacity(n);
    for k in 0..n {
        let xd: Vec<Dual64> = x.iter().enumerate().map(|(j, &v)| Dual64::new(v, if j == k { 1.0 } else { 0.0 })).collect();
        let lam = mechanical_lambda(spec, &xd).unwrap_or_else(|| vec![Dual64::from(f64::NAN); m * n]);
        dl.push(lam.iter().map(|d| d.eps).collect::<Vec<f64>>());
    }
    let mut r = Curvature::zeros(m, n);
    for a in 0..m {
        for i in 0..n {
            for j in 0..n {
                r.set(a, i, j, dl[j][a * n + i] - dl[i][a * n + j]);
            }
        }
    }
    r
}

#[derive(Clone)]
struct MechanicalSplit<S>(S);

impl<S: ClassicalSpec> SimpleMechanicalSpec for MechanicalSplit<S> {
    fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
    fn base_metric<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> Vec<D> {
        let (n, m) = self.0.dims();
        let mut k = self.0.k_ij(x);
        let kia = self.0.k_ia(x);
        if let Some(lam) = mechanical_lambda(&self.0, x) {
            // k_ij − k_ia Λ^a_j
            let corr = generic_matmul(&kia, &lam, n, m, n);
            for (v, c) in k.iter_mut().zip(corr) {
                *v -= c;
            }
        }
        k
    }
    fn locked_inertia<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D], _theta: &[D]) -> Vec<D> {
        self.0.k_ab(x)
    }
    fn potential<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> D {
        self.0.potential(x)
    }
}

struct Coordinate<S>(S);

impl<S: ClassicalSpec> QuadraticCoefficients for Coordinate<S> {
    fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
    fn coefficients<D: DualNum<Primitive = f64> + Copy>(&self, q: &[D]) -> QuadraticForm<D> {
        let (n, m) = self.0.dims();
        let nn = n + m;
        let x = &q[..n];
        let (kij, kia, kab) = (self.0.k_ij(x), self.0.k_ia(x), self.0.k_ab(x));
        let mut metric = vec![D::from(0.0); nn * nn];
        for i in 0..n {
            for j in 0..n {
                metric[i * nn + j] = kij[i * n + j];
            }
            for a in 0..m {
                metric[i * nn + n + a] = kia[i * m + a];
                metric[(n + a) * nn + i] = kia[i * m + a];
            }
        }
        for a in 0..m {
            for b in 0..m {
                metric[(n + a) * nn + n + b] = kab[a * m + b];
            }
        }
        QuadraticForm { metric, linear: vec![D::from(0.0); nn], potential: self.0.potential(x) }
    }
}

fn validate<S: ClassicalSpec>(spec: &S, samples: &[Vec<f64>]) -> Result<()> {
    let (n, m) = spec.dims();
    for x in samples {
        if x.len() != n {
            return Err(RouthError::Argument("sample point has the wrong dimension".into()));
        }
        let kab = DMatrix::from_row_slice(m, m, &spec.k_ab(x));
        let det = kab.determinant();
        if !det.is_finite() || det.abs() < 1e-12 * (1.0 + kab.amax()).powi(m as i32) {
            return Err(RouthError::Spec(format!("k_ab is singular at x = {x:?}")));
        }
        let full = Coordinate(spec.clone()).coefficients(&x.iter().copied().chain(vec![0.0; m]).collect::<Vec<_>>());
        let g = DMatrix::from_row_slice(n + m, n + m, &full.metric);
        if g.cholesky().is_none() {
            return Err(RouthError::Spec(format!("kinetic matrix is not positive-definite at x = {x:?}")));
        }
    }
    Ok(())
}

/// Classical system in the frame of the mechanical connection
/// `Λ^a_i = k^{ab} k_ib`, so `g_ia = 0` and the reduced forcing is the
/// curvature `B^a_ij`. Positive-definiteness is checked at `samples`.
pub fn make_classical<S: ClassicalSpec + 'static>(name: &str, spec: S, samples: &[Vec<f64>]) -> Result<LagrangianSystem> {
    validate(&spec, samples)?;
    let (n, m) = spec.dims();
    let sl = spec.clone();
    let lambda = move |x: &[f64], _th: &[f64]| {
        let lam = mechanical_lambda(&sl, x).unwrap_or_else(|| vec![f64::NAN; m * n]);
        DMatrix::from_row_slice(m, n, &lam)
    };
    let sc = spec.clone();
    let conn = BundleConnection::new(n, Arc::new(AbelianChart::new(m)), Arc::new(lambda))
        .with_curvature(Arc::new(move |x: &[f64], _th: &[f64]| classical_curvature(&sc, x)));
    let pts: Vec<(Vec<f64>, Vec<f64>)> = samples.iter().map(|x| (x.clone(), vec![0.0; m])).collect();
    make_simple_mechanical(name, conn, MechanicalSplit(spec), &pts)
}

/// The same Lagrangian with the trivial connection: quasi-velocities are
/// `(ẋ, θ̇)` and `g_ia = k_ia ≠ 0`. Not tagged simple mechanical.
pub fn make_classical_trivial<S: ClassicalSpec + 'static>(name: &str, spec: S, samples: &[Vec<f64>]) -> Result<LagrangianSystem> {
    validate(&spec, samples)?;
    let (n, m) = spec.dims();
    let conn = BundleConnection::trivial(n, Arc::new(AbelianChart::new(m)));
    LagrangianSystem::new(name, conn, Arc::new(QuadraticModel(Coordinate(spec))))
}

/// The packaged instance on `ℝ² × ℝ`: `k_ij = δ_ij`,
/// `k_ia = c (x², −x¹)`, `k_ab = 1 + d |x|²`, `V = ½|x|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoClassical {
    pub coupling: f64,
    pub inertia: f64,
}

impl Default for DemoClassical {
    fn default() -> Self {
        Self { coupling: 0.2, inertia: 0.1 }
    }
}

impl ClassicalSpec for DemoClassical {
    fn dims(&self) -> (usize, usize) {
        (2, 1)
    }
    fn k_ij<D: DualNum<Primitive = f64> + Copy>(&self, _x: &[D]) -> Vec<D> {
        let (o, z) = (D::from(1.0), D::from(0.0));
        vec![o, z, z, o]
    }
    fn k_ia<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> Vec<D> {
        vec![x[1] * self.coupling, -x[0] * self.coupling]
    }
    fn k_ab<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> Vec<D> {
        vec![D::from(1.0) + (x[0] * x[0] + x[1] * x[1]) * self.inertia]
    }
    fn potential<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> D {
        (x[0] * x[0] + x[1] * x[1]) * 0.5
    }
}

/// Points where the demo's metric is checked.
pub fn demo_samples() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![1.0, -0.5], vec![-2.0, 1.5], vec![3.0, 3.0]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{curvature, FullState};
    use crate::lagrangian::HessianBlocks;

    #[derive(Clone)]
    struct Decoupled;
    impl ClassicalSpec for Decoupled {
        fn dims(&self) -> (usize, usize) {
            (1, 1)
        }
        fn k_ij<D: DualNum<Primitive = f64> + Copy>(&self, _x: &[D]) -> Vec<D> {
            vec![D::from(2.0)]
        }
        fn k_ia<D: DualNum<Primitive = f64> + Copy>(&self, _x: &[D]) -> Vec<D> {
            vec![D::from(0.0)]
        }
        fn k_ab<D: DualNum<Primitive = f64> + Copy>(&self, _x: &[D]) -> Vec<D> {
            vec![D::from(4.0)]
        }
        fn potential<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> D {
            x[0] * x[0]
        }
    }

    #[test]
    fn decoupled_blocks_have_zero_connection() {
        let sys = make_classical("decoupled", Decoupled, &[vec![0.0]]).unwrap();
        let lam = sys.connection().lambda(&[0.7], &[0.1]);
        assert_eq!(lam[(0, 0)], 0.0);
        let s = FullState::new(vec![0.7], vec![0.1], vec![0.3], vec![0.25]).unwrap();
        let h = sys.hessian(&s).unwrap();
        assert_eq!(h.g_ij[(0, 0)], 2.0);
        assert_eq!(h.g_ab[(0, 0)], 4.0);
    }

    #[test]
    fn exact_curvature_matches_finite_differences() {
        let sys = make_classical("demo", DemoClassical::default(), &demo_samples()).unwrap();
        let x = [0.4, -0.9];
        let exact = curvature(sys.connection(), &x, &[0.2]).unwrap();
        let n = 2;
        let plain = BundleConnection::new(n, sys.chart().clone(), {
            let c = sys.connection().clone();
            Arc::new(move |x: &[f64], th: &[f64]| c.lambda(x, th))
        });
        let fd = curvature(&plain, &x, &[0.2]).unwrap();
        assert!(exact.max_abs() > 0.1);
        for i in 0..2 {
            for j in 0..2 {
                assert!((exact.get(0, i, j) - fd.get(0, i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mechanical_frame_decouples_hessian() {
        let sys = make_classical("demo", DemoClassical::default(), &demo_samples()).unwrap();
        let s = FullState::new(vec![0.4, -0.9], vec![1.0], vec![0.3, 0.2], vec![0.5]).unwrap();
        let h: HessianBlocks = sys.hessian(&s).unwrap();
        assert!(h.g_ia.amax() < 1e-15);
        assert!(sys.is_simple_mechanical());
    }

    #[test]
    fn singular_k_ab_is_a_spec_error() {
        #[derive(Clone)]
        struct Bad;
        impl ClassicalSpec for Bad {
            fn dims(&self) -> (usize, usize) {
                (1, 1)
            }
            fn k_ij<D: DualNum<Primitive = f64> + Copy>(&self, _x: &[D]) -> Vec<D> {
                vec![D::from(1.0)]
            }
            fn k_ia<D: DualNum<Primitive = f64> + Copy>(&self, _x: &[D]) -> Vec<D> {
                vec![D::from(0.0)]
            }
            fn k_ab<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> Vec<D> {
                vec![x[0] * x[0]]
            }
            fn potential<D: DualNum<Primitive = f64> + Copy>(&self, _x: &[D]) -> D {
                D::from(0.0)
            }
        }
        assert!(matches!(make_classical("bad", Bad, &[vec![0.0]]), Err(RouthError::Spec(_))));
    }
}
