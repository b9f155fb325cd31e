//! Built-in systems and the registry of packaged instances.

pub mod classical;
pub mod se2;
pub mod simple;
pub mod wong;

use std::sync::Arc;

use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::FullState;
use crate::error::{Result, RouthError};
use crate::lagrangian::LagrangianSystem;
use crate::routh::{solve_level_set, ChartSplit, MomentumLevel};

pub use classical::{make_classical, make_classical_trivial, ClassicalSpec, DemoClassical};
pub use se2::{make_se2, make_se2_original, Se2Params, Se2System};
pub use simple::{amended_potential, isometry_defect, make_simple_mechanical, SimpleMechanicalSpec};
pub use wong::{make_wong_system, wong_demo, wong_field, WongGroup, WongParams, WongSpec, WongSystem};

/// Names accepted by [`packaged`].
pub const PACKAGED: [&str; 3] = ["se2", "classical-demo", "wong"];

type Sampler = dyn Fn(&mut ChaCha8Rng) -> FullState + Send + Sync;

/// A packaged system: Lagrangian, momentum level, initial state on the level
/// and a sampler of random regular states.
#[derive(Clone)]
pub struct PackagedSystem {
    pub name: String,
    pub system: Arc<LagrangianSystem>,
    pub level: MomentumLevel,
    pub initial: FullState,
    /// Resolved parameter values, including defaults.
    pub params: IndexMap<String, f64>,
    sampler: Arc<Sampler>,
}

impl std::fmt::Debug for PackagedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PackagedSystem").field("name", &self.name).field("params", &self.params).finish()
    }
}

impl PackagedSystem {
    /// A random state where the system is regular. Not on the level set.
    pub fn random_state(&self, rng: &mut ChaCha8Rng) -> FullState {
        (self.sampler)(rng)
    }

    /// The SE(2) instance with its closed forms, when this is one.
    pub fn se2(&self) -> Option<Se2System> {
        if self.name != "se2" {
            return None;
        }
        make_se2(se2_params(&self.params).ok()?).ok()
    }
}

struct Params<'a> {
    given: &'a IndexMap<String, f64>,
    resolved: IndexMap<String, f64>,
}

impl<'a> Params<'a> {
    fn new(system: &str, given: &'a IndexMap<String, f64>, known: &[&str]) -> Result<Self> {
        if let Some(bad) = given.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(RouthError::Argument(format!(
                "unknown parameter {bad:?} for system {system}; known: {}",
                known.join(", ")
            )));
        }
        Ok(Self { given, resolved: IndexMap::new() })
    }

    fn get(&mut self, key: &str, default: f64) -> f64 {
        let v = self.given.get(key).copied().unwrap_or(default);
        self.resolved.insert(key.to_string(), v);
        v
    }
}

fn se2_params(given: &IndexMap<String, f64>) -> Result<Se2Params> {
    let d = Se2Params::default();
    let mut p = Params::new("se2", given, &["A", "mu", "thetadot0", "x0", "y0", "xdot0"])?;
    Ok(Se2Params {
        a: p.get("A", d.a),
        mu: p.get("mu", d.mu),
        thetadot0: p.get("thetadot0", d.thetadot0),
        x0: p.get("x0", d.x0),
        y0: p.get("y0", d.y0),
        xdot0: p.get("xdot0", d.xdot0),
    })
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn packaged_se2(given: &IndexMap<String, f64>) -> Result<PackagedSystem> {
    let params = se2_params(given)?;
    let s = make_se2(params)?;
    let resolved: IndexMap<String, f64> = [
        ("A", params.a),
        ("mu", params.mu),
        ("thetadot0", params.thetadot0),
        ("x0", params.x0),
        ("y0", params.y0),
        ("xdot0", params.xdot0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let sampler = |rng: &mut ChaCha8Rng| {
        let mut u = |lo, hi| uniform(rng, lo, hi);
        FullState::new(
            vec![u(-1.0, 1.0)],
            vec![u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0)],
            vec![u(-1.0, 1.0)],
            vec![u(-1.0, 1.0), u(-1.0, 1.0), u(-1.0, 1.0)],
        )
        .expect("consistent dimensions")
    };
    Ok(PackagedSystem {
        name: "se2".into(),
        system: s.system,
        level: s.level,
        initial: s.initial,
        params: resolved,
        sampler: Arc::new(sampler),
    })
}

fn packaged_classical(given: &IndexMap<String, f64>) -> Result<PackagedSystem> {
    let d = DemoClassical::default();
    let mut p = Params::new(
        "classical-demo",
        given,
        &["coupling", "inertia", "mu", "x1", "x2", "xdot1", "xdot2", "theta0"],
    )?;
    let spec = DemoClassical { coupling: p.get("coupling", d.coupling), inertia: p.get("inertia", d.inertia) };
    let mu = p.get("mu", 0.8);
    let x = vec![p.get("x1", 1.0), p.get("x2", 0.0)];
    let xd = vec![p.get("xdot1", 0.0), p.get("xdot2", 0.5)];
    let theta0 = p.get("theta0", 0.0);
    let system = Arc::new(make_classical("classical-demo", spec, &classical::demo_samples())?);
    let level = MomentumLevel::new(&system, &[mu], ChartSplit::whole(1))?;
    let vg = solve_level_set(&system, &level, &x, &[theta0], &xd, None)?;
    let initial = FullState::new(x, vec![theta0], xd, vg)?;
    let sampler = |rng: &mut ChaCha8Rng| {
        let mut u = |lo, hi| uniform(rng, lo, hi);
        FullState::new(
            vec![u(-1.0, 1.0), u(-1.0, 1.0)],
            vec![u(-3.0, 3.0)],
            vec![u(-1.0, 1.0), u(-1.0, 1.0)],
            vec![u(-1.0, 1.0)],
        )
        .expect("consistent dimensions")
    };
    Ok(PackagedSystem {
        name: "classical-demo".into(),
        system,
        level,
        initial,
        params: p.resolved,
        sampler: Arc::new(sampler),
    })
}

fn packaged_wong(given: &IndexMap<String, f64>) -> Result<PackagedSystem> {
    let d = WongParams::default();
    let mut p = Params::new(
        "wong",
        given,
        &["mu3", "conformal", "coupling", "field", "x1", "x2", "xdot1", "xdot2"],
    )?;
    let params = WongParams {
        mu3: p.get("mu3", d.mu3),
        conformal: p.get("conformal", d.conformal),
        coupling: p.get("coupling", d.coupling),
        field: p.get("field", d.field),
        x0: [p.get("x1", d.x0[0]), p.get("x2", d.x0[1])],
        xdot0: [p.get("xdot1", d.xdot0[0]), p.get("xdot2", d.xdot0[1])],
    };
    let w = wong_demo(params)?;
    // Mostly spinning about the third axis, so the angle chart stays away
    // from its singular set.
    let sampler = |rng: &mut ChaCha8Rng| {
        let mut u = |lo, hi| uniform(rng, lo, hi);
        FullState::new(
            vec![u(-0.5, 0.5), u(-0.5, 0.5)],
            vec![u(-3.0, 3.0), u(-0.2, 0.2), u(-3.0, 3.0)],
            vec![u(-0.3, 0.3), u(-0.3, 0.3)],
            vec![u(-0.05, 0.05), u(-0.05, 0.05), u(0.5, 1.5)],
        )
        .expect("consistent dimensions")
    };
    Ok(PackagedSystem {
        name: "wong".into(),
        system: w.system,
        level: w.level,
        initial: w.initial,
        params: p.resolved,
        sampler: Arc::new(sampler),
    })
}

/// Builds a packaged system by name. Unknown names and parameters are
/// argument errors.
pub fn packaged(name: &str, params: &IndexMap<String, f64>) -> Result<PackagedSystem> {
    match name {
        "se2" => packaged_se2(params),
        "classical-demo" => packaged_classical(params),
        "wong" => packaged_wong(params),
        other => Err(RouthError::Argument(format!("unknown system {other:?}; known: {}", PACKAGED.join(", ")))),
    }
}

/// A Wong system from a user specification. For SU(2) the momentum must be
/// `(0, 0, μ₃)` so the angle chart is adapted to it; for Abelian groups any
/// momentum works.
pub fn packaged_wong_custom(
    spec: WongSpec,
    mu: &[f64],
    x0: &[f64],
    xdot0: &[f64],
    theta0: &[f64],
) -> Result<PackagedSystem> {
    spec.validate()?;
    let (n, m) = (spec.base_dim(), spec.group_dim());
    if x0.len() != n || xdot0.len() != n || theta0.len() != m || mu.len() != m {
        return Err(RouthError::Spec("Wong initial data or momentum have the wrong dimensions".into()));
    }
    let split = match spec.group {
        WongGroup::So3 => ChartSplit { algebra_iso: vec![2], coord_iso: vec![0] },
        WongGroup::Abelian(k) => ChartSplit::whole(k),
    };
    let group = spec.group;
    let system = Arc::new(make_wong_system("wong-custom", spec)?);
    let level = MomentumLevel::new(&system, mu, split)?;
    let vg = solve_level_set(&system, &level, x0, theta0, xdot0, None)?;
    let initial = FullState::new(x0.to_vec(), theta0.to_vec(), xdot0.to_vec(), vg)?;
    let sampler = move |rng: &mut ChaCha8Rng| {
        let mut u = |lo, hi| uniform(rng, lo, hi);
        let x = (0..n).map(|_| u(-0.5, 0.5)).collect();
        let v = (0..n).map(|_| u(-0.3, 0.3)).collect();
        let (theta, w) = match group {
            WongGroup::So3 => (vec![u(-3.0, 3.0), u(-0.2, 0.2), u(-3.0, 3.0)], vec![u(-0.05, 0.05), u(-0.05, 0.05), u(0.5, 1.5)]),
            WongGroup::Abelian(k) => ((0..k).map(|_| u(-3.0, 3.0)).collect(), (0..k).map(|_| u(-1.0, 1.0)).collect()),
        };
        FullState::new(x, theta, v, w).expect("consistent dimensions")
    };
    let params = mu.iter().enumerate().map(|(a, v)| (format!("mu_{a}"), *v)).collect();
    Ok(PackagedSystem { name: "wong-custom".into(), system, level, initial, params, sampler: Arc::new(sampler) })
}
