//! Acceptance checks. One line per check, then a PASS/FAIL line per
//! criterion; exits nonzero when any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use indexmap::IndexMap;
use num_dual::{Dual64, DualNum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use routhkit::bundle::FullState;
use routhkit::integrate::rk4;
use routhkit::lagrangian::max_momentum_drift;
use routhkit::lie::{AdaptedChart, GroupChart, LieAlgebra, Se2Chart, So3Chart};
use routhkit::routh::{
    gamma0_routh_residual, generalized_routh_residual, integrate_reduced, project_to_reduced, reduced_field,
    routhian_hessian_defect, solve_level_set, ReducedState,
};
use routhkit::systems::{make_se2, packaged, wong, PackagedSystem, Se2Params, PACKAGED};
use routhkit_cli::commands::{cmd_compare, cmd_reconstruct, cmd_reduce};
use routhkit_cli::{RunArgs, RunConfig, Table};

const TF: f64 = 10.0;
const DT: f64 = 1e-3;

struct Check {
    label: String,
    value: f64,
    bound: Bound,
}

enum Bound {
    AtMost(f64),
    Within(f64, f64),
}

impl Check {
    fn at_most(label: impl Into<String>, value: f64, tol: f64) -> Self {
        Self { label: label.into(), value, bound: Bound::AtMost(tol) }
    }

    fn pass(&self) -> bool {
        match self.bound {
            Bound::AtMost(t) => self.value <= t,
            Bound::Within(lo, hi) => self.value >= lo && self.value <= hi,
        }
    }

    fn describe(&self) -> String {
        match self.bound {
            Bound::AtMost(t) => format!("{}: {:.3e} (tol {:.0e})", self.label, self.value, t),
            Bound::Within(lo, hi) => format!("{}: {:.4} (want [{lo}, {hi}])", self.label, self.value),
        }
    }
}

fn failed(label: &str, err: impl std::fmt::Display) -> Check {
    Check::at_most(format!("{label} [error: {err}]"), f64::INFINITY, 0.0)
}

fn max_gap(a: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().fold(0.0f64, |w, v| if v.is_nan() { f64::INFINITY } else { w.max(v.abs()) })
}

fn config(system: &str, extra: impl FnOnce(&mut RunArgs)) -> RunConfig {
    let mut args = RunArgs { system: Some(system.into()), t0: Some(0.0), tf: Some(TF), dt: Some(DT), ..Default::default() };
    extra(&mut args);
    RunConfig::resolve(&args).expect("valid acceptance config")
}

fn default_system(name: &str) -> PackagedSystem {
    packaged(name, &IndexMap::new()).expect("packaged system")
}

fn c1_se2_full() -> Vec<Check> {
    let s = make_se2(Se2Params::default()).unwrap();
    let start = Instant::now();
    let traj = match s.system.simulate(&s.initial, 0.0, TF, DT) {
        Ok(t) => t,
        Err(e) => return vec![failed("full integration", e)],
    };
    let elapsed = start.elapsed().as_secs_f64();
    let gaps = traj.times.iter().zip(&traj.states).flat_map(|(t, y)| {
        let st = FullState::from_slice(1, 3, y).unwrap();
        let o = s.to_original(&st.theta);
        let cf = s.closed_form_full(*t);
        [st.x[0] - cf[0], o[0] - cf[1], o[1] - cf[2], o[2] - cf[3]]
    });
    vec![
        Check::at_most("max |(x, y, z, θ) − closed form|", max_gap(gaps), 1e-6),
        Check::at_most("runtime in seconds", elapsed, 5.0),
    ]
}

fn c2_se2_reduced() -> Vec<Check> {
    let s = make_se2(Se2Params::default()).unwrap();
    let out = match cmd_reduce(&config("se2", |_| {})) {
        Ok(o) => o,
        Err(e) => return vec![failed("cmd_reduce", e)],
    };
    let t = out.table.column("t").unwrap();
    let (zp, th) = (out.table.column("theta_1").unwrap(), out.table.column("theta_2").unwrap());
    let gaps = t.iter().enumerate().flat_map(|(k, &tk)| {
        let cf = s.closed_form_reduced(tk);
        [zp[k] - cf[0], th[k] - cf[1]]
    });
    vec![Check::at_most("max |(z′, θ) − closed form| from cmd_reduce", max_gap(gaps), 1e-6)]
}

fn c3_se2_reconstruction() -> Vec<Check> {
    let s = make_se2(Se2Params::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let red_path = dir.path().join("reduced.csv");
    match cmd_reduce(&config("se2", |_| {})) {
        Ok(o) => o.table.write(Some(&red_path), routhkit_cli::Format::Csv).unwrap(),
        Err(e) => return vec![failed("cmd_reduce", e)],
    }
    let mut checks = Vec::new();
    for kind in ["mechanical", "vertical-lift"] {
        let cfg = config("se2", |a| {
            a.reduced = Some(red_path.clone());
            a.connection = Some(kind.into());
        });
        let out = match cmd_reconstruct(&cfg) {
            Ok(o) => o,
            Err(e) => {
                checks.push(failed(kind, e));
                continue;
            }
        };
        let t = out.table.column("t").unwrap();
        let y = out.table.column("theta_0").unwrap();
        let p = s.params;
        let ey = max_gap(t.iter().zip(y).map(|(t, y)| y - (-p.a * (p.thetadot0 * t).sin() + t + p.y0)));
        let g: &Table = out.group.as_ref().unwrap();
        let ly = max_gap(t.iter().zip(g.column("lift_theta_0").unwrap()).map(|(t, y)| y - s.closed_form_lift_y(*t)));
        let dy = max_gap(t.iter().zip(g.column("g_0").unwrap()).map(|(t, y)| y - s.closed_form_development_y1(*t)));
        checks.push(Check::at_most(format!("{kind}: reconstructed y"), ey, 1e-6));
        checks.push(Check::at_most(format!("{kind}: horizontal lift y"), ly, 1e-6));
        checks.push(Check::at_most(format!("{kind}: development y₁ = t"), dy, 1e-8));
    }
    checks
}

fn c4_hessian_determinant() -> Vec<Check> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = make_se2(Se2Params::default()).unwrap();
    let a = s.params.a;
    let gaps = (0..100).map(|_| {
        let raw: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
        let st = FullState::from_slice(1, 3, &raw).unwrap();
        s.system.hessian(&st).map_or(f64::INFINITY, |h| h.determinant() - (1.0 - a * a))
    });
    vec![Check::at_most("max |det − (1 − A²)| over 100 random states", max_gap(gaps), 1e-12)]
}

fn c5_momentum_conservation() -> Vec<Check> {
    PACKAGED
        .par_iter()
        .map(|name| {
            let p = default_system(name);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let states: Vec<FullState> = (0..20).map(|_| p.random_state(&mut rng)).collect();
            let drift = states
                .par_iter()
                .map(|s| p.system.simulate(s, 0.0, TF, DT).map_or(f64::INFINITY, |t| max_momentum_drift(&t)))
                .reduce(|| 0.0, f64::max);
            Check::at_most(format!("{name}: max_t |p(t) − p(0)| over 20 random states, t ∈ [0, 10]"), drift, 1e-8)
        })
        .collect()
}

fn c6_two_pipelines() -> Vec<Check> {
    let cases: Vec<(&str, &str)> =
        PACKAGED.iter().flat_map(|n| ["mechanical", "vertical-lift"].map(|k| (*n, k))).collect();
    cases
        .par_iter()
        .map(|(name, kind)| {
            let cfg = config(name, |a| a.connection = Some(kind.to_string()));
            match cmd_compare(&cfg) {
                Ok(out) => Check::at_most(
                    format!("{name}, {kind}: full vs reduce→reconstruct"),
                    out.summary["metrics"]["discrepancy"]["value"].as_f64().unwrap_or(f64::INFINITY),
                    1e-6,
                ),
                Err(e) => failed(&format!("{name}, {kind}"), e),
            }
        })
        .collect()
}

// Classical Routhian ℛ^μ = ½ M_ij ẋ^i ẋ^j − V − ½ μ²/k_ab with
// M = k_ij − k_ia k_ja / k_ab for the packaged demo, written out from its
// coefficients rather than through the library.
fn demo_terms<D: DualNum<Primitive = f64> + Copy>(x: &[D], coupling: f64, inertia: f64) -> ([[D; 2]; 2], [D; 2], D, D) {
    let kia = [x[1] * coupling, -x[0] * coupling];
    let kab = D::from(1.0) + (x[0] * x[0] + x[1] * x[1]) * inertia;
    let mut m = [[D::from(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = D::from(if i == j { 1.0 } else { 0.0 }) - kia[i] * kia[j] / kab;
        }
    }
    let lambda = [kia[0] / kab, kia[1] / kab];
    let v = (x[0] * x[0] + x[1] * x[1]) * 0.5;
    (m, lambda, kab, v)
}

/// EL equations of ℛ^μ forced by −B_ij μ ẋ^j, evaluated at an acceleration.
fn classical_residual(mu: f64, c: (f64, f64), x: &[f64], xd: &[f64], xdd: &[f64]) -> [f64; 2] {
    let (m0, _, _, _) = demo_terms(&[Dual64::from(x[0]), Dual64::from(x[1])], c.0, c.1);
    let mut dm = [[[0.0; 2]; 2]; 2];
    let mut dlam = [[0.0; 2]; 2];
    let mut dveff = [0.0; 2];
    for k in 0..2 {
        let xk: Vec<Dual64> = (0..2).map(|j| Dual64::new(x[j], if j == k { 1.0 } else { 0.0 })).collect();
        let (m, lam, kab, v) = demo_terms(&xk, c.0, c.1);
        for i in 0..2 {
            for j in 0..2 {
                dm[k][i][j] = m[i][j].eps;
            }
            dlam[k][i] = lam[i].eps;
        }
        dveff[k] = (v + kab.recip() * (0.5 * mu * mu)).eps;
    }
    let mut out = [0.0; 2];
    for i in 0..2 {
        let mut r = dveff[i];
        for j in 0..2 {
            r += m0[i][j].re * xdd[j];
            for k in 0..2 {
                r += dm[k][i][j] * xd[k] * xd[j] - 0.5 * dm[i][j][k] * xd[j] * xd[k];
            }
            r += (dlam[j][i] - dlam[i][j]) * mu * xd[j];
        }
        out[i] = r;
    }
    out
}

fn c7_classical() -> Vec<Check> {
    let p = default_system("classical-demo");
    let c = (p.params["coupling"], p.params["inertia"]);
    let mu = p.level.mu[0];
    let r0 = project_to_reduced(&p.level, &p.initial);
    let red = match integrate_reduced(&p.system, &p.level, &r0, 0.0, TF, 1e-2) {
        Ok(r) => r,
        Err(e) => return vec![failed("reduced integration", e)],
    };
    let mut worst = 0.0f64;
    for y in &red.states {
        let rs = ReducedState::from_slice(2, 0, y).unwrap();
        let d = match reduced_field(&p.system, &p.level, &rs, None) {
            Ok(d) => d,
            Err(e) => return vec![failed("reduced field", e)],
        };
        let r = classical_residual(mu, c, &rs.x, &rs.v_base, &d[2..]);
        worst = worst.max(max_gap(r));
    }
    vec![Check::at_most("forced classical Routhian EL residual along the reduced trajectory", worst, 1e-8)]
}

fn c8_wong() -> Vec<Check> {
    let p = default_system("wong");
    let out = match cmd_reduce(&config("wong", |_| {})) {
        Ok(o) => o,
        Err(e) => return vec![failed("cmd_reduce", e)],
    };
    let y0 = wong::wong_state_from_full(&p.system, &p.initial).unwrap();
    let direct = match wong::integrate_wong(&wong::WongParams::default().spec(), &y0, 0.0, TF, DT) {
        Ok(d) => d,
        Err(e) => return vec![failed("wong_field integration", e)],
    };
    let cols = ["x_0", "x_1", "vb_0", "vb_1"].map(|c| out.table.column(c).unwrap());
    let gaps = direct.states.iter().enumerate().flat_map(|(k, y)| (0..4).map(move |c| y[c] - cols[c][k]));
    let hn = &direct.diagnostics["h_norm"];
    vec![
        Check::at_most("generic reduction vs wong_field, (x, ẋ)", max_gap(gaps), 1e-6),
        Check::at_most("h_ab w^a w^b drift", max_gap(hn.iter().map(|v| v - hn[0])), 1e-8),
    ]
}

fn c9_properties() -> Vec<Check> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checks = Vec::new();

    let algs = [LieAlgebra::se2(), LieAlgebra::so3(), LieAlgebra::abelian(3)];
    let exact = algs.iter().map(|a| a.antisymmetry_defect().max(a.jacobi_defect())).fold(0.0, f64::max);
    checks.push(Check::at_most("built-in algebras: antisymmetry and Jacobi", exact, 0.0));

    let (t, pm) = routhkit::systems::se2::adapted_matrices(0.3);
    let charts: Vec<Arc<dyn GroupChart>> = vec![
        Arc::new(Se2Chart::new()),
        Arc::new(So3Chart::new()),
        Arc::new(AdaptedChart::new(Arc::new(Se2Chart::new()), t, pm).unwrap()),
    ];
    let mut hom = 0.0f64;
    for _ in 0..200 {
        let a: Vec<f64> = vec![rng.random_range(-2.0..2.0), rng.random_range(-1.2..1.2), rng.random_range(-2.0..2.0)];
        let b: Vec<f64> = vec![rng.random_range(-2.0..2.0), rng.random_range(-1.2..1.2), rng.random_range(-2.0..2.0)];
        for chart in &charts {
            let ab = chart.multiply(&a, &b);
            if chart.check_domain(&ab).is_err() {
                continue;
            }
            hom = hom.max((chart.adjoint(&ab) - chart.adjoint(&a) * chart.adjoint(&b)).amax());
        }
    }
    checks.push(Check::at_most("Ad_{gh} = Ad_g Ad_h", hom, 1e-10));

    let systems: Vec<PackagedSystem> = PACKAGED.iter().map(|n| default_system(n)).collect();
    let (mut equi, mut gauge, mut hess) = (0.0f64, 0.0f64, 0.0f64);
    for p in &systems {
        for _ in 0..20 {
            let s = p.random_state(&mut rng);
            equi = equi.max(p.system.momentum_equivariance_defect(&s));
            hess = hess.max(routhian_hessian_defect(&p.system, &s).unwrap_or(f64::INFINITY));
            if p.level.isotropy_dim() == 0 {
                continue;
            }
            let Ok(vg) = solve_level_set(&p.system, &p.level, &s.x, &s.theta, &s.v_base, None) else {
                gauge = f64::INFINITY;
                continue;
            };
            let on = FullState::new(s.x.clone(), s.theta.clone(), s.v_base.clone(), vg).unwrap();
            let rs = project_to_reduced(&p.level, &on);
            let base = reduced_field(&p.system, &p.level, &rs, None);
            for g in [0.7, -2.1] {
                let gs = vec![g; p.level.isotropy_dim()];
                let other = reduced_field(&p.system, &p.level, &rs, Some(&gs));
                let d = match (&base, other) {
                    (Ok(a), Ok(b)) => max_gap(a.iter().zip(&b).map(|(u, v)| u - v)),
                    _ => f64::INFINITY,
                };
                gauge = gauge.max(d);
            }
        }
    }
    checks.push(Check::at_most("momentum equivariance by finite differences", equi, 1e-6));
    checks.push(Check::at_most("gauge independence of the reduced field", gauge, 1e-10));
    checks.push(Check::at_most("Routhian Hessian = g_ij − g^ab g_ia g_jb", hess, 1e-6));

    let mut forms = 0.0f64;
    for p in &systems {
        let traj = match p.system.simulate(&p.initial, 0.0, 2.0, DT) {
            Ok(t) => t,
            Err(_) => {
                forms = f64::INFINITY;
                continue;
            }
        };
        let (n, m) = (p.system.base_dim(), p.system.group_dim());
        let states: Vec<FullState> = traj.states.iter().map(|y| FullState::from_slice(n, m, y).unwrap()).collect();
        match (
            generalized_routh_residual(&p.system, &p.level, &traj.times, &states),
            gamma0_routh_residual(&p.system, &p.level, &traj.times, &states),
        ) {
            (Ok(a), Ok(b)) => {
                let d = a.residuals.iter().flatten().zip(b.residuals.iter().flatten()).map(|(u, v)| u - v);
                forms = forms.max(max_gap(d));
            }
            _ => forms = f64::INFINITY,
        }
    }
    checks.push(Check::at_most("Γ₀ form vs primary form of the Routh residual", forms, 1e-8));
    checks
}

fn c10_rk4_order() -> Vec<Check> {
    let field = |_t: f64, y: &[f64]| -> routhkit::Result<Vec<f64>> { Ok(vec![y[1], -y[0]]) };
    let steps = [0.2, 0.1, 0.05, 0.025];
    let errs: Vec<f64> = steps
        .iter()
        .map(|&h| {
            let t = rk4(field, &[1.0, 0.0], 0.0, 10.0, h).expect("oscillator");
            let y = t.last_state().unwrap();
            ((y[0] - 10f64.cos()).powi(2) + (y[1] + 10f64.sin()).powi(2)).sqrt()
        })
        .collect();
    // Least-squares slope of log error against log step.
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    vec![Check { label: "observed RK4 order on x″ = −x".into(), value: slope, bound: Bound::Within(3.8, 4.2) }]
}

fn main() {
    let criteria: [(&str, fn() -> Vec<Check>); 10] = [
        ("SE(2) full dynamics vs closed form", c1_se2_full),
        ("SE(2) reduced dynamics vs closed form", c2_se2_reduced),
        ("SE(2) reconstruction, lift and development", c3_se2_reconstruction),
        ("SE(2) Hessian determinant", c4_hessian_determinant),
        ("momentum conservation", c5_momentum_conservation),
        ("two-pipeline equivalence", c6_two_pipelines),
        ("classical Abelian reduction", c7_classical),
        ("Wong equations", c8_wong),
        ("property suites", c9_properties),
        ("RK4 convergence order", c10_rk4_order),
    ];
    let mut all = true;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let checks = run();
        let ok = !checks.is_empty() && checks.iter().all(Check::pass);
        all &= ok;
        for c in &checks {
            println!("    {} {}", if c.pass() { "ok  " } else { "FAIL" }, c.describe());
        }
        println!("{} criterion {}: {name}", if ok { "PASS" } else { "FAIL" }, k + 1);
    }
    if !all {
        std::process::exit(1);
    }
}
