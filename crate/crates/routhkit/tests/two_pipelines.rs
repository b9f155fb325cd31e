use indexmap::IndexMap;
use routhkit::bundle::FullState;
use routhkit::reconstruct::{reconstruct, LevelConnectionKind};
use routhkit::routh::{integrate_reduced, project_to_reduced};
use routhkit::systems::{packaged, wong, PackagedSystem};

fn discrepancy(p: &PackagedSystem, kind: LevelConnectionKind) -> f64 {
    let (tf, dt) = (10.0, 1e-3);
    let full = p.system.simulate(&p.initial, 0.0, tf, dt).unwrap();
    let r0 = project_to_reduced(&p.level, &p.initial);
    let red = integrate_reduced(&p.system, &p.level, &r0, 0.0, tf, dt).unwrap();
    let seed = p.level.theta_iso(&p.initial.theta);
    let rec = reconstruct(&p.system, &p.level, &red, kind, None, Some(&seed)).unwrap();
    let n = p.system.base_dim();
    let mut worst = 0.0f64;
    for (a, b) in full.states.iter().zip(&rec.full.states) {
        // Positions and velocities in coordinates.
        let sa = FullState::from_slice(n, p.system.group_dim(), a).unwrap();
        let sb = FullState::from_slice(n, p.system.group_dim(), b).unwrap();
        worst = worst.max(sa.max_abs_diff(&sb));
    }
    worst
}

#[test]
fn full_and_reduced_pipelines_agree() {
    for name in ["se2", "classical-demo", "wong"] {
        let p = packaged(name, &IndexMap::new()).unwrap();
        for kind in [LevelConnectionKind::Mechanical, LevelConnectionKind::VerticalLift] {
            let d = discrepancy(&p, kind);
            eprintln!("{name} {kind}: {d:e}");
            assert!(d <= 1e-6, "{name} {kind}: {d:e}");
        }
    }
}

#[test]
fn reduced_wong_reproduces_wong_equations() {
    let p = packaged("wong", &IndexMap::new()).unwrap();
    let spec = wong::WongParams::default().spec();
    let (tf, dt) = (10.0, 1e-3);
    let y0 = wong::wong_state_from_full(&p.system, &p.initial).unwrap();
    let direct = wong::integrate_wong(&spec, &y0, 0.0, tf, dt).unwrap();
    let r0 = project_to_reduced(&p.level, &p.initial);
    let red = integrate_reduced(&p.system, &p.level, &r0, 0.0, tf, dt).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in direct.states.iter().zip(&red.states) {
        // reduced: (x1, x2, β, γ, v1, v2); direct: (x, ẋ, w)
        for (u, v) in a[..2].iter().chain(&a[2..4]).zip(b[..2].iter().chain(&b[4..6])) {
            worst = worst.max((u - v).abs());
        }
    }
    let hn = &direct.diagnostics["h_norm"];
    let drift = hn.iter().fold(0.0f64, |w, v| w.max((v - hn[0]).abs()));
    eprintln!("wong: {worst:e}, h-norm drift {drift:e}");
    assert!(worst <= 1e-6);
    assert!(drift <= 1e-8);
}

#[test]
fn wong_trajectory_is_not_degenerate() {
    let p = packaged("wong", &IndexMap::new()).unwrap();
    let r0 = project_to_reduced(&p.level, &p.initial);
    let red = integrate_reduced(&p.system, &p.level, &r0, 0.0, 10.0, 1e-2).unwrap();
    let range = |k: usize| {
        let c = red.component(k);
        c.iter().cloned().fold(f64::MIN, f64::max) - c.iter().cloned().fold(f64::MAX, f64::min)
    };
    eprintln!("ranges x1 {} x2 {} beta {} gamma {}", range(0), range(1), range(2), range(3));
    assert!(range(2) > 1e-2 && range(3) > 1e-2);
}
