//! Fixtures shared by the benchmarks.

use indexmap::IndexMap;
use routhkit::routh::{integrate_reduced, project_to_reduced};
use routhkit::systems::{packaged, PackagedSystem, PACKAGED};
use routhkit::Trajectory;

/// Every packaged system with default parameters.
pub fn systems() -> Vec<PackagedSystem> {
    PACKAGED.iter().map(|n| packaged(n, &IndexMap::new()).expect("packaged system")).collect()
}

/// Reduced trajectory from the packaged initial state over `[0, tf]`.
pub fn reduced(p: &PackagedSystem, tf: f64, dt: f64) -> Trajectory {
    let r0 = project_to_reduced(&p.level, &p.initial);
    integrate_reduced(&p.system, &p.level, &r0, 0.0, tf, dt).expect("reduced integration")
}
