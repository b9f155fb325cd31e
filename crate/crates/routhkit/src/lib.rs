//! Routh reduction for regular Lagrangian systems with Lie group symmetry on
//! trivial principal bundles `M = S × G`.
//!
//! The pipeline: a [`lagrangian::LagrangianSystem`] in quasi-velocities of
//! the standard frame, a [`routh::MomentumLevel`] fixing `p = μ`, the
//! Lagrange-Routh [`routh::reduced_field`] on `N_μ/G_μ`, and
//! [`reconstruct::reconstruct`] back to full trajectories by horizontal lift
//! and development in `G_μ`.

pub mod bundle;
pub mod error;
pub mod integrate;
pub mod lagrangian;
pub mod lie;
pub mod linalg;
pub mod reconstruct;
pub mod routh;
pub mod systems;

pub use bundle::{BundleConnection, FullState};
pub use error::{Result, RouthError};
pub use integrate::Trajectory;
pub use lagrangian::{HessianBlocks, LagrangianSystem};
pub use lie::{GroupChart, IsotropySplit, LieAlgebra};
