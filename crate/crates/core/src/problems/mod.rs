//! The two boundary-value problems, their quadrature rules and the four
//! objectives built from them.

pub mod elliptic;
pub mod grid;
pub mod neohookean;
mod objective;

pub use elliptic::{exact_energy_1d, manufactured_1d, source_1d};
pub use grid::{disk_test_cloud, QuadratureGrid};
pub use neohookean::{body_force_2d, manufactured_2d, Material, NeohookeanState};
pub use objective::{Integration, Objective, ObjectiveKind, Quadrature, Source};
