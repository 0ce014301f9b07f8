//! Loss-landscape laboratory for physics-informed networks.
//!
//! Small tanh networks with an exact boundary factor are trained on energy
//! (Deep Ritz) and squared-residual (PINN) objectives for a 1D Poisson problem
//! and a 2D Neohookean disk, and the resulting landscapes are probed.

pub mod autodiff;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod landscape;
pub mod linalg;
pub mod network;
pub mod optimize;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
