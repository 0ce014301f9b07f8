//! Loss-landscape probes over objectives, trained parameters and
//! trajectories.

mod accel;
mod gram;
mod mli;
mod mode;
mod pca;
mod plane;
mod spectrum;
mod training;
mod walk;

pub use accel::{acceleration_series, convergence_epoch, early_and_late_medians, AccelerationSeries};
pub use gram::{field_change, gram_matrix, gram_rank, null_direction, GramAnalysis, NullDirection};
pub use mli::{mli_scan, MliScan, MLI_TOLERANCE};
pub use mode::{mode_connect, BezierPath, LossProfile, ModeConnectOptions, ModeConnection};
pub use pca::{pca_trajectory, PcaBasis, PcaTrajectory};
pub use plane::{plane_scan, plane_scan_with, random_direction, stochastic_plane_scan, Axis, PlaneGrid};
pub use spectrum::{concentration, sampled_epochs, spectrum_evolution, spectrum_histogram, SpectrumHistogram, SpectrumHistory, SpectrumMode, HISTOGRAM_SHIFT};
pub use training::{goldilocks_sweep, intrinsic_sweep, probe_init, probe_minima, radius_tracking, ProbeRun, ProbeSummary, RadiusTrack, SphereRun, SubspaceResult};
pub use walk::{hessian_walk, HessianWalk, WalkOptions};
