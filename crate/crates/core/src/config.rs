//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::SCHEMA_VERSION;
use crate::landscape::{Axis, SpectrumMode, WalkOptions};
use crate::network::{Activation, NetworkSpec};
use crate::optimize::OptimizerConfig;
use crate::problems::{Integration, Material, Objective, ObjectiveKind, QuadratureGrid, Source};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Elliptic1d,
    Neohookean2d,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveFamily {
    Drm,
    Pinn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Width of each hidden layer; 20 in 1D and 25 in 2D when absent.
    pub width: Option<usize>,
    pub depth: usize,
    pub activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { width: None, depth: 2, activation: Activation::Tanh }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// 1D midpoint count.
    pub points: usize,
    /// 2D polar cells.
    pub radial: usize,
    pub angular: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { points: 100, radial: 20, angular: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MliConfig {
    pub trials: usize,
    pub init_scales: Vec<f64>,
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for MliConfig {
    fn default() -> Self {
        Self { trials: 10, init_scales: vec![1.0, 2.0, 5.0], samples: 101, tolerance: crate::landscape::MLI_TOLERANCE }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeConnectConfig {
    pub t_samples: usize,
    pub profile_samples: usize,
    pub optimizer: OptimizerConfig,
    /// J clamp of the objective used for the linear-path profile in 2D.
    pub clamp: f64,
}

impl Default for ModeConnectConfig {
    fn default() -> Self {
        Self { t_samples: 25, profile_samples: 101, optimizer: OptimizerConfig::adam(1e-3, 15000), clamp: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneDirections {
    /// Pairs of random unit directions.
    Random,
    /// The Gram null direction [Δ, 0] against one random direction.
    Trench,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneConfig {
    pub directions: PlaneDirections,
    /// Number of random directions per axis; planes are all k × j pairs.
    pub random_directions: usize,
    pub axis_k: Axis,
    pub axis_j: Axis,
}

impl Default for PlaneConfig {
    fn default() -> Self {
        Self { directions: PlaneDirections::Random, random_directions: 3, axis_k: Axis::default(), axis_j: Axis::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub sample_every: usize,
    /// `None` picks endpoints for the 2D PINN above width 15, full otherwise.
    pub mode: Option<SpectrumMode>,
    pub bins: usize,
    pub shift: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { sample_every: 50, mode: None, bins: 60, shift: crate::landscape::HISTOGRAM_SHIFT }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullSelection {
    /// Gram eigenvector of the smallest eigenvalue.
    MinEigenvalue,
    /// Within the sub-threshold eigenspace, the direction changing the
    /// basis derivatives the objective depends on least.
    LeastDerivativeChange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GramConfig {
    /// Relative eigenvalue threshold; 1e-12 in 1D and 1e-6 in 2D when absent.
    pub rel_threshold: Option<f64>,
    pub selection: NullSelection,
    /// Trench profile t range and sample count.
    pub trench_half_width: f64,
    pub trench_samples: usize,
}

impl Default for GramConfig {
    fn default() -> Self {
        Self { rel_threshold: None, selection: NullSelection::LeastDerivativeChange, trench_half_width: 10.0, trench_samples: 81 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoldilocksConfig {
    pub radii: Vec<f64>,
    pub trials: usize,
}

impl Default for GoldilocksConfig {
    fn default() -> Self {
        Self { radii: vec![0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 50.0, 100.0], trials: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiusConfig {
    pub init_scales: Vec<f64>,
}

impl Default for RadiusConfig {
    fn default() -> Self {
        Self { init_scales: vec![0.01, 0.5, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntrinsicConfig {
    /// Subspace dimensions; {1, 2, 5, 10, 20} in 1D and {5, 10, 20, 50, 100}
    /// in 2D when absent.
    pub dims: Option<Vec<usize>>,
    pub orthonormalize: bool,
}

impl Default for IntrinsicConfig {
    fn default() -> Self {
        Self { dims: None, orthonormalize: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub components: usize,
    pub resolution: usize,
    /// Plane half-widths are this factor times the path's extent.
    pub margin: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self { components: 3, resolution: 51, margin: 1.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccelerationConfig {
    pub normalize: bool,
    /// Fraction of the total loss decrease defining convergence.
    pub convergence_fraction: f64,
}

impl Default for AccelerationConfig {
    fn default() -> Self {
        Self { normalize: true, convergence_fraction: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeMinimaConfig {
    /// 5 in 1D and 8 in 2D when absent.
    pub small_width: Option<usize>,
    pub trials: usize,
    pub stuck_factor: f64,
}

impl Default for ProbeMinimaConfig {
    fn default() -> Self {
        Self { small_width: None, trials: 10, stuck_factor: 10.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfigs {
    pub mli: MliConfig,
    pub hessian_walk: WalkOptions,
    pub mode_connect: ModeConnectConfig,
    pub plane: PlaneConfig,
    pub spectrum: SpectrumConfig,
    pub gram: GramConfig,
    pub goldilocks: GoldilocksConfig,
    pub radius: RadiusConfig,
    pub intrinsic: IntrinsicConfig,
    pub pca: PcaConfig,
    pub acceleration: AccelerationConfig,
    pub probe_minima: ProbeMinimaConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Run directory name; derived from the subcommand, problem, objective
    /// and seed when absent.
    #[serde(default)]
    pub id: Option<String>,
    pub problem: Problem,
    pub objective: ObjectiveFamily,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub material: Material,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub integration: Integration,
    #[serde(default = "default_batch")]
    pub monte_carlo_batch: usize,
    #[serde(default)]
    pub clamp: Option<f64>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "one")]
    pub init_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub probes: ProbeConfigs,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn one() -> f64 {
    1.0
}

fn default_batch() -> usize {
    100
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn new(problem: Problem, objective: ObjectiveFamily) -> Self {
        serde_json::from_value(serde_json::json!({ "problem": problem, "objective": objective })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(v) = raw.get("schema_version").and_then(|v| v.as_u64()) {
            if v as u32 != SCHEMA_VERSION {
                return Err(Error::Config(format!("config schema_version {v} is not supported (expected {SCHEMA_VERSION})")));
            }
        }
        let config: Self = serde_json::from_value(raw).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> ObjectiveKind {
        match (self.problem, self.objective) {
            (Problem::Elliptic1d, ObjectiveFamily::Drm) => ObjectiveKind::Drm1d,
            (Problem::Elliptic1d, ObjectiveFamily::Pinn) => ObjectiveKind::Pinn1d,
            (Problem::Neohookean2d, ObjectiveFamily::Drm) => ObjectiveKind::Drm2d,
            (Problem::Neohookean2d, ObjectiveFamily::Pinn) => ObjectiveKind::Pinn2d,
        }
    }

    pub fn width(&self) -> usize {
        self.network.width.unwrap_or(match self.problem {
            Problem::Elliptic1d => 20,
            Problem::Neohookean2d => 25,
        })
    }

    pub fn spec_with_width(&self, width: usize) -> NetworkSpec {
        let base = match self.problem {
            Problem::Elliptic1d => NetworkSpec::elliptic_1d(width),
            Problem::Neohookean2d => NetworkSpec::neohookean_2d(width),
        };
        NetworkSpec { hidden_widths: vec![width; self.network.depth], activation: self.network.activation, ..base }
    }

    pub fn spec(&self) -> NetworkSpec {
        self.spec_with_width(self.width())
    }

    pub fn grid(&self) -> QuadratureGrid {
        match self.problem {
            Problem::Elliptic1d => QuadratureGrid::midpoint_1d(self.quadrature.points),
            Problem::Neohookean2d => QuadratureGrid::polar_disk(self.quadrature.radial, self.quadrature.angular),
        }
    }

    pub fn objective_for(&self, spec: NetworkSpec) -> Result<Objective> {
        Objective::with_grid(self.kind(), spec, self.grid())?
            .with_problem(self.material, self.alpha, self.source)
            .with_clamp(self.clamp)
            .with_integration(self.integration)
    }

    pub fn objective(&self) -> Result<Objective> {
        self.objective_for(self.spec())
    }

    /// The objective with Monte Carlo integration at the configured batch.
    pub fn stochastic_objective(&self) -> Result<Objective> {
        self.objective()?.with_integration(Integration::MonteCarlo { batch: self.monte_carlo_batch })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.network.depth == 0 || self.width() == 0 {
            return bad("network depth and width must be positive".into());
        }
        self.spec().validate()?;
        self.optimizer.validate()?;
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be nonnegative, got {}", self.init_scale));
        }
        if self.quadrature.points == 0 || self.quadrature.radial == 0 || self.quadrature.angular == 0 {
            return bad("quadrature sizes must be positive".into());
        }
        if self.monte_carlo_batch == 0 {
            return bad("monte_carlo_batch must be positive".into());
        }
        if let Some(c) = self.clamp {
            if !(c > 0.0) {
                return bad(format!("clamp must be positive, got {c}"));
            }
        }
        let p = &self.probes;
        if p.mli.samples < 2 || p.mli.trials == 0 || p.mli.init_scales.iter().any(|s| !(*s > 0.0)) {
            return bad("mli needs samples ≥ 2, trials ≥ 1 and positive scales".into());
        }
        if p.mode_connect.t_samples < 2 || p.mode_connect.profile_samples < 2 {
            return bad("mode_connect needs at least 2 t samples".into());
        }
        p.mode_connect.optimizer.validate()?;
        if p.plane.random_directions == 0 || p.plane.axis_k.resolution == 0 || p.plane.axis_j.resolution == 0 {
            return bad("plane scans need at least one direction and one cell per axis".into());
        }
        if p.spectrum.sample_every == 0 || p.spectrum.bins == 0 || !(p.spectrum.shift > 0.0) {
            return bad("spectrum needs sample_every ≥ 1, bins ≥ 1 and a positive shift".into());
        }
        if p.goldilocks.radii.iter().any(|r| !(*r > 0.0)) || p.goldilocks.trials == 0 {
            return bad("goldilocks radii must be positive with at least one trial".into());
        }
        if p.radius.init_scales.iter().any(|s| !(*s > 0.0)) {
            return bad("radius-track init scales must be positive".into());
        }
        if let Some(dims) = &p.intrinsic.dims {
            let n = self.spec().param_count();
            if dims.iter().any(|&d| d == 0 || d > n) {
                return bad(format!("subspace dimensions must be in 1..={n}"));
            }
        }
        if p.pca.components == 0 || p.pca.resolution == 0 {
            return bad("pca needs at least one component and one cell".into());
        }
        if p.probe_minima.trials == 0 {
            return bad("probe_minima needs at least one trial".into());
        }
        Ok(())
    }

    /// SHA-256 of the config's canonical JSON (keys sorted), without the
    /// run id and output location since they do not affect results.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("id");
            map.remove("output_dir");
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}
