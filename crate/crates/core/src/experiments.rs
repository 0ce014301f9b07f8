//! One runner per experiment. Each writes a run directory with a manifest
//! and its data files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::autodiff::Differentiable;
use crate::config::{ExperimentConfig, NullSelection, PlaneDirections, Problem};
use crate::error::{Error, Result};
use crate::io::{self, CsvWriter, SCHEMA_VERSION};
use crate::landscape::{self, Axis, ModeConnectOptions, PlaneGrid, SpectrumMode};
use crate::linalg::{add_scaled, norm, Matrix};
use crate::network::{extract_basis, extract_basis_derivatives, init_params, init_params_from, outer_coefficients, NetworkSpec};
use crate::optimize::{train, OptimizerConfig, OptimizerKind, TrajectoryRecord};
use crate::problems::{disk_test_cloud, Objective, ObjectiveKind, QuadratureGrid};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Train,
    Verify,
    Mli,
    HessianWalk,
    ModeConnect,
    PlaneScan,
    StochasticScan,
    Spectrum,
    Gram,
    Goldilocks,
    RadiusTrack,
    IntrinsicDim,
    PcaTraj,
    Acceleration,
    ProbeMinima,
}

impl Subcommand {
    pub const ALL: [Subcommand; 15] = [
        Subcommand::Train,
        Subcommand::Verify,
        Subcommand::Mli,
        Subcommand::HessianWalk,
        Subcommand::ModeConnect,
        Subcommand::PlaneScan,
        Subcommand::StochasticScan,
        Subcommand::Spectrum,
        Subcommand::Gram,
        Subcommand::Goldilocks,
        Subcommand::RadiusTrack,
        Subcommand::IntrinsicDim,
        Subcommand::PcaTraj,
        Subcommand::Acceleration,
        Subcommand::ProbeMinima,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Train => "train",
            Subcommand::Verify => "verify",
            Subcommand::Mli => "mli",
            Subcommand::HessianWalk => "hessian-walk",
            Subcommand::ModeConnect => "mode-connect",
            Subcommand::PlaneScan => "plane-scan",
            Subcommand::StochasticScan => "stochastic-scan",
            Subcommand::Spectrum => "spectrum",
            Subcommand::Gram => "gram",
            Subcommand::Goldilocks => "goldilocks",
            Subcommand::RadiusTrack => "radius-track",
            Subcommand::IntrinsicDim => "intrinsic-dim",
            Subcommand::PcaTraj => "pca-traj",
            Subcommand::Acceleration => "acceleration",
            Subcommand::ProbeMinima => "probe-minima",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment: String,
    pub subcommand: Subcommand,
    pub config_hash: String,
    pub seed: u64,
    pub param_count: usize,
    pub config: ExperimentConfig,
    pub results: Value,
    pub files: Vec<String>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Files written by a runner, relative to its run directory.
struct Ctx<'a> {
    dir: PathBuf,
    config: &'a ExperimentConfig,
    files: Vec<String>,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn bin_path(&mut self, name: &str) -> PathBuf {
        self.files.push(format!("{name}.json"));
        self.path(&format!("{name}.bin"))
    }

    fn csv(&mut self, name: &str, header: &[&str]) -> CsvWriter {
        CsvWriter::new(self.path(&format!("{name}.csv")), header)
    }

    fn matrix(&mut self, name: &str, m: &Matrix) -> Result<()> {
        let p = self.bin_path(name);
        io::write_matrix(&p, m)
    }

    fn vector(&mut self, name: &str, v: &[f64]) -> Result<()> {
        let p = self.bin_path(name);
        io::write_vector(&p, v)
    }

    fn params(&mut self, name: &str, spec: &NetworkSpec, v: &[f64]) -> Result<()> {
        let p = self.bin_path(name);
        io::write_params(&p, spec, v)
    }

    fn losses(&mut self, name: &str, run: &TrajectoryRecord) -> Result<()> {
        let mut w = self.csv(name, &["epoch", "loss", "radius"]);
        for (t, (l, r)) in run.losses.iter().zip(&run.radii).enumerate() {
            w.row(&[t.into(), (*l).into(), (*r).into()]);
        }
        w.finish()
    }

    fn plane(&mut self, name: &str, grid: &PlaneGrid) -> Result<()> {
        self.matrix(name, &grid.losses)?;
        self.matrix(&format!("{name}_mask"), &grid.mask_matrix())?;
        let mut w = self.csv(&format!("{name}_axes"), &["axis", "index", "coordinate"]);
        for (axis, coords) in [("k", &grid.eps_k), ("j", &grid.eps_j)] {
            for (i, &c) in coords.iter().enumerate() {
                w.row(&[axis.into(), i.into(), c.into()]);
            }
        }
        w.finish()
    }
}

/// Runs `sub` and writes `<out_root>/<id>/`. The directory is assembled
/// under a temporary name and renamed at the end, so a run that fails
/// before finishing leaves nothing behind. Probe failures are the
/// exception: their partial results are kept and the error is returned
/// afterwards.
pub fn run_experiment(sub: Subcommand, config: &ExperimentConfig, out_root: &Path) -> Result<RunOutput> {
    config.validate()?;
    let id = config.id.clone().unwrap_or_else(|| format!("{}-{}-s{}", sub.name(), config.kind().name(), config.seed));
    if id.is_empty() || id.contains(['/', '\\']) || id.starts_with('.') {
        return Err(Error::Config(format!("invalid experiment id {id:?}")));
    }
    fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    let staging = out_root.join(format!(".{id}.partial"));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;

    let started = SystemTime::now();
    let clock = Instant::now();
    let mut ctx = Ctx { dir: staging.clone(), config, files: Vec::new() };
    let outcome = dispatch(sub, &mut ctx);
    let (results, probe_failure) = match outcome {
        Ok(r) => r,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };

    let mut files = std::mem::take(&mut ctx.files);
    files.push("manifest.json".into());
    files.push("timing.json".into());
    files.sort();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        experiment: id.clone(),
        subcommand: sub,
        config_hash: config.hash(),
        seed: config.seed,
        param_count: config.spec().param_count(),
        config: config.clone(),
        results,
        files,
    };
    io::write_json(&staging.join("manifest.json"), &manifest)?;
    let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    io::write_json(
        &staging.join("timing.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "started_unix": secs(started),
            "finished_unix": secs(SystemTime::now()),
            "elapsed_seconds": clock.elapsed().as_secs_f64(),
        }),
    )?;

    let dir = out_root.join(&id);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::rename(&staging, &dir).map_err(|e| Error::io(&dir, e))?;
    match probe_failure {
        Some(msg) => Err(Error::Probe(format!("{msg} (partial results in {})", dir.display()))),
        None => Ok(RunOutput { dir, manifest }),
    }
}

type Outcome = Result<(Value, Option<String>)>;

fn dispatch(sub: Subcommand, ctx: &mut Ctx) -> Outcome {
    match sub {
        Subcommand::Train => run_train(ctx),
        Subcommand::Verify => run_verify(ctx),
        Subcommand::Mli => run_mli(ctx),
        Subcommand::HessianWalk => run_walk(ctx),
        Subcommand::ModeConnect => run_mode_connect(ctx),
        Subcommand::PlaneScan => run_plane_scan(ctx, false),
        Subcommand::StochasticScan => run_plane_scan(ctx, true),
        Subcommand::Spectrum => run_spectrum(ctx),
        Subcommand::Gram => run_gram(ctx),
        Subcommand::Goldilocks => run_goldilocks(ctx),
        Subcommand::RadiusTrack => run_radius(ctx),
        Subcommand::IntrinsicDim => run_intrinsic(ctx),
        Subcommand::PcaTraj => run_pca(ctx),
        Subcommand::Acceleration => run_acceleration(ctx),
        Subcommand::ProbeMinima => run_probe_minima(ctx),
    }
}

/// The run every single-solution probe starts from: default initialization
/// at `init_scale`, trained with the configured optimizer.
pub fn reference_run(config: &ExperimentConfig, objective: &Objective, keep_snapshots: bool) -> Result<TrajectoryRecord> {
    let init = init_params(&objective.spec, config.seed, config.init_scale);
    let optimizer = OptimizerConfig { keep_snapshots, seed: config.seed, ..config.optimizer.clone() };
    train(objective, &init, &optimizer)
}

fn trained(ctx: &mut Ctx, objective: &Objective, keep_snapshots: bool) -> Result<TrajectoryRecord> {
    let run = reference_run(ctx.config, objective, keep_snapshots)?;
    ctx.losses("losses", &run)?;
    ctx.params("final_params", &objective.spec, &run.final_params)?;
    Ok(run)
}

fn run_train(ctx: &mut Ctx) -> Outcome {
    let objective = ctx.config.objective()?;
    let run = trained(ctx, &objective, ctx.config.optimizer.keep_snapshots)?;
    ctx.params("initial_params", &objective.spec, &run.initial_params)?;
    if run.has_snapshots() {
        let p = ctx.bin_path("trajectory");
        io::write_snapshots(&p, &run.snapshots)?;
    }
    Ok((json!({ "final_loss": run.final_loss(), "best_loss": run.best_loss(), "epochs": run.epochs(), "final_radius": norm(&run.final_params) }), None))
}

/// Points where the trained field is compared with the manufactured one.
pub fn test_points(problem: Problem) -> Vec<[f64; 2]> {
    match problem {
        Problem::Elliptic1d => QuadratureGrid::uniform_1d_inclusive(201),
        Problem::Neohookean2d => disk_test_cloud(500),
    }
}

fn run_verify(ctx: &mut Ctx) -> Outcome {
    let objective = ctx.config.objective()?;
    let run = trained(ctx, &objective, false)?;
    let points = test_points(ctx.config.problem);
    let field = objective.field(&run.final_params, &points)?;
    let mut w = ctx.csv("errors", &["x1", "x2", "u1", "u2", "exact1", "exact2", "error"]);
    let mut max_error: f64 = 0.0;
    for (p, x) in points.iter().enumerate() {
        let exact = objective.exact_field(x);
        let u: Vec<f64> = field.iter().map(|c| c[p]).collect();
        let err = u.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        max_error = max_error.max(err);
        let u2 = u.get(1).copied().unwrap_or(0.0);
        w.row(&[x[0].into(), x[1].into(), u[0].into(), u2.into(), exact[0].into(), exact[1].into(), err.into()]);
    }
    w.finish()?;
    Ok((json!({ "max_pointwise_error": max_error, "test_points": points.len(), "final_loss": run.final_loss(), "below_1e-2": max_error < 1e-2 }), None))
}

fn run_mli(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let mli = &cfg.probes.mli;
    let optimizer = OptimizerConfig { keep_snapshots: false, seed: cfg.seed, ..cfg.optimizer.clone() };
    let mut w = ctx.csv("mli", &["scale", "trial", "t", "loss", "finite"]);
    let mut summary = Vec::new();
    for &scale in &mli.init_scales {
        for trial in 0..mli.trials {
            let init = init_params_from(&objective.spec, &mut rng::substream(cfg.seed, "mli_init", trial as u64), scale);
            let run = train(&objective, &init, &optimizer)?;
            let scan = landscape::mli_scan(&objective, &init, &run.final_params, mli.samples, mli.tolerance)?;
            for k in 0..scan.t.len() {
                w.row(&[scale.into(), trial.into(), scan.t[k].into(), scan.losses[k].into(), scan.finite[k].into()]);
            }
            summary.push(json!({ "scale": scale, "trial": trial, "monotone": scan.monotone, "max_relative_bump": scan.max_relative_bump, "final_loss": run.final_loss() }));
        }
    }
    w.finish()?;
    let monotone = summary.iter().filter(|s| s["monotone"] == true).count();
    Ok((json!({ "monotone": monotone, "total": summary.len(), "tolerance": mli.tolerance, "runs": summary }), None))
}

fn run_walk(ctx: &mut Ctx) -> Outcome {
    let objective = ctx.config.objective()?;
    let run = trained(ctx, &objective, false)?;
    let walk = landscape::hessian_walk(&objective, &run.final_params, &ctx.config.probes.hessian_walk)?;
    let mut w = ctx.csv("walk", &["step", "distance", "loss_change", "eigenvalue", "cluster_size"]);
    for t in 0..walk.distance.len() {
        let (eig, size) = if t == 0 { (f64::NAN, 0) } else { (walk.eigenvalue[t - 1], walk.cluster_size[t - 1]) };
        w.row(&[t.into(), walk.distance[t].into(), walk.loss_change[t].into(), eig.into(), size.into()]);
    }
    w.finish()?;
    ctx.params("walk_final_params", &objective.spec, &walk.final_params)?;
    let theta_norm = norm(&run.final_params);
    let results = json!({
        "steps_completed": walk.steps_completed,
        "max_abs_loss_change": walk.max_abs_loss_change(),
        "final_distance": walk.final_distance(),
        "theta_f_norm": theta_norm,
        "distance_over_norm": walk.final_distance() / theta_norm,
        "failure": walk.failure,
    });
    Ok((results, walk.failure.clone().map(|f| format!("hessian walk stopped after {} steps: {f}", walk.steps_completed))))
}

fn run_mode_connect(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let mc = &cfg.probes.mode_connect;
    let optimizer = OptimizerConfig { keep_snapshots: false, seed: cfg.seed, ..cfg.optimizer.clone() };
    let mut ends = Vec::new();
    for k in 0..2u64 {
        let init = init_params_from(&objective.spec, &mut rng::substream(cfg.seed, "mode_init", k), cfg.init_scale);
        let run = train(&objective, &init, &optimizer)?;
        ctx.params(&format!("theta{}", k + 1), &objective.spec, &run.final_params)?;
        ends.push(run.final_params);
    }
    let profile = match cfg.problem {
        Problem::Elliptic1d => objective.clone(),
        Problem::Neohookean2d => objective.clone().with_clamp(Some(mc.clamp)),
    };
    let options = ModeConnectOptions { t_samples: mc.t_samples, profile_samples: mc.profile_samples, optimizer: OptimizerConfig { seed: cfg.seed, ..mc.optimizer.clone() } };
    let m = landscape::mode_connect(&objective, &profile, &ends[0], &ends[1], &options)?;
    ctx.params("control", &objective.spec, &m.control)?;
    let mut w = ctx.csv("profiles", &["t", "linear", "bezier"]);
    for k in 0..m.linear.t.len() {
        w.row(&[m.linear.t[k].into(), m.linear.losses[k].into(), m.bezier.losses[k].into()]);
    }
    w.finish()?;
    let mut h = ctx.csv("control_history", &["epoch", "path_objective"]);
    for (t, v) in m.history.iter().enumerate() {
        h.row(&[t.into(), (*v).into()]);
    }
    h.finish()?;
    let ratio = m.bezier_max_deviation / m.linear_barrier;
    Ok((json!({ "connection": m, "barrier_over_endpoint_scale": m.linear_barrier / m.endpoint_scale, "bezier_deviation_over_barrier": ratio }), None))
}

/// Components the objective differentiates: all spatial derivatives up to
/// its order.
fn objective_derivatives(objective: &Objective, params: &[f64], points: &[[f64; 2]]) -> Result<Vec<Matrix>> {
    extract_basis_derivatives(&objective.spec, params, points, objective.kind.spatial_order())
}

pub struct Trench {
    pub gram: landscape::GramAnalysis,
    pub null: landscape::NullDirection,
    pub basis: crate::network::BasisSet,
}

/// Gram analysis and null direction of the trained parameters.
pub fn trench_direction(config: &ExperimentConfig, objective: &Objective, params: &[f64]) -> Result<Trench> {
    let grid = objective.grid();
    let basis = extract_basis(&objective.spec, params, &grid.points)?;
    let threshold = config.probes.gram.rel_threshold.unwrap_or(match config.problem {
        Problem::Elliptic1d => 1e-12,
        Problem::Neohookean2d => 1e-6,
    });
    let gram = landscape::gram_rank(&basis, &grid.weights, threshold)?;
    let derivatives = match config.probes.gram.selection {
        NullSelection::MinEigenvalue => Vec::new(),
        NullSelection::LeastDerivativeChange => objective_derivatives(objective, params, &grid.points)?,
    };
    let null = landscape::null_direction(&objective.spec, params, &basis, &grid.weights, &gram, &derivatives)?;
    Ok(Trench { gram, null, basis })
}

/// max |L(θ + t v) − L(θ)| / |L(θ)| over `samples` t in [−h, h].
pub fn trench_profile(f: &dyn Differentiable, theta: &[f64], v: &[f64], half_width: f64, samples: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let l0 = f.value(theta)?;
    let t: Vec<f64> = (0..samples).map(|k| -half_width + 2.0 * half_width * k as f64 / (samples.max(2) - 1) as f64).collect();
    let losses: Vec<f64> = t.iter().map(|&tk| f.value(&add_scaled(theta, tk, v))).collect::<Result<_>>()?;
    let variation = losses.iter().fold(0.0_f64, |m, l| m.max((l - l0).abs() / l0.abs()));
    Ok((t, losses, variation))
}

fn run_gram(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let run = trained(ctx, &objective, false)?;
    let theta = &run.final_params;
    let grid = objective.grid().clone();
    let basis = extract_basis(&objective.spec, theta, &grid.points)?;
    ctx.matrix("basis", &basis.values)?;
    let trench = match trench_direction(cfg, &objective, theta) {
        Ok(t) => t,
        Err(Error::NoNullDirection) => {
            let threshold = cfg.probes.gram.rel_threshold.unwrap_or(if cfg.problem == Problem::Elliptic1d { 1e-12 } else { 1e-6 });
            let gram = landscape::gram_rank(&basis, &grid.weights, threshold)?;
            ctx.matrix("gram", &gram.gram)?;
            return Ok((json!({ "gram": gram, "null_direction": Value::Null }), Some("Gram matrix is full rank; no trench direction".into())));
        }
        Err(e) => return Err(e),
    };
    ctx.matrix("gram", &trench.gram.gram)?;
    ctx.params("null_direction", &objective.spec, &trench.null.direction)?;
    let g = &cfg.probes.gram;
    let (t, losses, variation) = trench_profile(&objective, theta, &trench.null.direction, g.trench_half_width, g.trench_samples)?;
    let mut w = ctx.csv("trench", &["t", "loss"]);
    for (tk, l) in t.iter().zip(&losses) {
        w.row(&[(*tk).into(), (*l).into()]);
    }
    w.finish()?;

    // the same Δ after moving the inner parameters: the trench is tied to
    // the basis it was computed from
    let mut moved = theta.clone();
    let inner = objective.spec.layout().inner();
    let mut r = rng::stream(cfg.seed, "gram_guard");
    let kick = landscape::random_direction(inner.len(), &mut r);
    for (i, k) in inner.zip(kick) {
        moved[i] += 0.1 * k;
    }
    let moved_basis = extract_basis(&objective.spec, &moved, &grid.points)?;
    let guard = landscape::field_change(&moved_basis, &grid.weights, &outer_coefficients(&objective.spec, &moved, 0), &trench.null.delta);

    let results = json!({
        "rank": trench.gram.rank,
        "basis_size": trench.basis.size(),
        "gram": trench.gram,
        "null_direction": trench.null,
        "selection": g.selection,
        "trench_relative_variation": variation,
        "guard_field_change": guard,
        "final_loss": run.final_loss(),
    });
    Ok((results, None))
}

fn random_plane_directions(seed: u64, dim: usize, count: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut r = rng::stream(seed, "directions");
    let k = (0..count).map(|_| landscape::random_direction(dim, &mut r)).collect();
    let j = (0..count).map(|_| landscape::random_direction(dim, &mut r)).collect();
    (k, j)
}

fn run_plane_scan(ctx: &mut Ctx, stochastic: bool) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let run = trained(ctx, &objective, false)?;
    let theta = run.final_params.clone();
    let pc = &cfg.probes.plane;
    let n = theta.len();
    let (dk, dj) = random_plane_directions(cfg.seed, n, pc.random_directions);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut extra = json!({});
    match pc.directions {
        PlaneDirections::Random => {
            for a in &dk {
                for b in &dj {
                    pairs.push((a.clone(), b.clone()));
                }
            }
        }
        PlaneDirections::Trench => {
            let trench = trench_direction(cfg, &objective, &theta).map_err(|e| match e {
                Error::NoNullDirection => Error::Probe("trench plane needs a rank-deficient Gram matrix".into()),
                e => e,
            })?;
            extra = json!({ "rank": trench.gram.rank, "relative_field_change": trench.null.relative_field_change });
            pairs.push((trench.null.direction, dj[0].clone()));
        }
    }
    let stochastic_objective = if stochastic { Some(cfg.stochastic_objective()?) } else { None };
    let mut summaries = Vec::new();
    for (p, (a, b)) in pairs.iter().enumerate() {
        let grid = match &stochastic_objective {
            Some(mc) => landscape::stochastic_plane_scan(mc, rng::substream(cfg.seed, "plane", p as u64).random_seed(), &theta, a, b, &pc.axis_k, &pc.axis_j)?,
            None => landscape::plane_scan(&objective, &theta, a, b, &pc.axis_k, &pc.axis_j)?,
        };
        ctx.plane(&format!("plane_{p}"), &grid)?;
        summaries.push(plane_summary(&grid));
    }
    let mut results = json!({ "planes": summaries, "directions": pc.directions, "final_loss": run.final_loss(), "trench": extra });
    if stochastic {
        let fixed = objective.evaluate(&theta)?;
        let mc = stochastic_objective.as_ref().expect("stochastic objective");
        let mut r = rng::stream(cfg.seed, "estimator_spread");
        let draws: Vec<f64> = (0..200).map(|_| mc.evaluate_stochastic(&theta, &mut r)).collect::<Result<_>>()?;
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        results["integrand_variance"] = json!(objective.integrand_variance(&theta)?);
        results["monte_carlo_batch"] = json!(cfg.monte_carlo_batch);
        results["estimator"] = json!({ "fixed_grid_loss": fixed, "mean": mean, "std": sd, "samples": draws.len() });
    }
    Ok((results, None))
}

trait RandomSeed {
    fn random_seed(self) -> u64;
}

impl RandomSeed for rng::StreamRng {
    fn random_seed(mut self) -> u64 {
        rand::Rng::random(&mut self)
    }
}

fn plane_summary(grid: &PlaneGrid) -> Value {
    let finite: Vec<f64> = grid.losses.as_slice().iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    json!({ "cells": grid.finite.len(), "finite": grid.finite_count(), "min": lo, "max": hi })
}

/// Full history unless the configuration asks otherwise; the 2D PINN above
/// width 15 gets endpoint spectra only.
pub fn spectrum_mode(config: &ExperimentConfig) -> SpectrumMode {
    config.probes.spectrum.mode.unwrap_or(if config.kind() == ObjectiveKind::Pinn2d && config.width() > 15 { SpectrumMode::Endpoints } else { SpectrumMode::Full })
}

fn run_spectrum(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let sc = &cfg.probes.spectrum;
    let mode = spectrum_mode(cfg);
    let run = trained(ctx, &objective, mode == SpectrumMode::Full)?;
    let history = landscape::spectrum_evolution(&objective, &run, sc.sample_every, mode)?;
    let n = objective.param_count();
    let values = Matrix::from_fn(history.epochs.len(), n, |s, k| history.eigenvalues[s][k]);
    ctx.matrix("eigenvalues", &values)?;
    let hist = landscape::spectrum_histogram(&history, sc.bins, sc.shift)?;
    ctx.matrix("histogram", &hist.counts)?;
    ctx.vector("histogram_edges", &hist.edges)?;
    let mut w = ctx.csv("extremes", &["epoch", "lambda_min", "lambda_max"]);
    for s in 0..history.epochs.len() {
        w.row(&[history.epochs[s].into(), history.lambda_min[s].into(), history.lambda_max[s].into()]);
    }
    w.finish()?;
    let first = history.lambda_min[0].abs();
    let last = history.lambda_min.last().unwrap().abs();
    Ok((
        json!({
            "mode": mode,
            "samples": history.epochs.len(),
            "final_concentration_1e-6": history.final_concentration(1e-6),
            "lambda_min_initial": history.lambda_min[0],
            "lambda_min_final": history.lambda_min.last(),
            "lambda_max_final": history.lambda_max.last(),
            "lambda_min_shrink": first / last,
            "final_loss": run.final_loss(),
        }),
        None,
    ))
}

fn run_goldilocks(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let g = &cfg.probes.goldilocks;
    let optimizer = OptimizerConfig { seed: cfg.seed, ..cfg.optimizer.clone() };
    let runs = landscape::goldilocks_sweep(&objective, &g.radii, g.trials, &optimizer, cfg.seed);
    let mut w = ctx.csv("goldilocks", &["radius", "trial", "final_loss", "failed"]);
    for r in &runs {
        w.row(&[r.radius.into(), r.trial.into(), r.final_loss.unwrap_or(f64::NAN).into(), r.failure.is_some().into()]);
    }
    w.finish()?;
    let per_radius: Vec<Value> = g
        .radii
        .iter()
        .map(|&radius| {
            let mut finals: Vec<f64> = runs.iter().filter(|r| r.radius == radius).filter_map(|r| r.final_loss).collect();
            finals.sort_by(f64::total_cmp);
            let median = if finals.is_empty() { f64::NAN } else { finals[finals.len() / 2] };
            json!({ "radius": radius, "median_final_loss": median, "completed": finals.len() })
        })
        .collect();
    let failures: Vec<&Option<String>> = runs.iter().map(|r| &r.failure).filter(|f| f.is_some()).collect();
    Ok((json!({ "radii": per_radius, "failed_runs": failures.len() }), None))
}

fn run_radius(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let optimizer = OptimizerConfig { seed: cfg.seed, ..cfg.optimizer.clone() };
    let tracks = landscape::radius_tracking(&objective, &cfg.probes.radius.init_scales, &optimizer, cfg.seed)?;
    let mut w = ctx.csv("radius", &["init_scale", "epoch", "radius", "loss"]);
    for tr in &tracks {
        for (t, (r, l)) in tr.radii.iter().zip(&tr.losses).enumerate() {
            w.row(&[tr.init_scale.into(), t.into(), (*r).into(), (*l).into()]);
        }
    }
    w.finish()?;
    let summary: Vec<Value> = tracks
        .iter()
        .map(|t| json!({ "init_scale": t.init_scale, "initial_radius": t.radii[0], "final_radius": t.radii.last(), "growth": t.growth(), "final_loss": t.losses.last() }))
        .collect();
    Ok((json!({ "runs": summary }), None))
}

pub fn intrinsic_dims(config: &ExperimentConfig) -> Vec<usize> {
    config.probes.intrinsic.dims.clone().unwrap_or(match config.problem {
        Problem::Elliptic1d => vec![1, 2, 5, 10, 20],
        Problem::Neohookean2d => vec![5, 10, 20, 50, 100],
    })
}

fn run_intrinsic(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let dims = intrinsic_dims(cfg);
    let optimizer = OptimizerConfig { seed: cfg.seed, ..cfg.optimizer.clone() };
    let results = landscape::intrinsic_sweep(&[&objective], &dims, &optimizer, cfg.seed, cfg.probes.intrinsic.orthonormalize)?;
    let reference = reference_run(cfg, &objective, false)?;
    ctx.losses("reference_losses", &reference)?;
    let mut w = ctx.csv("intrinsic", &["dim", "epoch", "loss"]);
    for r in &results {
        for (t, l) in r.losses.iter().enumerate() {
            w.row(&[r.dim.into(), t.into(), (*l).into()]);
        }
    }
    w.finish()?;
    let failed = results.iter().find_map(|r| r.failure.clone());
    Ok((json!({ "dims": results, "reference_final_loss": reference.final_loss(), "reference_params": objective.param_count() }), failed))
}

fn run_pca(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let run = trained(ctx, &objective, true)?;
    let pc = &cfg.probes.pca;
    let q = pc.components.min(run.snapshots.len());
    let pca = landscape::pca_trajectory(&run, q)?;
    ctx.matrix("coordinates", &pca.coordinates)?;
    if !pca.basis.components.is_empty() {
        let comps = Matrix::from_fn(pca.basis.components.len(), objective.param_count(), |k, i| pca.basis.components[k][i]);
        ctx.matrix("components", &comps)?;
    }
    ctx.params("mean", &objective.spec, &pca.basis.mean)?;
    let ncomp = pca.basis.components.len();
    let mut planes = Vec::new();
    for a in 0..ncomp {
        for b in a + 1..ncomp {
            let extent = |c: usize| (0..pca.coordinates.rows()).map(|t| pca.coordinates[(t, c)].abs()).fold(0.0_f64, f64::max) * pc.margin;
            let (ha, hb) = (extent(a).max(1e-12), extent(b).max(1e-12));
            let grid = landscape::plane_scan(&objective, &pca.basis.mean, &pca.basis.components[a], &pca.basis.components[b], &Axis::symmetric(ha, pc.resolution), &Axis::symmetric(hb, pc.resolution))?;
            ctx.plane(&format!("plane_{}_{}", a + 1, b + 1), &grid)?;
            planes.push(json!({ "components": [a + 1, b + 1], "summary": plane_summary(&grid) }));
        }
    }
    let two = pca.basis.explained.iter().take(2).sum::<f64>();
    let final_projection = pca.basis.project(&run.final_params);
    Ok((json!({ "explained": pca.basis.explained, "first_two": two, "total_variance": pca.basis.total_variance, "final_projection": final_projection, "planes": planes, "final_loss": run.final_loss() }), None))
}

fn run_acceleration(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let objective = cfg.objective()?;
    let run = trained(ctx, &objective, true)?;
    let ac = &cfg.probes.acceleration;
    let series = landscape::acceleration_series(&run, cfg.optimizer.learning_rate, ac.normalize)?;
    let mut w = ctx.csv("acceleration", &["epoch", "magnitude", "normalized"]);
    for (k, &t) in series.epochs.iter().enumerate() {
        let norm_v = series.normalized.as_ref().map(|v| v[k]).unwrap_or(f64::NAN);
        w.row(&[t.into(), series.magnitude[k].into(), norm_v.into()]);
    }
    w.finish()?;
    let converged = landscape::convergence_epoch(&run.losses, ac.convergence_fraction);
    let (early, late) = landscape::early_and_late_medians(&series, run.epochs(), converged);
    Ok((json!({ "convergence_epoch": converged, "early_median": early, "late_median": late, "decreasing": early > late, "final_loss": run.final_loss() }), None))
}

pub fn small_width(config: &ExperimentConfig) -> usize {
    config.probes.probe_minima.small_width.unwrap_or(match config.problem {
        Problem::Elliptic1d => 5,
        Problem::Neohookean2d => 8,
    })
}

pub fn probe_networks(config: &ExperimentConfig) -> Result<Vec<(String, Objective)>> {
    Ok(vec![("big".into(), config.objective()?), ("small".into(), config.objective_for(config.spec_with_width(small_width(config)))?)])
}

pub fn probe_optimizers(config: &ExperimentConfig) -> Vec<OptimizerConfig> {
    [OptimizerKind::Adam, OptimizerKind::Gd].into_iter().map(|kind| OptimizerConfig { kind, seed: config.seed, ..config.optimizer.clone() }).collect()
}

fn run_probe_minima(ctx: &mut Ctx) -> Outcome {
    let cfg = ctx.config;
    let pm = &cfg.probes.probe_minima;
    let networks = probe_networks(cfg)?;
    let summary = landscape::probe_minima(&networks, &probe_optimizers(cfg), pm.trials, cfg.seed, cfg.init_scale, pm.stuck_factor);
    let len = cfg.optimizer.epochs + 1;
    let curves = Matrix::from_fn(summary.runs.len(), len, |r, t| summary.runs[r].losses.get(t).copied().unwrap_or(f64::NAN));
    ctx.matrix("curves", &curves)?;
    let mut w = ctx.csv("runs", &["row", "network", "optimizer", "trial", "final_loss", "failed", "stuck"]);
    for (i, r) in summary.runs.iter().enumerate() {
        let opt = match r.optimizer {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Gd => "gd",
        };
        w.row(&[i.into(), r.network.as_str().into(), opt.into(), r.trial.into(), r.final_loss.unwrap_or(f64::NAN).into(), r.failure.is_some().into(), r.stuck.into()]);
    }
    w.finish()?;
    let stuck = summary.runs.iter().filter(|r| r.stuck).count();
    let failed = summary.runs.iter().filter(|r| r.failure.is_some()).count();
    Ok((json!({ "runs": summary.runs, "best_final": summary.best_final, "best_band": summary.best_band, "stuck_factor": summary.stuck_factor, "stuck": stuck, "failed": failed }), None))
}
