//! Probes made of many training runs: minima probing, hypersphere sweeps,
//! radius tracking and random-subspace training.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::network::{init_params, init_params_from};
use crate::optimize::{train, train_on_sphere, train_subspace, OptimizerConfig, OptimizerKind, SubspaceMap};
use crate::problems::Objective;
use crate::rng;

fn quiet(config: &OptimizerConfig) -> OptimizerConfig {
    OptimizerConfig { keep_snapshots: false, ..config.clone() }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeRun {
    pub network: String,
    pub optimizer: OptimizerKind,
    pub trial: usize,
    /// Loss per epoch; shorter than epochs + 1 when the run aborted.
    #[serde(skip)]
    pub losses: Vec<f64>,
    pub final_loss: Option<f64>,
    pub failure: Option<String>,
    pub stuck: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeSummary {
    pub runs: Vec<ProbeRun>,
    pub best_final: f64,
    /// max − min of the best run's loss over its final 10% of epochs.
    pub best_band: f64,
    pub stuck_factor: f64,
}

impl ProbeSummary {
    pub fn completed(&self) -> impl Iterator<Item = &ProbeRun> {
        self.runs.iter().filter(|r| r.final_loss.is_some())
    }
}

/// Initial parameters of probe trial `trial` for the network called `label`.
pub fn probe_init(objective: &Objective, seed: u64, label: &str, trial: usize, scale: f64) -> Vec<f64> {
    init_params_from(&objective.spec, &mut rng::substream(seed, &format!("probe_init/{label}"), trial as u64), scale)
}

/// Trains every (network, optimizer, trial) combination from seeded
/// initializations and flags runs whose final loss exceeds the best final
/// loss by more than `stuck_factor` times the best run's late fluctuation.
/// Aborted runs are recorded as failures, not as stuck.
pub fn probe_minima(networks: &[(String, Objective)], optimizers: &[OptimizerConfig], trials: usize, seed: u64, init_scale: f64, stuck_factor: f64) -> ProbeSummary {
    let jobs: Vec<(usize, usize, usize)> = (0..networks.len()).flat_map(|n| (0..optimizers.len()).flat_map(move |o| (0..trials).map(move |t| (n, o, t)))).collect();
    let mut runs: Vec<ProbeRun> = jobs
        .par_iter()
        .map(|&(n, o, trial)| {
            let (label, objective) = &networks[n];
            let config = quiet(&optimizers[o]);
            let init = probe_init(objective, seed, label, trial, init_scale);
            let (losses, final_loss, failure) = match train(objective, &init, &config) {
                Ok(run) => {
                    let f = run.final_loss();
                    (run.losses, Some(f), None)
                }
                Err(e) => (Vec::new(), None, Some(e.to_string())),
            };
            ProbeRun { network: label.clone(), optimizer: config.kind, trial, losses, final_loss, failure, stuck: false }
        })
        .collect();

    let best = runs.iter().enumerate().filter_map(|(i, r)| r.final_loss.map(|f| (i, f))).min_by(|a, b| a.1.total_cmp(&b.1));
    let (best_final, best_band) = match best {
        Some((i, f)) => (f, late_band(&runs[i].losses)),
        None => (f64::NAN, f64::NAN),
    };
    for r in &mut runs {
        if let Some(f) = r.final_loss {
            r.stuck = f - best_final > stuck_factor * best_band;
        }
    }
    ProbeSummary { runs, best_final, best_band, stuck_factor }
}

fn late_band(losses: &[f64]) -> f64 {
    let tail = &losses[losses.len() - (losses.len() / 10).max(1)..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereRun {
    pub radius: f64,
    pub trial: usize,
    pub final_loss: Option<f64>,
    pub failure: Option<String>,
}

/// Hypersphere-constrained training at every radius; trial `k` starts from
/// the same direction at every radius.
pub fn goldilocks_sweep(objective: &Objective, radii: &[f64], trials: usize, config: &OptimizerConfig, seed: u64) -> Vec<SphereRun> {
    let config = quiet(config);
    let jobs: Vec<(f64, usize)> = radii.iter().flat_map(|&r| (0..trials).map(move |t| (r, t))).collect();
    jobs.par_iter()
        .map(|&(radius, trial)| {
            let init = init_params_from(&objective.spec, &mut rng::substream(seed, "goldilocks_init", trial as u64), 1.0);
            match train_on_sphere(objective, &init, &config, radius) {
                Ok(run) => SphereRun { radius, trial, final_loss: Some(run.final_loss()), failure: None },
                Err(e) => SphereRun { radius, trial, final_loss: None, failure: Some(e.to_string()) },
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusTrack {
    pub init_scale: f64,
    pub radii: Vec<f64>,
    pub losses: Vec<f64>,
}

impl RadiusTrack {
    pub fn growth(&self) -> f64 {
        self.radii.iter().fold(0.0_f64, |m, &r| m.max(r)) / self.radii[0]
    }
}

/// Unconstrained runs from the default initialization scaled by each factor.
pub fn radius_tracking(objective: &Objective, scales: &[f64], config: &OptimizerConfig, seed: u64) -> Result<Vec<RadiusTrack>> {
    let config = quiet(config);
    scales
        .par_iter()
        .map(|&scale| {
            let run = train(objective, &init_params(&objective.spec, seed, scale), &config)?;
            Ok(RadiusTrack { init_scale: scale, radii: run.radii, losses: run.losses })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SubspaceResult {
    pub objective: String,
    pub dim: usize,
    pub final_loss: Option<f64>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub losses: Vec<f64>,
}

/// Training in random affine subspaces θ₀ + Pz. For each dimension the
/// offset and projection are drawn once and shared by all objectives.
pub fn intrinsic_sweep(objectives: &[&Objective], dims: &[usize], config: &OptimizerConfig, seed: u64, orthonormalize: bool) -> Result<Vec<SubspaceResult>> {
    let config = quiet(config);
    let mut jobs = Vec::new();
    for &d in dims {
        let spec = &objectives[0].spec;
        let offset = init_params_from(spec, &mut rng::substream(seed, "intrinsic_offset", d as u64), 1.0);
        let map = SubspaceMap::random(offset, d, &mut rng::substream(seed, "projection", d as u64), orthonormalize)?;
        for &obj in objectives {
            jobs.push((obj, map.clone()));
        }
    }
    Ok(jobs
        .into_par_iter()
        .map(|(obj, map)| {
            let dim = map.dim();
            let objective = obj.kind.name().to_string();
            match train_subspace(obj, map, &config) {
                Ok(run) => SubspaceResult { objective, dim, final_loss: Some(run.z.final_loss()), failure: None, losses: run.z.losses },
                Err(e) => SubspaceResult { objective, dim, final_loss: None, failure: Some(e.to_string()), losses: Vec::new() },
            }
        })
        .collect())
}
