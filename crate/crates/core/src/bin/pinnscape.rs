use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use pinnscape::config::{ExperimentConfig, ObjectiveFamily, Problem};
use pinnscape::error::Error;
use pinnscape::experiments::{run_experiment, Subcommand};

/// Loss-landscape experiments for Deep Ritz and PINN objectives.
#[derive(Parser)]
#[command(name = "pinnscape", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Train one network and save the trajectory
    Train(Common),
    /// Train and compare against the manufactured solution
    Verify(Common),
    /// Loss along the segment from initialization to the trained solution
    Mli(Common),
    /// Walk along near-zero Hessian eigendirections from the trained solution
    HessianWalk(Common),
    /// Linear and quadratic Bezier paths between two trained solutions
    ModeConnect(Common),
    /// Loss on 2D planes through the trained solution
    PlaneScan(Common),
    /// Plane scan with the Monte Carlo loss estimator
    StochasticScan(Common),
    /// Hessian eigenvalues along training
    Spectrum(Common),
    /// Gram matrix of the hidden basis and the trench direction
    Gram(Common),
    /// Training restricted to spheres of fixed radius
    Goldilocks(Common),
    /// Parameter norm along training for several initialization scales
    RadiusTrack(Common),
    /// Training in random low-dimensional subspaces
    IntrinsicDim(Common),
    /// Principal components of the training trajectory
    PcaTraj(Common),
    /// Second differences of the training trajectory
    Acceleration(Common),
    /// Repeated training of a wide and a narrow network
    ProbeMinima(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON)
    #[arg(long, conflicts_with_all = ["problem", "objective"])]
    config: Option<PathBuf>,
    /// Problem when no configuration file is given
    #[arg(long, value_enum, requires = "objective")]
    problem: Option<ProblemArg>,
    /// Objective when no configuration file is given
    #[arg(long, value_enum, requires = "problem")]
    objective: Option<ObjectiveArg>,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output root, instead of the configured one
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the experiment id (run directory name)
    #[arg(long)]
    id: Option<String>,
    /// Worker threads for grid scans and Hessians
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ProblemArg {
    Elliptic1d,
    Neohookean2d,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ObjectiveArg {
    Drm,
    Pinn,
}

impl Command {
    fn split(&self) -> (Subcommand, &Common) {
        use Command::*;
        match self {
            Train(c) => (Subcommand::Train, c),
            Verify(c) => (Subcommand::Verify, c),
            Mli(c) => (Subcommand::Mli, c),
            HessianWalk(c) => (Subcommand::HessianWalk, c),
            ModeConnect(c) => (Subcommand::ModeConnect, c),
            PlaneScan(c) => (Subcommand::PlaneScan, c),
            StochasticScan(c) => (Subcommand::StochasticScan, c),
            Spectrum(c) => (Subcommand::Spectrum, c),
            Gram(c) => (Subcommand::Gram, c),
            Goldilocks(c) => (Subcommand::Goldilocks, c),
            RadiusTrack(c) => (Subcommand::RadiusTrack, c),
            IntrinsicDim(c) => (Subcommand::IntrinsicDim, c),
            PcaTraj(c) => (Subcommand::PcaTraj, c),
            Acceleration(c) => (Subcommand::Acceleration, c),
            ProbeMinima(c) => (Subcommand::ProbeMinima, c),
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = match (&common.config, common.problem, common.objective) {
        (Some(path), _, _) => ExperimentConfig::load(path)?,
        (None, Some(p), Some(o)) => {
            let problem = match p {
                ProblemArg::Elliptic1d => Problem::Elliptic1d,
                ProblemArg::Neohookean2d => Problem::Neohookean2d,
            };
            let objective = match o {
                ObjectiveArg::Drm => ObjectiveFamily::Drm,
                ObjectiveArg::Pinn => ObjectiveFamily::Pinn,
            };
            ExperimentConfig::new(problem, objective)
        }
        _ => return Err(Error::Config("either --config or both --problem and --objective are required".into())),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(id) = &common.id {
        config.id = Some(id.clone());
    }
    Ok(config)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Schema { .. } | Error::Json(_) => 2,
        e if e.is_non_finite() => 3,
        Error::Probe(_) | Error::NoNullDirection => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, common) = cli.command.split();
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = load_config(common).and_then(|config| {
        let out = common.out.clone().unwrap_or_else(|| config.output_dir.clone());
        run_experiment(sub, &config, &out)
    });
    match result {
        Ok(run) => {
            println!("{}", run.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
