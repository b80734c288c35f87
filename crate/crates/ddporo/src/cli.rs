//! The `ddporo` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ddporo_core::nns::SearchBackend;
use ddporo_core::solver::FormulationKind;
use log::{info, warn};

use crate::config::{ProblemConfig, ProblemKind, Setup};
use crate::experiments;

/// Data-driven poroelasticity: runs, dataset generation and studies.
#[derive(Debug, Parser)]
#[command(name = "ddporo", version, about)]
pub struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in preset used when no configuration file is given.
    #[arg(long, global = true, value_enum)]
    problem: Option<ProblemArg>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for every random input (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Nearest-neighbour backend (overrides the configuration).
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// Worker threads for independent runs of a study.
    #[arg(long, global = true, env = "DDPORO_THREADS")]
    threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the configured problem and write fields, logs and a summary.
    Run {
        /// Samples per active data axis (overrides the configuration).
        #[arg(long)]
        points: Option<usize>,
        /// Formulation (overrides the configuration).
        #[arg(long, value_enum)]
        formulation: Option<FormulationArg>,
    },
    /// Write the datasets of the configured problem as CSV with a manifest.
    GenData {
        /// Samples per active data axis (overrides the configuration).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Consolidation error study over dataset sizes and formulations.
    Convergence {
        /// Samples per active data axis.
        #[arg(long, value_delimiter = ',', default_values_t = [129, 513, 2049, 8193, 16385])]
        points: Vec<usize>,
        /// Formulations to run.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [FormulationArg::FullyDd, FormulationArg::HybridSolidDd, FormulationArg::HybridFluidDd])]
        formulations: Vec<FormulationArg>,
    },
    /// Search-backend timing study on the steady-diffusion cube or the plate.
    Timing {
        /// Samples per data axis.
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8, 16, 32, 64])]
        sizes: Vec<usize>,
        /// Repeats per size and backend, each with its own seed.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Write closed-form reference values for plotting.
    OracleDump {
        /// Sample points per curve.
        #[arg(long, default_value_t = 41)]
        samples: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProblemArg {
    Terzaghi,
    Relaxation,
    Footing,
    PlateHole,
    BereaLike,
    PoissonCube,
}

impl From<ProblemArg> for ProblemKind {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Terzaghi => ProblemKind::Terzaghi,
            ProblemArg::Relaxation => ProblemKind::Relaxation,
            ProblemArg::Footing => ProblemKind::Footing,
            ProblemArg::PlateHole => ProblemKind::PlateHole,
            ProblemArg::BereaLike => ProblemKind::BereaLike,
            ProblemArg::PoissonCube => ProblemKind::PoissonCube,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    #[value(alias = "kd_tree")]
    Kdtree,
    #[value(alias = "brute_force")]
    BruteForce,
}

impl From<BackendArg> for SearchBackend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Kdtree => SearchBackend::KdTree,
            BackendArg::BruteForce => SearchBackend::BruteForce,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormulationArg {
    #[value(alias = "fully_dd")]
    FullyDd,
    #[value(alias = "hybrid_fluid_dd")]
    HybridFluidDd,
    #[value(alias = "hybrid_solid_dd")]
    HybridSolidDd,
    #[value(alias = "model_based")]
    ModelBased,
    #[value(alias = "steady_diffusion")]
    SteadyDiffusion,
}

impl From<FormulationArg> for FormulationKind {
    fn from(f: FormulationArg) -> Self {
        match f {
            FormulationArg::FullyDd => FormulationKind::FullyDd,
            FormulationArg::HybridFluidDd => FormulationKind::HybridFluidDd,
            FormulationArg::HybridSolidDd => FormulationKind::HybridSolidDd,
            FormulationArg::ModelBased => FormulationKind::ModelBased,
            FormulationArg::SteadyDiffusion => FormulationKind::SteadyDiffusion,
        }
    }
}

/// Entry point of the binary: parses `std::env::args`, runs, and maps
/// errors to a non-zero exit status.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    // A second initialisation (tests calling `main` twice) is harmless.
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let mut cfg = match (&c.config, c.problem) {
        (Some(path), None) => ProblemConfig::load(path)?,
        (None, Some(p)) => ProblemConfig::preset(p.into()),
        (Some(_), Some(_)) => bail!("give either --config or --problem, not both"),
        (None, None) => bail!("a configuration is required: pass --config FILE or --problem NAME"),
    };
    if let Some(seed) = c.seed {
        cfg.seed = Some(seed);
        cfg.setup.set_seed(seed);
    }
    if let Some(b) = c.backend {
        cfg.backend = b.into();
    }
    let threads = c.threads.unwrap_or(1).max(1);
    let out = c.out.clone().or_else(|| cfg.output.dir.clone());
    let out_required = || out.clone().context("an output directory is required: pass --out DIR");

    match cli.command {
        Command::Run { points, formulation } => {
            if let Some(n) = points {
                cfg.setup.set_points(n);
            }
            if let Some(f) = formulation {
                cfg.formulation = f.into();
            }
            cfg.validate()?;
            if threads > 1 {
                warn!("a single run is sequential; --threads only parallelises studies");
            }
            let outcome = experiments::run(&cfg, out.as_deref())?;
            let s = &outcome.summary;
            info!(
                "{} / {}: {} steps ({} converged, {} oscillating), {} iterations, {:.2} s",
                s.problem,
                s.formulation,
                s.steps,
                s.converged_steps,
                s.oscillating_steps,
                s.total_iterations,
                s.wall_time
            );
            for (k, v) in &s.errors {
                info!("  {k} = {v:.4e}");
            }
            print_files(&outcome.files);
        }
        Command::GenData { points } => {
            if let Some(n) = points {
                cfg.setup.set_points(n);
            }
            let dir = out_required()?;
            let m = experiments::gen_data(&cfg, &dir)?;
            for d in &m.datasets {
                info!("{}: {} {} points", d.file, d.count, d.phase);
            }
            println!("{}", dir.join("manifest.json").display());
        }
        Command::Convergence { points, formulations } => {
            let Setup::Terzaghi(base) = &cfg.setup else {
                bail!("the convergence study needs the terzaghi problem, not {}", cfg.problem());
            };
            let dir = out_required()?;
            std::fs::create_dir_all(&dir)?;
            let kinds: Vec<FormulationKind> = formulations.into_iter().map(Into::into).collect();
            let study = experiments::convergence_study(base, &kinds, &points, cfg.backend, threads)?;
            let path = dir.join("convergence.csv");
            study.write_csv(&path)?;
            println!("{}", path.display());
        }
        Command::Timing { sizes, repeats } => {
            let dir = out_required()?;
            std::fs::create_dir_all(&dir)?;
            if threads > 1 {
                warn!("timing runs are executed one at a time so that they do not compete");
            }
            let backends = [SearchBackend::BruteForce, SearchBackend::KdTree];
            let rows = experiments::timing_study(&cfg, &sizes, &backends, repeats.max(1))?;
            let path = dir.join("timing.csv");
            experiments::write_timing_csv(&path, &rows)?;
            for ((n, backend), t) in experiments::mean_total_times(&rows) {
                info!("{n:>4} per axis  {backend:<10}  mean total {t:.3} s");
            }
            println!("{}", path.display());
        }
        Command::OracleDump { samples } => {
            let dir = out_required()?;
            let path = experiments::oracle_dump(&cfg, &dir, samples)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn print_files(files: &[PathBuf]) {
    if let Some(dir) = files.first().and_then(|f| f.parent()).map(Path::to_path_buf) {
        println!("{} files written to {}", files.len(), dir.display());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_parse_after_the_subcommand() {
        let cli = Cli::try_parse_from([
            "ddporo",
            "timing",
            "--problem",
            "poisson-cube",
            "--sizes",
            "2,4",
            "--backend",
            "brute-force",
            "--seed",
            "3",
        ])
        .unwrap();
        assert_eq!(cli.common.problem, Some(ProblemArg::PoissonCube));
        assert_eq!(cli.common.backend, Some(BackendArg::BruteForce));
        assert_eq!(cli.common.seed, Some(3));
        match cli.command {
            Command::Timing { sizes, repeats } => {
                assert_eq!(sizes, [2, 4]);
                assert_eq!(repeats, 3);
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn a_configuration_source_is_required() {
        let cli = Cli::try_parse_from(["ddporo", "run"]).unwrap();
        assert!(execute(cli).unwrap_err().to_string().contains("--config"));
    }
}
