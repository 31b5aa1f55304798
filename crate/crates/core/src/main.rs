use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dgsem_ale::harness::{run, Experiment, Overrides, RunConfig};
use dgsem_ale::solver::{FluxKind, Formulation};

/// Skew-symmetric DGSEM-ALE experiments on moving curvilinear hex meshes.
///
/// Exits with 0 when every threshold of the experiment passes, 1 when one
/// fails and 2 on configuration or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "dgsem-ale", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plane-wave error over polynomial degrees and time steps.
    Convergence(Flags),
    /// Residual growth of the skew-symmetric and standard formulations.
    Stability(Flags),
    /// Drift of the conserved totals on a periodic moving mesh.
    Conservation(Flags),
    /// Preservation of a constant state on the moving mesh.
    Freestream(Flags),
    /// A run described entirely by the configuration file.
    Custom(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// JSON configuration; absent keys take the experiment's defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for the CSV files.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run only this polynomial degree.
    #[arg(long, value_name = "N")]
    n_poly: Option<usize>,
    /// Run only this time step.
    #[arg(long, value_name = "X")]
    dt: Option<f64>,
    #[arg(long, value_name = "X")]
    t_final: Option<f64>,
    /// upwind or central.
    #[arg(long)]
    flux: Option<FluxKind>,
    /// skew or standard.
    #[arg(long)]
    formulation: Option<Formulation>,
}

impl Command {
    fn split(self) -> (Experiment, Flags) {
        match self {
            Self::Convergence(f) => (Experiment::Convergence, f),
            Self::Stability(f) => (Experiment::Stability, f),
            Self::Conservation(f) => (Experiment::Conservation, f),
            Self::Freestream(f) => (Experiment::Freestream, f),
            Self::Custom(f) => (Experiment::Custom, f),
        }
    }
}

fn main() -> ExitCode {
    let (experiment, flags) = Cli::parse().command.split();
    let config = match &flags.config {
        Some(path) => RunConfig::load(path, Some(experiment)),
        None => Ok(RunConfig::preset(experiment)),
    };
    let outcome = config.and_then(|mut cfg| {
        cfg.apply(&Overrides {
            out: flags.out,
            n_poly: flags.n_poly,
            dt: flags.dt,
            t_final: flags.t_final,
            flux: flags.flux,
            formulation: flags.formulation,
        });
        cfg.validate()?;
        run(&cfg)
    });
    match outcome {
        Ok(report) => {
            println!("{report}");
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
