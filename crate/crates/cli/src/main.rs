use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use phyllo::io::{CloudFormat, LengthUnit, StlMode};
use phyllo::Family;
use phyllo_cli::commands::{self, FitArgs, GenerateArgs, SeedArgs};
use phyllo_cli::pipeline::{FitOptions, DEFAULT_FIT_SAMPLES, DEFAULT_SAMPLE_U, DEFAULT_SAMPLE_V};
use phyllo_cli::serve::{self, ServeArgs};
use phyllo_cli::UsageError;

/// Procedural plant geometry from YAML plant descriptors.
#[derive(Parser)]
#[command(name = "phyllo", version)]
struct Cli {
    /// Directory for outputs that are not given an explicit path.
    #[arg(long, global = true, env = "PHYLLO_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Monocot,
    Dicot,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Monocot => Family::Monocot,
            FamilyArg::Dicot => Family::Dicot,
        }
    }
}

#[derive(clap::Args, Clone, Copy)]
struct Tessellation {
    /// Samples along each organ.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_U)]
    sample_u: usize,
    /// Samples across (or around) each organ.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_V)]
    sample_v: usize,
}

#[derive(clap::Args)]
struct Fitting {
    /// Length unit of the point cloud (m or cm).
    #[arg(long, default_value = "m")]
    unit: LengthUnit,
    /// Point-cloud format; inferred from the extension by default (xyz, ply).
    #[arg(long)]
    format: Option<CloudFormat>,
    /// Number of points sampled on the model.
    #[arg(long, default_value_t = DEFAULT_FIT_SAMPLES)]
    samples: usize,
    /// Sampling seed; defaults to the descriptor's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a plant and export STL and SMESH.
    Generate {
        descriptor: PathBuf,
        /// STL output (default: <out-dir>/<name>.stl).
        #[arg(long)]
        stl: Option<PathBuf>,
        /// SMESH output (default: <out-dir>/<name>.smesh).
        #[arg(long)]
        smesh: Option<PathBuf>,
        /// binary or ascii.
        #[arg(long, default_value = "binary")]
        stl_mode: StlMode,
        #[command(flatten)]
        tess: Tessellation,
    },
    /// Write a starting descriptor from node heights and a leaf count.
    Seed {
        /// Node heights in cm, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        node_z: Vec<f64>,
        /// Number of leaves, placed on the uppermost nodes.
        #[arg(long)]
        leaves: usize,
        #[arg(long, value_enum, default_value = "monocot")]
        family: FamilyArg,
        /// Output file (default: <out-dir>/<family>_template.yaml).
        out: Option<PathBuf>,
    },
    /// Chamfer distance between a descriptor's model and a point cloud.
    FitReport {
        descriptor: PathBuf,
        cloud: PathBuf,
        #[command(flatten)]
        fitting: Fitting,
        #[command(flatten)]
        tess: Tessellation,
        /// JSON-lines history file (default: <out-dir>/fit_history.jsonl).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Serve the model, cloud and distance to the viewer, rebuilding on edits.
    Serve {
        descriptor: PathBuf,
        cloud: Option<PathBuf>,
        #[arg(long, default_value_t = 8737)]
        port: u16,
        /// Built viewer assets served under /.
        #[arg(long, env = "PHYLLO_VIEWER_DIR")]
        static_dir: Option<PathBuf>,
        /// Descriptor polling interval in milliseconds.
        #[arg(long, default_value_t = 250)]
        poll_ms: u64,
        #[command(flatten)]
        fitting: Fitting,
        #[command(flatten)]
        tess: Tessellation,
    },
}

fn fit_options(f: &Fitting, t: Tessellation) -> FitOptions {
    FitOptions { samples: f.samples, seed: f.seed, sample_u: t.sample_u, sample_v: t.sample_v }
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Generate { descriptor, stl, smesh, stl_mode, tess } => commands::generate(GenerateArgs {
            descriptor,
            stl,
            smesh,
            stl_mode,
            sample_u: tess.sample_u,
            sample_v: tess.sample_v,
            out_dir,
        }),
        Command::Seed { node_z, leaves, family, out } => {
            commands::seed(SeedArgs { node_z, leaves, family: family.into(), out, out_dir })
        }
        Command::FitReport { descriptor, cloud, fitting, tess, history } => commands::fit_report(FitArgs {
            descriptor,
            cloud,
            format: fitting.format,
            unit: fitting.unit,
            fit: fit_options(&fitting, tess),
            history,
            out_dir,
        }),
        Command::Serve { descriptor, cloud, port, static_dir, poll_ms, fitting, tess } => {
            let args = ServeArgs {
                descriptor,
                cloud,
                format: fitting.format,
                unit: fitting.unit,
                port,
                static_dir,
                fit: fit_options(&fitting, tess),
                poll: Duration::from_millis(poll_ms.max(10)),
            };
            tokio::runtime::Runtime::new()?.block_on(serve::serve(args))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
