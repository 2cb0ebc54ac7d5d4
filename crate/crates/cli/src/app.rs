use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, EXIT_VALIDATION};
use crate::infer::InferOptions;
use crate::with_workers;

#[derive(Debug, Parser)]
#[command(name = "azsr", version, about = "Single-snapshot azimuth super-resolution toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (JSON); defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's experiment seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize ADC cubes and a ground-truth scene manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run IAA over every range-Doppler bin and write training records.
    Label {
        #[command(flatten)]
        common: Common,
        /// Directory with cubes and manifest.json [default: paths.cubes].
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train one network per requested loss.
    Train {
        #[command(flatten)]
        common: Common,
        /// Record file [default: paths.records].
        #[arg(long)]
        input: Option<PathBuf>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Produce range-azimuth maps for one cube or a directory of cubes.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Cube file or directory [default: paths.cubes].
        #[arg(long)]
        input: Option<PathBuf>,
        /// Trained model; without it only reference maps are written.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write IAA maps.
        #[arg(long)]
        with_iaa: bool,
    },
    /// Score prediction maps against reference maps.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: PathBuf,
        /// Prediction directory; repeat to compare several.
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
    },
    /// Per-vector and per-frame latency of DBF, IAA and the network.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Model to time [default: a seeded untrained network of the same shape].
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common }
            | Command::Label { common, .. }
            | Command::Train { common, .. }
            | Command::Infer { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Bench { common, .. } => common,
        }
    }
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = cfg.with_seed(common.seed);
    cfg.validate()?;
    Ok(cfg)
}

fn or_default(p: &Option<PathBuf>, default: &Path) -> PathBuf {
    p.clone().unwrap_or_else(|| default.to_path_buf())
}

pub fn execute(command: &Command) -> CliResult<()> {
    let common = command.common();
    let cfg = load_config(common)?;
    let workers = common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out = common.out.as_path();
    with_workers(workers, || match command {
        Command::Simulate { .. } => {
            let m = crate::simulate::run(&cfg, out)?;
            eprintln!("wrote {} cubes to {}", m.frames.len(), out.display());
            Ok(())
        }
        Command::Label { input, .. } => {
            let r = crate::label::run(&cfg, &or_default(input, &cfg.paths.cubes), out)?;
            eprintln!(
                "{} records from {} bins ({} dropped with alpha = 0)",
                r.records, r.candidate_bins, r.dropped_zero_alpha
            );
            Ok(())
        }
        Command::Train { input, resume, .. } => {
            let s = crate::train::run(&cfg, &or_default(input, &cfg.paths.records), out, resume.as_deref())?;
            for m in &s.models {
                eprintln!("{}: {} epochs -> {}", m.loss_kind.name(), m.epochs, m.model.display());
            }
            Ok(())
        }
        Command::Infer {
            input, model, with_iaa, ..
        } => {
            let opts = InferOptions {
                model: model.clone(),
                with_iaa: *with_iaa,
            };
            let s = crate::infer::run(&cfg, &or_default(input, &cfg.paths.cubes), out, &opts)?;
            eprintln!("{} frames, maps: {}", s.frames.len(), s.estimators.join(", "));
            Ok(())
        }
        Command::Evaluate { truth, pred, .. } => crate::evaluate::run(&cfg, truth, pred, out).map(|_| ()),
        Command::Bench { model, .. } => {
            let r = crate::bench::run(&cfg, model.as_ref(), out)?;
            for v in &r.per_vector {
                println!("{:<8} median {:>10.2} us  mean {:>10.2} us", v.estimator, v.median_us, v.mean_us);
            }
            println!(
                "iaa/network {:.2}x  iaa/dbf {:.2}x  network/dbf {:.2}x",
                r.speedup.iaa_over_network, r.speedup.iaa_over_dbf, r.speedup.network_over_dbf
            );
            Ok(())
        }
    })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_VALIDATION,
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}
