use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use objreid_cli::commands::{self, Context};
use objreid_cli::{CliError, RunConfig};

/// Object re-identification pipeline.
///
/// Precedence: command-line flags, then the `--config` file, then built-in defaults.
#[derive(Debug, Parser)]
#[command(name = "objreid", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster annotations into instances and emit per-frame observations.
    Curate {
        #[arg(long)]
        data: PathBuf,
    },
    /// Cut contextual patches from frame images.
    Patch {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        masks: Option<PathBuf>,
    },
    /// Train the projection head.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        observations: PathBuf,
    },
    /// Stratified retrieval evaluation.
    Eval {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Synth,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let out = cli.out.ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let ctx = Context::new(cfg);
    let out: &Path = &out;
    let m = match &cli.command {
        Command::Curate { data } => commands::curate::run(&ctx, data, out)?,
        Command::Patch { images, observations, masks } => {
            commands::patch::run(&ctx, images, observations, masks.as_deref(), out)?
        }
        Command::Train { features, observations } => commands::train::run(&ctx, features, observations, out)?,
        Command::Eval { features, observations, checkpoint } => {
            commands::eval::run(&ctx, features, observations, checkpoint.as_deref(), out)?
        }
        Command::Synth => commands::synth::run(&ctx, out)?,
    };
    log::info!("{} done; {} outputs in {}", m.command, m.outputs.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
