use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hypfield_cli::{run, Command, RunConfig, RunError, Sources};

/// Neural fields on the Poincaré disk.
#[derive(Debug, Parser)]
#[command(name = "hypfield", version)]
struct Cli {
    command: Command,
    /// Named figure preset, applied before --config and --set.
    #[arg(long)]
    preset: Option<String>,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn configure_threads(cfg: &RunConfig) -> Result<(), RunError> {
    let threads: usize = cfg.get("threads")?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| RunError::Setup(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = RunConfig::load(&Sources {
        preset: cli.preset.as_deref(),
        config: cli.config.as_deref(),
        overrides: &cli.set,
        threads_env: std::env::var("HYPFIELD_THREADS").ok(),
    })
    .map_err(RunError::from)
    .and_then(|cfg| {
        configure_threads(&cfg)?;
        run(cli.command, &cfg, &cli.out)
    });
    match result {
        Ok(outcome) => {
            for f in outcome.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
