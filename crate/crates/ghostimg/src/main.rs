use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ghostimg::runner::{self, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ghostimg",
    about = "Two-arm thermal-light ghost-imaging simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run description (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the ensemble seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte-Carlo frames
    #[arg(long)]
    frames: Option<u64>,
    /// Output directory (default: the config's output_dir, or ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. --set reference_arm.aperture=6mm
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run and write profiles, images, reports and the manifest
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker thread count; affects wall-clock only, never results
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config (schema, thin-lens equation, sampling bounds) without running
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            frames: self.frames,
            out: self.out.clone(),
            set: self.set.clone(),
        }
    }
}

fn main() -> ExitCode {
    match try_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common, threads } => {
            let execute = || -> anyhow::Result<()> {
                let manifest = runner::run(&common.config, &common.overrides())
                    .with_context(|| format!("run failed for {}", common.config.display()))?;
                println!("wrote {} files", manifest_file_count(&manifest) + 1);
                Ok(())
            };
            match threads {
                Some(n) => {
                    let pool = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build()
                        .context("building worker pool")?;
                    pool.install(execute)?;
                }
                None => execute()?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { common } => {
            let diags = runner::validate(&common.config, &common.overrides())
                .with_context(|| format!("cannot validate {}", common.config.display()))?;
            if diags.is_empty() {
                println!("ok");
            } else {
                for d in &diags {
                    println!("{d}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn manifest_file_count(manifest: &runner::RunManifest) -> usize {
    manifest.file_count()
}
