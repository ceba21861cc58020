use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tdhf_scenario::{describe, preset, run_scenario, RunConfig, RunMetadata, ScenarioError, Size, PRESETS};

#[derive(Parser)]
#[command(name = "tdhf", version, about = "Two-electron TDHF scenarios with plasmonic near fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Source {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum, default_value = "desk")]
    size: Size,
    /// `dotted.key=value`, applied in order.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Source {
    fn load(&self) -> Result<RunConfig, ScenarioError> {
        let base = match (&self.config, &self.preset) {
            (Some(p), _) => RunConfig::load(p)?,
            (None, Some(name)) => preset(name, self.size)
                .ok_or_else(|| ScenarioError::Config(format!("unknown preset `{name}` (try `tdhf presets`)")))?,
            (None, None) => return Err(ScenarioError::Config("give --config or --preset".into())),
        };
        base.with_overrides(&self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its container.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory; defaults to the config's `output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarize a run container.
    Describe {
        /// Container directory or its manifest.json.
        manifest: PathBuf,
    },
    /// Check a configuration without running it.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// List built-in scenarios, or print one as JSON.
    Presets {
        name: Option<String>,
        #[arg(long, value_enum, default_value = "desk")]
        size: Size,
    },
}

fn execute(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::Run { source, output } => {
            let cfg = source.load()?;
            let out = output
                .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
                .ok_or_else(|| ScenarioError::Config("no output directory (use --output)".into()))?;
            let manifest = run_scenario(&cfg, &out)?;
            let meta = RunMetadata::from_manifest(&manifest)?;
            println!("wrote {} ({} datasets, {} snapshots)", out.display(), manifest.datasets.len(), meta.snapshots.len());
        }
        Command::Describe { manifest } => print!("{}", describe(manifest)?.text),
        Command::Validate { source } => {
            let cfg = source.load()?;
            let s = cfg.resolve()?;
            println!(
                "ok: {} electrons, grid {} x {}, dt {:.4e} au (bound {:.4e} au)",
                s.orbitals.len(),
                s.grid.nx,
                s.grid.ny,
                s.engine.dt,
                s.stability_bound()
            );
        }
        Command::Presets { name, size } => match name {
            None => {
                for p in PRESETS {
                    println!("{p}");
                }
            }
            Some(n) => {
                let cfg = preset(&n, size).ok_or_else(|| ScenarioError::Config(format!("unknown preset `{n}`")))?;
                println!("{}", cfg.to_json());
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tdhf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
