use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nfs_core::config::{config_hash, load_config, ExperimentConfig};
use nfs_core::experiments::{
    parse_values, preset, resolve, run_scenario_with, sweep, unperturbed_nodes, RunManifest,
    RunOptions, SweepParameter, SweepSpec, WORKERS_ENV,
};
use nfs_core::{NfsError, Result};

#[derive(Parser)]
#[command(name = "nfs", version, about = "Magnetically switched nuclear forward scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Scenario file (TOML).
    config: Option<PathBuf>,
    /// Built-in scenario used instead of a file.
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), None) => load_config(path),
            (None, Some(name)) => preset(name),
            (Some(_), Some(_)) => Err(NfsError::config("give a config file or --preset, not both")),
            (None, None) => Err(NfsError::config("a config file or --preset is required")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write field, spectrum, peaks and manifest.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the spectrum of the sign-rectified unperturbed field.
        #[arg(long)]
        rectified: bool,
        /// Rerun at half dt and twice the slabs and record the change.
        #[arg(long)]
        check_convergence: bool,
    },
    /// Sweep tau_d, delta or nswitch.
    #[command(after_help = format!("Worker count: {WORKERS_ENV} (default: all cores)."))]
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        param: String,
        /// Comma-separated list or start:stop:step.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the intensity nodes of the unperturbed output, one per line.
    Nodes {
        #[command(flatten)]
        source: Source,
    },
    /// Check a scenario and print its hash and derived switch times.
    Validate {
        #[command(flatten)]
        source: Source,
    },
}

fn report(manifest: &RunManifest, out: &Path) {
    println!("wrote {} files to {}", manifest.files.len(), out.display());
    for note in &manifest.diagnostics.notes {
        println!("note: {note}");
    }
    for (v, e) in &manifest.diagnostics.failures {
        eprintln!("point {v} failed: {e}");
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            source,
            out,
            rectified,
            check_convergence,
        } => {
            let cfg = source.load()?;
            let options = RunOptions {
                rectified,
                convergence: check_convergence,
            };
            let manifest = run_scenario_with(&cfg, &out, options)?;
            report(&manifest, &out);
        }
        Command::Sweep {
            source,
            param,
            values,
            out,
        } => {
            let spec = SweepSpec {
                parameter: param.parse::<SweepParameter>()?,
                values: parse_values(&values)?,
                base: source.load()?,
            };
            let manifest = sweep(&spec, &out)?;
            report(&manifest, &out);
        }
        Command::Nodes { source } => {
            let cfg = source.load()?;
            cfg.validate()?;
            for t in unperturbed_nodes(&cfg.scenario)? {
                println!("{t:.6}");
            }
        }
        Command::Validate { source } => {
            let cfg = source.load()?;
            cfg.validate()?;
            println!("ok {}", config_hash(&cfg.scenario));
            if cfg.switching.is_some() {
                let (scenario, _) = resolve(&cfg)?;
                for (i, t) in scenario.targets.iter().enumerate() {
                    println!("target{} switch_times = {:?}", i + 1, t.schedule.switch_times);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
