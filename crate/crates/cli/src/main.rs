use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};
use vcoh_cli::config::Scenario;
use vcoh_cli::run::write_sweep_file;
use vcoh_cli::{
    apply_env_overrides, preset_pc645, run_scenario, sweep, write_artifacts, PresetMode,
    ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "vcoh",
    version,
    about = "Partially coherent excitation of a three-level V system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file
    Run {
        config: PathBuf,
        /// Output directory, overriding output.dir
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a scenario over values of one numeric field
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a built-in parameter set as a config file
    Preset {
        #[arg(value_enum)]
        name: PresetName,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the field correlation and compare it with the analytic kernel
    KernelCheck {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetName {
    Pc645,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Cw,
    Pulse,
}

fn load(path: &Path, out: Option<PathBuf>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    apply_env_overrides(&mut cfg)?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config, out)?;
            let output = run_scenario(&cfg)?;
            for p in write_artifacts(&cfg, &output)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = load(&config, out)?;
            let rows = sweep(&cfg, &axis, &values)?;
            println!("{}", write_sweep_file(&cfg, &axis, &rows)?.display());
        }
        Command::Preset {
            name: PresetName::Pc645,
            mode,
            out,
        } => {
            let mode = match mode {
                ModeArg::Cw => PresetMode::Cw,
                ModeArg::Pulse => PresetMode::Pulse,
            };
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&out, preset_pc645(mode).to_toml())?;
            println!("{}", out.display());
        }
        Command::KernelCheck { config, out } => {
            let mut cfg = load(&config, out)?;
            cfg.scenario = Scenario::CorrelationCheck;
            let output = run_scenario(&cfg)?;
            for p in write_artifacts(&cfg, &output)? {
                println!("{}", p.display());
            }
            let d = &output.summary.details;
            println!(
                "max deviation {:.4e}, worst deviation/tolerance {:.3}",
                d["max_deviation"].as_f64().unwrap_or(f64::NAN),
                d["worst_ratio"].as_f64().unwrap_or(f64::NAN)
            );
            if d["passed"] != true {
                bail!("estimated kernel deviates from the analytic kernel beyond tolerance");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
