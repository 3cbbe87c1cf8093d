//! `ilac`: run planning experiments, the oracle suite, and inspect presets.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ilac_core::harness::{self, ExperimentFile, Format, RunOptions, Status};
use ilac_core::Error;

#[derive(Parser)]
#[command(name = "ilac", version, about = "Frame, beam and power planning for a UAV localization and communication link")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file or a built-in preset.
    Run {
        /// Experiment TOML file.
        config: Option<PathBuf>,
        /// Built-in preset instead of a file.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// csv, json or both.
        #[arg(long, default_value = "both")]
        format: String,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the oracle cross-checks.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Monte-Carlo trials per channel configuration.
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Smaller instance counts for a fast smoke run.
        #[arg(long)]
        quick: bool,
    },
    /// List or print the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn load(config: Option<&PathBuf>, preset: Option<&str>) -> Result<ExperimentFile, Error> {
    match (config, preset) {
        (Some(path), _) => ExperimentFile::load(path),
        (None, Some(name)) => harness::preset(name),
        (None, None) => Ok(ExperimentFile::default()),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

fn run(
    config: Option<PathBuf>,
    preset: Option<String>,
    out: PathBuf,
    seed: Option<u64>,
    format: &str,
    jobs: Option<usize>,
) -> Result<(), Error> {
    let format: Format = format.parse()?;
    let mut file = load(config.as_ref(), preset.as_deref())?;
    if let Some(s) = seed {
        file.seed = s;
    }
    let cfg = file.resolve()?;
    let output = harness::run_experiment(&cfg, &RunOptions { jobs })?;
    let paths = harness::write_outputs(&output, &out, format)?;

    for r in &output.rows {
        println!(
            "{:<24} {:<16} {:<10} se={:<8} ptr={:<8} iterations={}",
            r.scenario,
            r.method,
            r.status.as_str(),
            fmt_opt(r.average_se),
            fmt_opt(r.ptr),
            r.iterations.map(|i| i.to_string()).unwrap_or_else(|| "-".into()),
        );
    }
    if !output.td_rows.is_empty() {
        let feasible = output.td_rows.iter().filter(|r| r.status == Status::Ok).count();
        println!("{} data-length points ({} feasible)", output.td_rows.len(), feasible);
    }
    eprintln!("wrote {}", paths.results_csv.parent().unwrap_or(&out).display());
    Ok(())
}

fn validate(config: Option<PathBuf>, trials: Option<u64>, seed: Option<u64>, quick: bool) -> Result<bool, Error> {
    let mut file = load(config.as_ref(), None)?;
    if quick {
        let v = &mut file.validate;
        v.mc_trials = 20_000;
        v.geometries = 100;
        v.data_frames = 20;
        v.pilot_configs = 20;
        v.power_instances = 10;
        v.beam_geometries = 20;
        v.se_plans = 100;
    }
    if let Some(t) = trials {
        file.validate.mc_trials = t;
    }
    if let Some(s) = seed {
        file.validate.seed = s;
    }
    let cfg = file.resolve()?;
    let report = harness::validate_oracles(&cfg)?;
    for check in &report.checks {
        println!("{check}");
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            preset,
            out,
            seed,
            format,
            jobs,
        } => run(config, preset, out, seed, &format, jobs).map(|_| true),
        Command::Validate {
            config,
            trials,
            seed,
            quick,
        } => validate(config, trials, seed, quick),
        Command::Presets { action } => match action {
            PresetAction::List => {
                for (name, text) in harness::PRESETS {
                    let description = ExperimentFile::parse(text).map(|f| f.description).unwrap_or_default();
                    println!("{name:<6} {description}");
                }
                Ok(true)
            }
            PresetAction::Show { name } => match harness::preset_text(&name) {
                Some(text) => {
                    print!("{text}");
                    Ok(true)
                }
                None => Err(Error::Config(format!("unknown preset `{name}`"))),
            },
        },
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
