use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use indi_core::harness::{
    emit_report, run_as, run_experiment, run_training, ExperimentConfig, ExperimentKind, Format,
    RunReport,
};
use indi_core::IndiError;

#[derive(Parser)]
#[command(
    name = "indi",
    version,
    about = "Iterative restoration experiments on toy worlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run(Common),
    /// Compare the indi, naive and cold-diffusion samplers over the step grid.
    SweepSamplers(Common),
    /// Train one regressor per training-time distribution and evaluate each.
    SweepPt(Common),
    /// Evaluate over the configured step counts.
    SweepSteps(Common),
    /// Evaluate once per noise schedule listed in `sampler.schedules`.
    SweepNoise(Common),
    /// Train a regressor and write `model.ckpt` plus its loss curve.
    Train(Common),
    /// Print the built-in config for an experiment kind.
    Preset { kind: String },
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `output_dir` from the config, else `indi-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats.
    #[arg(long, value_delimiter = ',', default_value = "csv,json")]
    format: Vec<Format>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), IndiError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("indi-out"));
        Ok((cfg, out))
    }
}

fn finish(report: &RunReport, out: &Path, formats: &[Format]) -> Result<(), IndiError> {
    for path in emit_report(report, out, formats)? {
        println!("wrote {}", path.display());
    }
    for name in &report.checkpoints {
        println!("wrote {}", out.join(name).display());
    }
    let diverged = report.rows.iter().filter(|r| r.is_divergent()).count();
    println!(
        "{} rows ({} with divergent runs), {} estimator calls, {:.2}s",
        report.rows.len(),
        diverged,
        report.estimator_calls,
        report.wall_clock_seconds
    );
    Ok(())
}

fn sweep(kind: ExperimentKind, args: &Common) -> Result<(), IndiError> {
    let (cfg, out) = args.load()?;
    let report = run_as(kind, &cfg, args.jobs, Some(&out))?;
    finish(&report, &out, &args.format)
}

fn run(cli: Cli) -> Result<(), IndiError> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, out) = args.load()?;
            let report = run_experiment(&cfg, args.jobs, Some(&out))?;
            finish(&report, &out, &args.format)
        }
        Command::SweepSamplers(args) => sweep(ExperimentKind::SamplerCompare, &args),
        Command::SweepPt(args) => sweep(ExperimentKind::SweepPt, &args),
        Command::SweepSteps(args) => sweep(ExperimentKind::SweepSteps, &args),
        Command::SweepNoise(args) => sweep(ExperimentKind::SweepNoise, &args),
        Command::Train(args) => {
            let (cfg, out) = args.load()?;
            let (_, report) = run_training(&cfg, Some(&out))?;
            finish(&report, &out, &args.format)
        }
        Command::Preset { kind } => {
            let kind = ExperimentKind::ALL
                .into_iter()
                .find(|k| k.as_str() == kind)
                .ok_or_else(|| IndiError::Config {
                    path: "kind".into(),
                    message: format!("unknown experiment kind `{kind}`"),
                })?;
            print!("{}", ExperimentConfig::preset(kind).to_toml_string());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                IndiError::Config { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
