use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use telekin_cli::config::{config_err, ConfigError, RunConfig};
use telekin_cli::output::{write_artifacts, RunArtifacts};
use telekin_cli::{accuracy, latency, teleop};

/// Hand-to-robot teleoperation bridge: tracking characterization
/// experiments and a live teleop loop.
#[derive(Parser)]
#[command(name = "telekin", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure onset and steady-state tracking latency by phase difference
    Latency(SharedArgs),
    /// Measure static position accuracy over tracked points
    Accuracy(SharedArgs),
    /// Run the teleoperation loop (scripted in sim, live over UDP)
    Teleop(SharedArgs),
}

#[derive(Args)]
struct SharedArgs {
    /// Key-value config file (flags override file values)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed for every stochastic component
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for traces, report, and summary
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trial count (latency) or point count (accuracy)
    #[arg(long)]
    trials: Option<u32>,
    /// Transport: sim or udp
    #[arg(long)]
    mode: Option<String>,
    /// Workspace scale factor applied about the scale origin
    #[arg(long)]
    scale: Option<f64>,
    /// Predictor extrapolation horizon in milliseconds
    #[arg(long = "predict-horizon-ms")]
    predict_horizon_ms: Option<f64>,
    /// Predictor mode: off, constant-velocity, alpha-beta
    #[arg(long = "predict-mode")]
    predict_mode: Option<String>,
    /// Mean steady-state channel delay in milliseconds
    #[arg(long = "steady-delay-ms")]
    steady_delay_ms: Option<f64>,
    /// Excitation frequency in hertz
    #[arg(long = "freq-hz")]
    freq_hz: Option<f64>,
    /// Excitation amplitude (radians for latency, meters for teleop)
    #[arg(long)]
    amp: Option<f64>,
    /// Trial duration in seconds
    #[arg(long = "duration-s")]
    duration_s: Option<f64>,
}

impl SharedArgs {
    fn build_config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let mut set = |key: &str, value: Option<String>| -> anyhow::Result<()> {
            if let Some(v) = value {
                cfg.apply_kv(key, &v)
                    .map_err(|msg| config_err(format!("--{}: {msg}", key.replace('_', "-"))))?;
            }
            Ok(())
        };
        set("seed", self.seed.map(|v| v.to_string()))?;
        set(
            "output_dir",
            self.out.as_ref().map(|p| p.display().to_string()),
        )?;
        set("trials", self.trials.map(|v| v.to_string()))?;
        set("mode", self.mode.clone())?;
        set("scale", self.scale.map(|v| v.to_string()))?;
        set(
            "predict_horizon_ms",
            self.predict_horizon_ms.map(|v| v.to_string()),
        )?;
        set("predict_mode", self.predict_mode.clone())?;
        set(
            "steady_delay_ms",
            self.steady_delay_ms.map(|v| v.to_string()),
        )?;
        set("freq_hz", self.freq_hz.map(|v| v.to_string()))?;
        set("amp", self.amp.map(|v| v.to_string()))?;
        set("duration_s", self.duration_s.map(|v| v.to_string()))?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (cfg, artifacts): (RunConfig, RunArtifacts) = match &cli.command {
        Command::Latency(args) => {
            let cfg = args.build_config()?;
            let outcome = latency::run(&cfg)?;
            (cfg, outcome.artifacts)
        }
        Command::Accuracy(args) => {
            let cfg = args.build_config()?;
            let outcome = accuracy::run(&cfg)?;
            (cfg, outcome.artifacts)
        }
        Command::Teleop(args) => {
            let cfg = args.build_config()?;
            let artifacts = teleop::run(&cfg)?;
            (cfg, artifacts)
        }
    };
    write_artifacts(&cfg.output_dir, &artifacts)?;
    print!("{}", artifacts.summary);
    println!("artifacts written to {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
