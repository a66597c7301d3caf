//! `salma`: simulate, extract, analyze and estimate noise for periodic
//! oscillatory transients.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 configuration error,
//! 3 solver did not converge (outputs are still written).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Setting, SimSource};
use salma::PenaltyFamily;

/// Marks an error as a configuration problem (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub enum Status {
    Done,
    NotConverged,
}

#[derive(Parser)]
#[command(name = "salma", version, about = "Periodic oscillatory transient extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic periodic-transient signal with noise.
    Simulate(SimulateArgs),
    /// Solve for sparse STFT coefficients and the extracted signal.
    Extract(ExtractArgs),
    /// Frequency indicator, temporal profile and envelope spectrum.
    Analyze(AnalyzeArgs),
    /// Robust noise level estimate and the suggested lambda.
    EstimateNoise(NoiseArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON simulation spec to start from.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub fs: Option<f64>,
    /// Seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Transient repetition period in seconds.
    #[arg(long, conflicts_with = "fault_freq")]
    pub period: Option<f64>,
    /// Transient repetition rate in Hz.
    #[arg(long)]
    pub fault_freq: Option<f64>,
    /// Transient length in seconds.
    #[arg(long)]
    pub transient_len: Option<f64>,
    /// Comma-separated tone frequencies in Hz.
    #[arg(long, value_delimiter = ',')]
    pub tones: Option<Vec<f64>>,
    #[arg(long)]
    pub amp_low: Option<f64>,
    #[arg(long)]
    pub amp_high: Option<f64>,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Maximum onset jitter in seconds.
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "SALMA_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// JSON run config or a previous run-manifest.json; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Signal file (.csv or .wav).
    #[arg(long, conflicts_with = "sim_spec")]
    pub input: Option<PathBuf>,
    /// Simulation spec JSON; the noisy signal is generated and used as input.
    #[arg(long)]
    pub sim_spec: Option<PathBuf>,
    /// Sample rate; overrides the file's.
    #[arg(long)]
    pub fs: Option<f64>,
    /// STFT window length.
    #[arg(long = "R")]
    pub window_len: Option<usize>,
    /// FFT length.
    #[arg(long = "L")]
    pub fft_len: Option<usize>,
    /// Periods spanned by the mask.
    #[arg(long = "M")]
    pub periods: Option<usize>,
    /// Mask rows (frequency bins per group).
    #[arg(long = "K1")]
    pub k1: Option<usize>,
    /// Active frames per period.
    #[arg(long = "N1")]
    pub n1: Option<usize>,
    /// Fault frequency in Hz.
    #[arg(long, conflicts_with = "period")]
    pub fault_freq: Option<f64>,
    /// Fault period in seconds.
    #[arg(long)]
    pub period: Option<f64>,
    /// abs, log, rat or atan.
    #[arg(long)]
    pub penalty: Option<PenaltyFamily>,
    /// Non-convexity, or `auto` for the largest admissible value.
    #[arg(long)]
    pub a: Option<Setting>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Regularization weight, or `auto` to use the eta table.
    #[arg(long)]
    pub lambda: Option<Setting>,
    /// Known noise level for `--lambda auto`; estimated when absent.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Continuation over `a` for non-convex penalties: on or off.
    #[arg(long, value_parser = parse_on_off)]
    pub continuation: Option<bool>,
    /// Number of continuation stages.
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long, env = "SALMA_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ExtractArgs {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            input: self.input.clone(),
            sim_spec: self.sim_spec.clone().map(SimSource::Path),
            fs: self.fs,
            window_len: self.window_len,
            fft_len: self.fft_len,
            periods: self.periods,
            k1: self.k1,
            n1: self.n1,
            fault_freq: self.fault_freq,
            period: self.period,
            penalty: self.penalty,
            a: self.a,
            eps: self.eps,
            lambda: self.lambda,
            sigma: self.sigma,
            mu: self.mu,
            max_iters: self.max_iters,
            tol: self.tol,
            continuation: self.continuation,
            stages: self.stages,
            out: self.out.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Directory written by `extract`; supplies defaults for every input.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Extracted signal CSV.
    #[arg(long)]
    pub xhat: Option<PathBuf>,
    /// Coefficient magnitude grid CSV.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[arg(long)]
    pub fs: Option<f64>,
    /// STFT window length used for the coefficients.
    #[arg(long = "R")]
    pub window_len: Option<usize>,
    #[arg(long, conflicts_with = "period")]
    pub fault_freq: Option<f64>,
    #[arg(long)]
    pub period: Option<f64>,
    /// Odd moving-average length in frames; defaults to one fault period.
    #[arg(long)]
    pub lpf_len: Option<usize>,
    /// Peaks reported per profile.
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long, env = "SALMA_OUT_DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct NoiseArgs {
    /// Signal file (.csv or .wav).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub fs: Option<f64>,
    #[arg(long = "R", default_value_t = config::DEFAULT_WINDOW)]
    pub window_len: usize,
    #[arg(long = "L", default_value_t = config::DEFAULT_FFT)]
    pub fft_len: usize,
    #[arg(long = "M", default_value_t = config::DEFAULT_PERIODS)]
    pub periods: usize,
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on or off, got '{s}'")),
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        if cause.is::<ConfigError>() {
            return true;
        }
        matches!(
            cause.downcast_ref::<salma::Error>(),
            Some(
                salma::Error::InvalidParameter(_)
                    | salma::Error::EtaTableMiss { .. }
                    | salma::Error::ShapeMismatch { .. }
                    | salma::Error::LengthMismatch { .. }
                    | salma::Error::EmptyInput
                    | salma::Error::Malformed(_)
            )
        )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Extract(args) => {
            let flags = args.to_config();
            match args.config.as_deref().map(RunConfig::load).transpose() {
                Ok(file) => commands::extract(flags.over(file.unwrap_or_default())),
                Err(e) => Err(e),
            }
        }
        Command::Analyze(args) => commands::analyze(&args),
        Command::EstimateNoise(args) => commands::estimate_noise(&args),
    };
    match outcome {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("warning: solver stopped at max_iters before meeting tol; results written");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
