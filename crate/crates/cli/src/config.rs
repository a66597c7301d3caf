//! Run configuration: merged from a JSON file and flags, then resolved into
//! concrete solver inputs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use salma::simgen::SimSpec;
use salma::solver::StageReport;
use salma::PenaltyFamily;

use crate::ConfigError;

pub const DEFAULT_WINDOW: usize = 32;
pub const DEFAULT_FFT: usize = 256;
pub const DEFAULT_PERIODS: usize = 4;
pub const DEFAULT_K1: usize = 2;
pub const DEFAULT_N1: usize = 2;
pub const DEFAULT_EPS: f64 = 1e-8;

/// A number or `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Auto,
    Value(f64),
}

impl FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .map(Self::Value)
            .map_err(|_| format!("expected a number or 'auto', got '{s}'"))
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Setting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self::Value(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Simulation given inline or as a path to a spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimSource {
    Path(PathBuf),
    Inline(SimSpec),
}

/// Every field is optional so that a file and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub sim_spec: Option<SimSource>,
    pub fs: Option<f64>,
    #[serde(rename = "R")]
    pub window_len: Option<usize>,
    #[serde(rename = "L")]
    pub fft_len: Option<usize>,
    #[serde(rename = "M")]
    pub periods: Option<usize>,
    #[serde(rename = "K1")]
    pub k1: Option<usize>,
    #[serde(rename = "N1")]
    pub n1: Option<usize>,
    pub fault_freq: Option<f64>,
    pub period: Option<f64>,
    pub penalty: Option<PenaltyFamily>,
    pub a: Option<Setting>,
    pub eps: Option<f64>,
    pub lambda: Option<Setting>,
    pub sigma: Option<f64>,
    pub mu: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub continuation: Option<bool>,
    pub stages: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

macro_rules! layer {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        RunConfig { $($f: $hi.$f.or($lo.$f),)* }
    };
}

impl RunConfig {
    /// Fields set in `self` win over `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        layer!(
            self, base, input, sim_spec, fs, window_len, fft_len, periods, k1, n1, fault_freq,
            period, penalty, a, eps, lambda, sigma, mu, max_iters, tol, continuation, stages, out,
            seed
        )
    }

    /// Reads a config file, or the `config` section of a run manifest.
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let section = match value.get("config") {
            Some(inner) if value.get("result").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(section)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
    }

    pub fn window(&self) -> usize {
        self.window_len.unwrap_or(DEFAULT_WINDOW)
    }

    pub fn fft(&self) -> usize {
        self.fft_len.unwrap_or(DEFAULT_FFT)
    }

    pub fn m(&self) -> usize {
        self.periods.unwrap_or(DEFAULT_PERIODS)
    }

    /// Fault period in seconds from whichever of frequency and period is set.
    pub fn fault_period(&self) -> anyhow::Result<Option<f64>> {
        match (self.fault_freq, self.period) {
            (Some(_), Some(_)) => bail!(ConfigError(
                "give either a fault frequency or a period, not both".into()
            )),
            (Some(f), None) if f > 0.0 && f.is_finite() => Ok(Some(1.0 / f)),
            (Some(f), None) => bail!(ConfigError(format!("fault frequency must be positive, got {f}"))),
            (None, Some(t)) if t > 0.0 && t.is_finite() => Ok(Some(t)),
            (None, Some(t)) => bail!(ConfigError(format!("period must be positive, got {t}"))),
            (None, None) => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSummary {
    #[serde(rename = "K1")]
    pub k1: usize,
    #[serde(rename = "K2")]
    pub k2: usize,
    #[serde(rename = "N0")]
    pub n0: usize,
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "M")]
    pub periods: usize,
    pub ones: usize,
}

/// Values computed while resolving the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub fs: f64,
    pub signal_len: usize,
    pub hop: usize,
    pub n_bins: usize,
    pub n_frames: usize,
    pub period_s: f64,
    pub mask: MaskSummary,
    pub lambda_source: String,
    pub eta: Option<f64>,
    pub sigma_hat: Option<f64>,
    pub sigma_used: Option<f64>,
    pub a_max: f64,
    pub schedule: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub converged: bool,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_relative_residual: f64,
    pub stages: Vec<StageReport>,
    pub rmse_vs_clean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Fully resolved; feeding this back through `--config` repeats the run.
    pub config: RunConfig,
    pub derived: Derived,
    pub result: RunSummary,
}
