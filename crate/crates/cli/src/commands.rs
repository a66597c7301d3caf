use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use salma::analysis::{
    default_lpf_len, envelope_spectrum, indicator_from_magnitude, profile_from_magnitude, Peak,
};
use salma::io;
use salma::mask::build_mask;
use salma::signal::rmse;
use salma::simgen::{generate, SimSpec};
use salma::solver::{
    continuation_schedule, solve, IterationRecord, DEFAULT_CONTINUATION_STAGES, DEFAULT_MAX_ITERS,
    DEFAULT_MU, DEFAULT_TOL,
};
use salma::tuning::{self, eta, max_nonconvexity_for};
use salma::{MaskParams, PenaltyFamily, PenaltySpec, SolverConfig, StftPlan, TimeSignal};

use crate::config::{
    Derived, Manifest, MaskSummary, RunConfig, RunSummary, Setting, SimSource, DEFAULT_EPS,
    DEFAULT_K1, DEFAULT_N1,
};
use crate::{AnalyzeArgs, ConfigError, NoiseArgs, SimulateArgs, Status};

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn simulate(args: &SimulateArgs) -> Result<Status> {
    let mut spec: SimSpec = match &args.config {
        Some(p) => io::read_json(p).with_context(|| format!("reading {}", p.display()))?,
        None => SimSpec::default(),
    };
    if let Some(v) = args.fs {
        spec.fs = v;
    }
    if let Some(v) = args.duration {
        spec.duration = v;
    }
    if let Some(v) = args.period {
        spec.period = v;
    }
    if let Some(f) = args.fault_freq {
        if !(f > 0.0) {
            bail!(config_err(format!("fault frequency must be positive, got {f}")));
        }
        spec.period = 1.0 / f;
    }
    if let Some(v) = args.transient_len {
        spec.transient_len = v;
    }
    if let Some(v) = &args.tones {
        spec.tones = v.clone();
    }
    if let Some(v) = args.amp_low {
        spec.amp_range[0] = v;
    }
    if let Some(v) = args.amp_high {
        spec.amp_range[1] = v;
    }
    if let Some(v) = args.sigma {
        spec.noise_sigma = v;
    }
    if let Some(v) = args.jitter {
        spec.jitter = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    let out = generate(&spec)?;
    prepare_out(&args.out)?;
    io::write_signal_csv(&args.out.join("clean.csv"), &out.clean)?;
    io::write_signal_csv(&args.out.join("noisy.csv"), &out.noisy)?;
    io::write_wav(&args.out.join("clean.wav"), &out.clean)?;
    io::write_wav(&args.out.join("noisy.wav"), &out.noisy)?;
    io::write_json(&args.out.join("spec.json"), &spec)?;
    println!(
        "wrote {} samples at {} Hz ({} transients) to {}",
        out.noisy.len(),
        spec.fs,
        out.onsets.len(),
        args.out.display()
    );
    Ok(Status::Done)
}

struct Loaded {
    y: TimeSignal,
    clean: Option<TimeSignal>,
    input: Option<PathBuf>,
    sim: Option<SimSpec>,
}

fn load_input(cfg: &RunConfig) -> Result<Loaded> {
    match (&cfg.input, &cfg.sim_spec) {
        (Some(_), Some(_)) => Err(config_err("give exactly one of --input and --sim-spec, not both")),
        (None, None) => Err(config_err("give exactly one of --input and --sim-spec")),
        (Some(path), None) => {
            let y = io::read_signal(path, cfg.fs)
                .with_context(|| format!("reading input {}", path.display()))?;
            let input = path.canonicalize().unwrap_or_else(|_| path.clone());
            Ok(Loaded {
                y,
                clean: None,
                input: Some(input),
                sim: None,
            })
        }
        (None, Some(src)) => {
            let mut spec = match src {
                SimSource::Inline(s) => s.clone(),
                SimSource::Path(p) => {
                    io::read_json(p).with_context(|| format!("reading simulation spec {}", p.display()))?
                }
            };
            if let Some(seed) = cfg.seed {
                spec.seed = seed;
            }
            if let Some(fs) = cfg.fs {
                if fs != spec.fs {
                    bail!(config_err(format!(
                        "--fs {fs} disagrees with the simulation's sample rate {}",
                        spec.fs
                    )));
                }
            }
            let out = generate(&spec)?;
            Ok(Loaded {
                y: out.noisy,
                clean: Some(out.clean),
                input: None,
                sim: Some(spec),
            })
        }
    }
}

pub fn extract(cfg: RunConfig) -> Result<Status> {
    let loaded = load_input(&cfg)?;
    let y = &loaded.y;
    if y.is_empty() {
        bail!(config_err("input signal is empty"));
    }
    let fs = y.fs;
    let period = match (cfg.fault_period()?, &loaded.sim) {
        (Some(t), _) => t,
        (None, Some(sim)) => sim.period,
        (None, None) => bail!(config_err("the fault period is required: pass --fault-freq or --period")),
    };
    let (r, l, m) = (cfg.window(), cfg.fft(), cfg.m());
    let k1 = cfg.k1.unwrap_or(DEFAULT_K1);
    let n1 = cfg.n1.unwrap_or(DEFAULT_N1);

    let plan = StftPlan::new(r, l, y.len())?;
    let mask_params = MaskParams::from_fault_period(period, fs, r, k1, n1, m)?;
    let mask = build_mask(&mask_params)?;

    let mut sigma_hat = None;
    let mut eta_used = None;
    let (lambda, lambda_source, sigma_used) = match cfg.lambda.unwrap_or(Setting::Auto) {
        Setting::Value(v) => (v, "manual", cfg.sigma),
        Setting::Auto => {
            let e = eta(r, l, m)?;
            if k1 != 2 || n1 != 2 {
                eprintln!("warning: eta table assumes K1 = N1 = 2; using it for K1 = {k1}, N1 = {n1}");
            }
            let sigma = match cfg.sigma {
                Some(s) => s,
                None => {
                    let s = tuning::estimate_noise(&y.samples)?;
                    sigma_hat = Some(s);
                    s
                }
            };
            eta_used = Some(e);
            (e * sigma, "eta_table", Some(sigma))
        }
    };

    let family = cfg.penalty.unwrap_or(PenaltyFamily::Abs);
    let eps = cfg.eps.unwrap_or(DEFAULT_EPS);
    let a_max = if lambda > 0.0 {
        max_nonconvexity_for(lambda, &mask)?
    } else {
        f64::INFINITY
    };
    let a = match (family, cfg.a.unwrap_or(Setting::Auto)) {
        (PenaltyFamily::Abs, _) => 0.0,
        (_, Setting::Value(v)) => v,
        (_, Setting::Auto) if a_max.is_finite() => a_max,
        (_, Setting::Auto) => bail!(config_err("--a auto needs a positive lambda")),
    };
    if a > a_max {
        eprintln!("warning: a = {a} exceeds the convexity-preserving limit {a_max}");
    }
    let spec = PenaltySpec::new(family, a, eps)?;
    let continuation = cfg.continuation.unwrap_or(true);
    let stages = cfg.stages.unwrap_or(DEFAULT_CONTINUATION_STAGES);
    let schedule = if continuation && a > 0.0 {
        if stages < 2 {
            bail!(config_err(format!("continuation needs at least 2 stages, got {stages}")));
        }
        continuation_schedule(a, stages)
    } else {
        Vec::new()
    };

    let mu = cfg.mu.unwrap_or(DEFAULT_MU);
    let max_iters = cfg.max_iters.unwrap_or(DEFAULT_MAX_ITERS);
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let solver_cfg = SolverConfig::new(lambda)
        .with_mu(mu)
        .with_max_iters(max_iters)
        .with_tol(tol)
        .with_continuation(schedule.clone());
    let res = solve(y, &plan, &mask, &spec, &solver_cfg, None)?;

    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    prepare_out(&out)?;
    io::write_signal_csv(&out.join("xhat.csv"), &res.xhat)?;
    io::write_grid_csv(&out.join("coeffs.csv"), &res.coeffs.coeffs.abs())?;
    write_history(&out.join("history.csv"), &res.history)?;

    let resolved = RunConfig {
        input: loaded.input.clone(),
        sim_spec: loaded.sim.clone().map(SimSource::Inline),
        fs: Some(fs),
        window_len: Some(r),
        fft_len: Some(l),
        periods: Some(m),
        k1: Some(k1),
        n1: Some(n1),
        fault_freq: None,
        period: Some(period),
        penalty: Some(family),
        a: Some(Setting::Value(a)),
        eps: Some(eps),
        lambda: Some(Setting::Value(lambda)),
        sigma: cfg.sigma,
        mu: Some(mu),
        max_iters: Some(max_iters),
        tol: Some(tol),
        continuation: Some(continuation),
        stages: Some(stages),
        out: Some(out.clone()),
        seed: loaded.sim.as_ref().map(|s| s.seed),
    };
    let manifest = Manifest {
        tool: "salma".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: resolved,
        derived: Derived {
            fs,
            signal_len: y.len(),
            hop: plan.hop(),
            n_bins: plan.n_bins(),
            n_frames: plan.n_frames(),
            period_s: period,
            mask: MaskSummary {
                k1,
                k2: mask.k2(),
                n0: mask_params.n0,
                n1,
                periods: m,
                ones: mask.ones_count(),
            },
            lambda_source: lambda_source.into(),
            eta: eta_used,
            sigma_hat,
            sigma_used,
            a_max: if a_max.is_finite() { a_max } else { 0.0 },
            schedule: if schedule.is_empty() { vec![a] } else { schedule },
        },
        result: RunSummary {
            converged: res.converged(),
            iterations: res.history.len(),
            final_objective: res.final_objective(),
            final_relative_residual: res.final_relative_residual(),
            stages: res.stages.clone(),
            rmse_vs_clean: loaded.clean.as_ref().map(|c| rmse(&res.xhat.samples, &c.samples)),
        },
    };
    io::write_json(&out.join("run-manifest.json"), &manifest)?;
    println!(
        "lambda {lambda} ({lambda_source}), {} iterations, relative residual {:.3e}; wrote {}",
        manifest.result.iterations,
        manifest.result.final_relative_residual,
        out.display()
    );
    Ok(if res.converged() {
        Status::Done
    } else {
        Status::NotConverged
    })
}

fn write_history(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iteration,stage,a,objective,primal_residual,relative_residual")?;
    for h in history {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            h.iter, h.stage, h.a, h.objective, h.primal_residual, h.relative_residual
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PeakReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    indicator: Option<Vec<Peak>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    profile: Option<Vec<Peak>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    envelope: Option<Vec<Peak>>,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<Status> {
    let from_run = |name: &str| args.run.as_ref().map(|d| d.join(name));
    let manifest: Option<Manifest> = match from_run("run-manifest.json") {
        Some(p) if p.exists() => Some(io::read_json(&p).with_context(|| format!("reading {}", p.display()))?),
        _ => None,
    };
    let xhat_path = args.xhat.clone().or_else(|| from_run("xhat.csv"));
    let coeffs_path = args.coeffs.clone().or_else(|| from_run("coeffs.csv"));
    if xhat_path.is_none() && coeffs_path.is_none() {
        bail!(config_err("nothing to analyze: pass --run, --xhat or --coeffs"));
    }
    let out = args
        .out
        .clone()
        .or_else(|| args.run.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let xhat = xhat_path
        .as_ref()
        .map(|p| io::read_signal(p, args.fs).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let fs = args
        .fs
        .or(manifest.as_ref().map(|m| m.derived.fs))
        .or(xhat.as_ref().map(|x| x.fs));

    prepare_out(&out)?;
    let mut report = PeakReport {
        indicator: None,
        profile: None,
        envelope: None,
    };

    if let Some(path) = &coeffs_path {
        let mag = io::read_grid_csv(path).with_context(|| format!("reading {}", path.display()))?;
        let fs = fs.ok_or_else(|| config_err("the sample rate is unknown: pass --fs"))?;
        let r = args
            .window_len
            .or(manifest.as_ref().map(|m| m.derived.hop * 2))
            .ok_or_else(|| config_err("the window length is unknown: pass --R"))?;
        let given = RunConfig {
            fault_freq: args.fault_freq,
            period: args.period,
            ..RunConfig::default()
        };
        let period = match given.fault_period()? {
            Some(t) => Some(t),
            None => manifest.as_ref().map(|m| m.derived.period_s),
        };
        let hop = r / 2;
        let lpf = match (args.lpf_len, period) {
            (Some(n), _) => n,
            (None, Some(t)) => default_lpf_len(t, fs, hop),
            (None, None) => 1,
        };
        let indicator = indicator_from_magnitude(&mag, fs / mag.rows() as f64);
        let profile = profile_from_magnitude(&mag, hop as f64 / fs, lpf)?;
        io::write_profile_csv(&out.join("freq_indicator.csv"), &indicator)?;
        io::write_profile_csv(&out.join("profile.csv"), &profile)?;
        report.indicator = Some(indicator.peaks(args.top_k, true));
        report.profile = Some(profile.peaks(args.top_k, false));
    }
    if let Some(x) = &xhat {
        let spectrum = envelope_spectrum(x)?;
        io::write_profile_csv(&out.join("envelope_spectrum.csv"), &spectrum)?;
        report.envelope = Some(spectrum.peaks(args.top_k, true));
    }
    io::write_json(&out.join("peaks.json"), &report)?;
    for (name, peaks) in [
        ("indicator (Hz)", &report.indicator),
        ("profile (s)", &report.profile),
        ("envelope (Hz)", &report.envelope),
    ] {
        if let Some(peaks) = peaks {
            let locs: Vec<String> = peaks.iter().map(|p| format!("{}", p.location)).collect();
            println!("{name}: [{}]", locs.join(", "));
        }
    }
    Ok(Status::Done)
}

#[derive(Serialize)]
struct NoiseReport {
    sigma_hat: f64,
    #[serde(rename = "R")]
    window_len: usize,
    #[serde(rename = "L")]
    fft_len: usize,
    #[serde(rename = "M")]
    periods: usize,
    eta: Option<f64>,
    lambda: Option<f64>,
}

pub fn estimate_noise(args: &NoiseArgs) -> Result<Status> {
    let y = io::read_signal(&args.input, args.fs)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let sigma_hat = tuning::estimate_noise(&y.samples)?;
    let eta = match eta(args.window_len, args.fft_len, args.periods) {
        Ok(e) => Some(e),
        Err(e) => {
            eprintln!("note: {e}");
            None
        }
    };
    let report = NoiseReport {
        sigma_hat,
        window_len: args.window_len,
        fft_len: args.fft_len,
        periods: args.periods,
        eta,
        lambda: eta.map(|e| e * sigma_hat),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(Status::Done)
}
