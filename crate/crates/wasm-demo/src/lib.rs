//! Browser bindings: penalty and majorizer curves, mask layout, and a full
//! simulate-then-extract run. The `*_impl` functions hold the logic so it can
//! be tested natively.

use wasm_bindgen::prelude::*;

use salma::analysis::{envelope_spectrum, frequency_indicator};
use salma::mask::build_mask;
use salma::signal::rmse;
use salma::simgen::{generate, SimSpec};
use salma::solver::{continuation_schedule, solve};
use salma::tuning::max_nonconvexity_for;
use salma::{MaskParams, PenaltyFamily, PenaltySpec, SolverConfig, StftPlan};

/// `[u; φ_ε(u); g(u, v)]` over `n` points of `[-u_max, u_max]`, concatenated.
pub fn penalty_curves_impl(
    family: &str,
    a: f64,
    eps: f64,
    v: f64,
    u_max: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    if n < 2 {
        return Err("need at least two points".into());
    }
    let family: PenaltyFamily = family.parse().map_err(|e: salma::Error| e.to_string())?;
    let spec = PenaltySpec::new(family, a, eps).map_err(|e| e.to_string())?;
    let u: Vec<f64> = (0..n)
        .map(|i| -u_max + 2.0 * u_max * i as f64 / (n - 1) as f64)
        .collect();
    let mut out = u.clone();
    out.extend(u.iter().map(|&x| spec.phi_eps(x)));
    out.extend(u.iter().map(|&x| spec.majorizer(x, v)));
    Ok(out)
}

#[wasm_bindgen]
pub fn penalty_curves(family: &str, a: f64, eps: f64, v: f64, u_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    penalty_curves_impl(family, a, eps, v, u_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct MaskView {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
}

#[wasm_bindgen]
impl MaskView {
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[wasm_bindgen(getter)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major ones and zeros.
    pub fn cells(&self) -> Vec<u8> {
        self.cells.clone()
    }
}

pub fn mask_impl(k1: usize, n1: usize, n0: usize, periods: usize) -> Result<MaskView, String> {
    let mask = MaskParams::new(k1, n1, n0, periods)
        .and_then(|p| build_mask(&p))
        .map_err(|e| e.to_string())?;
    let (rows, cols) = (mask.k1(), mask.k2());
    let cells = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| u8::from(mask.get(r, c)))
        .collect();
    Ok(MaskView { rows, cols, cells })
}

#[wasm_bindgen]
pub fn mask_layout(k1: usize, n1: usize, n0: usize, periods: usize) -> Result<MaskView, JsError> {
    mask_impl(k1, n1, n0, periods).map_err(|e| JsError::new(&e))
}

/// Everything the page plots after one run.
#[wasm_bindgen]
pub struct Extraction {
    fs: f64,
    clean: Vec<f64>,
    noisy: Vec<f64>,
    xhat: Vec<f64>,
    bins: usize,
    frames: usize,
    magnitude: Vec<f64>,
    indicator: Vec<f64>,
    indicator_step: f64,
    envelope: Vec<f64>,
    envelope_step: f64,
    rmse_noisy: f64,
    rmse_xhat: f64,
    iterations: usize,
    converged: bool,
    lambda: f64,
}

#[wasm_bindgen]
impl Extraction {
    #[wasm_bindgen(getter)]
    pub fn fs(&self) -> f64 {
        self.fs
    }
    pub fn clean(&self) -> Vec<f64> {
        self.clean.clone()
    }
    pub fn noisy(&self) -> Vec<f64> {
        self.noisy.clone()
    }
    pub fn xhat(&self) -> Vec<f64> {
        self.xhat.clone()
    }
    /// One-sided `|c|`, bin-major, `bins × frames`.
    pub fn magnitude(&self) -> Vec<f64> {
        self.magnitude.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn bins(&self) -> usize {
        self.bins
    }
    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> usize {
        self.frames
    }
    pub fn indicator(&self) -> Vec<f64> {
        self.indicator.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn indicator_step(&self) -> f64 {
        self.indicator_step
    }
    pub fn envelope(&self) -> Vec<f64> {
        self.envelope.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn envelope_step(&self) -> f64 {
        self.envelope_step
    }
    #[wasm_bindgen(getter)]
    pub fn rmse_noisy(&self) -> f64 {
        self.rmse_noisy
    }
    #[wasm_bindgen(getter)]
    pub fn rmse_xhat(&self) -> f64 {
        self.rmse_xhat
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
    #[wasm_bindgen(getter)]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Simulates the default scenario with the given noise and seed, then
/// extracts with `R = 32`, `L = 256`, `M = 4`, `K1 = N1 = 2`. Non-convex
/// families run a six-stage continuation up to the largest admissible `a`.
pub fn extract_impl(
    seed: u64,
    sigma: f64,
    lambda: f64,
    family: &str,
    max_iters: usize,
) -> Result<Extraction, String> {
    let err = |e: salma::Error| e.to_string();
    let family: PenaltyFamily = family.parse().map_err(err)?;
    let sim = generate(&SimSpec::default().with_seed(seed).with_sigma(sigma)).map_err(err)?;
    let fs = sim.noisy.fs;
    let plan = StftPlan::new(32, 256, sim.noisy.len()).map_err(err)?;
    let mask = MaskParams::from_fault_period(0.01, fs, 32, 2, 2, 4)
        .and_then(|p| build_mask(&p))
        .map_err(err)?;
    let (spec, schedule) = if family == PenaltyFamily::Abs {
        (PenaltySpec::abs(), Vec::new())
    } else {
        let a = max_nonconvexity_for(lambda, &mask).map_err(err)?;
        (
            PenaltySpec::new(family, a, 1e-8).map_err(err)?,
            continuation_schedule(a, 6),
        )
    };
    let cfg = SolverConfig::new(lambda)
        .with_max_iters(max_iters)
        .with_continuation(schedule);
    let res = solve(&sim.noisy, &plan, &mask, &spec, &cfg, None).map_err(err)?;

    let (_, frames) = plan.shape();
    let bins = plan.fft_len() / 2 + 1;
    let mag = res.coeffs.coeffs.abs();
    let magnitude = (0..bins).flat_map(|k| mag.row(k).to_vec()).collect();
    let indicator = frequency_indicator(&res.coeffs);
    let envelope = envelope_spectrum(&res.xhat).map_err(err)?;
    Ok(Extraction {
        fs,
        rmse_noisy: rmse(&sim.noisy.samples, &sim.clean.samples),
        rmse_xhat: rmse(&res.xhat.samples, &sim.clean.samples),
        iterations: res.history.len(),
        converged: res.converged(),
        clean: sim.clean.samples,
        noisy: sim.noisy.samples,
        xhat: res.xhat.samples,
        bins,
        frames,
        magnitude,
        indicator_step: indicator.step,
        indicator: indicator.values,
        envelope_step: envelope.step,
        envelope: envelope.values,
        lambda,
    })
}

#[wasm_bindgen]
pub fn run_extraction(
    seed: u64,
    sigma: f64,
    lambda: f64,
    family: &str,
    max_iters: usize,
) -> Result<Extraction, JsError> {
    extract_impl(seed, sigma, lambda, family, max_iters).map_err(|e| JsError::new(&e))
}
