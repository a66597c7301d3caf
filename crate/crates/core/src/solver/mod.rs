//! Split augmented Lagrangian majorization-minimization solver.
//!
//! One iteration, with `v` the previous `u`:
//!
//! ```text
//! r = Σ_k B[k]² / ψ(‖B ⊙ S(v, m − k)‖₂)
//! u = (c + d) ./ (1 + λ r / μ)
//! c = (u − d) + Aᴴ[y − A(u − d)] / (μ + 1)
//! d = d − (u − c)
//! ```
//!
//! The `u` step minimizes the quadratic majorizer of the group penalty plus
//! the splitting term; the `c` step is the exact regularized least-squares
//! solution, which needs no linear solve because `A Aᴴ = I`.

pub mod real_form;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexGrid, RealGrid};
use crate::mask::BinaryMask;
use crate::penalty::PenaltySpec;
use crate::signal::TimeSignal;
use crate::stft::{Spectrogram, StftPlan};

pub const DEFAULT_MU: f64 = 1.0;
pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_CONTINUATION_STAGES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu: f64,
    /// Iteration cap per continuation stage.
    pub max_iters: usize,
    /// Threshold on both the relative primal residual and the relative
    /// objective change.
    pub tol: f64,
    /// Values of `a` for successive warm-started stages. Empty runs a single
    /// stage at the penalty's own `a`.
    pub continuation: Vec<f64>,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            mu: DEFAULT_MU,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            continuation: Vec::new(),
        }
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_continuation(mut self, schedule: Vec<f64>) -> Self {
        self.continuation = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        let s = &self.continuation;
        if s.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(invalid("continuation values must be finite and non-negative"));
        }
        if s.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("continuation schedule must be non-decreasing"));
        }
        if s.len() > 1 && s[0] != 0.0 {
            return Err(invalid("continuation schedule must start at a = 0"));
        }
        Ok(())
    }
}

/// `stages` evenly spaced values from 0 to `a_max` inclusive.
pub fn continuation_schedule(a_max: f64, stages: usize) -> Vec<f64> {
    match stages {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| a_max * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Global iteration count, starting at 1.
    pub iter: usize,
    pub stage: usize,
    pub a: f64,
    /// `P(c)` after the iteration.
    pub objective: f64,
    /// `‖u − c‖₂`.
    pub primal_residual: f64,
    /// `‖u − c‖₂ / ‖c‖₂`.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub a: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub final_relative_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub u: ComplexGrid,
    pub c: ComplexGrid,
    pub d: ComplexGrid,
    pub iter: usize,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct ExtractionResult {
    pub coeffs: Spectrogram,
    pub xhat: TimeSignal,
    pub history: Vec<IterationRecord>,
    pub stages: Vec<StageReport>,
    pub config: SolverConfig,
    pub penalty: PenaltySpec,
}

impl ExtractionResult {
    /// Every stage met the stopping rule before its iteration cap.
    pub fn converged(&self) -> bool {
        self.stages.iter().all(|s| s.converged)
    }

    pub fn final_relative_residual(&self) -> f64 {
        self.history.last().map_or(0.0, |r| r.relative_residual)
    }

    pub fn final_objective(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// `Σ_anchors φ_ε(group norm)` for a precomputed squared-norm field.
fn penalty_sum(energy: &crate::mask::GroupField, spec: &PenaltySpec) -> f64 {
    energy.iter().map(|e| spec.phi_eps(e.sqrt())).sum()
}

/// `P(c) = ½‖y − A c‖² + λ Σ φ_ε(‖B ⊙ S(c, m1, m2)‖₂)`.
pub fn objective(
    c: &Spectrogram,
    y: &TimeSignal,
    mask: &BinaryMask,
    spec: &PenaltySpec,
    lambda: f64,
) -> Result<f64> {
    let ac = c.plan.synthesize(&c.coeffs)?;
    if ac.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: ac.len(),
            actual: y.len(),
        });
    }
    let data: f64 = y.samples.iter().zip(&ac).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * data + lambda * penalty_sum(&mask.group_energy(&c.coeffs), spec))
}

/// `G₁(u, v) = λ Σ g(‖B ⊙ S(u)‖, ‖B ⊙ S(v)‖)`, the majorizer of the
/// regularizer at `v`.
pub fn surrogate_value(
    u: &ComplexGrid,
    v: &ComplexGrid,
    mask: &BinaryMask,
    spec: &PenaltySpec,
    lambda: f64,
) -> f64 {
    let eu = mask.group_energy(u);
    let ev = mask.group_energy(v);
    lambda
        * eu.iter()
            .zip(ev.iter())
            .map(|(a, b)| spec.majorizer(a.sqrt(), b.sqrt()))
            .sum::<f64>()
}

/// `[r(v)]_{m1,m2} = Σ_k B[k]² / ψ(‖B ⊙ S(v, m − k)‖₂)`.
pub fn r_field(v: &ComplexGrid, mask: &BinaryMask, spec: &PenaltySpec) -> RealGrid {
    let weights = mask.group_energy(v).map(|e| 1.0 / spec.psi(e.sqrt()));
    mask.accumulate(&weights, v.shape())
}

/// `u = (c + d) ./ (1 + λ r / μ)`.
pub fn u_update(c: &ComplexGrid, d: &ComplexGrid, r: &RealGrid, lambda: f64, mu: f64) -> ComplexGrid {
    assert_eq!(c.shape(), d.shape());
    assert_eq!(c.shape(), r.shape());
    let scale = lambda / mu;
    ComplexGrid::from_vec(
        c.rows(),
        c.cols(),
        c.as_slice()
            .iter()
            .zip(d.as_slice())
            .zip(r.as_slice())
            .map(|((c, d), r)| (c + d) / (1.0 + scale * r))
            .collect(),
    )
}

/// `c = (u − d) + Aᴴ[y − A(u − d)] / (μ + 1)`, the minimizer of
/// `½‖y − A c‖² + (μ/2)‖u − c − d‖²`.
pub fn c_update(
    u: &ComplexGrid,
    d: &ComplexGrid,
    y: &[f64],
    mu: f64,
    plan: &StftPlan,
) -> Result<ComplexGrid> {
    Ok(c_update_with_synthesis(u, d, y, mu, plan)?.0)
}

/// Also returns `A c`, which equals `A(u − d) + [y − A(u − d)]/(μ + 1)`
/// because `A Aᴴ = I`.
fn c_update_with_synthesis(
    u: &ComplexGrid,
    d: &ComplexGrid,
    y: &[f64],
    mu: f64,
    plan: &StftPlan,
) -> Result<(ComplexGrid, Vec<f64>)> {
    let w = u.sub(d);
    let aw = plan.synthesize(&w)?;
    let k = 1.0 / (mu + 1.0);
    let resid: Vec<f64> = y.iter().zip(&aw).map(|(y, a)| (y - a) * k).collect();
    let corr = plan.analyze(&resid)?;
    let c = w.add(&corr);
    let ac = aw.iter().zip(&resid).map(|(a, r)| a + r).collect();
    Ok((c, ac))
}

/// A configured problem instance; drives [`SolverState`] one iteration at a
/// time.
#[derive(Debug, Clone)]
pub struct Salma<'a> {
    y: &'a [f64],
    plan: &'a StftPlan,
    mask: &'a BinaryMask,
    lambda: f64,
    mu: f64,
}

impl<'a> Salma<'a> {
    pub fn new(
        y: &'a [f64],
        plan: &'a StftPlan,
        mask: &'a BinaryMask,
        lambda: f64,
        mu: f64,
    ) -> Result<Self> {
        if y.len() != plan.signal_len() {
            return Err(Error::LengthMismatch {
                expected: plan.signal_len(),
                actual: y.len(),
            });
        }
        if !(mu > 0.0) {
            return Err(invalid(format!("mu must be positive, got {mu}")));
        }
        if !(lambda >= 0.0) {
            return Err(invalid(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(Self {
            y,
            plan,
            mask,
            lambda,
            mu,
        })
    }

    /// `u = c = Aᴴ y`, `d = 0`.
    pub fn initial_state(&self) -> Result<SolverState> {
        let c = self.plan.analyze(self.y)?;
        Ok(self.state_from(c))
    }

    /// `u = c = init`, `d = 0`.
    pub fn state_from(&self, init: ComplexGrid) -> SolverState {
        let d = ComplexGrid::zeros(init.rows(), init.cols());
        SolverState {
            u: init.clone(),
            c: init,
            d,
            iter: 0,
            history: Vec::new(),
        }
    }

    pub fn objective_at(&self, c: &ComplexGrid, spec: &PenaltySpec) -> Result<f64> {
        let ac = self.plan.synthesize(c)?;
        Ok(self.objective_with_synthesis(c, &ac, spec))
    }

    fn objective_with_synthesis(&self, c: &ComplexGrid, ac: &[f64], spec: &PenaltySpec) -> f64 {
        let data: f64 = self.y.iter().zip(ac).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * data + self.lambda * penalty_sum(&self.mask.group_energy(c), spec)
    }

    /// One iteration in place; appends and returns its record.
    pub fn step(&self, state: &mut SolverState, spec: &PenaltySpec, stage: usize) -> Result<IterationRecord> {
        let r = r_field(&state.u, self.mask, spec);
        state.u = u_update(&state.c, &state.d, &r, self.lambda, self.mu);
        let (c, ac) = c_update_with_synthesis(&state.u, &state.d, self.y, self.mu, self.plan)?;
        state.c = c;
        let diff = state.u.sub(&state.c);
        state.d = state.d.sub(&diff);
        state.iter += 1;

        let primal = diff.norm();
        let cnorm = state.c.norm();
        let relative = if primal == 0.0 { 0.0 } else { primal / cnorm.max(f64::MIN_POSITIVE) };
        let rec = IterationRecord {
            iter: state.iter,
            stage,
            a: spec.a,
            objective: self.objective_with_synthesis(&state.c, &ac, spec),
            primal_residual: primal,
            relative_residual: relative,
        };
        state.history.push(rec);
        Ok(rec)
    }

    /// Iterates until the relative primal residual and the relative
    /// objective change are both at most `tol`, or `max_iters` is reached.
    pub fn run_stage(
        &self,
        state: &mut SolverState,
        spec: &PenaltySpec,
        stage: usize,
        max_iters: usize,
        tol: f64,
    ) -> Result<StageReport> {
        let mut prev_obj = f64::NAN;
        let mut converged = false;
        let mut last = None;
        let mut iterations = 0;
        for _ in 0..max_iters {
            let rec = self.step(state, spec, stage)?;
            iterations += 1;
            let change = (rec.objective - prev_obj).abs() / rec.objective.abs().max(f64::MIN_POSITIVE);
            let obj_settled = change <= tol || (rec.objective == prev_obj);
            prev_obj = rec.objective;
            last = Some(rec);
            if rec.relative_residual <= tol && obj_settled {
                converged = true;
                break;
            }
        }
        let rec = last.expect("max_iters >= 1");
        Ok(StageReport {
            stage,
            a: spec.a,
            iterations,
            converged,
            final_objective: rec.objective,
            final_relative_residual: rec.relative_residual,
        })
    }
}

/// Runs the full solve, including the non-convex continuation when
/// `cfg.continuation` lists more than one value of `a`.
pub fn solve(
    y: &TimeSignal,
    plan: &StftPlan,
    mask: &BinaryMask,
    spec: &PenaltySpec,
    cfg: &SolverConfig,
    init: Option<&Spectrogram>,
) -> Result<ExtractionResult> {
    cfg.validate()?;
    let salma = Salma::new(&y.samples, plan, mask, cfg.lambda, cfg.mu)?;
    let mut state = match init {
        Some(s) => {
            if s.shape() != plan.shape() {
                return Err(Error::ShapeMismatch {
                    expected: plan.shape(),
                    actual: s.shape(),
                });
            }
            salma.state_from(s.coeffs.clone())
        }
        None => salma.initial_state()?,
    };
    let schedule = if cfg.continuation.is_empty() {
        vec![spec.a]
    } else {
        cfg.continuation.clone()
    };
    let mut stages = Vec::with_capacity(schedule.len());
    let mut stage_spec = *spec;
    for (i, &a) in schedule.iter().enumerate() {
        stage_spec = spec.with_a(a)?;
        stages.push(salma.run_stage(&mut state, &stage_spec, i, cfg.max_iters, cfg.tol)?);
    }
    let xhat = TimeSignal::new(plan.synthesize(&state.c)?, y.fs);
    Ok(ExtractionResult {
        coeffs: Spectrogram::new(state.c, plan.clone(), y.fs)?,
        xhat,
        history: state.history,
        stages,
        config: cfg.clone(),
        penalty: stage_spec,
    })
}

/// Gradient of `½‖y − A c‖² + (μ/2)‖u − c − d‖²` at `c`.
pub fn c_subproblem_gradient(
    c: &ComplexGrid,
    u: &ComplexGrid,
    d: &ComplexGrid,
    y: &[f64],
    mu: f64,
    plan: &StftPlan,
) -> Result<ComplexGrid> {
    let ac = plan.synthesize(c)?;
    let resid: Vec<f64> = y.iter().zip(&ac).map(|(y, a)| y - a).collect();
    let data_grad = plan.analyze(&resid)?;
    let split = u.sub(c).sub(d);
    Ok(data_grad.zip_map(&split, |g, s| -*g - Complex64::new(mu, 0.0) * s))
}
