//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fail.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use salma::analysis::{envelope_spectrum, frequency_indicator};
use salma::grid::{ComplexGrid, RealGrid};
use salma::mask::build_mask;
use salma::signal::rmse;
use salma::simgen::{generate, SimOutput, SimSpec};
use salma::solver::{c_update, continuation_schedule, r_field, real_form, solve, Salma};
use salma::stft::{forward, inverse};
use salma::tuning::{max_nonconvexity_for, select_lambda, ETA_TABLE};
use salma::{
    BinaryMask, ExtractionResult, MaskParams, PenaltyFamily, PenaltySpec, SolverConfig, StftPlan,
    TimeSignal,
};

const FS: f64 = 16000.0;
const LAMBDA: f64 = 18.0;
const CONVERGE_ITERS: usize = 3000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn example_plan() -> StftPlan {
    StftPlan::new(32, 256, 4000).unwrap()
}

fn example_mask() -> BinaryMask {
    build_mask(&MaskParams::from_fault_period(0.01, FS, 32, 2, 2, 4).unwrap()).unwrap()
}

fn example_instance(seed: u64) -> SimOutput {
    generate(&SimSpec::default().with_seed(seed)).unwrap()
}

fn convex(y: &TimeSignal, mu: f64, max_iters: usize) -> ExtractionResult {
    let cfg = SolverConfig::new(LAMBDA).with_mu(mu).with_max_iters(max_iters);
    solve(y, &example_plan(), &example_mask(), &PenaltySpec::abs(), &cfg, None).unwrap()
}

fn nonconvex(y: &TimeSignal, max_iters: usize) -> ExtractionResult {
    let mask = example_mask();
    let a_max = max_nonconvexity_for(LAMBDA, &mask).unwrap();
    let spec = PenaltySpec::new(PenaltyFamily::Atan, a_max, 1e-8).unwrap();
    let cfg = SolverConfig::new(LAMBDA)
        .with_max_iters(max_iters)
        .with_continuation(continuation_schedule(a_max, 6));
    solve(y, &example_plan(), &mask, &spec, &cfg, None).unwrap()
}

fn gaussian(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, sigma).unwrap();
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

fn random_grid(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexGrid {
    ComplexGrid::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn tight_frame() -> Outcome {
    let plan = example_plan();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = TimeSignal::new((0..4000).map(|_| rng.gen_range(-1.0..1.0)).collect(), FS);
        let back = inverse(&forward(&x, &plan).unwrap()).unwrap();
        for (a, b) in back.samples.iter().zip(&x.samples) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(5),
        format!("max error {worst:.2e}, {:.2} s", elapsed.as_secs_f64()),
    )
}

fn c_update_oracle() -> Outcome {
    let plan = StftPlan::new(8, 16, 32).unwrap();
    let (rows, cols) = plan.shape();
    let n = rows * cols;
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    // Dense real operator acting on [Re c; Im c].
    let mut a = DMatrix::<f64>::zeros(32, 2 * n);
    for j in 0..2 * n {
        let mut e = ComplexGrid::zeros(rows, cols);
        let unit = if j < n { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
        e.as_mut_slice()[j % n] = unit;
        for (i, v) in plan.synthesize(&e).unwrap().into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    let stack = |g: &ComplexGrid| {
        DVector::from_iterator(
            2 * n,
            g.as_slice().iter().map(|z| z.re).chain(g.as_slice().iter().map(|z| z.im)),
        )
    };

    let y: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u = random_grid(rows, cols, &mut rng);
    let d = random_grid(rows, cols, &mut rng);
    let mut worst = 0.0f64;
    for mu in [0.5, 1.0, 5.0] {
        let lhs = a.transpose() * &a + DMatrix::identity(2 * n, 2 * n) * mu;
        let rhs = a.transpose() * DVector::from_vec(y.clone()) + (stack(&u) - stack(&d)) * mu;
        let dense = lhs.lu().solve(&rhs).unwrap();
        let closed = stack(&c_update(&u, &d, &y, mu, &plan).unwrap());
        worst = worst.max((dense - closed).amax());
    }
    outcome(worst <= 1e-8, format!("max entry difference {worst:.2e}"))
}

fn r_field_oracle() -> Outcome {
    let mask = build_mask(&MaskParams::new(2, 2, 8, 4).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for family in PenaltyFamily::ALL {
        for _ in 0..5 {
            let v = random_grid(16, 20, &mut rng);
            let a = if family == PenaltyFamily::Abs { 0.0 } else { rng.gen_range(0.01..0.5) };
            let spec = PenaltySpec::new(family, a, 1e-8).unwrap();
            let fast = r_field(&v, &mask, &spec);
            let naive = naive_r_field(&v, &mask, &spec);
            for (f, s) in fast.as_slice().iter().zip(naive.as_slice()) {
                worst = worst.max((f - s).abs() / s.abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max relative difference {worst:.2e}"))
}

/// Coefficient `(i, j)` belongs to the group anchored at `(i − k1, j − k2)`
/// for every one `(k1, k2)` of the mask.
fn naive_r_field(v: &ComplexGrid, mask: &BinaryMask, spec: &PenaltySpec) -> RealGrid {
    let (rows, cols) = v.shape();
    let (k1s, k2s) = (mask.k1() as isize, mask.k2() as isize);
    let norm = |a1: isize, a2: isize| {
        let mut e = 0.0;
        for k1 in 0..k1s {
            for k2 in 0..k2s {
                if !mask.get(k1 as usize, k2 as usize) {
                    continue;
                }
                let (i, j) = (a1 + k1, a2 + k2);
                if i >= 0 && j >= 0 && (i as usize) < rows && (j as usize) < cols {
                    e += v[(i as usize, j as usize)].norm_sqr();
                }
            }
        }
        e.sqrt()
    };
    RealGrid::from_fn(rows, cols, |i, j| {
        let mut r = 0.0;
        for k1 in 0..k1s {
            for k2 in 0..k2s {
                if mask.get(k1 as usize, k2 as usize) {
                    r += 1.0 / spec.psi(norm(i as isize - k1, j as isize - k2));
                }
            }
        }
        r
    })
}

fn majorizer_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut gap = f64::INFINITY;
    let mut touch = 0.0f64;
    for _ in 0..10_000 {
        let family = PenaltyFamily::ALL[rng.gen_range(0..PenaltyFamily::ALL.len())];
        let a = if family == PenaltyFamily::Abs { 0.0 } else { rng.gen_range(0.0..2.0) };
        let eps = 10f64.powf(rng.gen_range(-10.0..-2.0));
        let spec = PenaltySpec::new(family, a, eps).unwrap();
        let u = rng.gen_range(-10.0..10.0);
        let v = rng.gen_range(-10.0..10.0);
        gap = gap.min(spec.majorizer(u, v) - spec.phi_eps(u));
        touch = touch.max((spec.majorizer(v, v) - spec.phi_eps(v)).abs());
    }
    outcome(
        gap >= -1e-12 && touch <= 1e-12,
        format!("min g(u,v) - phi(u) = {gap:.2e}, max |g(v,v) - phi(v)| = {touch:.2e}"),
    )
}

fn example_convex() -> Outcome {
    let sim = example_instance(0);
    let start = Instant::now();
    let res = convex(&sim.noisy, 1.0, 200);
    let elapsed = start.elapsed();

    let mut tones: Vec<f64> = frequency_indicator(&res.coeffs)
        .peaks(2, true)
        .iter()
        .map(|p| p.location)
        .collect();
    tones.sort_by(f64::total_cmp);
    let tones_ok = tones.len() == 2
        && (tones[0] - 1000.0).abs() <= 62.5
        && (tones[1] - 2000.0).abs() <= 62.5;

    let err = rmse(&res.xhat.samples, &sim.clean.samples);
    let noisy = rmse(&sim.noisy.samples, &sim.clean.samples);
    let rmse_ok = err <= 0.5 * noisy;

    let fundamental = envelope_spectrum(&res.xhat)
        .unwrap()
        .peaks(1, true)
        .first()
        .map_or(f64::NAN, |p| p.location);
    let envelope_ok = (fundamental - 100.0).abs() <= 8.0;

    outcome(
        tones_ok && rmse_ok && envelope_ok && elapsed < Duration::from_secs(60),
        format!(
            "tones {tones:?} Hz, rmse {err:.2} vs limit {:.2}, envelope peak {fundamental} Hz, {:.1} s",
            0.5 * noisy,
            elapsed.as_secs_f64()
        ),
    )
}

fn nonconvex_improves() -> Outcome {
    let (mut cvx, mut ncv) = (0.0, 0.0);
    for seed in 0..3 {
        let sim = example_instance(seed);
        cvx += rmse(&convex(&sim.noisy, 1.0, 200).xhat.samples, &sim.clean.samples) / 3.0;
        ncv += rmse(&nonconvex(&sim.noisy, 200).xhat.samples, &sim.clean.samples) / 3.0;
    }
    outcome(ncv <= cvx, format!("mean rmse atan {ncv:.2}, abs {cvx:.2}"))
}

fn mu_robustness() -> Outcome {
    let sim = example_instance(0);
    let finals: Vec<f64> = [0.2, 1.0, 5.0]
        .iter()
        .map(|&mu| convex(&sim.noisy, mu, CONVERGE_ITERS).final_objective())
        .collect();
    let hi = finals.iter().cloned().fold(f64::MIN, f64::max);
    let lo = finals.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / lo.abs();
    outcome(spread <= 1e-4, format!("relative spread {spread:.2e} over {finals:?}"))
}

fn noise_only_null() -> Outcome {
    let plan = example_plan();
    let mask = example_mask();
    let lambda = select_lambda(32, 256, 4, 1.0).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let y = TimeSignal::new(gaussian(4000, 1.0, 100 + seed), FS);
        let cfg = SolverConfig::new(lambda);
        let res = solve(&y, &plan, &mask, &PenaltySpec::abs(), &cfg, None).unwrap();
        worst = worst.max(res.xhat.max_abs());
    }
    outcome(worst <= 0.05, format!("lambda {lambda}, max |xhat| {worst:.2e}"))
}

fn eta_table() -> Outcome {
    let expected = [
        (16, 64, 4, 0.120),
        (16, 64, 8, 0.060),
        (16, 128, 4, 0.085),
        (16, 128, 8, 0.060),
        (32, 128, 4, 0.120),
        (32, 128, 8, 0.065),
        (32, 256, 4, 0.090),
        (32, 256, 8, 0.060),
    ];
    let rows_ok = ETA_TABLE.len() == expected.len()
        && expected
            .iter()
            .all(|&(r, l, m, eta)| select_lambda(r, l, m, 1.0).unwrap() == eta);
    let worked = select_lambda(16, 64, 4, 150.0).unwrap();
    outcome(rows_ok && worked == 18.0, format!("8 entries, worked value {worked}"))
}

fn real_form_equivalence() -> Outcome {
    let plan = StftPlan::new(8, 16, 64).unwrap();
    let mask = build_mask(&MaskParams::new(2, 1, 2, 2).unwrap()).unwrap();
    let y = gaussian(64, 1.0, 10);
    let mut worst = 0.0f64;
    for (family, a) in [(PenaltyFamily::Abs, 0.0), (PenaltyFamily::Atan, 0.2)] {
        let spec = PenaltySpec::new(family, a, 1e-8).unwrap();
        let salma = Salma::new(&y, &plan, &mask, 0.3, 1.0).unwrap();
        let mut complex = salma.initial_state().unwrap();
        let mut real = real_form::initial_state(&plan, &y).unwrap();
        for _ in 0..20 {
            salma.step(&mut complex, &spec, 0).unwrap();
            real_form::step(&mut real, &y, &plan, &mask, &spec, 0.3, 1.0).unwrap();
            for (x, z) in [(&real.u, &complex.u), (&real.c, &complex.c), (&real.d, &complex.d)] {
                for (p, q) in x.join().as_slice().iter().zip(z.as_slice()) {
                    worst = worst.max((p - q).norm());
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("max iterate difference {worst:.2e}"))
}

fn convergence_contract() -> Outcome {
    let sim = example_instance(0);
    let noise = TimeSignal::new(gaussian(4000, 1.0, 100), FS);
    let small_plan = StftPlan::new(8, 16, 64).unwrap();
    let small_mask = build_mask(&MaskParams::new(2, 1, 2, 2).unwrap()).unwrap();
    let small_y = TimeSignal::new(gaussian(64, 1.0, 11), FS);

    let runs: Vec<(&str, ExtractionResult)> = vec![
        ("example abs", convex(&sim.noisy, 1.0, CONVERGE_ITERS)),
        ("example atan", nonconvex(&sim.noisy, CONVERGE_ITERS)),
        (
            "noise only",
            solve(
                &noise,
                &example_plan(),
                &example_mask(),
                &PenaltySpec::abs(),
                &SolverConfig::new(0.09).with_max_iters(CONVERGE_ITERS),
                None,
            )
            .unwrap(),
        ),
        (
            "small",
            solve(
                &small_y,
                &small_plan,
                &small_mask,
                &PenaltySpec::abs(),
                &SolverConfig::new(0.3).with_max_iters(CONVERGE_ITERS),
                None,
            )
            .unwrap(),
        ),
    ];

    let mut pass = true;
    let mut notes = Vec::new();
    for (name, res) in &runs {
        let mut worst_change = 0.0f64;
        let mut worst_resid = 0.0f64;
        for stage in &res.stages {
            let hist: Vec<_> = res.history.iter().filter(|r| r.stage == stage.stage).collect();
            let last = hist[hist.len() - 1];
            let back = hist[hist.len().saturating_sub(11)];
            worst_change = worst_change.max((last.objective - back.objective).abs() / last.objective.abs());
            worst_resid = worst_resid.max(last.relative_residual);
            pass &= stage.converged && stage.iterations < CONVERGE_ITERS;
        }
        pass &= worst_resid < 1e-6 && worst_change <= 1e-8;
        notes.push(format!(
            "{name}: {} iters, residual {worst_resid:.1e}, change {worst_change:.1e}",
            res.history.len()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("tight frame reconstruction", tight_frame),
        ("c-update matches dense solve", c_update_oracle),
        ("r-field matches naive loops", r_field_oracle),
        ("majorizer dominance", majorizer_dominance),
        ("example convex reproduction", example_convex),
        ("non-convex improvement", nonconvex_improves),
        ("mu robustness", mu_robustness),
        ("noise-only null", noise_only_null),
        ("lambda table lookups", eta_table),
        ("real-form equivalence", real_form_equivalence),
        ("convergence contract", convergence_contract),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {:>2} {name}: {}", i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
