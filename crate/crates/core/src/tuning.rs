//! Regularization parameter selection.
//!
//! `λ = η σ_w`, with `η` looked up from a fixed table calibrated at unit
//! noise for `K₁ = N₁ = 2`, and `σ_w` either known or estimated robustly as
//! `MAD(y) / 0.6745`. Non-convex penalties are kept within `0 ≤ a ≤ 1/(λK)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mask::BinaryMask;

/// Gaussian consistency constant for the median absolute deviation.
pub const MAD_SCALE: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaEntry {
    pub window_len: usize,
    pub fft_len: usize,
    pub periods: usize,
    pub eta: f64,
}

const fn entry(window_len: usize, fft_len: usize, periods: usize, eta: f64) -> EtaEntry {
    EtaEntry {
        window_len,
        fft_len,
        periods,
        eta,
    }
}

/// `η` for `λ = η σ` at `K₁ = N₁ = 2`, keyed by `(R, L, M)`.
pub const ETA_TABLE: [EtaEntry; 8] = [
    entry(16, 64, 4, 0.120),
    entry(16, 64, 8, 0.060),
    entry(16, 128, 4, 0.085),
    entry(16, 128, 8, 0.060),
    entry(32, 128, 4, 0.120),
    entry(32, 128, 8, 0.065),
    entry(32, 256, 4, 0.090),
    entry(32, 256, 8, 0.060),
];

pub fn eta(window_len: usize, fft_len: usize, periods: usize) -> Result<f64> {
    if let Some(e) = ETA_TABLE
        .iter()
        .find(|e| e.window_len == window_len && e.fft_len == fft_len && e.periods == periods)
    {
        return Ok(e.eta);
    }
    let dist = |e: &EtaEntry| {
        let lg = |a: usize, b: usize| ((a.max(1) as f64).log2() - (b.max(1) as f64).log2()).abs();
        lg(e.window_len, window_len) + lg(e.fft_len, fft_len) + lg(e.periods, periods)
    };
    let nearest = ETA_TABLE
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .expect("table is non-empty");
    Err(Error::EtaTableMiss {
        window_len,
        fft_len,
        periods,
        nearest: format!(
            "R = {}, L = {}, M = {} (eta = {})",
            nearest.window_len, nearest.fft_len, nearest.periods, nearest.eta
        ),
    })
}

/// `λ = η(R, L, M) · σ`.
pub fn select_lambda(window_len: usize, fft_len: usize, periods: usize, sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise level must be non-negative, got {sigma}")));
    }
    Ok(eta(window_len, fft_len, periods)? * sigma)
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, hi, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Median absolute deviation about the median.
pub fn mad(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buf = y.to_vec();
    let med = median(&mut buf);
    for (b, v) in buf.iter_mut().zip(y) {
        *b = (v - med).abs();
    }
    Ok(median(&mut buf))
}

/// `σ̂_w = MAD(y) / 0.6745`.
pub fn estimate_noise(y: &[f64]) -> Result<f64> {
    Ok(mad(y)? / MAD_SCALE)
}

/// Upper end of the suggested range `0 ≤ a ≤ 1/(λK)`.
pub fn max_nonconvexity(lambda: f64, ones: usize) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    if ones == 0 {
        return Err(invalid("mask has no ones"));
    }
    Ok(1.0 / (lambda * ones as f64))
}

pub fn max_nonconvexity_for(lambda: f64, mask: &BinaryMask) -> Result<f64> {
    max_nonconvexity(lambda, mask.ones_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{build_mask, MaskParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn mad_hand_examples() {
        assert_eq!(estimate_noise(&[4.2; 17]).unwrap(), 0.0);
        let s = estimate_noise(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((s - 1.482_579_688_658_265_4).abs() < 1e-15);
        // even length: median 2.5, deviations 1.5 0.5 0.5 1.5 → 1.0
        assert_eq!(mad(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(estimate_noise(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn mad_recovers_gaussian_sigma() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = (0..4000).map(|_| 150.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let s = estimate_noise(&y).unwrap();
            assert!((s - 150.0).abs() < 15.0, "seed {seed}: {s}");
        }
    }

    #[test]
    fn lambda_lookups() {
        assert!((select_lambda(16, 64, 4, 150.0).unwrap() - 18.0).abs() < 1e-12);
        assert_eq!(select_lambda(32, 256, 8, 1.0).unwrap(), 0.060);
        assert_eq!(select_lambda(32, 256, 4, 0.0).unwrap(), 0.0);
        let err = select_lambda(32, 512, 4, 1.0).unwrap_err();
        assert!(err.to_string().contains("R = 32, L = 256, M = 4"), "{err}");
        assert!(select_lambda(16, 64, 4, -1.0).is_err());
    }

    #[test]
    fn nonconvexity_range() {
        let b = build_mask(&MaskParams::new(2, 2, 8, 4).unwrap()).unwrap();
        let a = max_nonconvexity_for(18.0, &b).unwrap();
        assert!((a - 1.0 / 288.0).abs() < 1e-18);
        assert_eq!(max_nonconvexity(1.0, 4).unwrap(), 0.25);
        assert_eq!(max_nonconvexity(1.0, 1).unwrap(), 1.0);
        assert!(max_nonconvexity(0.0, 4).is_err());
        assert!(max_nonconvexity(1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn lambda_is_linear_in_sigma(i in 0usize..8, s in 0.0f64..1e4, k in 0.0f64..10.0) {
            let e = ETA_TABLE[i];
            let l1 = select_lambda(e.window_len, e.fft_len, e.periods, s).unwrap();
            let l2 = select_lambda(e.window_len, e.fft_len, e.periods, k * s).unwrap();
            prop_assert!((l2 - k * l1).abs() <= 1e-12 * l2.abs().max(1.0));
        }
    }
}
