//! Diagnostics on extracted coefficients and signals.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::RealGrid;
use crate::signal::TimeSignal;
use crate::stft::Spectrogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Hz,
    Seconds,
}

impl Axis {
    pub fn column_name(self) -> &'static str {
        match self {
            Axis::Hz => "freq_hz",
            Axis::Seconds => "time_s",
        }
    }
}

/// Non-negative values on a uniform axis starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub values: Vec<f64>,
    /// Axis units per index.
    pub step: f64,
    pub axis: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub location: f64,
    pub value: f64,
}

impl Profile {
    pub fn location(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The `k` largest strict local maxima with positive value, largest first.
    /// Index 0 is never reported when `skip_first` is set.
    pub fn peaks(&self, k: usize, skip_first: bool) -> Vec<Peak> {
        let v = &self.values;
        let n = v.len();
        let start = usize::from(skip_first);
        let mut found: Vec<Peak> = (start..n)
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { v[i - 1] };
                let right = if i + 1 == n { f64::NEG_INFINITY } else { v[i + 1] };
                v[i] > 0.0 && v[i] > left && v[i] >= right
            })
            .map(|i| Peak {
                index: i,
                location: self.location(i),
                value: v[i],
            })
            .collect();
        found.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
        found.truncate(k);
        found
    }
}

/// Per-bin sum of `|c|` over frames on the one-sided axis `0..=L/2`.
pub fn frequency_indicator(c: &Spectrogram) -> Profile {
    indicator_from_magnitude(&c.coeffs.abs(), c.bin_hz())
}

/// [`frequency_indicator`] for a precomputed `|c|` grid.
pub fn indicator_from_magnitude(mag: &RealGrid, bin_hz: f64) -> Profile {
    let half = (mag.rows() / 2 + 1).min(mag.rows());
    Profile {
        values: (0..half).map(|k| mag.row(k).iter().sum()).collect(),
        step: bin_hz,
        axis: Axis::Hz,
    }
}

/// Per-frame sum of `|c|` over all bins.
pub fn frame_sums(mag: &RealGrid) -> Vec<f64> {
    let mut out = vec![0.0; mag.cols()];
    for k in 0..mag.rows() {
        for (o, v) in out.iter_mut().zip(mag.row(k)) {
            *o += v;
        }
    }
    out
}

/// Centered moving average of odd length; samples beyond the ends count as
/// zero.
pub fn moving_average(x: &[f64], len: usize) -> Result<Vec<f64>> {
    if len == 0 || len % 2 == 0 {
        return Err(invalid(format!("filter length must be odd and positive, got {len}")));
    }
    let half = len / 2;
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / len as f64
        })
        .collect())
}

/// Low-pass filtered per-frame coefficient magnitude.
pub fn smoothed_profile(c: &Spectrogram, lpf_len: usize) -> Result<Profile> {
    profile_from_magnitude(&c.coeffs.abs(), c.frame_seconds(), lpf_len)
}

/// [`smoothed_profile`] for a precomputed `|c|` grid.
pub fn profile_from_magnitude(mag: &RealGrid, frame_seconds: f64, lpf_len: usize) -> Result<Profile> {
    Ok(Profile {
        values: moving_average(&frame_sums(mag), lpf_len)?,
        step: frame_seconds,
        axis: Axis::Seconds,
    })
}

/// Default smoothing length: one fault period in frames, made odd.
pub fn default_lpf_len(period_s: f64, fs: f64, hop: usize) -> usize {
    let frames = (period_s * fs / hop as f64).round().max(1.0) as usize;
    if frames % 2 == 0 {
        frames + 1
    } else {
        frames
    }
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            forward: p.plan_fft_forward(n),
            inverse: p.plan_fft_inverse(n),
        }
    }
}

/// Discrete analytic signal `x + i H{x}`.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let ffts = FftPair::new(n);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    ffts.forward.process(&mut buf);
    // Keep DC (and Nyquist for even n), double positive bins, drop negative.
    let positive_end = n.div_ceil(2);
    for z in buf.iter_mut().take(positive_end).skip(1) {
        *z *= 2.0;
    }
    let negative_start = n / 2 + 1;
    for z in buf.iter_mut().skip(negative_start) {
        *z = Complex64::default();
    }
    ffts.inverse.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|z| z * scale).collect()
}

/// `|analytic(x)|`.
pub fn envelope(x: &[f64]) -> Vec<f64> {
    analytic_signal(x).iter().map(|z| z.norm()).collect()
}

/// One-sided magnitude spectrum (scaled by `1/N`) of the mean-removed
/// Hilbert envelope.
pub fn envelope_spectrum(x: &TimeSignal) -> Result<Profile> {
    let n = x.len();
    if n == 0 {
        return Err(crate::error::Error::EmptyInput);
    }
    let env = envelope(&x.samples);
    let mean = env.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = env.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    FftPair::new(n).forward.process(&mut buf);
    let values = buf[..n / 2 + 1].iter().map(|z| z.norm() / n as f64).collect();
    Ok(Profile {
        values,
        step: x.fs / n as f64,
        axis: Axis::Hz,
    })
}
