//! Parseval-normalized short-time Fourier analysis and synthesis.
//!
//! Frames use a sine window of length `R` at hop `R/2`, so the squared
//! windows overlap-add to one. Each frame is zero-padded to `L ≥ R` and
//! transformed with a unitary (`1/√L`) DFT. The signal is padded with `R/2`
//! zeros at the front and enough zeros at the back for the last frame, so
//! every sample is covered by exactly two frames and `A Aᴴ = I` holds.
//!
//! [`StftPlan::analyze`] is `Aᴴ` restricted to real signals and
//! [`StftPlan::synthesize`] is its real-inner-product adjoint, the real part
//! of the complex overlap-add synthesis.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::grid::ComplexGrid;
use crate::signal::TimeSignal;

#[derive(Clone)]
pub struct StftPlan {
    window_len: usize,
    fft_len: usize,
    signal_len: usize,
    n_frames: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftPlan")
            .field("window_len", &self.window_len)
            .field("hop", &self.hop())
            .field("fft_len", &self.fft_len)
            .field("signal_len", &self.signal_len)
            .field("n_frames", &self.n_frames)
            .finish()
    }
}

impl PartialEq for StftPlan {
    fn eq(&self, other: &Self) -> bool {
        self.window_len == other.window_len
            && self.fft_len == other.fft_len
            && self.signal_len == other.signal_len
    }
}

impl StftPlan {
    /// `window_len` is `R` (even, ≥ 2), `fft_len` is `L` (≥ `R`).
    pub fn new(window_len: usize, fft_len: usize, signal_len: usize) -> Result<Self> {
        if window_len < 2 || window_len % 2 != 0 {
            return Err(invalid(format!(
                "window length R = {window_len} must be even and at least 2"
            )));
        }
        if fft_len < window_len {
            return Err(invalid(format!(
                "FFT length L = {fft_len} is shorter than window length R = {window_len}"
            )));
        }
        if signal_len == 0 {
            return Err(Error::EmptyInput);
        }
        let hop = window_len / 2;
        let n_frames = signal_len.div_ceil(hop) + 1;
        let window = (0..window_len)
            .map(|n| (PI * (n as f64 + 0.5) / window_len as f64).sin())
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            window_len,
            fft_len,
            signal_len,
            n_frames,
            window,
            fft: planner.plan_fft_forward(fft_len),
            ifft: planner.plan_fft_inverse(fft_len),
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.window_len / 2
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    /// `M₁`, the number of frequency bins (two-sided, equal to `L`).
    pub fn n_bins(&self) -> usize {
        self.fft_len
    }

    /// `M₂`, the number of frames.
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.fft_len, self.n_frames)
    }

    /// Analysis/synthesis window; squared copies at hop `R/2` sum to one.
    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Time in padded coordinates of sample 0 of frame `m`, relative to the
    /// signal start (negative for the first frame).
    pub fn frame_offset(&self, frame: usize) -> isize {
        (frame * self.hop()) as isize - self.hop() as isize
    }

    /// `Aᴴ x`: coefficients indexed `(bin, frame)`.
    pub fn analyze(&self, x: &[f64]) -> Result<ComplexGrid> {
        if x.len() != self.signal_len {
            return Err(Error::LengthMismatch {
                expected: self.signal_len,
                actual: x.len(),
            });
        }
        let (bins, frames) = self.shape();
        let scale = 1.0 / (self.fft_len as f64).sqrt();
        let mut out = ComplexGrid::zeros(bins, frames);
        let mut buf = vec![Complex64::default(); self.fft_len];
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        for m in 0..frames {
            buf.fill(Complex64::default());
            let offset = self.frame_offset(m);
            for (j, w) in self.window.iter().enumerate() {
                let n = offset + j as isize;
                if n >= 0 && (n as usize) < self.signal_len {
                    buf[j] = Complex64::new(w * x[n as usize] * scale, 0.0);
                }
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let data = out.as_mut_slice();
            for (k, v) in buf.iter().enumerate() {
                data[k * frames + m] = *v;
            }
        }
        Ok(out)
    }

    /// Complex overlap-add synthesis `A c`, trimmed to the signal length.
    pub fn synthesize_complex(&self, c: &ComplexGrid) -> Result<Vec<Complex64>> {
        if c.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: c.shape(),
            });
        }
        let (bins, frames) = self.shape();
        let scale = 1.0 / (self.fft_len as f64).sqrt();
        let mut out = vec![Complex64::default(); self.signal_len];
        let mut buf = vec![Complex64::default(); self.fft_len];
        let mut scratch = vec![Complex64::default(); self.ifft.get_inplace_scratch_len()];
        let data = c.as_slice();
        for m in 0..frames {
            for (k, b) in buf.iter_mut().enumerate().take(bins) {
                *b = data[k * frames + m];
            }
            self.ifft.process_with_scratch(&mut buf, &mut scratch);
            let offset = self.frame_offset(m);
            for (j, w) in self.window.iter().enumerate() {
                let n = offset + j as isize;
                if n >= 0 && (n as usize) < self.signal_len {
                    out[n as usize] += buf[j] * (w * scale);
                }
            }
        }
        Ok(out)
    }

    /// `A c` as a real signal: the real part of the complex synthesis, which
    /// is the adjoint of [`analyze`](Self::analyze) under the real inner
    /// product.
    pub fn synthesize(&self, c: &ComplexGrid) -> Result<Vec<f64>> {
        Ok(self
            .synthesize_complex(c)?
            .into_iter()
            .map(|z| z.re)
            .collect())
    }
}

/// STFT coefficients with the plan that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub coeffs: ComplexGrid,
    pub plan: StftPlan,
    /// Sample rate of the analyzed signal in Hz.
    pub fs: f64,
}

impl Spectrogram {
    pub fn new(coeffs: ComplexGrid, plan: StftPlan, fs: f64) -> Result<Self> {
        if coeffs.shape() != plan.shape() {
            return Err(Error::ShapeMismatch {
                expected: plan.shape(),
                actual: coeffs.shape(),
            });
        }
        Ok(Self { coeffs, plan, fs })
    }

    pub fn zeros(plan: StftPlan, fs: f64) -> Self {
        let (bins, frames) = plan.shape();
        Self {
            coeffs: ComplexGrid::zeros(bins, frames),
            plan,
            fs,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coeffs.shape()
    }

    /// Hz per frequency bin.
    pub fn bin_hz(&self) -> f64 {
        self.fs / self.plan.fft_len() as f64
    }

    /// Seconds per frame.
    pub fn frame_seconds(&self) -> f64 {
        self.plan.hop() as f64 / self.fs
    }
}

/// Forward transform `Aᴴ x`.
pub fn forward(x: &TimeSignal, plan: &StftPlan) -> Result<Spectrogram> {
    let coeffs = plan.analyze(&x.samples)?;
    Ok(Spectrogram {
        coeffs,
        plan: plan.clone(),
        fs: x.fs,
    })
}

/// Inverse transform `A c`.
pub fn inverse(c: &Spectrogram) -> Result<TimeSignal> {
    Ok(TimeSignal::new(c.plan.synthesize(&c.coeffs)?, c.fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn random_grid(rows: usize, cols: usize, seed: u64) -> ComplexGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexGrid::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StftPlan::new(31, 256, 100).is_err());
        assert!(StftPlan::new(32, 16, 100).is_err());
        assert!(StftPlan::new(32, 256, 0).is_err());
        let plan = StftPlan::new(32, 256, 100).unwrap();
        assert!(matches!(
            plan.analyze(&[0.0; 99]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(plan.synthesize(&ComplexGrid::zeros(256, 3)).is_err());
    }

    #[test]
    fn squared_windows_overlap_to_one() {
        let plan = StftPlan::new(32, 256, 4000).unwrap();
        let w = plan.window();
        for j in 0..plan.hop() {
            let s = w[j] * w[j] + w[j + plan.hop()] * w[j + plan.hop()];
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zeros_map_to_zeros() {
        let plan = StftPlan::new(32, 256, 4000).unwrap();
        let c = plan.analyze(&vec![0.0; 4000]).unwrap();
        assert_eq!(c.max_abs(), 0.0);
        let x = plan.synthesize(&ComplexGrid::zeros(256, plan.n_frames())).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_is_preserved() {
        let x = gaussian(4000, 1);
        let plan = StftPlan::new(32, 256, 4000).unwrap();
        let c = plan.analyze(&x).unwrap();
        let ex: f64 = x.iter().map(|v| v * v).sum();
        assert!((c.norm_sqr() - ex).abs() / ex < 1e-10);
    }

    #[test]
    fn perfect_reconstruction() {
        for (r, l, n) in [(32, 256, 4000), (8, 16, 32), (16, 64, 1001), (2, 2, 7)] {
            let x = gaussian(n, n as u64);
            let plan = StftPlan::new(r, l, n).unwrap();
            let xr = plan.synthesize(&plan.analyze(&x).unwrap()).unwrap();
            let err = x.iter().zip(&xr).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err <= 1e-10, "R={r} L={l} N={n}: {err}");
        }
    }

    #[test]
    fn impulse_touches_only_covering_frames() {
        let mut x = vec![0.0; 4000];
        x[0] = 1.0;
        let plan = StftPlan::new(32, 256, 4000).unwrap();
        let c = plan.analyze(&x).unwrap();
        for m in 0..plan.n_frames() {
            let energy: f64 = (0..256).map(|k| c[(k, m)].norm_sqr()).sum();
            if m < 2 {
                assert!(energy > 0.0, "frame {m} should be nonzero");
            } else {
                assert_eq!(energy, 0.0, "frame {m} should be zero");
            }
        }
    }

    #[test]
    fn single_atom_is_windowed_sinusoid() {
        let (r, l, n) = (8usize, 16usize, 40usize);
        let plan = StftPlan::new(r, l, n).unwrap();
        let (k0, m0) = (3usize, 4usize);
        let amp = Complex64::new(0.7, -0.4);
        let mut c = ComplexGrid::zeros(l, plan.n_frames());
        c[(k0, m0)] = amp;
        let x = plan.synthesize(&c).unwrap();

        // Direct synthesis of the one atom.
        let start = m0 as isize * (r / 2) as isize - (r / 2) as isize;
        for (i, &v) in x.iter().enumerate() {
            let j = i as isize - start;
            let expected = if (0..r as isize).contains(&j) {
                let w = (PI * (j as f64 + 0.5) / r as f64).sin();
                let phase = 2.0 * PI * (k0 as f64) * (j as f64) / l as f64;
                (amp * Complex64::from_polar(1.0, phase)).re * w / (l as f64).sqrt()
            } else {
                0.0
            };
            assert!((v - expected).abs() < 1e-14, "sample {i}: {v} vs {expected}");
        }
    }

    #[test]
    fn analysis_and_synthesis_are_adjoint() {
        let n = 500;
        let plan = StftPlan::new(16, 64, n).unwrap();
        for seed in 0..5 {
            let x = gaussian(n, seed);
            let c = random_grid(64, plan.n_frames(), seed + 100);
            let lhs = plan.analyze(&x).unwrap().real_dot(&c);
            let rhs: f64 = x
                .iter()
                .zip(plan.synthesize(&c).unwrap())
                .map(|(a, b)| a * b)
                .sum();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
        }
    }

    #[test]
    fn real_input_gives_conjugate_symmetric_bins() {
        let x = gaussian(300, 9);
        let plan = StftPlan::new(16, 64, 300).unwrap();
        let c = plan.analyze(&x).unwrap();
        for m in 0..plan.n_frames() {
            for k in 1..64 {
                assert!((c[(k, m)] - c[(64 - k, m)].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn analysis_is_linear() {
        let n = 257;
        let plan = StftPlan::new(8, 32, n).unwrap();
        let x = gaussian(n, 3);
        let z = gaussian(n, 4);
        let (alpha, beta) = (1.7, -0.3);
        let mix: Vec<f64> = x.iter().zip(&z).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = plan.analyze(&mix).unwrap();
        let rhs = plan
            .analyze(&x)
            .unwrap()
            .scale(alpha)
            .add(&plan.analyze(&z).unwrap().scale(beta));
        assert!(lhs.sub(&rhs).max_abs() < 1e-12);
    }
}
