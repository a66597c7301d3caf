//! Periodic binary weight block `B` and weighted group norms.
//!
//! `B = b₁ᵀ b₂` has `K₁` identical rows; each row is `M` runs of `N₁` ones
//! separated by `M − 1` runs of `N₀` zeros, so one row spans
//! `K₂ = (N₀ + N₁)(M − 1) + N₁` frames and one fault period covers
//! `N₀ + N₁ ≈ 2 T f_s / R` frames.
//!
//! Group anchors `(m1, m2)` range over every position where the block
//! overlaps the coefficient grid at all. Coefficients outside the grid count
//! as zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{ComplexGrid, Grid, RealGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskParams {
    /// `K₁`, frequency span in bins.
    pub k1: usize,
    /// `N₁`, ones-run length in frames.
    pub n1: usize,
    /// `N₀`, zeros-run length in frames.
    pub n0: usize,
    /// `M`, number of periods spanned.
    pub periods: usize,
}

/// Frames per fault period, `round(2 T f_s / R)` with halves rounded up.
pub fn period_frames(period_s: f64, fs: f64, window_len: usize) -> Result<usize> {
    if !(period_s > 0.0 && fs > 0.0) || window_len == 0 {
        return Err(invalid(format!(
            "fault period {period_s} s, sample rate {fs} Hz and window length {window_len} must be positive"
        )));
    }
    let frames = (2.0 * period_s * fs / window_len as f64 + 0.5).floor();
    Ok(frames as usize)
}

impl MaskParams {
    pub fn new(k1: usize, n1: usize, n0: usize, periods: usize) -> Result<Self> {
        let p = Self { k1, n1, n0, periods };
        p.validate()?;
        Ok(p)
    }

    /// Derives `N₀` from the fault period so that `N₀ + N₁ = round(2 T f_s / R)`.
    pub fn from_fault_period(
        period_s: f64,
        fs: f64,
        window_len: usize,
        k1: usize,
        n1: usize,
        periods: usize,
    ) -> Result<Self> {
        let frames = period_frames(period_s, fs, window_len)?;
        if frames < n1 {
            return Err(invalid(format!(
                "one fault period spans {frames} frames, fewer than N1 = {n1}; \
                 shorten the window or lengthen the period"
            )));
        }
        Self::new(k1, n1, frames - n1, periods)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1 == 0 || self.n1 == 0 || self.periods == 0 {
            return Err(invalid(format!(
                "mask dimensions K1 = {}, N1 = {}, M = {} must be at least 1",
                self.k1, self.n1, self.periods
            )));
        }
        Ok(())
    }

    /// `K₂ = (N₀ + N₁)(M − 1) + N₁`.
    pub fn k2(&self) -> usize {
        (self.n0 + self.n1) * (self.periods - 1) + self.n1
    }

    /// The row pattern `b₂`.
    pub fn row_pattern(&self) -> Vec<bool> {
        let mut row = Vec::with_capacity(self.k2());
        for p in 0..self.periods {
            if p > 0 {
                row.extend(std::iter::repeat(false).take(self.n0));
            }
            row.extend(std::iter::repeat(true).take(self.n1));
        }
        row
    }
}

/// Binary `K₁ × K₂` block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    grid: Grid<bool>,
    ones: Vec<(usize, usize)>,
}

impl BinaryMask {
    /// Any non-empty binary grid.
    pub fn from_grid(grid: Grid<bool>) -> Result<Self> {
        if grid.rows() == 0 || grid.cols() == 0 {
            return Err(invalid("mask must have at least one row and column"));
        }
        let ones: Vec<_> = (0..grid.rows())
            .flat_map(|r| (0..grid.cols()).map(move |c| (r, c)))
            .filter(|&rc| grid[rc])
            .collect();
        Ok(Self { grid, ones })
    }

    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("mask rows differ in length"));
        }
        Self::from_grid(Grid::from_fn(rows.len(), cols, |r, c| rows[r][c] != 0))
    }

    pub fn k1(&self) -> usize {
        self.grid.rows()
    }

    pub fn k2(&self) -> usize {
        self.grid.cols()
    }

    /// `K`, the number of ones.
    pub fn ones_count(&self) -> usize {
        self.ones.len()
    }

    pub fn ones(&self) -> &[(usize, usize)] {
        &self.ones
    }

    pub fn grid(&self) -> &Grid<bool> {
        &self.grid
    }

    pub fn get(&self, k1: usize, k2: usize) -> bool {
        self.grid[(k1, k2)]
    }

    /// Shape of the anchor field for a coefficient grid of `shape`.
    pub fn anchor_shape(&self, shape: (usize, usize)) -> (usize, usize) {
        (shape.0 + self.k1() - 1, shape.1 + self.k2() - 1)
    }

    /// Number of group anchors for a coefficient grid of `shape`.
    pub fn anchor_count(&self, shape: (usize, usize)) -> usize {
        let (a, b) = self.anchor_shape(shape);
        a * b
    }

    /// Squared group norms at every anchor; see [`GroupField`].
    pub fn group_energy(&self, c: &ComplexGrid) -> GroupField {
        self.correlate(&c.map(|z| z.norm_sqr()))
    }

    /// Squared group norms of a real grid.
    pub fn group_energy_real(&self, c: &RealGrid) -> GroupField {
        self.correlate(&c.map(|v| v * v))
    }

    /// `out[a] = Σ_{k ∈ ones} power[a + k]` over the full anchor range.
    fn correlate(&self, power: &RealGrid) -> GroupField {
        let (rows, cols) = power.shape();
        let (ar, ac) = self.anchor_shape((rows, cols));
        let (k1max, k2max) = (self.k1() - 1, self.k2() - 1);
        let mut field = RealGrid::zeros(ar, ac);
        let out = field.as_mut_slice();
        for &(k1, k2) in &self.ones {
            for i in 0..rows {
                let src = power.row(i);
                let base = (i + k1max - k1) * ac + (k2max - k2);
                for (o, p) in out[base..base + cols].iter_mut().zip(src) {
                    *o += p;
                }
            }
        }
        GroupField {
            values: field,
            row_offset: k1max,
            col_offset: k2max,
        }
    }

    /// `r[m] = Σ_{k ∈ ones} w[m − k]` for an anchor-indexed weight field,
    /// evaluated on the `shape` coefficient grid.
    pub fn accumulate(&self, weights: &GroupField, shape: (usize, usize)) -> RealGrid {
        let (rows, cols) = shape;
        assert_eq!(weights.values.shape(), self.anchor_shape(shape));
        let ac = weights.values.cols();
        let (k1max, k2max) = (self.k1() - 1, self.k2() - 1);
        let mut out = RealGrid::zeros(rows, cols);
        let w = weights.values.as_slice();
        for &(k1, k2) in &self.ones {
            for i in 0..rows {
                let base = (i + k1max - k1) * ac + (k2max - k2);
                let dst = &mut out.as_mut_slice()[i * cols..(i + 1) * cols];
                for (o, v) in dst.iter_mut().zip(&w[base..base + cols]) {
                    *o += v;
                }
            }
        }
        out
    }
}

/// Values over the anchor range `m1 ∈ [−(K₁−1), M₁)`, `m2 ∈ [−(K₂−1), M₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupField {
    pub values: RealGrid,
    row_offset: usize,
    col_offset: usize,
}

impl GroupField {
    pub fn at(&self, m1: isize, m2: isize) -> f64 {
        self.values
            .get_signed(m1 + self.row_offset as isize, m2 + self.col_offset as isize)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn map(&self, f: impl FnMut(&f64) -> f64) -> Self {
        Self {
            values: self.values.map(f),
            row_offset: self.row_offset,
            col_offset: self.col_offset,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.values.as_slice().iter()
    }
}

/// Builds `B` from its parameters.
pub fn build_mask(p: &MaskParams) -> Result<BinaryMask> {
    p.validate()?;
    let row = p.row_pattern();
    BinaryMask::from_grid(Grid::from_fn(p.k1, row.len(), |_, c| row[c]))
}

/// `‖B ⊙ S(c, m1, m2)‖₂`; positions outside the grid contribute zero.
pub fn group_norm(c: &ComplexGrid, mask: &BinaryMask, m1: isize, m2: isize) -> f64 {
    mask.ones()
        .iter()
        .filter_map(|&(k1, k2)| c.get_signed(m1 + k1 as isize, m2 + k2 as isize))
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}
