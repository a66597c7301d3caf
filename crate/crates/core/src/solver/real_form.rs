//! The same iteration written over stacked real arrays `[Re c; Im c]`.
//!
//! `Āᵀ x = [Re(Aᴴ x); Im(Aᴴ x)]` and `Ā c̄ = Re(A c_r) − Im(A c_i)`. The
//! weight field uses `p(v̄) = (‖B ⊙ S(v_r)‖² + ‖B ⊙ S(v_i)‖²)^{1/2}` and is
//! applied identically to both halves. Kept as an independent route for
//! checking the complex solver.

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{ComplexGrid, RealGrid};
use crate::mask::BinaryMask;
use crate::penalty::PenaltySpec;
use crate::stft::StftPlan;

#[derive(Debug, Clone)]
pub struct RealPair {
    pub re: RealGrid,
    pub im: RealGrid,
}

impl RealPair {
    pub fn split(c: &ComplexGrid) -> Self {
        Self {
            re: c.map(|z| z.re),
            im: c.map(|z| z.im),
        }
    }

    pub fn join(&self) -> ComplexGrid {
        self.re.zip_map(&self.im, |&r, &i| Complex64::new(r, i))
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Copy) -> Self {
        Self {
            re: self.re.zip_map(&other.re, |&a, &b| f(a, b)),
            im: self.im.zip_map(&other.im, |&a, &b| f(a, b)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RealState {
    pub u: RealPair,
    pub c: RealPair,
    pub d: RealPair,
}

/// `Āᵀ x`.
pub fn adjoint(plan: &StftPlan, x: &[f64]) -> Result<RealPair> {
    Ok(RealPair::split(&plan.analyze(x)?))
}

/// `Ā c̄`.
pub fn apply(plan: &StftPlan, c: &RealPair) -> Result<Vec<f64>> {
    let lift = |g: &RealGrid| g.map(|&v| Complex64::new(v, 0.0));
    let from_re = plan.synthesize_complex(&lift(&c.re))?;
    let from_im = plan.synthesize_complex(&lift(&c.im))?;
    Ok(from_re
        .iter()
        .zip(&from_im)
        .map(|(a, b)| a.re - b.im)
        .collect())
}

/// `r̄(v̄)`, shared by both halves.
pub fn r_field(v: &RealPair, mask: &BinaryMask, spec: &PenaltySpec) -> RealGrid {
    let er = mask.group_energy_real(&v.re);
    let ei = mask.group_energy_real(&v.im);
    let mut weights = er.clone();
    for (w, (a, b)) in weights
        .values
        .as_mut_slice()
        .iter_mut()
        .zip(er.iter().zip(ei.iter()))
    {
        *w = 1.0 / spec.psi((a + b).sqrt());
    }
    mask.accumulate(&weights, v.re.shape())
}

pub fn initial_state(plan: &StftPlan, y: &[f64]) -> Result<RealState> {
    let c = adjoint(plan, y)?;
    let zero = RealGrid::zeros(c.re.rows(), c.re.cols());
    Ok(RealState {
        u: c.clone(),
        c,
        d: RealPair {
            re: zero.clone(),
            im: zero,
        },
    })
}

pub fn step(
    state: &mut RealState,
    y: &[f64],
    plan: &StftPlan,
    mask: &BinaryMask,
    spec: &PenaltySpec,
    lambda: f64,
    mu: f64,
) -> Result<()> {
    let r = r_field(&state.u, mask, spec);
    let shrink = |cd: &RealGrid| cd.zip_map(&r, |&v, &r| v / (1.0 + lambda * r / mu));
    let cd = state.c.zip(&state.d, |c, d| c + d);
    state.u = RealPair {
        re: shrink(&cd.re),
        im: shrink(&cd.im),
    };

    let w = state.u.zip(&state.d, |u, d| u - d);
    let aw = apply(plan, &w)?;
    let resid: Vec<f64> = y.iter().zip(&aw).map(|(y, a)| y - a).collect();
    let corr = adjoint(plan, &resid)?;
    state.c = w.zip(&corr, |w, g| w + g / (mu + 1.0));
    let diff = state.u.zip(&state.c, |u, c| u - c);
    state.d = state.d.zip(&diff, |d, e| d - e);
    Ok(())
}
