//! Smoothed sparsity-promoting penalties.
//!
//! Every family is evaluated at `s = √(u² + ε)`, which makes the penalty
//! differentiable at the origin. `ψ(u) = u / φ_ε′(u)` is the curvature scale
//! of the quadratic majorizer
//!
//! ```text
//! g(u, v) = u² / (2ψ(v)) − (v² / (2ψ(v)) − φ_ε(v))
//! ```
//!
//! which touches `φ_ε` at `u = v` and lies above it everywhere else.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_EPS: f64 = 1e-8;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyFamily {
    /// `|u|`, the only convex member.
    Abs,
    /// `log(1 + a|u|) / a`
    Log,
    /// `|u| / (1 + a|u|/2)`
    Rat,
    /// `2/(a√3) · (atan((1 + 2a|u|)/√3) − π/6)`
    Atan,
}

impl PenaltyFamily {
    pub const ALL: [PenaltyFamily; 4] = [Self::Abs, Self::Log, Self::Rat, Self::Atan];

    pub fn is_convex(self) -> bool {
        matches!(self, Self::Abs)
    }
}

impl fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Abs => "abs",
            Self::Log => "log",
            Self::Rat => "rat",
            Self::Atan => "atan",
        })
    }
}

impl FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abs" | "l1" => Ok(Self::Abs),
            "log" => Ok(Self::Log),
            "rat" => Ok(Self::Rat),
            "atan" => Ok(Self::Atan),
            other => Err(invalid(format!("unknown penalty family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    /// Non-convexity parameter; zero reduces every family to `abs`.
    pub a: f64,
    pub eps: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, a: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid(format!("smoothing eps must be positive, got {eps}")));
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(invalid(format!("non-convexity a must be non-negative, got {a}")));
        }
        let a = if family == PenaltyFamily::Abs { 0.0 } else { a };
        Ok(Self { family, a, eps })
    }

    /// Smoothed `abs` with the default `ε`.
    pub fn abs() -> Self {
        Self {
            family: PenaltyFamily::Abs,
            a: 0.0,
            eps: DEFAULT_EPS,
        }
    }

    /// Same family and `ε` with a different `a`.
    pub fn with_a(self, a: f64) -> Result<Self> {
        Self::new(self.family, a, self.eps)
    }

    fn smoothed(&self, u: f64) -> f64 {
        (u * u + self.eps).sqrt()
    }

    /// Unsmoothed `φ(s; a)` for `s ≥ 0`.
    fn phi(&self, s: f64) -> f64 {
        let a = self.a;
        if a == 0.0 {
            return s;
        }
        match self.family {
            PenaltyFamily::Abs => s,
            PenaltyFamily::Log => (a * s).ln_1p() / a,
            PenaltyFamily::Rat => s / (1.0 + a * s / 2.0),
            // atan(x) − atan(1/√3) folded into one atan to avoid cancellation
            // for small a·s.
            PenaltyFamily::Atan => 2.0 / (a * SQRT_3) * (SQRT_3 * a * s / (2.0 + a * s)).atan(),
        }
    }

    /// `φ′(s; a)` for `s ≥ 0`.
    fn dphi(&self, s: f64) -> f64 {
        let a = self.a;
        match self.family {
            PenaltyFamily::Abs => 1.0,
            PenaltyFamily::Log => 1.0 / (1.0 + a * s),
            PenaltyFamily::Rat => {
                let t = 1.0 + a * s / 2.0;
                1.0 / (t * t)
            }
            PenaltyFamily::Atan => 1.0 / (1.0 + a * s + a * a * s * s),
        }
    }

    /// `φ_ε(u; a) = φ(√(u² + ε); a)`.
    pub fn phi_eps(&self, u: f64) -> f64 {
        self.phi(self.smoothed(u))
    }

    /// `φ_ε′(u; a)`.
    pub fn dphi_eps(&self, u: f64) -> f64 {
        let s = self.smoothed(u);
        self.dphi(s) * u / s
    }

    /// `ψ(u) = u / φ_ε′(u; a)`, strictly positive for `ε > 0`.
    pub fn psi(&self, u: f64) -> f64 {
        let s = self.smoothed(u);
        let a = self.a;
        match self.family {
            PenaltyFamily::Abs => s,
            PenaltyFamily::Log => s * (1.0 + a * s),
            PenaltyFamily::Rat => {
                let t = 1.0 + a * s / 2.0;
                s * t * t
            }
            PenaltyFamily::Atan => s * (1.0 + a * s + a * a * (u * u + self.eps)),
        }
    }

    /// Quadratic majorizer `g(u, v)` of `φ_ε` touching at `u = v`.
    pub fn majorizer(&self, u: f64, v: f64) -> f64 {
        let psi_v = self.psi(v);
        u * u / (2.0 * psi_v) - (v * v / (2.0 * psi_v) - self.phi_eps(v))
    }
}

impl Default for PenaltySpec {
    fn default() -> Self {
        Self::abs()
    }
}

/// Free-function form of [`PenaltySpec::phi_eps`].
pub fn phi_eps(u: f64, spec: &PenaltySpec) -> f64 {
    spec.phi_eps(u)
}

/// Free-function form of [`PenaltySpec::psi`].
pub fn psi(u: f64, spec: &PenaltySpec) -> f64 {
    spec.psi(u)
}

/// Free-function form of [`PenaltySpec::majorizer`].
pub fn majorizer_value(u: f64, v: f64, spec: &PenaltySpec) -> f64 {
    spec.majorizer(u, v)
}
