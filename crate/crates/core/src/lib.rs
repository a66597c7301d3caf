//! Extraction of approximately-periodic oscillatory transients from noisy
//! vibration signals.
//!
//! The transient component is estimated as `x̂ = A c⋆`, where `A` is a
//! Parseval-normalized inverse STFT and `c⋆` minimizes
//!
//! ```text
//! P(c) = ½‖y − A c‖² + λ Σ_{m1,m2} φ_ε(‖B ⊙ S(c, m1, m2)‖₂; a)
//! ```
//!
//! with a binary block `B` whose ones repeat at the expected fault period.
//! The problem is solved with a split augmented Lagrangian iteration whose
//! shrinkage step is replaced by a majorization-minimization step, so it
//! converges for the non-convex penalties as well.
//!
//! Modules:
//! - [`stft`]: forward/inverse tight-frame STFT (`Aᴴ` and `A`).
//! - [`penalty`]: smoothed penalties, their `ψ` maps and quadratic majorizers.
//! - [`mask`]: the periodic binary block and weighted group norms.
//! - [`solver`]: the iteration, objective, and non-convex continuation.
//! - [`tuning`]: noise estimation and regularization parameter selection.
//! - [`simgen`]: seeded synthetic test signals.
//! - [`analysis`]: frequency indicator, smoothed profile, envelope spectrum.
//! - [`io`]: CSV/WAV/JSON readers and writers.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod io;
pub mod mask;
pub mod penalty;
pub mod signal;
pub mod simgen;
pub mod solver;
pub mod stft;
pub mod tuning;

pub use error::{Error, Result};
pub use grid::Grid;
pub use mask::{BinaryMask, MaskParams};
pub use penalty::{PenaltyFamily, PenaltySpec};
pub use signal::TimeSignal;
pub use solver::{ExtractionResult, SolverConfig};
pub use stft::{Spectrogram, StftPlan};
