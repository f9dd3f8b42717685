//! Nehari-manifold reduction over an abstract [`ProblemContext`].
//!
//! For fixed `u` and `v` with `v⁺ ≠ 0`, [`maximize_on_halfspace`] finds the
//! unique maximizer `g_u(v)` of `E₂(u, ·)` on the half-space `ℝ⁺v ⊕ V⁻`. The
//! reduced functional `Ẽ(u, v) = E(u, g_u(v))` is bounded below and is
//! minimized by [`minimize_reduced`].
//!
//! All vectors are ambient coordinates unless a name says `coords`, in which
//! case they are coefficients in the eigenbasis of the current model.

mod context;
mod maximize;
mod minimize;
mod reduced;

/// Eigen-coordinate helpers shared with the oracle layer.
pub(crate) mod context_internals {
    pub(crate) use super::context::{eigen_residual, minus_dual_norm, quadratic, weighted_norm};
}

pub use context::{e2_energy, nehari_residuals, ProblemContext};
pub use maximize::{maximize_on_halfspace, MaximizerOptions, MaximizerResult};
pub use minimize::{minimize_reduced, minimize_reduced_with, MinimizeOutcome, MinimizerOptions, NehariPoint, Termination, TraceEntry};
pub use reduced::{reduced_energy, reduced_gradient, ReducedGradient};

use crate::spectral::SpectralError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NehariError {
    #[error("point is H⁻-degenerate: ‖v⁺‖_V = {0:e}")]
    Degenerate(f64),
    #[error("operator has a kernel of dimension {0}; the half-space maximizer requires an invertible operator")]
    Kernel(usize),
    #[error("maximizer did not converge after {iterations} iterations (r_scalar = {r_scalar:e}, r_minus = {r_minus:e})")]
    MaximizerNonConvergence { iterations: usize, r_scalar: f64, r_minus: f64 },
    #[error("no positive ray maximum: E₂ keeps increasing along the ray")]
    UnboundedRay,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("spectral model: {0}")]
    Spectral(#[from] SpectralError),
    #[error("context evaluation failed: {0}")]
    Context(String),
}
