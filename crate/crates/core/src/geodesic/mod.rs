//! Perturbed Dirac-geodesics `(φ, ψ)` on the circle, found as minimizers of
//! the reduced functional over the Nehari set.

mod context;
mod solve;

pub use context::{build_context, build_context_with_chart, Frame, GeodesicContext};
pub use solve::{
    el_residual, initial_state, refine_check, solve_class, solve_class_with, solve_from, total_energy, verify_solution, ElResidual,
    RefineLevel, RefineReport, RunSummary, SolveReport, SolveSummary, Z2Check,
};

use crate::circle::CircleError;
use crate::nehari::NehariError;
use crate::spectral::SpectralError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesicError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Circle(#[from] CircleError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Nehari(#[from] NehariError),
    #[error("spinor collapsed to zero after {restarts} restarts")]
    Collapsed { restarts: usize },
}

/// Target manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChartSpec {
    FlatTorus(usize),
    RoundSphere2,
}

/// Parameters of one homotopy-class solve. `b(s) = b_mean + b_cos cos s +
/// b_sin sin s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicConfig {
    pub chart: ChartSpec,
    pub k_max: usize,
    /// Loop modes; defaults to `k_max`.
    pub m_phi: Option<usize>,
    /// Quadrature nodes; defaults to `4 k_max` on flat targets and
    /// `4 k_max + 24 m_phi` on curved ones, where the metric along the loop is
    /// not band-limited and its spectrum widens with the loop resolution.
    pub n_grid: Option<usize>,
    pub p: f64,
    pub b_mean: f64,
    pub b_cos: f64,
    pub b_sin: f64,
    /// Empty means zero winding.
    pub winding: Vec<i64>,
    pub clifford_sign: i32,
    pub tol: f64,
    pub max_iter: usize,
    pub maximizer_tol: f64,
    pub seed: u64,
    pub multistart: usize,
    /// Amplitude of the random periodic part of the initial loop.
    pub phi_init: f64,
    /// Keep the loop at its initial value.
    pub fix_phi: bool,
    /// Re-solve from the negated initial spinor and compare.
    pub z2_check: bool,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig {
            chart: ChartSpec::FlatTorus(1),
            k_max: 16,
            m_phi: None,
            n_grid: None,
            p: 3.0,
            b_mean: 1.0,
            b_cos: 0.0,
            b_sin: 0.0,
            winding: Vec::new(),
            clifford_sign: 1,
            tol: 1e-8,
            max_iter: 5000,
            maximizer_tol: 1e-10,
            seed: 0,
            multistart: 1,
            phi_init: 0.05,
            fix_phi: false,
            z2_check: true,
        }
    }
}

impl GeodesicConfig {
    pub fn m_phi(&self) -> usize {
        self.m_phi.unwrap_or(self.k_max)
    }

    pub fn n_grid(&self) -> usize {
        let extra = if matches!(self.chart, ChartSpec::FlatTorus(_)) { 0 } else { 24 * self.m_phi() };
        self.n_grid.unwrap_or(4 * self.k_max + extra)
    }

    pub fn fiber_dim(&self) -> usize {
        match self.chart {
            ChartSpec::FlatTorus(n) => n,
            ChartSpec::RoundSphere2 => 2,
        }
    }

    pub fn validate(&self) -> Result<(), GeodesicError> {
        let bad = |m: String| Err(GeodesicError::Config(m));
        if self.k_max == 0 {
            return bad("k_max must be positive".into());
        }
        if self.fiber_dim() == 0 {
            return bad("target dimension must be positive".into());
        }
        if !self.winding.is_empty() && self.winding.len() != self.fiber_dim() {
            return bad(format!("winding has {} entries, target dimension is {}", self.winding.len(), self.fiber_dim()));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return bad(format!("exponent p must exceed 1, got {}", self.p));
        }
        if self.clifford_sign != 1 && self.clifford_sign != -1 {
            return bad(format!("clifford_sign must be +1 or -1, got {}", self.clifford_sign));
        }
        if !(self.tol > 0.0) || !(self.maximizer_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.multistart == 0 {
            return bad("multistart must be at least 1".into());
        }
        if !(self.phi_init >= 0.0) || !self.phi_init.is_finite() {
            return bad(format!("phi_init must be a non-negative number, got {}", self.phi_init));
        }
        let b_floor = self.b_mean - self.b_cos.hypot(self.b_sin);
        if !(b_floor > 0.0) {
            return bad(format!("b must be positive: min b = {b_floor}"));
        }
        Ok(())
    }
}
