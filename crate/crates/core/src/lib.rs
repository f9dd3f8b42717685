//! Generalized Nehari-manifold solver for strongly indefinite energies
//! `E(u, v) = E₁(u) + ½⟨L_u v, v⟩ − b(u, v)`, with the perturbed
//! Dirac-geodesic problem on the circle as the concrete instance.

// `!(x > 0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod geodesic;
pub mod nehari;
pub mod num;
pub mod oracle;
pub mod spectral;

pub use num::Real;

pub type SpectralModel64 = spectral::SpectralModel<f64>;
pub type CircleDomain64 = circle::CircleDomain<f64>;
pub type LoopMap64 = circle::LoopMap<f64>;
pub type SpinorField64 = circle::SpinorField<f64>;
pub type Nonlinearity64 = circle::Nonlinearity<f64>;
pub type ToyProblem64 = oracle::ToyProblem<f64>;
pub type GeodesicContext64 = geodesic::GeodesicContext<f64>;
pub type SolveReport64 = geodesic::SolveReport<f64>;
