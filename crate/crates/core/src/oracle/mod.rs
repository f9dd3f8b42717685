//! Independent oracles: exhaustive search, finite differences, closed forms,
//! and the invariant audit.

mod brute;
mod fd;
mod invariants;
mod scalar;
mod toy;

pub use brute::{brute_force_halfspace_max, BruteError, BruteResult, GridSpec};
pub use fd::{fd_gradient, relative_error, FdError};
pub use invariants::{invariant_suite, InvariantReport, Verdict};
pub use scalar::{ray_maximum, scalar_ground_state_oracle};
pub use toy::{PlaneRotation, ToyProblem};
