use super::NehariError;
use crate::num::Real;
use crate::spectral::SpectralModel;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Problem data for `E(u, v) = E₁(u) + ½⟨L_u v, v⟩ − b(u, v)`.
///
/// `u` lives in a linear coordinate space of dimension [`u_dim`](Self::u_dim);
/// `v` in ambient coordinates of dimension [`v_dim`](Self::v_dim). Gradients
/// are returned as covectors (plain partial derivatives).
pub trait ProblemContext<T: Real>: Send + Sync {
    fn u_dim(&self) -> usize;

    fn v_dim(&self) -> usize;

    /// Spectral model of `L_u` (with the Gram matrix of the `W` pairing).
    fn model(&self, u: &DVector<T>) -> Result<Arc<SpectralModel<T>>, NehariError>;

    fn e1(&self, u: &DVector<T>) -> Result<T, NehariError>;

    fn b(&self, u: &DVector<T>, v: &DVector<T>) -> Result<T, NehariError>;

    fn b_gradient(&self, u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>, NehariError>;

    /// `∂²_v b(u, v)[eta]` as a covector.
    fn b_hessian_apply(&self, u: &DVector<T>, v: &DVector<T>, eta: &DVector<T>) -> Result<DVector<T>, NehariError>;

    /// `∂_u (E₁ + E₂)(u, v)` at fixed ambient `v`.
    fn u_dual(&self, u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>, NehariError>;

    /// Riesz map turning a `u`-covector into a step direction.
    fn u_precondition(&self, _u: &DVector<T>, dual: &DVector<T>) -> DVector<T> {
        dual.clone()
    }

    /// Moves `u` along `step`.
    fn retract(&self, u: &DVector<T>, step: &DVector<T>) -> DVector<T> {
        u + step
    }

    /// Derivative of the operator and Gram matrices of `L_u` in direction
    /// `h`; `None` when `L` does not depend on `u`.
    #[allow(clippy::type_complexity)]
    fn operator_derivative(&self, _u: &DVector<T>, _h: &DVector<T>) -> Result<Option<(DMatrix<T>, Option<DMatrix<T>>)>, NehariError> {
        Ok(None)
    }

    /// A factor `f` with `|∇_v b(u, v)|_W ≤ f |v|_W`, if the context can
    /// provide one.
    fn growth_factor(&self, _u: &DVector<T>, _v: &DVector<T>) -> Option<T> {
        None
    }
}

/// `E₂(u, v) = ½⟨L_u v, v⟩ − b(u, v)`.
pub fn e2_energy<T: Real, C: ProblemContext<T> + ?Sized>(ctx: &C, u: &DVector<T>, v: &DVector<T>) -> Result<T, NehariError> {
    let model = ctx.model(u)?;
    check_dim(model.dim(), v.len())?;
    let a = model.coords(v);
    Ok(quadratic(&model, &a) / T::lit(2.0) - ctx.b(u, v)?)
}

/// `(⟨Lv, v⟩ − ⟨∇_v b, v⟩, ‖P⁻(Lv − ∇_v b)‖_*)` where the dual norm is
/// `(Σ_{i∈−} r_i² / (1 + |λ_i|))^{1/2}` in eigen coordinates.
pub fn nehari_residuals<T: Real, C: ProblemContext<T> + ?Sized>(ctx: &C, u: &DVector<T>, v: &DVector<T>) -> Result<(T, T), NehariError> {
    let model = ctx.model(u)?;
    check_dim(model.dim(), v.len())?;
    let a = model.coords(v);
    let r = eigen_residual(&model, &a, &ctx.b_gradient(u, v)?);
    Ok((r.dot(&a), minus_dual_norm(&model, &r)))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), NehariError> {
    if expected == got {
        Ok(())
    } else {
        Err(NehariError::Dimension { expected, got })
    }
}

pub(crate) fn quadratic<T: Real>(model: &SpectralModel<T>, a: &DVector<T>) -> T {
    let ev = model.eigenvalues();
    let mut s = T::zero();
    for i in 0..a.len() {
        s += ev[i] * a[i] * a[i];
    }
    s
}

/// `Λa − Bᵀ∇b` in eigen coordinates.
pub(crate) fn eigen_residual<T: Real>(model: &SpectralModel<T>, a: &DVector<T>, grad_b: &DVector<T>) -> DVector<T> {
    let mut r = -model.dual_coords(grad_b);
    let ev = model.eigenvalues();
    for i in 0..a.len() {
        r[i] += ev[i] * a[i];
    }
    r
}

pub(crate) fn weighted_norm<T: Real>(model: &SpectralModel<T>, r: &DVector<T>, idx: &[usize]) -> T {
    let ev = model.eigenvalues();
    let mut s = T::zero();
    for &i in idx {
        s += r[i] * r[i] / (T::one() + ev[i].abs());
    }
    s.sqrt()
}

pub(crate) fn minus_dual_norm<T: Real>(model: &SpectralModel<T>, r: &DVector<T>) -> T {
    weighted_norm(model, r, model.index_minus())
}
