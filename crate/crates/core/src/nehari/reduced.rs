//! Reduced functional `Ẽ(u, v) = E₁(u) + E₂(u, g_u(v))` and its gradient.

use super::context::{weighted_norm, ProblemContext};
use super::maximize::{maximize_on_halfspace, MaximizerOptions, MaximizerResult};
use super::NehariError;
use crate::num::Real;
use nalgebra::{DMatrix, DVector};

pub fn reduced_energy<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    u: &DVector<T>,
    v: &DVector<T>,
    opts: &MaximizerOptions<T>,
) -> Result<T, NehariError> {
    let m = maximize_on_halfspace(ctx, u, v, opts)?;
    Ok(ctx.e1(u)? + m.energy)
}

#[derive(Debug, Clone)]
pub struct ReducedGradient<T: Real> {
    /// `∂_u Ẽ(u, v)` as a covector.
    pub u_dual: DVector<T>,
    /// Preconditioned `u`-gradient.
    pub u_grad: DVector<T>,
    /// `∂_v Ẽ` in eigen coordinates of the model at `u`: `t_u(v)·(Λg − Bᵀ∇b)`
    /// on positive modes, zero elsewhere.
    pub v_dual: DVector<T>,
    /// `t_u(v) = ‖g⁺‖_V / ‖v⁺‖_V`.
    pub t: T,
    /// Energy `Ẽ(u, v)`.
    pub energy: T,
    pub maximizer: MaximizerResult<T>,
}

impl<T: Real> ReducedGradient<T> {
    /// `(Σ_+ v_dual_i² / (1 + |λ_i|))^{1/2}`.
    pub fn v_norm(&self) -> T {
        let m = &self.maximizer.model;
        weighted_norm(m, &self.v_dual, m.index_plus())
    }

    /// `⟨u_dual, u_grad⟩^{1/2}`.
    pub fn u_norm(&self) -> T {
        self.u_dual.dot(&self.u_grad).max(T::zero()).sqrt()
    }
}

/// Gradient of `Ẽ` at `(u, v)`.
///
/// Moving `u` also moves the splitting `V = V⁺_u ⊕ V⁻_u`. Writing
/// `g = t v + w` with `w ∈ V⁻_u`, the `u`-derivative therefore picks up
/// `−∂_vE₂(g)[dP⁺[h] w]` on top of the partial derivative at fixed `g`. The
/// projector derivative follows from first-order perturbation of the
/// generalized eigenproblem. The extra term vanishes when `v` lies on the
/// Nehari set (`w = 0`) or when `L` does not depend on `u`.
pub fn reduced_gradient<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    u: &DVector<T>,
    v: &DVector<T>,
    opts: &MaximizerOptions<T>,
) -> Result<ReducedGradient<T>, NehariError> {
    let mx = maximize_on_halfspace(ctx, u, v, opts)?;
    reduced_gradient_from(ctx, u, v, mx, false)
}

pub(crate) fn reduced_gradient_from<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    u: &DVector<T>,
    v: &DVector<T>,
    mx: MaximizerResult<T>,
    on_nehari: bool,
) -> Result<ReducedGradient<T>, NehariError> {
    let model = mx.model.clone();
    let a = model.coords(v);
    let mut plus_norm = T::zero();
    let mut g_plus_norm = T::zero();
    for &i in model.index_plus() {
        plus_norm += model.weight(i) * a[i] * a[i];
        g_plus_norm += model.weight(i) * mx.coords[i] * mx.coords[i];
    }
    let t = (g_plus_norm / plus_norm).sqrt();

    let mut v_dual = DVector::zeros(a.len());
    for &i in model.index_plus() {
        v_dual[i] = mx.residual[i] * t;
    }

    let mut u_dual = ctx.u_dual(u, &mx.g)?;
    let mut w = DVector::zeros(model.index_minus().len());
    for (k, &j) in model.index_minus().iter().enumerate() {
        w[k] = mx.coords[j] - t * a[j];
    }
    // `v = g` is a fixed point of the maximizer, so `w` vanishes up to
    // round-off and the correction is skipped.
    if !on_nehari && w.iter().any(|x| *x != T::zero()) {
        let plus = model.index_plus();
        let minus = model.index_minus();
        let basis = model.basis();
        let b_plus = basis.select_columns(plus);
        let b_minus = basis.select_columns(minus);
        let ev = model.eigenvalues();
        for k in 0..u.len() {
            let mut h = DVector::zeros(u.len());
            h[k] = T::one();
            let Some((dm, dg)) = ctx.operator_derivative(u, &h)? else {
                break;
            };
            // C_{−+} = B_−ᵀ dM B_+, H_{−+} = B_−ᵀ dG B_+
            let c = b_minus.tr_mul(&(&dm * &b_plus));
            let hh = dg.map(|dg| b_minus.tr_mul(&(dg * &b_plus)));
            let mut corr = T::zero();
            for (ip, &i) in plus.iter().enumerate() {
                let ri = mx.residual[i];
                if ri == T::zero() {
                    continue;
                }
                let mut s = T::zero();
                for (jm, &j) in minus.iter().enumerate() {
                    let hji = hh.as_ref().map_or(T::zero(), |m: &DMatrix<T>| m[(jm, ip)]);
                    let q = (c[(jm, ip)] - ev[i] * hji) / (ev[i] - ev[j]);
                    s += (q + hji) * w[jm];
                }
                corr += ri * s;
            }
            u_dual[k] -= corr;
        }
    }
    let u_grad = ctx.u_precondition(u, &u_dual);
    let energy = ctx.e1(u)? + mx.energy;
    Ok(ReducedGradient { u_dual, u_grad, v_dual, t, energy, maximizer: mx })
}
