//! Descent on the reduced functional.
//!
//! The iterate is a Nehari point `(u, z)` with `z = g_u(z)`. The base metric
//! moves `u` along the preconditioned `u`-gradient and `z` along
//! `−(1 + |Λ|)⁻¹(Λz − Bᵀ∇b)` restricted to positive modes; limited-memory
//! BFGS pairs built in that metric correct the direction. The trial pair is
//! projected back onto the Nehari set by the half-space maximizer. Steps are
//! accepted by Armijo backtracking on `Ẽ`. Once energy differences reach
//! round-off level, a step is accepted if it does not raise the energy beyond
//! that level and it lowers the gradient norm.

use super::context::ProblemContext;
use super::maximize::{maximize_on_halfspace, MaximizerOptions};
use super::reduced::{reduced_gradient_from, ReducedGradient};
use super::NehariError;
use crate::num::Real;
use nalgebra::DVector;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct MinimizerOptions<T> {
    /// Target for the Nehari residuals and both reduced-gradient norms.
    pub tol: T,
    pub max_iter: usize,
    pub armijo: T,
    pub initial_step: T,
    pub max_step: T,
    /// Keep `u` fixed and only descend in `v`.
    pub fix_u: bool,
    /// Number of stored BFGS pairs; 0 gives preconditioned steepest descent.
    pub memory: usize,
    pub maximizer: MaximizerOptions<T>,
}

impl<T: Real> Default for MinimizerOptions<T> {
    fn default() -> Self {
        MinimizerOptions {
            tol: T::tol(1e-8),
            max_iter: 5000,
            armijo: T::lit(1e-4),
            initial_step: T::one(),
            max_step: T::one(),
            fix_u: false,
            memory: 8,
            maximizer: MaximizerOptions::default(),
        }
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub energy: f64,
    pub r_scalar: f64,
    pub r_minus: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationCap,
    /// Backtracking drove the step below `1e-14`.
    LineSearchFailure,
}

/// A point of the Nehari set with its certificates.
#[derive(Debug, Clone)]
pub struct NehariPoint<T: Real> {
    pub u: DVector<T>,
    /// Ambient coordinates.
    pub v: DVector<T>,
    pub energy: T,
    pub e1: T,
    pub e2: T,
    pub r_scalar: T,
    pub r_minus: T,
    pub grad_u: T,
    pub grad_v: T,
    pub gradient: ReducedGradient<T>,
}

impl<T: Real> NehariPoint<T> {
    pub fn model(&self) -> &Arc<crate::spectral::SpectralModel<T>> {
        &self.gradient.maximizer.model
    }

    pub fn coords(&self) -> &DVector<T> {
        &self.gradient.maximizer.coords
    }

    fn is_converged(&self, tol: T) -> bool {
        self.r_scalar.abs() <= tol && self.r_minus <= tol && self.grad_u <= tol && self.grad_v <= tol
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome<T: Real> {
    pub point: NehariPoint<T>,
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
    pub iterations: usize,
}

impl<T: Real> MinimizeOutcome<T> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn nehari_point<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    u: DVector<T>,
    v: &DVector<T>,
    opts: &MinimizerOptions<T>,
) -> Result<NehariPoint<T>, NehariError> {
    let mx = maximize_on_halfspace(ctx, &u, v, &opts.maximizer)?;
    let g = mx.g.clone();
    let mut gradient = reduced_gradient_from(ctx, &u, &g, mx, true)?;
    if opts.fix_u {
        gradient.u_dual.fill(T::zero());
        gradient.u_grad.fill(T::zero());
    }
    let e2 = gradient.maximizer.energy;
    Ok(NehariPoint {
        e1: gradient.energy - e2,
        energy: gradient.energy,
        e2,
        r_scalar: gradient.maximizer.r_scalar,
        r_minus: gradient.maximizer.r_minus,
        grad_u: gradient.u_norm(),
        grad_v: gradient.v_norm(),
        u,
        v: g,
        gradient,
    })
}

/// Gradient of `Ẽ` as an ambient covector `(∂_u, ∂_v)`; the `v` part is
/// `G B v_dual`.
fn covector<T: Real>(point: &NehariPoint<T>) -> DVector<T> {
    let model = point.model();
    let mut dv = model.basis() * &point.gradient.v_dual;
    if let Some(g) = model.gram() {
        dv = g * dv;
    }
    let nu = point.u.len();
    let mut out = DVector::zeros(nu + dv.len());
    out.rows_mut(0, nu).copy_from(&point.gradient.u_dual);
    out.rows_mut(nu, dv.len()).copy_from(&dv);
    out
}

/// Base metric: the `u` Riesz map and `(t(1 + |λ|))⁻¹` on positive modes.
fn precondition<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    point: &NehariPoint<T>,
    q: &DVector<T>,
    opts: &MinimizerOptions<T>,
) -> DVector<T> {
    let model = point.model();
    let nu = point.u.len();
    let qu = q.rows(0, nu).into_owned();
    let a = model.basis().tr_mul(&q.rows(nu, q.len() - nu));
    let mut c = DVector::zeros(a.len());
    for &i in model.index_plus() {
        c[i] = a[i] / (point.gradient.t * (T::one() + model.eigenvalues()[i].abs()));
    }
    let mut out = DVector::zeros(q.len());
    if !opts.fix_u {
        out.rows_mut(0, nu).copy_from(&ctx.u_precondition(&point.u, &qu));
    }
    out.rows_mut(nu, a.len()).copy_from(&model.synthesize(&c));
    out
}

fn lbfgs_direction<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    point: &NehariPoint<T>,
    gamma: &DVector<T>,
    pairs: &[(DVector<T>, DVector<T>, T)],
    opts: &MinimizerOptions<T>,
) -> DVector<T> {
    let mut q = gamma.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = *rho * s.dot(&q);
        q.axpy(-a, y, T::one());
        alphas.push(a);
    }
    let mut r = precondition(ctx, point, &q, opts);
    if let Some((s, y, _)) = pairs.last() {
        let hy = precondition(ctx, point, y, opts);
        let yhy = y.dot(&hy);
        if yhy > T::zero() {
            r *= s.dot(y) / yhy;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = *rho * y.dot(&r);
        r.axpy(*a - b, s, T::one());
    }
    if opts.fix_u {
        r.rows_mut(0, point.u.len()).fill(T::zero());
    }
    r
}

pub fn minimize_reduced<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    u0: &DVector<T>,
    v0: &DVector<T>,
    opts: &MinimizerOptions<T>,
) -> Result<MinimizeOutcome<T>, NehariError> {
    minimize_reduced_with(ctx, u0, v0, opts, |_| {})
}

/// As [`minimize_reduced`], calling `observer` once per iteration.
pub fn minimize_reduced_with<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    u0: &DVector<T>,
    v0: &DVector<T>,
    opts: &MinimizerOptions<T>,
    mut observer: impl FnMut(&TraceEntry),
) -> Result<MinimizeOutcome<T>, NehariError> {
    let mut point = nehari_point(ctx, u0.clone(), v0, opts)?;
    let mut trace = Vec::new();
    let mut pairs: Vec<(DVector<T>, DVector<T>, T)> = Vec::new();
    let mut alpha = opts.initial_step;
    let mut last_step = T::zero();
    let min_step = T::lit(1e-14);
    let mut iter = 0;
    let termination = loop {
        let entry = TraceEntry {
            iter,
            energy: point.energy.to_f64(),
            r_scalar: point.r_scalar.to_f64(),
            r_minus: point.r_minus.to_f64(),
            grad_u: point.grad_u.to_f64(),
            grad_v: point.grad_v.to_f64(),
            step: last_step.to_f64(),
        };
        observer(&entry);
        trace.push(entry);
        if point.is_converged(opts.tol) {
            break Termination::Converged;
        }
        if iter >= opts.max_iter {
            break Termination::IterationCap;
        }
        iter += 1;

        let gamma = covector(&point);
        let mut dir = -lbfgs_direction(ctx, &point, &gamma, &pairs, opts);
        let mut slope = gamma.dot(&dir);
        if !(slope < T::zero()) {
            pairs.clear();
            dir = -precondition(ctx, &point, &gamma, opts);
            slope = gamma.dot(&dir);
        }
        let nu = point.u.len();
        let du = dir.rows(0, nu).into_owned();
        let dv_ambient = dir.rows(nu, dir.len() - nu).into_owned();
        let grad_norm = point.grad_u + point.grad_v;
        let noise = T::tol(1e-12) * point.energy.abs().max(T::one());

        let mut accepted = None;
        while alpha >= min_step {
            let u_trial = if opts.fix_u { point.u.clone() } else { ctx.retract(&point.u, &(&du * alpha)) };
            let v_trial = &point.v + &dv_ambient * alpha;
            if let Ok(trial) = nehari_point(ctx, u_trial, &v_trial, opts) {
                let drop = trial.energy - point.energy;
                if drop <= opts.armijo * alpha * slope || (drop <= noise && trial.grad_u + trial.grad_v < grad_norm) {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha /= T::lit(2.0);
        }
        match accepted {
            Some(trial) => {
                let mut sv = DVector::zeros(gamma.len());
                sv.rows_mut(0, nu).copy_from(&(&trial.u - &point.u));
                sv.rows_mut(nu, gamma.len() - nu).copy_from(&(&trial.v - &point.v));
                let y = covector(&trial) - &gamma;
                let sy = sv.dot(&y);
                if opts.memory > 0 && sy > T::tol(1e-12) * sv.norm() * y.norm() {
                    if pairs.len() == opts.memory {
                        pairs.remove(0);
                    }
                    pairs.push((sv, y, T::one() / sy));
                }
                point = trial;
                last_step = alpha;
                alpha = (alpha * T::lit(2.0)).min(opts.max_step);
            }
            None => break Termination::LineSearchFailure,
        }
    };
    Ok(MinimizeOutcome { point, trace, termination, iterations: iter })
}
