//! Half-space maximizer `g_u(v) = argmax { E₂(u, z) : z ∈ ℝ⁺v ⊕ V⁻ }`.
//!
//! Writing `z = t e + w` with `e = v⁺/‖v⁺‖_V` and `w ∈ V⁻`, the inner map
//! `w ↦ E₂(t e + w)` is strictly concave (its Hessian is `−|Λ_−| − ∂²b` on
//! `V⁻`), so it is maximized by a damped Newton iteration with a matrix-free
//! conjugate-gradient solve. The outer scalar problem `h'(t) = 0` for
//! `h(t) = max_w E₂(t e + w)` is solved by Newton steps safeguarded by a
//! sign bracket.

use super::context::{check_dim, eigen_residual, minus_dual_norm, quadratic, ProblemContext};
use super::NehariError;
use crate::num::Real;
use crate::spectral::SpectralModel;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct MaximizerOptions<T> {
    /// Target for both Nehari residuals.
    pub tol: T,
    pub max_iter: usize,
    /// Extra randomized starts used to measure agreement.
    pub multistart: usize,
    pub seed: u64,
}

impl<T: Real> Default for MaximizerOptions<T> {
    fn default() -> Self {
        MaximizerOptions { tol: T::tol(1e-10), max_iter: 500, multistart: 0, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct MaximizerResult<T: Real> {
    /// `g_u(v)` in ambient coordinates.
    pub g: DVector<T>,
    /// `g_u(v)` in eigen coordinates.
    pub coords: DVector<T>,
    /// Coefficient of the unit ray direction `e = v⁺/‖v⁺‖_V`.
    pub t: T,
    /// `V⁻` part of `g` in eigen coordinates.
    pub w_minus: DVector<T>,
    /// `Λa − Bᵀ∇b` at `g`, eigen coordinates.
    pub residual: DVector<T>,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub r_scalar: T,
    pub r_minus: T,
    /// `E₂(u, g)`.
    pub energy: T,
    /// Largest V-norm distance between the main result and randomized starts.
    pub multistart_distance: Option<T>,
    pub model: Arc<SpectralModel<T>>,
}

struct Local<'a, T: Real, C: ProblemContext<T> + ?Sized> {
    ctx: &'a C,
    u: &'a DVector<T>,
    model: &'a SpectralModel<T>,
    e: DVector<T>,
    tol: T,
    max_iter: usize,
}

struct State<T: Real> {
    t: T,
    w: DVector<T>,
    z: DVector<T>,
    r: DVector<T>,
    energy: T,
}

impl<'a, T: Real, C: ProblemContext<T> + ?Sized> Local<'a, T, C> {
    fn minus(&self) -> &[usize] {
        self.model.index_minus()
    }

    fn state(&self, t: T, w: DVector<T>) -> Result<State<T>, NehariError> {
        let mut z = self.e.clone() * t;
        for &i in self.minus() {
            z[i] = w[i];
        }
        let x = self.model.synthesize(&z);
        let b = self.ctx.b(self.u, &x)?;
        let r = eigen_residual(self.model, &z, &self.ctx.b_gradient(self.u, &x)?);
        let energy = quadratic(self.model, &z) / T::lit(2.0) - b;
        if !energy.is_finite() {
            return Err(NehariError::Context("non-finite energy".into()));
        }
        Ok(State { t, w, z, r, energy })
    }

    /// `Λδ − Bᵀ∂²b[Bδ]` in eigen coordinates.
    fn hess(&self, z: &DVector<T>, delta: &DVector<T>) -> Result<DVector<T>, NehariError> {
        let x = self.model.synthesize(z);
        let hb = self.ctx.b_hessian_apply(self.u, &x, &self.model.synthesize(delta))?;
        let mut out = -self.model.dual_coords(&hb);
        let ev = self.model.eigenvalues();
        for i in 0..delta.len() {
            out[i] += ev[i] * delta[i];
        }
        Ok(out)
    }

    /// Solves `(−H_ww) y = rhs` on `V⁻` by preconditioned CG.
    fn solve_minus(&self, z: &DVector<T>, rhs: &DVector<T>) -> Result<DVector<T>, NehariError> {
        let minus = self.minus();
        let ev = self.model.eigenvalues();
        let dim = z.len();
        let apply = |p: &DVector<T>| -> Result<DVector<T>, NehariError> {
            let h = self.hess(z, p)?;
            let mut out = DVector::zeros(dim);
            for &i in minus {
                out[i] = -h[i];
            }
            Ok(out)
        };
        let precond = |r: &DVector<T>| {
            let mut out = DVector::zeros(dim);
            for &i in minus {
                out[i] = r[i] / ev[i].abs();
            }
            out
        };
        let mut y = DVector::zeros(dim);
        let mut r = rhs.clone();
        let rhs_norm = rhs.norm();
        if rhs_norm == T::zero() {
            return Ok(y);
        }
        let target = rhs_norm * T::tol(1e-13);
        let mut zr = precond(&r);
        let mut p = zr.clone();
        let mut rz = r.dot(&zr);
        for _ in 0..(2 * minus.len() + 10) {
            let ap = apply(&p)?;
            let pap = p.dot(&ap);
            if !(pap > T::zero()) {
                break;
            }
            let alpha = rz / pap;
            y.axpy(alpha, &p, T::one());
            r.axpy(-alpha, &ap, T::one());
            if r.norm() <= target {
                break;
            }
            zr = precond(&r);
            let rz_new = r.dot(&zr);
            p = &zr + p * (rz_new / rz);
            rz = rz_new;
        }
        Ok(y)
    }

    fn minus_part(&self, v: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(v.len());
        for &i in self.minus() {
            out[i] = v[i];
        }
        out
    }

    /// Maximizes over `w` at fixed `t`.
    fn inner(&self, t: T, w0: DVector<T>, count: &mut usize) -> Result<State<T>, NehariError> {
        let mut s = self.state(t, w0)?;
        let c1 = T::lit(1e-4);
        for _ in 0..self.max_iter {
            let norm = minus_dual_norm(self.model, &s.r);
            if norm <= self.tol * T::lit(0.1) {
                break;
            }
            *count += 1;
            let g = self.minus_part(&s.r);
            let delta = self.solve_minus(&s.z, &g)?;
            let slope = g.dot(&delta);
            let mut alpha = T::one();
            let mut accepted = None;
            for _ in 0..40 {
                let trial = self.state(t, &s.w + &delta * alpha)?;
                let gain = trial.energy - s.energy;
                let noise = T::eps() * T::lit(100.0) * s.energy.abs().max(T::one());
                if gain >= c1 * alpha * slope || (gain >= -noise && minus_dual_norm(self.model, &trial.r) < norm) {
                    accepted = Some(trial);
                    break;
                }
                alpha /= T::lit(2.0);
            }
            match accepted {
                Some(trial) => s = trial,
                None => break,
            }
        }
        Ok(s)
    }

    fn hprime(&self, s: &State<T>) -> T {
        s.r.dot(&self.e)
    }

    /// `h''(t)` and the tangent `dw/dt` of the inner maximizer.
    fn hsecond(&self, s: &State<T>) -> Result<(T, DVector<T>), NehariError> {
        let he = self.hess(&s.z, &self.e)?;
        let h_we = self.minus_part(&he);
        let y = self.solve_minus(&s.z, &h_we)?;
        Ok((self.e.dot(&he) + h_we.dot(&y), y))
    }

    fn residuals(&self, s: &State<T>) -> (T, T) {
        (s.r.dot(&s.z), minus_dual_norm(self.model, &s.r))
    }

    fn converged(&self, s: &State<T>) -> bool {
        let (rs, rm) = self.residuals(s);
        rs.abs() <= self.tol && rm <= self.tol
    }

    fn solve(&self, t0: T, w0: DVector<T>) -> Result<(State<T>, usize, usize), NehariError> {
        let mut inner_count = 0;
        let start = self.state(t0, w0.clone())?;
        if self.converged(&start) {
            return Ok((start, 0, 0));
        }
        let mut s = self.inner(t0, w0, &mut inner_count)?;
        let mut lo: Option<T> = None;
        let mut hi: Option<T> = None;
        let two = T::lit(2.0);
        let mut iterations = 0;
        while iterations < self.max_iter {
            iterations += 1;
            let hp = self.hprime(&s);
            if hp > T::zero() {
                lo = Some(s.t);
            } else {
                hi = Some(s.t);
            }
            if self.converged(&s) {
                return Ok((s, iterations, inner_count));
            }
            let (h2, dw) = self.hsecond(&s)?;
            let newton = if h2 < T::zero() { Some(s.t - hp / h2) } else { None };
            let t_next = match (lo, hi) {
                (Some(a), Some(b)) => match newton {
                    Some(tn) if tn > a && tn < b => tn,
                    _ => (a + b) / two,
                },
                (Some(a), None) => match newton {
                    Some(tn) if tn > a && tn <= a * T::lit(4.0) => tn,
                    _ => a * two,
                },
                (None, Some(b)) => match newton {
                    Some(tn) if tn > b / T::lit(4.0) && tn < b => tn,
                    _ => b / two,
                },
                (None, None) => unreachable!(),
            };
            if t_next > T::lit(1e150) {
                return Err(NehariError::UnboundedRay);
            }
            if !(t_next > T::zero()) {
                return Err(NehariError::Context("ray coefficient left the half-line".into()));
            }
            let w_pred = &s.w + &dw * (t_next - s.t);
            s = self.inner(t_next, w_pred, &mut inner_count)?;
        }
        let (rs, rm) = self.residuals(&s);
        Err(NehariError::MaximizerNonConvergence { iterations, r_scalar: rs.to_f64(), r_minus: rm.to_f64() })
    }
}

fn v_distance<T: Real>(model: &SpectralModel<T>, a: &DVector<T>, b: &DVector<T>) -> T {
    let mut s = T::zero();
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += model.weight(i) * d * d;
    }
    s.sqrt()
}

/// Computes `g_u(v)`; `v` is given in ambient coordinates.
pub fn maximize_on_halfspace<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    u: &DVector<T>,
    v: &DVector<T>,
    opts: &MaximizerOptions<T>,
) -> Result<MaximizerResult<T>, NehariError> {
    let model = ctx.model(u)?;
    check_dim(model.dim(), v.len())?;
    if model.has_kernel() {
        return Err(NehariError::Kernel(model.index_zero().len()));
    }
    let a = model.coords(v);
    let mut plus_norm = T::zero();
    for &i in model.index_plus() {
        plus_norm += model.weight(i) * a[i] * a[i];
    }
    let plus_norm = plus_norm.sqrt();
    if !(plus_norm >= T::lit(1e-12)) {
        return Err(NehariError::Degenerate(plus_norm.to_f64()));
    }
    let mut e = DVector::zeros(a.len());
    for &i in model.index_plus() {
        e[i] = a[i] / plus_norm;
    }
    let mut w0 = DVector::zeros(a.len());
    for &i in model.index_minus() {
        w0[i] = a[i];
    }
    let local = Local { ctx, u, model: &model, e, tol: opts.tol, max_iter: opts.max_iter };
    let (s, iterations, inner_iterations) = local.solve(plus_norm, w0.clone())?;

    let multistart_distance = if opts.multistart > 0 {
        let w_scale = v_distance(&model, &w0, &DVector::zeros(a.len())).max(T::one());
        let mut worst = T::zero();
        for k in 0..opts.multistart {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let t0 = s.t * T::lit(rng.gen_range(-1.5f64..1.5).exp());
            let mut w = DVector::zeros(a.len());
            for &i in model.index_minus() {
                w[i] = T::lit(rng.gen_range(-1.0..1.0)) * w_scale / model.weight(i).sqrt();
            }
            let (alt, _, _) = local.solve(t0, w)?;
            worst = worst.max(v_distance(&model, &alt.z, &s.z));
        }
        Some(worst)
    } else {
        None
    };

    let (r_scalar, r_minus) = local.residuals(&s);
    let w_minus = local.minus_part(&s.z);
    Ok(MaximizerResult {
        g: model.synthesize(&s.z),
        coords: s.z,
        t: s.t,
        w_minus,
        residual: s.r,
        iterations,
        inner_iterations,
        r_scalar,
        r_minus,
        energy: s.energy,
        multistart_distance,
        model: model.clone(),
    })
}
