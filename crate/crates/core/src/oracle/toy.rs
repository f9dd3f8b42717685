//! Small finite-dimensional problems with a power-form nonlinearity.

use crate::nehari::{NehariError, ProblemContext};
use crate::num::Real;
use crate::spectral::{build_spectral_model, SpectralModel};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::sync::Arc;

/// Rotation of `L` in the plane of two eigen-directions by `rate · u₀`.
#[derive(Debug, Clone, Copy)]
pub struct PlaneRotation<T> {
    pub i: usize,
    pub j: usize,
    pub rate: T,
}

/// `E(u, v) = ½|u|² + ¼Σu⁴ + ½⟨L_u v, v⟩ − c(u)/(p+1) (vᵀAv)^{(p+1)/2}`
/// with `c(u) = c₀(1 + ½ sin(κ·u))`.
#[derive(Debug, Clone)]
pub struct ToyProblem<T: Real> {
    pub lambdas: DVector<T>,
    pub weight: DMatrix<T>,
    pub p: T,
    pub c0: T,
    pub kappa: DVector<T>,
    pub rotation: Option<PlaneRotation<T>>,
    fixed_model: Option<Arc<SpectralModel<T>>>,
}

impl<T: Real> ToyProblem<T> {
    /// `L = diag(lambdas)`, `A = I`, `c ≡ c₀`, no `u` dependence.
    pub fn diagonal(lambdas: &[T], p: T, c0: T) -> Self {
        let dim = lambdas.len();
        let mut toy = ToyProblem {
            lambdas: DVector::from_column_slice(lambdas),
            weight: DMatrix::identity(dim, dim),
            p,
            c0,
            kappa: DVector::zeros(0),
            rotation: None,
            fixed_model: None,
        };
        toy.refresh();
        toy
    }

    /// Random toy with `n_minus` negative modes. The spectrum is bounded
    /// away from zero and `A` is well conditioned.
    pub fn random(rng: &mut impl Rng, dim: usize, n_minus: usize, u_dim: usize) -> Self {
        assert!(n_minus < dim && n_minus >= 1);
        let mut lambdas: Vec<T> = (0..dim)
            .map(|i| {
                let mag = rng.gen_range(0.5..2.0);
                T::lit(if i < n_minus { -mag } else { mag })
            })
            .collect();
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let q = q.qr().q();
        let d = DMatrix::from_diagonal(&DVector::from_fn(dim, |_, _| rng.gen_range(0.5..2.0)));
        let a = &q * d * q.transpose();
        let weight = DMatrix::from_fn(dim, dim, |i, j| T::lit(0.5 * (a[(i, j)] + a[(j, i)])));
        let mut toy = ToyProblem {
            lambdas: DVector::from_vec(lambdas),
            weight,
            p: T::lit(rng.gen_range(2.0..4.0)),
            c0: T::lit(rng.gen_range(0.5..2.0)),
            kappa: DVector::from_fn(u_dim, |_, _| T::lit(rng.gen_range(-1.0..1.0))),
            rotation: None,
            fixed_model: None,
        };
        toy.refresh();
        toy
    }

    pub fn with_weight(mut self, weight: DMatrix<T>) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_coupling(mut self, kappa: DVector<T>) -> Self {
        self.kappa = kappa;
        self.refresh();
        self
    }

    pub fn with_rotation(mut self, rotation: PlaneRotation<T>) -> Self {
        self.rotation = Some(rotation);
        self.refresh();
        self
    }

    fn refresh(&mut self) {
        self.fixed_model = if self.rotation.is_none() {
            Some(Arc::new(build_spectral_model(&DMatrix::from_diagonal(&self.lambdas), None, None).expect("diagonal toy operator")))
        } else {
            None
        };
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    fn theta(&self, u: &DVector<T>) -> T {
        match self.rotation {
            Some(r) if !u.is_empty() => r.rate * u[0],
            _ => T::zero(),
        }
    }

    fn rotation_matrix(&self, theta: T, derivative: bool) -> DMatrix<T> {
        let n = self.dim();
        let Some(r) = self.rotation else {
            return DMatrix::identity(n, n);
        };
        let (s, c) = theta.sin_cos();
        let mut m = if derivative { DMatrix::zeros(n, n) } else { DMatrix::identity(n, n) };
        let (cc, ss) = if derivative { (-s, c) } else { (c, s) };
        m[(r.i, r.i)] = cc;
        m[(r.j, r.j)] = cc;
        m[(r.i, r.j)] = -ss;
        m[(r.j, r.i)] = ss;
        m
    }

    /// Operator matrix `L_u`.
    pub fn operator(&self, u: &DVector<T>) -> DMatrix<T> {
        let r = self.rotation_matrix(self.theta(u), false);
        &r * DMatrix::from_diagonal(&self.lambdas) * r.transpose()
    }

    fn coupling(&self, u: &DVector<T>) -> (T, DVector<T>) {
        if self.kappa.is_empty() || u.is_empty() {
            return (self.c0, DVector::zeros(u.len()));
        }
        let half = T::lit(0.5);
        let arg = self.kappa.dot(u);
        (self.c0 * (T::one() + half * arg.sin()), &self.kappa * (self.c0 * half * arg.cos()))
    }

    fn form(&self, v: &DVector<T>) -> (T, DVector<T>) {
        let av = &self.weight * v;
        (v.dot(&av).max(T::zero()), av)
    }

    /// Spectral norm of `A`.
    fn weight_norm(&self) -> T {
        self.weight.clone().symmetric_eigenvalues().iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

impl<T: Real> ProblemContext<T> for ToyProblem<T> {
    fn u_dim(&self) -> usize {
        self.kappa.len().max(usize::from(self.rotation.is_some()))
    }

    fn v_dim(&self) -> usize {
        self.dim()
    }

    fn model(&self, u: &DVector<T>) -> Result<Arc<SpectralModel<T>>, NehariError> {
        if let Some(m) = &self.fixed_model {
            return Ok(m.clone());
        }
        Ok(Arc::new(build_spectral_model(&self.operator(u), None, None)?))
    }

    fn e1(&self, u: &DVector<T>) -> Result<T, NehariError> {
        let quarter = T::lit(0.25);
        Ok(u.iter().fold(T::zero(), |s, &x| s + x * x / T::lit(2.0) + quarter * x * x * x * x))
    }

    fn b(&self, u: &DVector<T>, v: &DVector<T>) -> Result<T, NehariError> {
        let (c, _) = self.coupling(u);
        let (q, _) = self.form(v);
        let p1 = self.p + T::one();
        Ok(if q == T::zero() { T::zero() } else { c * q.powf(p1 / T::lit(2.0)) / p1 })
    }

    fn b_gradient(&self, u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>, NehariError> {
        let (c, _) = self.coupling(u);
        let (q, av) = self.form(v);
        if q == T::zero() {
            return Ok(DVector::zeros(v.len()));
        }
        Ok(av * (c * q.powf((self.p - T::one()) / T::lit(2.0))))
    }

    fn b_hessian_apply(&self, u: &DVector<T>, v: &DVector<T>, eta: &DVector<T>) -> Result<DVector<T>, NehariError> {
        let (c, _) = self.coupling(u);
        let (q, av) = self.form(v);
        if q == T::zero() {
            return Ok(DVector::zeros(v.len()));
        }
        let two = T::lit(2.0);
        let pm1 = self.p - T::one();
        let aeta = &self.weight * eta;
        let s = av.dot(eta);
        Ok(aeta * (c * q.powf(pm1 / two)) + av * (c * pm1 * q.powf(pm1 / two - T::one()) * s))
    }

    fn u_dual(&self, u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>, NehariError> {
        let (_, dc) = self.coupling(u);
        let (q, _) = self.form(v);
        let p1 = self.p + T::one();
        let qp = if q == T::zero() { T::zero() } else { q.powf(p1 / T::lit(2.0)) / p1 };
        let mut d = DVector::from_fn(u.len(), |i, _| u[i] + u[i] * u[i] * u[i]);
        if !dc.is_empty() {
            d -= dc * qp;
        }
        if !u.is_empty() {
            let mut e0 = DVector::zeros(u.len());
            e0[0] = T::one();
            if let Some((dl, _)) = self.operator_derivative(u, &e0)? {
                d[0] += v.dot(&(dl * v)) / T::lit(2.0);
            }
        }
        Ok(d)
    }

    fn operator_derivative(&self, u: &DVector<T>, h: &DVector<T>) -> Result<Option<(DMatrix<T>, Option<DMatrix<T>>)>, NehariError> {
        let Some(rot) = self.rotation else {
            return Ok(None);
        };
        if u.is_empty() {
            return Ok(None);
        }
        let theta = self.theta(u);
        let r = self.rotation_matrix(theta, false);
        let dr = self.rotation_matrix(theta, true);
        let lam = DMatrix::from_diagonal(&self.lambdas);
        let dl = &dr * &lam * r.transpose() + &r * &lam * dr.transpose();
        Ok(Some((dl * (rot.rate * h[0]), None)))
    }

    fn growth_factor(&self, u: &DVector<T>, v: &DVector<T>) -> Option<T> {
        let (c, _) = self.coupling(u);
        let (q, _) = self.form(v);
        Some(c * q.powf((self.p - T::one()) / T::lit(2.0)) * self.weight_norm())
    }
}
