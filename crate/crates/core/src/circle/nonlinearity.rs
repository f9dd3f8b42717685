//! Power nonlinearity `K(s, φ, ψ) = b(s) |ψ|_g^{p+1} / (p+1)`.

use super::{dual_to_real, CircleDomain, CircleError, LoopGeometry, SpinorField};
use crate::num::Real;
use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Nonlinearity<T: Real> {
    p: T,
    b_values: Vec<T>,
    b_min: T,
    b_max: T,
}

impl<T: Real> Nonlinearity<T> {
    /// `b_values` are samples of `b` at the quadrature nodes.
    pub fn new(p: T, b_values: Vec<T>) -> Result<Self, CircleError> {
        if !(p > T::one()) || !p.is_finite() {
            return Err(CircleError::Nonlinearity(format!("exponent p = {p} must exceed 1")));
        }
        if b_values.is_empty() || b_values.iter().any(|b| !b.is_finite()) {
            return Err(CircleError::Nonlinearity("b must be finite at every node".into()));
        }
        let b_min = b_values.iter().copied().fold(b_values[0], |a, b| a.min(b));
        let b_max = b_values.iter().copied().fold(b_values[0], |a, b| a.max(b));
        if !(b_min > T::zero()) {
            return Err(CircleError::Nonlinearity(format!("b must be positive, min b = {b_min}")));
        }
        let nl = Nonlinearity { p, b_values, b_min, b_max };
        if nl.subquadratic_warning() {
            log::warn!("p = {p} <= 2: superquadratic growth hypothesis not met");
        }
        if nl.large_exponent_warning() {
            log::info!("p = {p} >= 3");
        }
        Ok(nl)
    }

    pub fn from_fn(domain: &CircleDomain<T>, p: T, b: impl Fn(T) -> T) -> Result<Self, CircleError> {
        Self::new(p, domain.nodes().iter().map(|&s| b(s)).collect())
    }

    pub fn constant(domain: &CircleDomain<T>, p: T, b: T) -> Result<Self, CircleError> {
        Self::new(p, vec![b; domain.n_grid()])
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn b_values(&self) -> &[T] {
        &self.b_values
    }

    pub fn b_min(&self) -> T {
        self.b_min
    }

    pub fn b_max(&self) -> T {
        self.b_max
    }

    /// Set when `p ≤ 2`.
    pub fn subquadratic_warning(&self) -> bool {
        self.p <= T::lit(2.0)
    }

    /// Set when `p ≥ 3`.
    pub fn large_exponent_warning(&self) -> bool {
        self.p >= T::lit(3.0)
    }

    /// `f(s_j, t) = b(s_j) t^{p−1}`, so that `∇K = f ψ`.
    pub fn f(&self, node: usize, t: T) -> T {
        if t == T::zero() {
            T::zero()
        } else {
            self.b_values[node] * t.powf(self.p - T::one())
        }
    }

    fn check(&self, domain: &CircleDomain<T>) {
        assert_eq!(self.b_values.len(), domain.n_grid(), "nonlinearity sampled on a different grid");
    }
}

/// Pointwise magnitudes `|ψ(s_j)|_g`.
pub(crate) fn magnitudes<T: Real>(geom: &LoopGeometry<T>, nodal: &DMatrix<Complex<T>>) -> Vec<T> {
    (0..nodal.nrows()).map(|j| geom.pair(j, nodal, nodal).re.max(T::zero()).sqrt()).collect()
}

/// `∫ K ds` by the trapezoidal rule.
pub fn k_value<T: Real>(nl: &Nonlinearity<T>, domain: &CircleDomain<T>, geom: &LoopGeometry<T>, psi: &SpinorField<T>) -> T {
    nl.check(domain);
    let nodal = domain.synthesize(psi);
    let p1 = nl.p + T::one();
    let mut s = T::zero();
    for (j, r) in magnitudes(geom, &nodal).into_iter().enumerate() {
        if r > T::zero() {
            s += nl.b_values[j] * r.powf(p1);
        }
    }
    s * domain.weight() / p1
}

/// Dual coefficients of `∇_ψK = b |ψ|^{p−1} ψ`: `⟨∇K, e_{k,i}⟩` per mode.
pub fn k_gradient<T: Real>(nl: &Nonlinearity<T>, domain: &CircleDomain<T>, geom: &LoopGeometry<T>, psi: &SpinorField<T>) -> SpinorField<T> {
    nl.check(domain);
    let nodal = domain.synthesize(psi);
    let r = magnitudes(geom, &nodal);
    let mut field = nodal;
    for (j, &rj) in r.iter().enumerate() {
        let f = nl.f(j, rj);
        for a in 0..field.ncols() {
            field[(j, a)] *= f;
        }
    }
    SpinorField { coeffs: domain.analyze(&geom.lower(&field)) }
}

/// Dual coefficients of the second derivative `∇²K(ψ)[η]`.
pub fn k_hessian_apply<T: Real>(
    nl: &Nonlinearity<T>,
    domain: &CircleDomain<T>,
    geom: &LoopGeometry<T>,
    psi: &SpinorField<T>,
    eta: &SpinorField<T>,
) -> SpinorField<T> {
    nl.check(domain);
    let pn = domain.synthesize(psi);
    let en = domain.synthesize(eta);
    let r = magnitudes(geom, &pn);
    let pm1 = nl.p - T::one();
    let mut field = DMatrix::from_element(pn.nrows(), pn.ncols(), Complex::new(T::zero(), T::zero()));
    for (j, &rj) in r.iter().enumerate() {
        if rj == T::zero() {
            continue;
        }
        let b = nl.b_values[j];
        let f = b * rj.powf(pm1);
        let c = b * pm1 * rj.powf(pm1 - T::lit(2.0)) * geom.pair(j, &pn, &en).re;
        for a in 0..pn.ncols() {
            field[(j, a)] = en[(j, a)] * f + pn[(j, a)] * c;
        }
    }
    SpinorField { coeffs: domain.analyze(&geom.lower(&field)) }
}

/// Real covector of [`k_gradient`] in `[Re; Im]` coordinates.
pub fn k_gradient_real<T: Real>(
    nl: &Nonlinearity<T>,
    domain: &CircleDomain<T>,
    geom: &LoopGeometry<T>,
    x: &DVector<T>,
) -> Result<DVector<T>, CircleError> {
    let psi = SpinorField::from_real(domain, x)?;
    Ok(dual_to_real(&k_gradient(nl, domain, geom, &psi).coeffs))
}

/// One sample violating a hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    pub hypothesis: &'static str,
    pub node: usize,
    pub magnitude: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub samples: usize,
    /// Growth constant of the second derivative bound `|∇²K| ≤ C₁(1 + |ψ|^{p−1})`.
    pub c1: f64,
    /// `C₂ = b_min (p−1)/(p+1)`.
    pub c2: f64,
    /// Smallest observed `(⟨∇K,ψ⟩ − 2K) − C₂|ψ|^{p+1}`.
    pub h2_min_slack: f64,
    pub subquadratic_warning: bool,
    pub large_exponent_warning: bool,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples nodes and magnitudes (including `ψ = 0`) and checks the growth,
/// superquadraticity, monotonicity and positivity hypotheses pointwise.
pub fn hypothesis_audit<T: Real>(nl: &Nonlinearity<T>, sample_count: usize, seed: u64) -> AuditReport {
    let p = nl.p.to_f64();
    let c2 = nl.b_min.to_f64() * (p - 1.0) / (p + 1.0);
    let c1 = p * nl.b_max.to_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut h2_min_slack = f64::INFINITY;
    let rel = 1e-12;
    for sample in 0..sample_count.max(1) {
        let node = rng.gen_range(0..nl.b_values.len());
        let r: f64 = if sample == 0 { 0.0 } else { 10f64.powf(rng.gen_range(-3.0..2.0)) };
        let b = nl.b_values[node].to_f64();
        let k = |t: f64| b * t.powf(p + 1.0) / (p + 1.0);
        let f = |t: f64| if t == 0.0 { 0.0 } else { b * t.powf(p - 1.0) };
        let mut fail = |hypothesis: &'static str, detail: String| {
            violations.push(AuditViolation { hypothesis, node, magnitude: r, detail });
        };

        // H1: |∇²K| = p b r^{p−1}
        let hess = p * b * r.powf(p - 1.0);
        if hess > c1 * (1.0 + r.powf(p - 1.0)) * (1.0 + rel) {
            fail("H1", format!("|hess K| = {hess:e} exceeds bound"));
        }
        // H2: ⟨∇K, ψ⟩ − 2K ≥ C₂ r^{p+1}
        let lhs = f(r) * r * r - 2.0 * k(r);
        let slack = lhs - c2 * r.powf(p + 1.0);
        h2_min_slack = h2_min_slack.min(slack);
        if slack < -rel * lhs.abs().max(f64::MIN_POSITIVE) {
            fail("H2", format!("slack {slack:e}"));
        }
        // H3: f increasing, f(0) = 0
        if f(0.0) != 0.0 || (r > 0.0 && !(f(r * 1.5) > f(r))) {
            fail("H3", "f not increasing".into());
        }
        // H4: K ≥ 0 and K(λψ)/λ² increasing in λ
        if k(r) < 0.0 {
            fail("H4", "negative K".into());
        }
        if r > 0.0 {
            let ratios: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|l| k(l * r) / (l * l)).collect();
            if !(ratios[0] < ratios[1] && ratios[1] < ratios[2]) {
                fail("H4", format!("growth ratios {ratios:?}"));
            }
        }
    }
    AuditReport {
        samples: sample_count.max(1),
        c1,
        c2,
        h2_min_slack,
        subquadratic_warning: nl.subquadratic_warning(),
        large_exponent_warning: nl.large_exponent_warning(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Chart, LoopMap};
    use super::*;
    use std::f64::consts::PI;

    fn flat(d: &CircleDomain<f64>) -> LoopGeometry<f64> {
        let phi = LoopMap::geodesic(Chart::FlatTorus(d.n_fiber()), vec![0; d.n_fiber()], 1).unwrap();
        LoopGeometry::evaluate(d, &phi).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Nonlinearity::<f64>::new(1.0, vec![1.0]).is_err());
        assert!(Nonlinearity::<f64>::new(3.0, vec![1.0, 0.0]).is_err());
        let nl = Nonlinearity::<f64>::new(2.0, vec![1.0]).unwrap();
        assert!(nl.subquadratic_warning() && !nl.large_exponent_warning());
    }

    #[test]
    fn single_mode_value_and_gradient() {
        let d = CircleDomain::<f64>::new(4, 1, 32).unwrap();
        let g = flat(&d);
        let nl = Nonlinearity::constant(&d, 3.0, 1.0).unwrap();
        assert_eq!(k_value(&nl, &d, &g, &SpinorField::zeros(&d)), 0.0);
        let t = 0.8;
        let psi = SpinorField::single_mode(&d, 3, 0, Complex::new(t, 0.0)).unwrap();
        let v = k_value(&nl, &d, &g, &psi);
        assert!((v - 2.0 * PI * t.powi(4) / 4.0).abs() < 1e-13);
        let grad = k_gradient(&nl, &d, &g, &psi);
        let expect = psi.scaled(t * t);
        assert!((grad.coeffs - expect.coeffs).norm() < 1e-13);
    }

    #[test]
    fn value_matches_refined_quadrature() {
        let coarse = CircleDomain::<f64>::new(4, 1, 16).unwrap();
        let fine = CircleDomain::<f64>::new(4, 1, 256).unwrap();
        let mk = |d: &CircleDomain<f64>| {
            let mut s = SpinorField::zeros(d);
            s.coeffs[(4, 0)] = Complex::new(0.6, 0.1);
            s.coeffs[(2, 0)] = Complex::new(-0.2, 0.3);
            s
        };
        let v = |d: &CircleDomain<f64>| {
            let nl = Nonlinearity::constant(d, 3.0, 1.0).unwrap();
            k_value(&nl, d, &flat(d), &mk(d))
        };
        assert!((v(&coarse) - v(&fine)).abs() < 1e-8);
    }

    #[test]
    fn power_form_identity() {
        let d = CircleDomain::<f64>::new(2, 1, 8).unwrap();
        let nl = Nonlinearity::constant(&d, 3.0, 1.0).unwrap();
        let rep = hypothesis_audit(&nl, 200, 1);
        assert!(rep.passed());
        assert!((rep.c2 - 0.5).abs() < 1e-15);
        assert!(rep.h2_min_slack.abs() < 1e-6);
    }

    #[test]
    fn audit_variable_b() {
        let d = CircleDomain::<f64>::new(4, 1, 32).unwrap();
        let nl = Nonlinearity::from_fn(&d, 2.5, |s| 1.0 + 0.5 * s.cos()).unwrap();
        let rep = hypothesis_audit(&nl, 1000, 9);
        assert!(rep.passed(), "{:?}", rep.violations);
        assert!((rep.c2 - 0.5 * 1.5 / 3.5).abs() < 1e-3);
    }
}
