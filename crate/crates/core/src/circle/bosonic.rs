//! Bosonic energy `½∫|φ̇|²_g` and the derivative of the total energy with
//! respect to the periodic loop coefficients.

use super::nonlinearity::magnitudes;
use super::{dirac_apply_nodal, CircleDomain, CircleError, LoopGeometry, LoopMap, Nonlinearity, SpinorField};
use crate::num::Real;
use nalgebra::{Complex, DMatrix};

/// `½ ∫ g(φ̇, φ̇) ds`.
pub fn phi_energy<T: Real>(domain: &CircleDomain<T>, geom: &LoopGeometry<T>) -> T {
    let n = geom.velocities.ncols();
    let mut s = T::zero();
    for j in 0..geom.n_nodes() {
        let v = geom.velocities.row(j);
        match &geom.metric {
            None => s += v.norm_squared(),
            Some(g) => {
                for a in 0..n {
                    for b in 0..n {
                        s += g[j][(a, b)] * v[a] * v[b];
                    }
                }
            }
        }
    }
    s * domain.weight() / T::lit(2.0)
}

/// Nodal covector `N_c(s)` with `dE[δφ] = ∫ N_c δφ^c ds`, for variations of
/// `φ` at fixed coordinate components of `ψ`.
///
/// It is the covariant first variation (geodesic term, curvature coupling,
/// no `∇_φK` for the power form) plus the term coming from the fact that
/// fixed coordinates are not parallel along the variation:
/// `Re g(D_φψ − ∇K, Γ(δφ, ψ))`.
fn nodal_covector<T: Real>(
    domain: &CircleDomain<T>,
    geom: &LoopGeometry<T>,
    psi: &SpinorField<T>,
    nl: &Nonlinearity<T>,
) -> Result<DMatrix<T>, CircleError> {
    let n = domain.n_fiber();
    let nodes = geom.n_nodes();
    let (vel, acc) = (&geom.velocities, &geom.accelerations);
    let (Some(metric), Some(gamma)) = (geom.metric.as_ref(), geom.christoffel.as_ref()) else {
        return Ok(-acc.clone());
    };
    let curvature = geom.curvature.as_ref().ok_or(CircleError::MissingCurvature)?;
    let sigma = domain.clifford_sign();

    let nodal = domain.synthesize(psi);
    let dpsi = dirac_apply_nodal(domain, geom, psi);
    let r = magnitudes(geom, &nodal);
    let mut res = dpsi;
    for j in 0..nodes {
        let f = nl.f(j, r[j]);
        for a in 0..n {
            res[(j, a)] -= nodal[(j, a)] * f;
        }
    }
    let lowered_res = geom.lower(&res);

    let mut out = DMatrix::zeros(nodes, n);
    for j in 0..nodes {
        let (g, gam, rie) = (&metric[j], &gamma[j], &curvature[j]);
        // σ i conj(ψ^e) ψ^b, real part
        let bil = DMatrix::from_fn(n, n, |e, b| (Complex::new(T::zero(), sigma) * nodal[(j, e)].conj() * nodal[(j, b)]).re);
        for c in 0..n {
            let mut kin = T::zero();
            for a in 0..n {
                let mut accel = acc[(j, a)];
                for b in 0..n {
                    for d in 0..n {
                        accel += gam.get(a, b, d) * vel[(j, b)] * vel[(j, d)];
                    }
                }
                kin -= g[(c, a)] * accel;
            }
            let mut curv = T::zero();
            for e in 0..n {
                for b in 0..n {
                    if bil[(e, b)] == T::zero() {
                        continue;
                    }
                    for d in 0..n {
                        let mut r_lower = T::zero();
                        for a in 0..n {
                            r_lower += g[(e, a)] * rie.get(a, b, c, d);
                        }
                        curv += r_lower * vel[(j, d)] * bil[(e, b)];
                    }
                }
            }
            let mut frame = T::zero();
            for b in 0..n {
                let mut transported = Complex::new(T::zero(), T::zero());
                for l in 0..n {
                    transported += nodal[(j, l)] * gam.get(b, c, l);
                }
                frame += (lowered_res[(j, b)].conj() * transported).re;
            }
            out[(j, c)] = kin + curv / T::lit(2.0) + frame;
        }
    }
    Ok(out)
}

/// Derivative of the total energy with respect to each periodic loop
/// coefficient, at fixed spinor mode coefficients (`(2M+1) × n`).
pub fn phi_dual<T: Real>(
    domain: &CircleDomain<T>,
    phi: &LoopMap<T>,
    geom: &LoopGeometry<T>,
    psi: &SpinorField<T>,
    nl: &Nonlinearity<T>,
) -> Result<DMatrix<T>, CircleError> {
    let cov = nodal_covector(domain, geom, psi, nl)?;
    let w = domain.weight();
    let rows = phi.coeffs().nrows();
    let mut dual = DMatrix::zeros(rows, domain.n_fiber());
    for r in 0..rows {
        let m = phi.row_mode(r);
        for (j, &s) in domain.nodes().iter().enumerate() {
            let b = LoopMap::<T>::basis(m, s).0 * w;
            for c in 0..domain.n_fiber() {
                dual[(r, c)] += cov[(j, c)] * b;
            }
        }
    }
    Ok(dual)
}

/// Riesz map of the `H¹` inner product on the periodic part: row `m` is
/// divided by `‖β_m‖²(1 + m²)`.
pub fn phi_precondition<T: Real>(dual: &DMatrix<T>) -> DMatrix<T> {
    let m_phi = (dual.nrows() - 1) / 2;
    DMatrix::from_fn(dual.nrows(), dual.ncols(), |r, c| {
        let m = r as i64 - m_phi as i64;
        let mf = T::lit(m as f64);
        dual[(r, c)] / (LoopMap::<T>::basis_norm_squared(m) * (T::one() + mf * mf))
    })
}

/// Preconditioned `φ`-gradient `(−Δ+1)⁻¹(−∇ₛφ̇ + ½R⟨ψ, φ̇·ψ⟩ − ∇_φK)`, expressed
/// as periodic loop coefficients.
pub fn phi_gradient<T: Real>(
    domain: &CircleDomain<T>,
    phi: &LoopMap<T>,
    geom: &LoopGeometry<T>,
    psi: &SpinorField<T>,
    nl: &Nonlinearity<T>,
) -> Result<DMatrix<T>, CircleError> {
    Ok(phi_precondition(&phi_dual(domain, phi, geom, psi, nl)?))
}

#[cfg(test)]
mod tests {
    use super::super::{assemble_twisted_dirac, k_value, Chart};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn total(d: &CircleDomain<f64>, phi: &LoopMap<f64>, psi: &SpinorField<f64>, nl: &Nonlinearity<f64>) -> f64 {
        let geom = LoopGeometry::evaluate(d, phi).unwrap();
        let (m, _) = assemble_twisted_dirac(d, phi).unwrap().realified();
        let x = psi.to_real();
        phi_energy(d, &geom) + 0.5 * (x.transpose() * m * &x)[(0, 0)] - k_value(nl, d, &geom, psi)
    }

    #[test]
    fn winding_energy() {
        let d = CircleDomain::<f64>::new(2, 1, 8).unwrap();
        let phi = LoopMap::geodesic(Chart::FlatTorus(1), vec![2], 2).unwrap();
        let e = phi_energy(&d, &LoopGeometry::evaluate(&d, &phi).unwrap());
        assert!((e - 4.0 * PI).abs() < 1e-13);
        let mut wiggle = LoopMap::geodesic(Chart::FlatTorus(1), vec![1], 2).unwrap();
        wiggle.coeffs_mut()[(4, 0)] = 0.3; // 0.3 cos 2s
        let e = phi_energy(&d, &LoopGeometry::evaluate(&d, &wiggle).unwrap());
        assert!((e - (PI + 0.5 * 4.0 * 0.09 * PI)).abs() < 1e-13);
    }

    #[test]
    fn flat_gradient_scaling() {
        let d = CircleDomain::<f64>::new(4, 1, 16).unwrap();
        let nl = Nonlinearity::constant(&d, 3.0, 1.0).unwrap();
        let psi = SpinorField::zeros(&d);
        let geo = LoopMap::geodesic(Chart::FlatTorus(1), vec![3], 3).unwrap();
        let g = phi_gradient(&d, &geo, &LoopGeometry::evaluate(&d, &geo).unwrap(), &psi, &nl).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
        let mut one = geo.clone();
        one.coeffs_mut()[(1, 0)] = 0.7; // m = −2
        let g = phi_gradient(&d, &one, &LoopGeometry::evaluate(&d, &one).unwrap(), &psi, &nl).unwrap();
        assert!((g[(1, 0)] - 0.7 * 4.0 / 5.0).abs() < 1e-12);
        assert!(g.iter().enumerate().all(|(i, v)| i == 1 || v.abs() < 1e-12));
    }

    #[test]
    fn sphere_dual_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = CircleDomain::<f64>::new(3, 2, 96).unwrap();
        let nl = Nonlinearity::from_fn(&d, 2.5, |s| 1.0 + 0.5 * s.cos()).unwrap();
        let coeffs = DMatrix::from_fn(5, 2, |_, _| 0.3 * rng.gen_range(-1.0..1.0));
        let phi = LoopMap::new(Chart::round_sphere2(), vec![0, 0], coeffs).unwrap();
        let psi =
            SpinorField::from_coeffs(&d, DMatrix::from_fn(6, 2, |_, _| Complex::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))))
                .unwrap();
        let geom = LoopGeometry::evaluate(&d, &phi).unwrap();
        let dual = phi_dual(&d, &phi, &geom, &psi, &nl).unwrap();
        let u = phi.to_vec();
        let h = 1e-5;
        let mut err = 0.0f64;
        for i in 0..u.len() {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += h;
            um[i] -= h;
            let fd = (total(&d, &phi.with_vec(&up), &psi, &nl) - total(&d, &phi.with_vec(&um), &psi, &nl)) / (2.0 * h);
            err = err.max((fd - dual[(i / 2, i % 2)]).abs());
        }
        assert!(err <= 1e-4 * dual.norm(), "err {err} vs {}", dual.norm());
    }

    #[test]
    fn missing_curvature_is_rejected() {
        let base = super::super::MetricChart::<f64>::round_sphere2();
        let chart = Chart::Metric(super::super::MetricChart::new(
            "no_curvature",
            2,
            {
                let b = base.clone();
                move |y: &[f64]| Chart::Metric(b.clone()).metric(y)
            },
            move |y: &[f64]| Chart::Metric(base.clone()).christoffel(y),
        ));
        let d = CircleDomain::<f64>::new(2, 2, 16).unwrap();
        let nl = Nonlinearity::constant(&d, 3.0, 1.0).unwrap();
        let phi = LoopMap::geodesic(chart, vec![0, 0], 1).unwrap();
        let geom = LoopGeometry::evaluate(&d, &phi).unwrap();
        let r = phi_gradient(&d, &phi, &geom, &SpinorField::zeros(&d), &nl);
        assert_eq!(r.unwrap_err(), CircleError::MissingCurvature);
    }
}
