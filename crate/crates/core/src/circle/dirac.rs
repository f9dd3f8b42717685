//! Twisted Dirac operator `D_φ ψ = σ i (∂ₛψ + Γ(φ)(φ̇, ψ))` in the mode basis.
//!
//! Matrix entries are `⟨e_{k,i}, D_φ e_{k',j}⟩_g`, computed from discrete
//! Fourier coefficients of the nodal fields `g_ij(φ(s))` and
//! `A_ij = g_il Γ^l_mj φ̇^m`:
//!
//! ```text
//! M = −σ k' ĝ_ij[k − k'] + σ i Â_ij[k − k'],    G = ĝ_ij[k − k'].
//! ```

use super::{CircleDomain, CircleError, LoopGeometry, LoopMap, SpinorField};
use crate::num::Real;
use crate::spectral::realify;
use nalgebra::{Complex, DMatrix};

/// Operator matrix with its Gram matrix (`None` for the identity).
#[derive(Debug, Clone)]
pub struct DiracPair<T: Real> {
    pub matrix: DMatrix<Complex<T>>,
    pub gram: Option<DMatrix<Complex<T>>>,
}

impl<T: Real> DiracPair<T> {
    /// Real symmetric forms acting on `[Re c; Im c]`.
    pub fn realified(&self) -> (DMatrix<T>, Option<DMatrix<T>>) {
        (realify(&self.matrix), self.gram.as_ref().map(realify))
    }
}

/// `D₀ ⊗ I`: diagonal with entry `−σk` on every `(k, i)`.
pub fn untwisted_dirac<T: Real>(domain: &CircleDomain<T>) -> DMatrix<Complex<T>> {
    let n = domain.n_fiber();
    let sigma = domain.clifford_sign();
    let mut m = DMatrix::from_element(domain.complex_dim(), domain.complex_dim(), Complex::new(T::zero(), T::zero()));
    for (q, &k) in domain.modes().iter().enumerate() {
        for i in 0..n {
            m[(q * n + i, q * n + i)] = Complex::new(-sigma * k, T::zero());
        }
    }
    m
}

/// `F̂[d] = (1/N) Σ_j F(s_j) e^{−i d s_j}` for `d ∈ −(2K−1)..=(2K−1)`,
/// stored at offset `d + 2K − 1`.
fn nodal_fourier<T: Real>(domain: &CircleDomain<T>, field: &[DMatrix<T>]) -> Vec<DMatrix<Complex<T>>> {
    let n = domain.n_fiber();
    let span = 2 * domain.k_max() - 1;
    let inv_n = T::one() / T::from_count(domain.n_grid());
    (0..=2 * span)
        .map(|off| {
            let d = T::lit(off as f64 - span as f64);
            let mut acc = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
            for (j, &s) in domain.nodes().iter().enumerate() {
                let (sn, cs) = (d * s).sin_cos();
                let ph = Complex::new(cs * inv_n, -sn * inv_n);
                for a in 0..n {
                    for b in 0..n {
                        acc[(a, b)] += ph * field[j][(a, b)];
                    }
                }
            }
            acc
        })
        .collect()
}

/// Nodal connection field `A_ij = g_il Γ^l_mj φ̇^m`.
fn connection_field<T: Real>(geom: &LoopGeometry<T>) -> Option<Vec<DMatrix<T>>> {
    let (metric, gamma) = (geom.metric.as_ref()?, geom.christoffel.as_ref()?);
    let n = geom.velocities.ncols();
    Some(
        (0..geom.n_nodes())
            .map(|j| {
                let mut a = DMatrix::zeros(n, n);
                for i in 0..n {
                    for jj in 0..n {
                        let mut s = T::zero();
                        for l in 0..n {
                            for m in 0..n {
                                s += metric[j][(i, l)] * gamma[j].get(l, m, jj) * geom.velocities[(j, m)];
                            }
                        }
                        a[(i, jj)] = s;
                    }
                }
                a
            })
            .collect(),
    )
}

fn block_toeplitz<T: Real>(
    domain: &CircleDomain<T>,
    coeffs: &[DMatrix<Complex<T>>],
    mut entry: impl FnMut(usize, Complex<T>) -> Complex<T>,
) -> DMatrix<Complex<T>> {
    let n = domain.n_fiber();
    let nm = domain.mode_count();
    let span = 2 * domain.k_max() - 1;
    let mut out = DMatrix::from_element(nm * n, nm * n, Complex::new(T::zero(), T::zero()));
    for q in 0..nm {
        for qp in 0..nm {
            let c = &coeffs[q + span - qp];
            for i in 0..n {
                for j in 0..n {
                    out[(q * n + i, qp * n + j)] = entry(qp, c[(i, j)]);
                }
            }
        }
    }
    out
}

/// Matrix of the zeroth-order part `σ i A(φ̇)`; zero on flat targets.
pub fn assemble_connection<T: Real>(domain: &CircleDomain<T>, geom: &LoopGeometry<T>) -> DMatrix<Complex<T>> {
    let dim = domain.complex_dim();
    match connection_field(geom) {
        None => DMatrix::from_element(dim, dim, Complex::new(T::zero(), T::zero())),
        Some(a) => {
            let sigma = domain.clifford_sign();
            let ahat = nodal_fourier(domain, &a);
            block_toeplitz(domain, &ahat, |_, c| Complex::new(T::zero(), sigma) * c)
        }
    }
}

/// Assembles `D_φ` and the Gram matrix of the fiber metric along `φ`.
pub fn assemble_twisted_dirac<T: Real>(domain: &CircleDomain<T>, phi: &LoopMap<T>) -> Result<DiracPair<T>, CircleError> {
    let geom = LoopGeometry::evaluate(domain, phi)?;
    Ok(assemble_from_geometry(domain, &geom))
}

pub(crate) fn assemble_from_geometry<T: Real>(domain: &CircleDomain<T>, geom: &LoopGeometry<T>) -> DiracPair<T> {
    let Some(metric) = geom.metric.as_ref() else {
        return DiracPair { matrix: untwisted_dirac(domain), gram: None };
    };
    let sigma = domain.clifford_sign();
    let ghat = nodal_fourier(domain, metric);
    let modes = domain.modes();
    let kinetic = block_toeplitz(domain, &ghat, |qp, c| c * (-sigma * modes[qp]));
    let gram = block_toeplitz(domain, &ghat, |_, c| c);
    let matrix = kinetic + assemble_connection(domain, geom);
    DiracPair { matrix, gram: Some(gram) }
}

/// Relative Frobenius defect `‖M − M*‖ / ‖M‖` of the operator matrix, i.e.
/// the failure of `D_φ` to be self-adjoint in the Gram pairing.
pub fn gram_hermiticity_defect<T: Real>(pair: &DiracPair<T>) -> T {
    let m = &pair.matrix;
    let scale = m.norm();
    if scale == T::zero() {
        return T::zero();
    }
    (m - m.adjoint()).norm() / scale
}

/// Nodal values of `D_φψ` (`n_grid × n`).
pub fn dirac_apply_nodal<T: Real>(domain: &CircleDomain<T>, geom: &LoopGeometry<T>, psi: &SpinorField<T>) -> DMatrix<Complex<T>> {
    let mut d = domain.synthesize_derivative(psi);
    if let Some(gamma) = geom.christoffel.as_ref() {
        let nodal = domain.synthesize(psi);
        let n = domain.n_fiber();
        for j in 0..geom.n_nodes() {
            for a in 0..n {
                let mut s = Complex::new(T::zero(), T::zero());
                for m in 0..n {
                    let v = geom.velocities[(j, m)];
                    if v == T::zero() {
                        continue;
                    }
                    for l in 0..n {
                        s += nodal[(j, l)] * (gamma[j].get(a, m, l) * v);
                    }
                }
                d[(j, a)] += s;
            }
        }
    }
    let factor = Complex::new(T::zero(), domain.clifford_sign());
    d.map(|z| z * factor)
}
