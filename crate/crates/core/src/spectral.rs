//! Spectral calculus for a self-adjoint operator on a finite truncation.
//!
//! A [`SpectralModel`] stores the generalized eigendecomposition
//! `L b = λ G b` of an operator matrix `L` against a Gram matrix `G` (the
//! W-inner product). Eigenvectors are `G`-orthonormal, so in eigen
//! coordinates the W-inner product is Euclidean and `L` is diagonal. All
//! split/norm operations work on eigen coordinates through [`SplitVector`].
//!
//! The V-norm weighs mode `i` by `|λ_i|`; modes classified as kernel
//! (`|λ| <= kernel_tolerance`) get weight one so the norm stays definite.

use crate::num::Real;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("empty operator (dimension 0)")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("operator is not symmetric: relative defect {defect:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { defect: f64, tolerance: f64 },
    #[error("gram matrix is not symmetric positive definite: pivot {pivot} is {value:.3e}")]
    GramNotPositive { pivot: usize, value: f64 },
    #[error("shift must be positive, got {0}")]
    NonPositiveShift(f64),
    #[error("non-finite entry in operator")]
    NonFinite,
}

/// Sign class of a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Minus,
    Zero,
    Plus,
}

#[derive(Debug, Clone)]
pub struct SpectralModel<T: Real> {
    eigenvalues: DVector<T>,
    basis: DMatrix<T>,
    gram: Option<DMatrix<T>>,
    signs: Vec<Sign>,
    index_plus: Vec<usize>,
    index_minus: Vec<usize>,
    index_zero: Vec<usize>,
    kernel_tolerance: T,
    operator_norm: T,
}

/// Relative symmetry defect `‖A − Aᵀ‖_F / max(‖A‖_F, 1)`.
pub fn symmetry_defect<T: Real>(a: &DMatrix<T>) -> T {
    let n = a.nrows();
    let mut num = T::zero();
    for i in 0..n {
        for j in 0..n {
            let d = a[(i, j)] - a[(j, i)];
            num += d * d;
        }
    }
    num.sqrt() / a.norm().max(T::one())
}

/// Index of the first non-positive pivot of an (assumed symmetric) matrix,
/// together with the offending value. `None` when the matrix is SPD.
fn first_bad_pivot<T: Real>(a: &DMatrix<T>) -> Option<(usize, T)> {
    let n = a.nrows();
    let mut l = DMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return Some((j, d));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    None
}

/// Generalized eigendecomposition of `operator` against `gram`.
///
/// `kernel_tolerance = None` selects `1e-8 · max|λ|`.
pub fn build_spectral_model<T: Real>(
    operator: &DMatrix<T>,
    gram: Option<&DMatrix<T>>,
    kernel_tolerance: Option<T>,
) -> Result<SpectralModel<T>, SpectralError> {
    let n = operator.nrows();
    if n == 0 {
        return Err(SpectralError::Empty);
    }
    if operator.ncols() != n {
        return Err(SpectralError::Dimension { expected: n, got: operator.ncols() });
    }
    if operator.iter().any(|x| !x.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let sym_tol = T::tol(1e-10);
    let defect = symmetry_defect(operator);
    if defect > sym_tol {
        return Err(SpectralError::NotSymmetric { defect: defect.to_f64(), tolerance: sym_tol.to_f64() });
    }
    let sym = (operator + operator.transpose()) * T::lit(0.5);

    let (eigenvalues, basis) = match gram {
        None => {
            let eig = sym.symmetric_eigen();
            (eig.eigenvalues, eig.eigenvectors)
        }
        Some(g) => {
            if g.nrows() != n || g.ncols() != n {
                return Err(SpectralError::Dimension { expected: n, got: g.nrows() });
            }
            let gdef = symmetry_defect(g);
            if gdef > sym_tol {
                return Err(SpectralError::NotSymmetric { defect: gdef.to_f64(), tolerance: sym_tol.to_f64() });
            }
            let gsym = (g + g.transpose()) * T::lit(0.5);
            let chol = match gsym.clone().cholesky() {
                Some(c) => c,
                None => {
                    let (pivot, value) = first_bad_pivot(&gsym).unwrap_or((0, T::zero()));
                    return Err(SpectralError::GramNotPositive { pivot, value: value.to_f64() });
                }
            };
            let l = chol.l();
            // C = L⁻¹ S L⁻ᵀ
            let linv_s = l.solve_lower_triangular(&sym).expect("cholesky factor is nonsingular");
            let c = l.solve_lower_triangular(&linv_s.transpose()).expect("cholesky factor is nonsingular");
            let c = (&c + c.transpose()) * T::lit(0.5);
            let eig = c.symmetric_eigen();
            let b = l.transpose().solve_upper_triangular(&eig.eigenvectors).expect("cholesky factor is nonsingular");
            (eig.eigenvalues, b)
        }
    };

    // ascending order; ties broken by original index for determinism
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigenvalues[i].partial_cmp(&eigenvalues[j]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eigenvalues[i]));
    let mut sorted = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted.set_column(dst, &basis.column(src));
    }

    let max_abs = eigenvalues.iter().fold(T::zero(), |m, &l| m.max(l.abs()));
    let kernel_tolerance = kernel_tolerance.unwrap_or_else(|| T::lit(1e-8) * max_abs);
    let mut signs = Vec::with_capacity(n);
    let (mut index_plus, mut index_minus, mut index_zero) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &l) in eigenvalues.iter().enumerate() {
        let s = if l.abs() <= kernel_tolerance {
            index_zero.push(i);
            Sign::Zero
        } else if l > T::zero() {
            index_plus.push(i);
            Sign::Plus
        } else {
            index_minus.push(i);
            Sign::Minus
        };
        signs.push(s);
    }

    Ok(SpectralModel {
        eigenvalues,
        basis: sorted,
        gram: gram.map(|g| (g + g.transpose()) * T::lit(0.5)),
        signs,
        index_plus,
        index_minus,
        index_zero,
        kernel_tolerance,
        operator_norm: operator.norm(),
    })
}

impl<T: Real> SpectralModel<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    /// Eigenvector matrix, columns `G`-orthonormal.
    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    pub fn gram(&self) -> Option<&DMatrix<T>> {
        self.gram.as_ref()
    }

    pub fn index_plus(&self) -> &[usize] {
        &self.index_plus
    }

    pub fn index_minus(&self) -> &[usize] {
        &self.index_minus
    }

    pub fn index_zero(&self) -> &[usize] {
        &self.index_zero
    }

    pub fn sign(&self, i: usize) -> Sign {
        self.signs[i]
    }

    pub fn kernel_tolerance(&self) -> T {
        self.kernel_tolerance
    }

    pub fn has_kernel(&self) -> bool {
        !self.index_zero.is_empty()
    }

    /// Smallest `|λ|` over non-kernel modes.
    pub fn spectral_gap(&self) -> T {
        self.eigenvalues
            .iter()
            .zip(&self.signs)
            .filter(|(_, s)| **s != Sign::Zero)
            .fold(T::max_value().unwrap_or(T::lit(f64::MAX)), |m, (l, _)| m.min(l.abs()))
    }

    /// V-norm weight of mode `i`: `|λ_i|`, or 1 on the kernel.
    pub fn weight(&self, i: usize) -> T {
        match self.signs[i] {
            Sign::Zero => T::one(),
            _ => self.eigenvalues[i].abs(),
        }
    }

    /// Eigen coordinates `a = Bᵀ G x` of a vector given in the original basis.
    pub fn coords(&self, x: &DVector<T>) -> DVector<T> {
        match &self.gram {
            Some(g) => self.basis.tr_mul(&(g * x)),
            None => self.basis.tr_mul(x),
        }
    }

    /// Original-basis vector `x = B a`.
    pub fn synthesize(&self, a: &DVector<T>) -> DVector<T> {
        &self.basis * a
    }

    /// Eigen components `Bᵀ d` of a covector (derivative) given in the
    /// original basis.
    pub fn dual_coords(&self, d: &DVector<T>) -> DVector<T> {
        self.basis.tr_mul(d)
    }

    /// Wraps eigen coordinates, checking the length.
    pub fn vector(&self, coeffs: DVector<T>) -> Result<SplitVector<'_, T>, SpectralError> {
        if coeffs.len() != self.dim() {
            return Err(SpectralError::Dimension { expected: self.dim(), got: coeffs.len() });
        }
        Ok(SplitVector { model: self, coeffs })
    }

    /// Largest eigen-reconstruction residual `‖L b − λ G b‖ / ‖L‖` over
    /// all pairs, evaluated against `operator`.
    pub fn reconstruction_residual(&self, operator: &DMatrix<T>) -> T {
        let norm = self.operator_norm.max(T::one());
        let mut worst = T::zero();
        for i in 0..self.dim() {
            let b = self.basis.column(i).into_owned();
            let lb = operator * &b;
            let gb = match &self.gram {
                Some(g) => g * &b,
                None => b.clone(),
            };
            let r = (lb - gb * self.eigenvalues[i]).norm() / norm;
            worst = worst.max(r);
        }
        worst
    }

    /// `Bᵀ G B − I` in Frobenius norm.
    pub fn orthonormality_defect(&self) -> T {
        let gb = match &self.gram {
            Some(g) => g * &self.basis,
            None => self.basis.clone(),
        };
        let m = self.basis.tr_mul(&gb);
        (m - DMatrix::<T>::identity(self.dim(), self.dim())).norm()
    }
}

/// Eigen-coordinate vector bound to its model.
#[derive(Debug, Clone)]
pub struct SplitVector<'m, T: Real> {
    model: &'m SpectralModel<T>,
    coeffs: DVector<T>,
}

impl<'m, T: Real> SplitVector<'m, T> {
    pub fn model(&self) -> &'m SpectralModel<T> {
        self.model
    }

    pub fn coeffs(&self) -> &DVector<T> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<T> {
        self.coeffs
    }

    fn masked(&self, keep: Sign) -> SplitVector<'m, T> {
        let coeffs = DVector::from_iterator(
            self.coeffs.len(),
            self.coeffs.iter().enumerate().map(|(i, &a)| if self.model.signs[i] == keep { a } else { T::zero() }),
        );
        SplitVector { model: self.model, coeffs }
    }

    pub fn plus(&self) -> SplitVector<'m, T> {
        self.masked(Sign::Plus)
    }

    pub fn minus(&self) -> SplitVector<'m, T> {
        self.masked(Sign::Minus)
    }

    pub fn zero_part(&self) -> SplitVector<'m, T> {
        self.masked(Sign::Zero)
    }

    /// `(v⁺, v⁻, v⁰)`.
    pub fn split(&self) -> (SplitVector<'m, T>, SplitVector<'m, T>, SplitVector<'m, T>) {
        (self.plus(), self.minus(), self.zero_part())
    }

    /// `⟨v, w⟩_V = Σ weight_i v_i w_i`, summed in index order.
    pub fn v_inner(&self, other: &SplitVector<'_, T>) -> T {
        let mut s = T::zero();
        for i in 0..self.coeffs.len() {
            s += self.model.weight(i) * self.coeffs[i] * other.coeffs[i];
        }
        s
    }

    pub fn v_norm_squared(&self) -> T {
        self.v_inner(self)
    }

    pub fn v_norm(&self) -> T {
        self.v_norm_squared().sqrt()
    }

    /// W-norm (Euclidean in eigen coordinates).
    pub fn w_norm(&self) -> T {
        self.coeffs.norm()
    }

    /// `⟨Lv, v⟩ = Σ λ_i a_i²`.
    pub fn quadratic_form(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.coeffs.len() {
            s += self.model.eigenvalues[i] * self.coeffs[i] * self.coeffs[i];
        }
        s
    }

    /// `a_i ↦ a_i / (shift + |λ_i|)`.
    pub fn apply_inverse_precond(&self, shift: T) -> Result<SplitVector<'m, T>, SpectralError> {
        if !(shift > T::zero()) {
            return Err(SpectralError::NonPositiveShift(shift.to_f64()));
        }
        let coeffs = DVector::from_iterator(
            self.coeffs.len(),
            self.coeffs.iter().zip(self.model.eigenvalues.iter()).map(|(&a, &l)| a / (shift + l.abs())),
        );
        Ok(SplitVector { model: self.model, coeffs })
    }
}

pub type Parts<'m, T> = (SplitVector<'m, T>, SplitVector<'m, T>, SplitVector<'m, T>);

/// Convenience: `(v⁺, v⁻, v⁰)` for raw eigen coordinates.
pub fn split<'m, T: Real>(v: &DVector<T>, model: &'m SpectralModel<T>) -> Result<Parts<'m, T>, SpectralError> {
    Ok(model.vector(v.clone())?.split())
}

/// Realifies a hermitian operator on `ℂⁿ` into the symmetric operator on
/// `ℝ²ⁿ` acting on `[Re c; Im c]`, preserving `Re(c^H M c')`.
pub fn realify<T: Real>(m: &DMatrix<nalgebra::Complex<T>>) -> DMatrix<T> {
    let n = m.nrows();
    let mut r = DMatrix::<T>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            r[(i, j)] = z.re;
            r[(i, n + j)] = -z.im;
            r[(n + i, j)] = z.im;
            r[(n + i, n + j)] = z.re;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn diagonal_model_sorts_and_classifies() {
        let m = build_spectral_model(&diag(&[2.0, -3.0]), None, Some(1e-12)).unwrap();
        assert_eq!(m.eigenvalues().as_slice(), &[-3.0, 2.0]);
        assert_eq!(m.index_minus(), &[0]);
        assert_eq!(m.index_plus(), &[1]);
        assert!(m.index_zero().is_empty());
    }

    #[test]
    fn exact_zero_mode_is_kernel() {
        let m = build_spectral_model(&diag(&[0.0, 1.0]), None, Some(1e-8)).unwrap();
        assert_eq!(m.index_zero(), &[0]);
        assert_eq!(m.index_plus(), &[1]);
    }

    #[test]
    fn rejects_nonsymmetric_and_bad_gram() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(build_spectral_model(&a, None, None), Err(SpectralError::NotSymmetric { .. })));
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        let err = build_spectral_model(&DMatrix::identity(3, 3), Some(&g), None).unwrap_err();
        assert_eq!(err, SpectralError::GramNotPositive { pivot: 2, value: -3.0 });
        assert_eq!(build_spectral_model(&DMatrix::<f64>::zeros(0, 0), None, None).unwrap_err(), SpectralError::Empty);
    }

    #[test]
    fn split_examples() {
        let m = build_spectral_model(&diag(&[2.0, -3.0]), None, Some(1e-12)).unwrap();
        // eigen order is (-3, 2), so e₀ is the negative mode
        let (p, n, _) = split(&DVector::from_row_slice(&[1.0, 0.0]), &m).unwrap();
        assert_eq!(n.coeffs().as_slice(), &[1.0, 0.0]);
        assert_eq!(p.coeffs().as_slice(), &[0.0, 0.0]);
        let v = m.vector(DVector::from_row_slice(&[1.0, 1.0])).unwrap();
        assert_eq!(v.plus().coeffs().as_slice(), &[0.0, 1.0]);
        assert_eq!(v.minus().coeffs().as_slice(), &[1.0, 0.0]);
        assert_eq!(v.quadratic_form(), -1.0);
        assert_eq!(v.plus().v_norm_squared() - v.minus().v_norm_squared(), -1.0);
        assert!(m.vector(DVector::zeros(3)).is_err());
    }

    #[test]
    fn norms_and_preconditioner() {
        let m = build_spectral_model(&diag(&[4.0, 0.0, 1.0]), None, Some(1e-8)).unwrap();
        // eigen order (0, 1, 4)
        let e4 = m.vector(DVector::from_row_slice(&[0.0, 0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(e4.v_norm(), 2.0);
        let k = m.vector(DVector::from_row_slice(&[3.0, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(k.v_norm(), 3.0);
        assert_eq!(k.quadratic_form(), 0.0);
        assert_eq!(k.apply_inverse_precond(1.0).unwrap().coeffs()[0], 3.0);
        let e1 = m.vector(DVector::from_row_slice(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(e1.apply_inverse_precond(1.0).unwrap().coeffs()[1], 0.5);
        assert!(e1.apply_inverse_precond(0.0).is_err());
    }

    #[test]
    fn gram_weighted_problem_is_g_orthonormal() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, -1.0, 0.5, 0.0, 0.5, 0.3]);
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let m = build_spectral_model(&a, Some(&g), None).unwrap();
        assert!(m.orthonormality_defect() < 1e-12);
        assert!(m.reconstruction_residual(&a) < 1e-12);
        let x = DVector::from_row_slice(&[0.3, -1.2, 0.7]);
        let back = m.synthesize(&m.coords(&x));
        assert!((back - x).norm() < 1e-12);
    }

    #[test]
    fn realified_hermitian_has_doubled_spectrum() {
        use nalgebra::Complex;
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[Complex::new(1.0f64, 0.0), Complex::new(0.5, -0.25), Complex::new(0.5, 0.25), Complex::new(-2.0, 0.0)],
        );
        let r = realify(&h);
        assert!(symmetry_defect(&r) < 1e-15);
        let m = build_spectral_model(&r, None, None).unwrap();
        let ev = m.eigenvalues();
        assert!((ev[0] - ev[1]).abs() < 1e-12 && (ev[2] - ev[3]).abs() < 1e-12);
    }

    #[test]
    fn single_precision_model() {
        let m = build_spectral_model(&DMatrix::<f32>::from_diagonal(&DVector::from_row_slice(&[1.5, -0.5])), None, None).unwrap();
        assert_eq!(m.index_plus(), &[1]);
        let v = m.vector(DVector::from_row_slice(&[2.0f32, 1.0])).unwrap();
        assert!((v.quadratic_form() - (-0.5 * 4.0 + 1.5)).abs() < 1e-6);
    }
}
