//! Operators of the Dirac-geodesic problem on `S¹ = ℝ/2πℤ`.
//!
//! Spinors use the anti-periodic spin structure: modes `e^{iks}/√(2π)` with
//! half-integer `k ∈ {±1/2, …, ±(K_max − 1/2)}`, so the untwisted operator
//! `D₀ = σ i ∂ₛ` (Clifford sign `σ`, `∂ₛ·ψ = σ i ψ`) has spectrum `−σk` and no
//! kernel. Loops `φ: S¹ → N` are a winding vector plus a real Fourier series
//! (`cos(ms)` for `m > 0`, `sin(|m|s)` for `m < 0`, constant for `m = 0`).
//! Integrals use the trapezoidal rule on `N_grid` uniform nodes.

mod bosonic;
mod chart;
mod dirac;
mod nonlinearity;

pub use bosonic::{phi_dual, phi_energy, phi_gradient, phi_precondition};
pub use chart::{Chart, Christoffel, MetricChart, Riemann};
pub use dirac::{assemble_connection, assemble_twisted_dirac, dirac_apply_nodal, gram_hermiticity_defect, untwisted_dirac, DiracPair};
pub use nonlinearity::{
    hypothesis_audit, k_gradient, k_gradient_real, k_hessian_apply, k_value, AuditReport, AuditViolation, Nonlinearity,
};

use crate::num::Real;
use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircleError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("quadrature aliasing guard: n_grid = {n_grid} < 4 * k_max = {required}")]
    Aliasing { n_grid: usize, required: usize },
    #[error("chart evaluation failed at node {node}")]
    ChartEvaluation { node: usize },
    #[error("chart provides no curvature data")]
    MissingCurvature,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("winding is only defined for flat torus targets")]
    WindingOnCurvedChart,
    #[error("invalid nonlinearity: {0}")]
    Nonlinearity(String),
}

/// Discretization of the circle and of the spinor bundle over it.
#[derive(Debug, Clone)]
pub struct CircleDomain<T: Real> {
    k_max: usize,
    n_fiber: usize,
    n_grid: usize,
    clifford_sign: T,
    nodes: Vec<T>,
    modes: Vec<T>,
    /// `e^{i k s_j} / √(2π)`, `n_grid × 2k_max`.
    phases: DMatrix<Complex<T>>,
}

impl<T: Real> CircleDomain<T> {
    /// Domain with Clifford sign `+1`.
    pub fn new(k_max: usize, n_fiber: usize, n_grid: usize) -> Result<Self, CircleError> {
        Self::with_clifford_sign(k_max, n_fiber, n_grid, 1)
    }

    pub fn with_clifford_sign(k_max: usize, n_fiber: usize, n_grid: usize, sign: i32) -> Result<Self, CircleError> {
        if k_max == 0 || n_fiber == 0 {
            return Err(CircleError::InvalidDomain("k_max and n_fiber must be positive".into()));
        }
        if n_grid < 4 * k_max {
            return Err(CircleError::Aliasing { n_grid, required: 4 * k_max });
        }
        if sign != 1 && sign != -1 {
            return Err(CircleError::InvalidDomain(format!("clifford sign must be ±1, got {sign}")));
        }
        let two_pi = T::two_pi();
        let nodes: Vec<T> = (0..n_grid).map(|j| two_pi * T::from_count(j) / T::from_count(n_grid)).collect();
        let modes: Vec<T> = (0..2 * k_max).map(|j| T::lit(j as f64 - k_max as f64 + 0.5)).collect();
        let norm = T::one() / two_pi.sqrt();
        let phases = DMatrix::from_fn(n_grid, 2 * k_max, |j, q| {
            let arg = modes[q] * nodes[j];
            Complex::new(arg.cos() * norm, arg.sin() * norm)
        });
        Ok(CircleDomain { k_max, n_fiber, n_grid, clifford_sign: T::lit(sign as f64), nodes, modes, phases })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn n_fiber(&self) -> usize {
        self.n_fiber
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn clifford_sign(&self) -> T {
        self.clifford_sign
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Half-integer mode values in ascending order.
    pub fn modes(&self) -> &[T] {
        &self.modes
    }

    /// Odd numerator `2k` of mode index `q`.
    pub fn mode_numerator(&self, q: usize) -> i64 {
        2 * q as i64 - 2 * self.k_max as i64 + 1
    }

    pub fn mode_index(&self, numerator: i64) -> Option<usize> {
        if numerator % 2 == 0 {
            return None;
        }
        let q = (numerator + 2 * self.k_max as i64 - 1) / 2;
        (q >= 0 && (q as usize) < 2 * self.k_max).then_some(q as usize)
    }

    /// Trapezoidal weight `2π / N_grid`.
    pub fn weight(&self) -> T {
        T::two_pi() / T::from_count(self.n_grid)
    }

    pub fn mode_count(&self) -> usize {
        2 * self.k_max
    }

    /// Complex dimension of the truncated spinor space.
    pub fn complex_dim(&self) -> usize {
        2 * self.k_max * self.n_fiber
    }

    /// Real dimension `[Re c; Im c]`.
    pub fn real_dim(&self) -> usize {
        2 * self.complex_dim()
    }

    /// Nodal values `ψ^i(s_j)`, `n_grid × n_fiber`.
    pub fn synthesize(&self, psi: &SpinorField<T>) -> DMatrix<Complex<T>> {
        &self.phases * &psi.coeffs
    }

    /// Nodal values of `∂ₛψ`.
    pub fn synthesize_derivative(&self, psi: &SpinorField<T>) -> DMatrix<Complex<T>> {
        let scaled =
            DMatrix::from_fn(psi.coeffs.nrows(), psi.coeffs.ncols(), |q, i| psi.coeffs[(q, i)] * Complex::new(T::zero(), self.modes[q]));
        &self.phases * scaled
    }

    /// Dual coefficients `Q[f e^{−iks}]/√(2π)` of a nodal field.
    pub fn analyze(&self, nodal: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
        self.phases.ad_mul(nodal) * Complex::new(self.weight(), T::zero())
    }
}

/// Fermionic field: one complex coefficient per (mode, fiber index).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField<T: Real> {
    /// `2k_max × n_fiber`.
    pub coeffs: DMatrix<Complex<T>>,
}

impl<T: Real> SpinorField<T> {
    pub fn zeros(domain: &CircleDomain<T>) -> Self {
        SpinorField { coeffs: DMatrix::from_element(domain.mode_count(), domain.n_fiber(), Complex::new(T::zero(), T::zero())) }
    }

    pub fn from_coeffs(domain: &CircleDomain<T>, coeffs: DMatrix<Complex<T>>) -> Result<Self, CircleError> {
        if coeffs.nrows() != domain.mode_count() || coeffs.ncols() != domain.n_fiber() {
            return Err(CircleError::Shape(format!(
                "spinor coefficients {}x{}, expected {}x{}",
                coeffs.nrows(),
                coeffs.ncols(),
                domain.mode_count(),
                domain.n_fiber()
            )));
        }
        Ok(SpinorField { coeffs })
    }

    /// Single mode `amplitude · e^{iks}` (pointwise magnitude `|amplitude|`)
    /// in fiber direction `fiber`.
    pub fn single_mode(domain: &CircleDomain<T>, numerator: i64, fiber: usize, amplitude: Complex<T>) -> Option<Self> {
        let q = domain.mode_index(numerator)?;
        let mut s = Self::zeros(domain);
        s.coeffs[(q, fiber)] = amplitude * T::two_pi().sqrt();
        Some(s)
    }

    /// Real coordinates `[Re c; Im c]`, coefficient `(q, i)` at `q·n + i`.
    pub fn to_real(&self) -> DVector<T> {
        let (m, n) = self.coeffs.shape();
        let nc = m * n;
        let mut x = DVector::zeros(2 * nc);
        for q in 0..m {
            for i in 0..n {
                let z = self.coeffs[(q, i)];
                x[q * n + i] = z.re;
                x[nc + q * n + i] = z.im;
            }
        }
        x
    }

    pub fn from_real(domain: &CircleDomain<T>, x: &DVector<T>) -> Result<Self, CircleError> {
        let (m, n) = (domain.mode_count(), domain.n_fiber());
        let nc = m * n;
        if x.len() != 2 * nc {
            return Err(CircleError::Shape(format!("real spinor vector length {}, expected {}", x.len(), 2 * nc)));
        }
        Ok(SpinorField { coeffs: DMatrix::from_fn(m, n, |q, i| Complex::new(x[q * n + i], x[nc + q * n + i])) })
    }

    pub fn scaled(&self, a: T) -> Self {
        SpinorField { coeffs: self.coeffs.map(|z| z * a) }
    }
}

/// Maps a complex dual field (as returned by [`CircleDomain::analyze`]) to
/// its real covector `[Re; Im]` in the layout of [`SpinorField::to_real`].
pub fn dual_to_real<T: Real>(dual: &DMatrix<Complex<T>>) -> DVector<T> {
    SpinorField { coeffs: dual.clone() }.to_real()
}

/// Bosonic field: `φ(s) = winding · s + Σ_m c_m β_m(s)`.
#[derive(Debug, Clone)]
pub struct LoopMap<T: Real> {
    winding: Vec<i64>,
    /// `(2 m_phi + 1) × n`, row `m + m_phi`.
    coeffs: DMatrix<T>,
    chart: Chart<T>,
}

impl<T: Real> LoopMap<T> {
    pub fn new(chart: Chart<T>, winding: Vec<i64>, coeffs: DMatrix<T>) -> Result<Self, CircleError> {
        let n = chart.dim();
        if coeffs.ncols() != n || coeffs.nrows().is_multiple_of(2) {
            return Err(CircleError::Shape(format!("loop coefficients {}x{} for target dim {n}", coeffs.nrows(), coeffs.ncols())));
        }
        if winding.len() != n {
            return Err(CircleError::Shape(format!("winding length {}, expected {n}", winding.len())));
        }
        if !chart.is_flat() && winding.iter().any(|&w| w != 0) {
            return Err(CircleError::WindingOnCurvedChart);
        }
        Ok(LoopMap { winding, coeffs, chart })
    }

    /// Pure winding loop (geodesic on a flat torus, constant point otherwise).
    pub fn geodesic(chart: Chart<T>, winding: Vec<i64>, m_phi: usize) -> Result<Self, CircleError> {
        let n = chart.dim();
        Self::new(chart, winding, DMatrix::zeros(2 * m_phi + 1, n))
    }

    pub fn winding(&self) -> &[i64] {
        &self.winding
    }

    pub fn coeffs(&self) -> &DMatrix<T> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut DMatrix<T> {
        &mut self.coeffs
    }

    pub fn chart(&self) -> &Chart<T> {
        &self.chart
    }

    pub fn m_phi(&self) -> usize {
        (self.coeffs.nrows() - 1) / 2
    }

    /// Integer mode of coefficient row `r`.
    pub fn row_mode(&self, r: usize) -> i64 {
        r as i64 - self.m_phi() as i64
    }

    /// Flattened coefficients (row-major over `(mode, component)`).
    pub fn to_vec(&self) -> DVector<T> {
        let (r, c) = self.coeffs.shape();
        DVector::from_fn(r * c, |k, _| self.coeffs[(k / c, k % c)])
    }

    pub fn with_vec(&self, v: &DVector<T>) -> Self {
        let (r, c) = self.coeffs.shape();
        let mut out = self.clone();
        out.coeffs = DMatrix::from_fn(r, c, |i, j| v[i * c + j]);
        out
    }

    /// `(β_m(s), β_m'(s), β_m''(s))` for integer mode `m`.
    pub fn basis(m: i64, s: T) -> (T, T, T) {
        let mf = T::lit(m.unsigned_abs() as f64);
        match m.cmp(&0) {
            std::cmp::Ordering::Equal => (T::one(), T::zero(), T::zero()),
            std::cmp::Ordering::Greater => {
                let (sn, cs) = (mf * s).sin_cos();
                (cs, -mf * sn, -mf * mf * cs)
            }
            std::cmp::Ordering::Less => {
                let (sn, cs) = (mf * s).sin_cos();
                (sn, mf * cs, -mf * mf * sn)
            }
        }
    }

    /// `∫ β_m² ds`.
    pub fn basis_norm_squared(m: i64) -> T {
        if m == 0 {
            T::two_pi()
        } else {
            T::pi()
        }
    }

    /// Position, velocity and acceleration at the quadrature nodes
    /// (`n_grid × n` each).
    pub fn evaluate(&self, nodes: &[T]) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
        let n = self.chart.dim();
        let mut pos = DMatrix::zeros(nodes.len(), n);
        let mut vel = DMatrix::zeros(nodes.len(), n);
        let mut acc = DMatrix::zeros(nodes.len(), n);
        for (j, &s) in nodes.iter().enumerate() {
            for c in 0..n {
                let w = T::lit(self.winding[c] as f64);
                pos[(j, c)] = w * s;
                vel[(j, c)] = w;
            }
            for r in 0..self.coeffs.nrows() {
                let (b, db, ddb) = Self::basis(self.row_mode(r), s);
                for c in 0..n {
                    let a = self.coeffs[(r, c)];
                    pos[(j, c)] += a * b;
                    vel[(j, c)] += a * db;
                    acc[(j, c)] += a * ddb;
                }
            }
        }
        (pos, vel, acc)
    }
}

/// Nodal evaluation of a loop together with the target geometry along it.
#[derive(Debug, Clone)]
pub struct LoopGeometry<T: Real> {
    pub positions: DMatrix<T>,
    pub velocities: DMatrix<T>,
    pub accelerations: DMatrix<T>,
    /// `None` on flat targets (identity metric, zero connection).
    pub metric: Option<Vec<DMatrix<T>>>,
    pub christoffel: Option<Vec<Christoffel<T>>>,
    pub curvature: Option<Vec<Riemann<T>>>,
}

impl<T: Real> LoopGeometry<T> {
    pub fn evaluate(domain: &CircleDomain<T>, phi: &LoopMap<T>) -> Result<Self, CircleError> {
        if phi.chart().dim() != domain.n_fiber() {
            return Err(CircleError::Shape(format!("target dim {} differs from fiber dim {}", phi.chart().dim(), domain.n_fiber())));
        }
        let (positions, velocities, accelerations) = phi.evaluate(domain.nodes());
        Self::from_nodal(phi.chart(), positions, velocities, accelerations)
    }

    /// Geometry from explicit nodal positions/velocities.
    pub fn from_nodal(
        chart: &Chart<T>,
        positions: DMatrix<T>,
        velocities: DMatrix<T>,
        accelerations: DMatrix<T>,
    ) -> Result<Self, CircleError> {
        if chart.is_flat() {
            return Ok(LoopGeometry { positions, velocities, accelerations, metric: None, christoffel: None, curvature: None });
        }
        let n_nodes = positions.nrows();
        let mut metric = Vec::with_capacity(n_nodes);
        let mut christoffel = Vec::with_capacity(n_nodes);
        let mut curvature = Some(Vec::with_capacity(n_nodes));
        for j in 0..n_nodes {
            let y: Vec<T> = positions.row(j).iter().copied().collect();
            let g = chart.metric(&y).ok_or(CircleError::ChartEvaluation { node: j })?;
            let gam = chart.christoffel(&y).ok_or(CircleError::ChartEvaluation { node: j })?;
            metric.push(g);
            christoffel.push(gam);
            curvature = match (curvature, chart.curvature(&y)) {
                (Some(mut v), Some(r)) => {
                    v.push(r);
                    Some(v)
                }
                _ => None,
            };
        }
        Ok(LoopGeometry { positions, velocities, accelerations, metric: Some(metric), christoffel: Some(christoffel), curvature })
    }

    pub fn is_flat(&self) -> bool {
        self.metric.is_none()
    }

    pub fn n_nodes(&self) -> usize {
        self.positions.nrows()
    }

    /// `g(ψ, χ)` (hermitian, conjugate-linear in the first slot) at node `j`.
    pub fn pair(&self, j: usize, psi: &DMatrix<Complex<T>>, chi: &DMatrix<Complex<T>>) -> Complex<T> {
        let n = psi.ncols();
        let mut s = Complex::new(T::zero(), T::zero());
        match &self.metric {
            None => {
                for a in 0..n {
                    s += psi[(j, a)].conj() * chi[(j, a)];
                }
            }
            Some(g) => {
                let g = &g[j];
                for a in 0..n {
                    for b in 0..n {
                        s += psi[(j, a)].conj() * chi[(j, b)] * g[(a, b)];
                    }
                }
            }
        }
        s
    }

    /// Lowers a nodal vector field with the metric: `(g v)_a`.
    pub fn lower(&self, nodal: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
        match &self.metric {
            None => nodal.clone(),
            Some(g) => DMatrix::from_fn(nodal.nrows(), nodal.ncols(), |j, a| {
                let mut s = Complex::new(T::zero(), T::zero());
                for b in 0..nodal.ncols() {
                    s += nodal[(j, b)] * g[j][(a, b)];
                }
                s
            }),
        }
    }
}
