//! Target-manifold charts: metric, Christoffel symbols and curvature.

use crate::num::Real;
use nalgebra::DMatrix;
use std::fmt;
use std::sync::Arc;

/// Christoffel symbols `Γ^i_{jk}` stored at `[(i * n + j) * n + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> Christoffel<T> {
    pub fn zeros(n: usize) -> Self {
        Christoffel { n, data: vec![T::zero(); n * n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        let n = self.n;
        self.data[(i * n + j) * n + k] = v;
    }
}

/// Riemann tensor `R^a_{bcd}` with `R(X,Y)Z = R^a_{bcd} Z^b X^c Y^d ∂_a`,
/// `R(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`. Stored at `[((a*n+b)*n+c)*n+d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> Riemann<T> {
    pub fn zeros(n: usize) -> Self {
        Riemann { n, data: vec![T::zero(); n * n * n * n] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> T {
        let n = self.n;
        self.data[((a * n + b) * n + c) * n + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: T) {
        let n = self.n;
        self.data[((a * n + b) * n + c) * n + d] = v;
    }
}

type MetricFn<T> = dyn Fn(&[T]) -> Option<DMatrix<T>> + Send + Sync;
type ChristoffelFn<T> = dyn Fn(&[T]) -> Option<Christoffel<T>> + Send + Sync;
type RiemannFn<T> = dyn Fn(&[T]) -> Option<Riemann<T>> + Send + Sync;

/// Chart plug-in built from callables. A callable returning `None` signals
/// that the point lies outside the chart.
#[derive(Clone)]
pub struct MetricChart<T: Real> {
    name: String,
    dim: usize,
    metric: Arc<MetricFn<T>>,
    christoffel: Arc<ChristoffelFn<T>>,
    curvature: Option<Arc<RiemannFn<T>>>,
}

impl<T: Real> MetricChart<T> {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        metric: impl Fn(&[T]) -> Option<DMatrix<T>> + Send + Sync + 'static,
        christoffel: impl Fn(&[T]) -> Option<Christoffel<T>> + Send + Sync + 'static,
    ) -> Self {
        MetricChart { name: name.into(), dim, metric: Arc::new(metric), christoffel: Arc::new(christoffel), curvature: None }
    }

    pub fn with_curvature(mut self, curvature: impl Fn(&[T]) -> Option<Riemann<T>> + Send + Sync + 'static) -> Self {
        self.curvature = Some(Arc::new(curvature));
        self
    }

    /// Unit round 2-sphere in the stereographic chart from the north pole:
    /// `g = 4/(1+|y|²)² δ`.
    pub fn round_sphere2() -> Self {
        fn conformal<T: Real>(y: &[T]) -> Option<(T, [T; 2])> {
            if y.len() != 2 || !y.iter().all(|v| v.is_finite()) {
                return None;
            }
            let q = T::one() + y[0] * y[0] + y[1] * y[1];
            let two = T::lit(2.0);
            // g = e^{2f} δ, f = ln 2 − ln q
            Some((two * two / (q * q), [-two * y[0] / q, -two * y[1] / q]))
        }
        MetricChart::new(
            "round_sphere2",
            2,
            |y: &[T]| conformal(y).map(|(c, _)| DMatrix::from_diagonal_element(2, 2, c)),
            |y: &[T]| {
                let (_, df) = conformal(y)?;
                let mut g = Christoffel::zeros(2);
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            let mut v = T::zero();
                            if i == j {
                                v += df[k];
                            }
                            if i == k {
                                v += df[j];
                            }
                            if j == k {
                                v -= df[i];
                            }
                            g.set(i, j, k, v);
                        }
                    }
                }
                Some(g)
            },
        )
        .with_curvature(|y: &[T]| {
            let (c, _) = conformal(y)?;
            let mut r = Riemann::zeros(2);
            // constant curvature 1: R^a_{bcd} = δ^a_c g_db − δ^a_d g_cb
            for a in 0..2 {
                for b in 0..2 {
                    for cc in 0..2 {
                        for d in 0..2 {
                            let mut v = T::zero();
                            if a == cc && d == b {
                                v += c;
                            }
                            if a == d && cc == b {
                                v -= c;
                            }
                            r.set(a, b, cc, d, v);
                        }
                    }
                }
            }
            Some(r)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl<T: Real> fmt::Debug for MetricChart<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("has_curvature", &self.curvature.is_some())
            .finish()
    }
}

/// Target descriptor of a loop.
#[derive(Debug, Clone)]
pub enum Chart<T: Real> {
    /// Flat torus `ℝⁿ/2πℤⁿ`: `g = δ`, `Γ = 0`, `R = 0`.
    FlatTorus(usize),
    Metric(MetricChart<T>),
}

impl<T: Real> Chart<T> {
    pub fn round_sphere2() -> Self {
        Chart::Metric(MetricChart::round_sphere2())
    }

    pub fn dim(&self) -> usize {
        match self {
            Chart::FlatTorus(n) => *n,
            Chart::Metric(m) => m.dim,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Chart::FlatTorus(_))
    }

    pub fn name(&self) -> String {
        match self {
            Chart::FlatTorus(n) => format!("flat_torus({n})"),
            Chart::Metric(m) => m.name.clone(),
        }
    }

    pub fn has_curvature(&self) -> bool {
        match self {
            Chart::FlatTorus(_) => true,
            Chart::Metric(m) => m.curvature.is_some(),
        }
    }

    pub fn metric(&self, y: &[T]) -> Option<DMatrix<T>> {
        match self {
            Chart::FlatTorus(n) => Some(DMatrix::identity(*n, *n)),
            Chart::Metric(m) => (m.metric)(y).filter(|g| g.iter().all(|v| v.is_finite())),
        }
    }

    pub fn christoffel(&self, y: &[T]) -> Option<Christoffel<T>> {
        match self {
            Chart::FlatTorus(n) => Some(Christoffel::zeros(*n)),
            Chart::Metric(m) => (m.christoffel)(y).filter(|g| g.data.iter().all(|v| v.is_finite())),
        }
    }

    /// `None` when the chart carries no curvature callable or it fails.
    pub fn curvature(&self, y: &[T]) -> Option<Riemann<T>> {
        match self {
            Chart::FlatTorus(n) => Some(Riemann::zeros(*n)),
            Chart::Metric(m) => m.curvature.as_ref().and_then(|r| r(y)).filter(|r| r.data.iter().all(|v| v.is_finite())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_christoffel_is_metric_compatible() {
        // ∂_k g_ij = g_im Γ^m_kj + g_jm Γ^m_ki, checked by central differences
        let chart = Chart::<f64>::round_sphere2();
        let y = [0.3, -0.2];
        let h = 1e-6;
        let g = chart.metric(&y).unwrap();
        let gam = chart.christoffel(&y).unwrap();
        for k in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[k] += h;
            ym[k] -= h;
            let dg = (chart.metric(&yp).unwrap() - chart.metric(&ym).unwrap()) / (2.0 * h);
            for i in 0..2 {
                for j in 0..2 {
                    let mut rhs = 0.0;
                    for m in 0..2 {
                        rhs += g[(i, m)] * gam.get(m, k, j) + g[(j, m)] * gam.get(m, k, i);
                    }
                    assert!((dg[(i, j)] - rhs).abs() < 1e-8, "{} vs {}", dg[(i, j)], rhs);
                }
            }
        }
    }

    #[test]
    fn sphere_curvature_matches_christoffel_derivatives() {
        // R^a_{bcd} = ∂_c Γ^a_{db} − ∂_d Γ^a_{cb} + Γ^a_{ce} Γ^e_{db} − Γ^a_{de} Γ^e_{cb}
        let chart = Chart::<f64>::round_sphere2();
        let y = [0.4, 0.1];
        let h = 1e-5;
        let gam = chart.christoffel(&y).unwrap();
        let dgam = |c: usize| {
            let mut yp = y;
            let mut ym = y;
            yp[c] += h;
            ym[c] -= h;
            let p = chart.christoffel(&yp).unwrap();
            let m = chart.christoffel(&ym).unwrap();
            p.data.iter().zip(&m.data).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>()
        };
        let d = [dgam(0), dgam(1)];
        let r = chart.curvature(&y).unwrap();
        let idx = |i: usize, j: usize, k: usize| (i * 2 + j) * 2 + k;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for dd in 0..2 {
                        let mut v = d[c][idx(a, dd, b)] - d[dd][idx(a, c, b)];
                        for e in 0..2 {
                            v += gam.get(a, c, e) * gam.get(e, dd, b) - gam.get(a, dd, e) * gam.get(e, c, b);
                        }
                        assert!((v - r.get(a, b, c, dd)).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn flat_torus_is_trivial() {
        let c = Chart::<f64>::FlatTorus(3);
        assert_eq!(c.metric(&[1.0, 2.0, 3.0]).unwrap(), DMatrix::identity(3, 3));
        assert!(c.christoffel(&[0.0; 3]).unwrap().data.iter().all(|&v| v == 0.0));
        assert!(c.is_flat() && c.has_curvature());
    }
}
