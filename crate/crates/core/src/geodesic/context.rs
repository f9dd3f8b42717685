use super::{ChartSpec, GeodesicConfig, GeodesicError};
use crate::circle::{
    assemble_twisted_dirac, dual_to_real, k_gradient, k_hessian_apply, k_value, phi_dual, phi_energy, phi_precondition, Chart,
    CircleDomain, DiracPair, LoopGeometry, LoopMap, Nonlinearity, SpinorField,
};
use crate::nehari::{NehariError, ProblemContext};
use crate::num::Real;
use crate::spectral::{build_spectral_model, SpectralModel};
use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

const CACHE_SLOTS: usize = 8;

type FrameCache<T> = Mutex<VecDeque<(Vec<u64>, Arc<Frame<T>>)>>;

/// Operator data along one loop.
#[derive(Debug)]
pub struct Frame<T: Real> {
    pub geometry: LoopGeometry<T>,
    pub model: Arc<SpectralModel<T>>,
    pub operator: DMatrix<T>,
    pub gram: Option<DMatrix<T>>,
}

/// [`ProblemContext`] of the perturbed Dirac-geodesic energy
/// `½∫|φ̇|² + ½∫⟨ψ, D_φψ⟩ − ∫K`. `u` holds the periodic loop coefficients
/// (row-major over `(mode, component)`), `v` the real spinor coordinates.
#[derive(Debug)]
pub struct GeodesicContext<T: Real> {
    domain: CircleDomain<T>,
    nl: Nonlinearity<T>,
    template: LoopMap<T>,
    flat_frame: Option<Arc<Frame<T>>>,
    cache: FrameCache<T>,
}

impl<T: Real> Clone for GeodesicContext<T> {
    /// Clones share nothing mutable: the cache starts empty.
    fn clone(&self) -> Self {
        GeodesicContext {
            domain: self.domain.clone(),
            nl: self.nl.clone(),
            template: self.template.clone(),
            flat_frame: self.flat_frame.clone(),
            cache: Mutex::new(VecDeque::new()),
        }
    }
}

fn row_major<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let c = m.ncols();
    DVector::from_fn(m.len(), |k, _| m[(k / c, k % c)])
}

/// Realified pair with the operator replaced by its symmetric part. On curved
/// targets quadrature leaves a small antisymmetric remainder; the energy
/// `½vᵀMv` does not see it.
fn realified_symmetric<T: Real>(pair: &DiracPair<T>) -> (DMatrix<T>, Option<DMatrix<T>>) {
    let (m, g) = pair.realified();
    let half = T::lit(0.5);
    let sym = |a: DMatrix<T>| (&a + a.transpose()) * half;
    (sym(m), g.map(sym))
}

fn nehari_err(e: impl std::fmt::Display) -> NehariError {
    NehariError::Context(e.to_string())
}

impl<T: Real> GeodesicContext<T> {
    pub fn new(domain: CircleDomain<T>, nl: Nonlinearity<T>, template: LoopMap<T>) -> Result<Self, GeodesicError> {
        if template.chart().dim() != domain.n_fiber() {
            return Err(GeodesicError::Config(format!(
                "chart dimension {} differs from fiber dimension {}",
                template.chart().dim(),
                domain.n_fiber()
            )));
        }
        let mut ctx = GeodesicContext { domain, nl, template, flat_frame: None, cache: Mutex::new(VecDeque::new()) };
        if ctx.template.chart().is_flat() {
            let f = ctx.build_frame(&ctx.template)?;
            ctx.flat_frame = Some(Arc::new(f));
        }
        Ok(ctx)
    }

    pub fn domain(&self) -> &CircleDomain<T> {
        &self.domain
    }

    pub fn nonlinearity(&self) -> &Nonlinearity<T> {
        &self.nl
    }

    pub fn template(&self) -> &LoopMap<T> {
        &self.template
    }

    pub fn is_flat(&self) -> bool {
        self.flat_frame.is_some()
    }

    /// Loop with periodic coefficients `u`.
    pub fn loop_map(&self, u: &DVector<T>) -> LoopMap<T> {
        self.template.with_vec(u)
    }

    pub fn spinor(&self, v: &DVector<T>) -> Result<SpinorField<T>, NehariError> {
        SpinorField::from_real(&self.domain, v).map_err(nehari_err)
    }

    fn build_frame(&self, phi: &LoopMap<T>) -> Result<Frame<T>, GeodesicError> {
        let geometry = LoopGeometry::evaluate(&self.domain, phi)?;
        let (operator, gram) = realified_symmetric(&assemble_twisted_dirac(&self.domain, phi)?);
        let model = Arc::new(build_spectral_model(&operator, gram.as_ref(), None)?);
        Ok(Frame { geometry, model, operator, gram })
    }

    /// Operator data at `u`; flat targets share a single frame for every
    /// loop (its geometry carries only the metric, not the loop).
    pub fn frame(&self, u: &DVector<T>) -> Result<Arc<Frame<T>>, NehariError> {
        if let Some(f) = &self.flat_frame {
            return Ok(f.clone());
        }
        let key: Vec<u64> = u.iter().map(|x| x.to_f64().to_bits()).collect();
        {
            let cache = self.cache.lock().expect("frame cache poisoned");
            if let Some((_, f)) = cache.iter().find(|(k, _)| *k == key) {
                return Ok(f.clone());
            }
        }
        let frame = Arc::new(self.build_frame(&self.loop_map(u)).map_err(nehari_err)?);
        let mut cache = self.cache.lock().expect("frame cache poisoned");
        if cache.len() >= CACHE_SLOTS {
            cache.pop_front();
        }
        cache.push_back((key, frame.clone()));
        Ok(frame)
    }

    /// Geometry along the actual loop (velocities included).
    pub fn loop_geometry(&self, u: &DVector<T>) -> Result<LoopGeometry<T>, NehariError> {
        if self.is_flat() {
            LoopGeometry::evaluate(&self.domain, &self.loop_map(u)).map_err(nehari_err)
        } else {
            Ok(self.frame(u)?.geometry.clone())
        }
    }

    /// `(½∫|φ̇|², ½⟨ψ, D_φψ⟩, ∫K)`.
    pub fn energy_parts(&self, u: &DVector<T>, v: &DVector<T>) -> Result<(T, T, T), NehariError> {
        let frame = self.frame(u)?;
        let geom = self.loop_geometry(u)?;
        let psi = self.spinor(v)?;
        let dirac = v.dot(&(&frame.operator * v)) / T::lit(2.0);
        Ok((phi_energy(&self.domain, &geom), dirac, k_value(&self.nl, &self.domain, &frame.geometry, &psi)))
    }
}

impl<T: Real> ProblemContext<T> for GeodesicContext<T> {
    fn u_dim(&self) -> usize {
        self.template.coeffs().len()
    }

    fn v_dim(&self) -> usize {
        self.domain.real_dim()
    }

    fn model(&self, u: &DVector<T>) -> Result<Arc<SpectralModel<T>>, NehariError> {
        Ok(self.frame(u)?.model.clone())
    }

    fn e1(&self, u: &DVector<T>) -> Result<T, NehariError> {
        Ok(phi_energy(&self.domain, &self.loop_geometry(u)?))
    }

    fn b(&self, u: &DVector<T>, v: &DVector<T>) -> Result<T, NehariError> {
        let frame = self.frame(u)?;
        Ok(k_value(&self.nl, &self.domain, &frame.geometry, &self.spinor(v)?))
    }

    fn b_gradient(&self, u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>, NehariError> {
        let frame = self.frame(u)?;
        Ok(dual_to_real(&k_gradient(&self.nl, &self.domain, &frame.geometry, &self.spinor(v)?).coeffs))
    }

    fn b_hessian_apply(&self, u: &DVector<T>, v: &DVector<T>, eta: &DVector<T>) -> Result<DVector<T>, NehariError> {
        let frame = self.frame(u)?;
        let h = k_hessian_apply(&self.nl, &self.domain, &frame.geometry, &self.spinor(v)?, &self.spinor(eta)?);
        Ok(dual_to_real(&h.coeffs))
    }

    fn u_dual(&self, u: &DVector<T>, v: &DVector<T>) -> Result<DVector<T>, NehariError> {
        let phi = self.loop_map(u);
        let geom = self.loop_geometry(u)?;
        let dual = phi_dual(&self.domain, &phi, &geom, &self.spinor(v)?, &self.nl).map_err(nehari_err)?;
        Ok(row_major(&dual))
    }

    fn u_precondition(&self, _u: &DVector<T>, dual: &DVector<T>) -> DVector<T> {
        let shaped = self.template.with_vec(dual);
        row_major(&phi_precondition(shaped.coeffs()))
    }

    fn operator_derivative(&self, u: &DVector<T>, h: &DVector<T>) -> Result<Option<(DMatrix<T>, Option<DMatrix<T>>)>, NehariError> {
        if self.is_flat() {
            return Ok(None);
        }
        let eps = T::eps().cbrt();
        let at = |x: DVector<T>| -> Result<(DMatrix<T>, Option<DMatrix<T>>), NehariError> {
            Ok(realified_symmetric(&assemble_twisted_dirac(&self.domain, &self.loop_map(&x)).map_err(nehari_err)?))
        };
        let (mp, gp) = at(u + h * eps)?;
        let (mm, gm) = at(u - h * eps)?;
        let scale = T::one() / (eps + eps);
        let dg = match (gp, gm) {
            (Some(a), Some(b)) => Some((a - b) * scale),
            _ => None,
        };
        Ok(Some(((mp - mm) * scale, dg)))
    }

    fn growth_factor(&self, u: &DVector<T>, v: &DVector<T>) -> Option<T> {
        let frame = self.frame(u).ok()?;
        let psi = self.spinor(v).ok()?;
        let nodal = self.domain.synthesize(&psi);
        let mut f = T::zero();
        for j in 0..nodal.nrows() {
            let r = frame.geometry.pair(j, &nodal, &nodal).re.max(T::zero()).sqrt();
            f = f.max(self.nl.f(j, r));
        }
        Some(f)
    }
}

/// Context for a configuration (scalar type chosen by the caller).
pub fn build_context<T: Real>(cfg: &GeodesicConfig) -> Result<GeodesicContext<T>, GeodesicError> {
    cfg.validate()?;
    let chart = match cfg.chart {
        ChartSpec::FlatTorus(n) => Chart::FlatTorus(n),
        ChartSpec::RoundSphere2 => Chart::round_sphere2(),
    };
    build_context_with_chart(cfg, chart)
}

/// As [`build_context`] with a caller-supplied chart.
pub fn build_context_with_chart<T: Real>(cfg: &GeodesicConfig, chart: Chart<T>) -> Result<GeodesicContext<T>, GeodesicError> {
    let n = chart.dim();
    let domain = CircleDomain::with_clifford_sign(cfg.k_max, n, cfg.n_grid(), cfg.clifford_sign)?;
    let (mean, c, s) = (T::lit(cfg.b_mean), T::lit(cfg.b_cos), T::lit(cfg.b_sin));
    let nl = Nonlinearity::from_fn(&domain, T::lit(cfg.p), |x| mean + c * x.cos() + s * x.sin())?;
    let winding = if cfg.winding.is_empty() { vec![0; n] } else { cfg.winding.clone() };
    let template = LoopMap::geodesic(chart, winding, cfg.m_phi())?;
    GeodesicContext::new(domain, nl, template)
}
