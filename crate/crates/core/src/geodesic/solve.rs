use super::{build_context, GeodesicConfig, GeodesicContext, GeodesicError};
use crate::circle::{LoopMap, SpinorField};
use crate::nehari::context_internals::{eigen_residual, weighted_norm};
use crate::nehari::{minimize_reduced_with, MaximizerOptions, MinimizeOutcome, MinimizerOptions, ProblemContext, Termination, TraceEntry};
use crate::num::Real;
use crate::oracle::{invariant_suite, InvariantReport, Verdict};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// A start whose final `‖ψ⁺‖_V` is below this is treated as collapsed.
const COLLAPSE_NORM: f64 = 1e-6;
const COLLAPSE_RESTARTS: usize = 3;

/// `½∫|φ̇|² + ½⟨ψ, D_φψ⟩ − ∫K`.
pub fn total_energy<T: Real>(ctx: &GeodesicContext<T>, u: &DVector<T>, v: &DVector<T>) -> Result<T, GeodesicError> {
    let (e_phi, e_dirac, e_k) = ctx.energy_parts(u, v)?;
    Ok(e_phi + e_dirac - e_k)
}

/// Euler-Lagrange residuals in the dual norms: `φ` in `H⁻¹`, `ψ` in the
/// `(1 + |D|)^{-1/2}`-weighted norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElResidual {
    pub phi: f64,
    pub psi: f64,
}

impl ElResidual {
    pub fn max(&self) -> f64 {
        self.phi.max(self.psi)
    }
}

pub fn el_residual<T: Real>(ctx: &GeodesicContext<T>, u: &DVector<T>, v: &DVector<T>) -> Result<ElResidual, GeodesicError> {
    let model = ctx.model(u)?;
    let a = model.coords(v);
    let r = eigen_residual(&model, &a, &ctx.b_gradient(u, v)?);
    let all: Vec<usize> = (0..model.dim()).collect();
    let dual = ctx.u_dual(u, v)?;
    let phi = dual.dot(&ctx.u_precondition(u, &dual)).max(T::zero()).sqrt();
    Ok(ElResidual { phi: phi.to_f64(), psi: weighted_norm(&model, &r, &all).to_f64() })
}

/// Outcome of solving from the negated initial spinor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Z2Check {
    pub partner_energy: f64,
    pub energy_gap: f64,
    /// `max |ψ' + ψ|` over real coefficients.
    pub spinor_gap: f64,
    /// `max |φ' − φ|` over loop coefficients.
    pub phi_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport<T: Real> {
    pub seed: u64,
    pub u: DVector<T>,
    pub v: DVector<T>,
    pub phi: LoopMap<T>,
    pub psi: SpinorField<T>,
    pub energy: f64,
    /// `½∫|φ̇|²`.
    pub phi_energy: f64,
    /// `½⟨ψ, D_φψ⟩`.
    pub dirac_energy: f64,
    /// `∫K`.
    pub k_energy: f64,
    pub r_scalar: f64,
    pub r_minus: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub el: ElResidual,
    /// `‖ψ‖_V`, the discrete `H^{1/2}` norm.
    pub psi_norm: f64,
    pub psi_plus_norm: f64,
    pub psi_minus_norm: f64,
    /// `max_s |φ̇(s)|_g`.
    pub max_speed: f64,
    pub spectral_gap: f64,
    pub termination: Termination,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub collapse_restarts: usize,
    pub z2: Option<Z2Check>,
}

impl<T: Real> SolveReport<T> {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub energy: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SolveSummary<T: Real> {
    pub best: SolveReport<T>,
    pub runs: Vec<RunSummary>,
}

fn minimizer_options<T: Real>(cfg: &GeodesicConfig) -> MinimizerOptions<T> {
    MinimizerOptions {
        tol: T::lit(cfg.tol),
        max_iter: cfg.max_iter,
        fix_u: cfg.fix_phi,
        maximizer: MaximizerOptions { tol: T::lit(cfg.maximizer_tol), ..MaximizerOptions::default() },
        ..MinimizerOptions::default()
    }
}

/// Random start: the winding loop plus a small periodic part, and a spinor
/// with random positive coefficients (damped by `1/(1 + |λ|)`) of unit V-norm.
pub fn initial_state<T: Real>(
    ctx: &GeodesicContext<T>,
    cfg: &GeodesicConfig,
    seed: u64,
) -> Result<(DVector<T>, DVector<T>), GeodesicError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = ctx.template().clone();
    let rows = phi.coeffs().nrows();
    for r in 0..rows {
        let m = phi.row_mode(r) as f64;
        for c in 0..phi.coeffs().ncols() {
            let x: f64 = rng.gen_range(-1.0..1.0);
            phi.coeffs_mut()[(r, c)] = T::lit(cfg.phi_init * x / (1.0 + m * m));
        }
    }
    let u0 = phi.to_vec();
    let model = ctx.model(&u0)?;
    let mut a = DVector::zeros(model.dim());
    let mut norm = T::zero();
    for &i in model.index_plus() {
        let x: f64 = rng.gen_range(-1.0..1.0);
        a[i] = T::lit(x) / (T::one() + model.eigenvalues()[i].abs());
        norm += model.weight(i) * a[i] * a[i];
    }
    a /= norm.sqrt();
    Ok((u0, model.synthesize(&a)))
}

fn report<T: Real>(ctx: &GeodesicContext<T>, seed: u64, out: MinimizeOutcome<T>) -> Result<SolveReport<T>, GeodesicError> {
    let pt = &out.point;
    let (u, v) = (pt.u.clone(), pt.v.clone());
    let model = pt.model().clone();
    let a = pt.coords();
    let part = |idx: &[usize]| idx.iter().fold(T::zero(), |s, &i| s + model.weight(i) * a[i] * a[i]).to_f64();
    let (plus, minus) = (part(model.index_plus()), part(model.index_minus()));
    let (e_phi, e_dirac, e_k) = ctx.energy_parts(&u, &v)?;
    let geom = ctx.loop_geometry(&u)?;
    let mut max_speed = 0.0f64;
    for j in 0..geom.n_nodes() {
        let vel = geom.velocities.row(j).transpose();
        let sq = match &geom.metric {
            Some(g) => vel.dot(&(&g[j] * &vel)),
            None => vel.norm_squared(),
        };
        max_speed = max_speed.max(sq.max(T::zero()).sqrt().to_f64());
    }
    Ok(SolveReport {
        seed,
        phi: ctx.loop_map(&u),
        psi: ctx.spinor(&v)?,
        el: el_residual(ctx, &u, &v)?,
        energy: pt.energy.to_f64(),
        phi_energy: e_phi.to_f64(),
        dirac_energy: e_dirac.to_f64(),
        k_energy: e_k.to_f64(),
        r_scalar: pt.r_scalar.to_f64(),
        r_minus: pt.r_minus.to_f64(),
        grad_u: pt.grad_u.to_f64(),
        grad_v: pt.grad_v.to_f64(),
        psi_norm: (plus + minus).sqrt(),
        psi_plus_norm: plus.sqrt(),
        psi_minus_norm: minus.sqrt(),
        max_speed,
        spectral_gap: model.spectral_gap().to_f64(),
        termination: out.termination,
        iterations: out.iterations,
        trace: out.trace,
        collapse_restarts: 0,
        z2: None,
        u,
        v,
    })
}

/// Minimizes from an explicit start.
pub fn solve_from<T: Real>(
    ctx: &GeodesicContext<T>,
    cfg: &GeodesicConfig,
    u0: &DVector<T>,
    v0: &DVector<T>,
    seed: u64,
    observer: impl FnMut(&TraceEntry),
) -> Result<SolveReport<T>, GeodesicError> {
    let out = minimize_reduced_with(ctx, u0, v0, &minimizer_options(cfg), observer)?;
    report(ctx, seed, out)
}

fn max_gap<T: Real>(a: &DVector<T>, b: &DVector<T>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((*x - *y).abs().to_f64()))
}

fn run_start<T: Real>(
    ctx: &GeodesicContext<T>,
    cfg: &GeodesicConfig,
    seed: u64,
    observer: &(dyn Fn(u64, &TraceEntry) + Sync),
) -> Result<SolveReport<T>, GeodesicError> {
    for attempt in 0..=COLLAPSE_RESTARTS {
        let s = seed.wrapping_add((attempt as u64) << 32);
        let (u0, v0) = initial_state(ctx, cfg, s)?;
        let mut rep = solve_from(ctx, cfg, &u0, &v0, s, |e| observer(s, e))?;
        if rep.psi_plus_norm < COLLAPSE_NORM {
            log::warn!("seed {s}: spinor collapsed (‖ψ⁺‖ = {:e}), restarting", rep.psi_plus_norm);
            continue;
        }
        rep.collapse_restarts = attempt;
        if cfg.z2_check {
            let partner = solve_from(ctx, cfg, &u0, &(-&v0), s, |_| {})?;
            rep.z2 = Some(Z2Check {
                partner_energy: partner.energy,
                energy_gap: (partner.energy - rep.energy).abs(),
                spinor_gap: max_gap(&partner.v, &(-&rep.v)),
                phi_gap: max_gap(&partner.u, &rep.u),
            });
        }
        return Ok(rep);
    }
    Err(GeodesicError::Collapsed { restarts: COLLAPSE_RESTARTS })
}

pub fn solve_class<T: Real>(cfg: &GeodesicConfig) -> Result<SolveSummary<T>, GeodesicError> {
    solve_class_with(cfg, &|_, _| {})
}

/// Runs `cfg.multistart` starts (seeds `seed, seed + 1, …`) in parallel and
/// keeps the converged run of lowest energy, ties broken by seed.
pub fn solve_class_with<T: Real>(
    cfg: &GeodesicConfig,
    observer: &(dyn Fn(u64, &TraceEntry) + Sync),
) -> Result<SolveSummary<T>, GeodesicError> {
    let ctx = build_context::<T>(cfg)?;
    let seeds: Vec<u64> = (0..cfg.multistart as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let results: Vec<(u64, Result<SolveReport<T>, GeodesicError>)> =
        seeds.par_iter().map(|&s| (s, run_start(&ctx.clone(), cfg, s, observer))).collect();
    let runs = results
        .iter()
        .map(|(s, r)| match r {
            Ok(rep) => {
                RunSummary { seed: *s, energy: Some(rep.energy), converged: rep.converged(), iterations: rep.iterations, error: None }
            }
            Err(e) => RunSummary { seed: *s, energy: None, converged: false, iterations: 0, error: Some(e.to_string()) },
        })
        .collect();
    let mut first_err = None;
    let mut best: Option<SolveReport<T>> = None;
    for (_, r) in results {
        match r {
            Ok(rep) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (!rep.converged(), rep.energy, rep.seed).partial_cmp(&(!b.converged(), b.energy, b.seed)).is_some_and(|o| o.is_lt())
                    }
                };
                if better {
                    best = Some(rep);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some(best) => Ok(SolveSummary { best, runs }),
        None => Err(first_err.expect("at least one start")),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineLevel {
    pub k_max: usize,
    pub energy: f64,
    pub psi_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub el: ElResidual,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineReport {
    pub levels: Vec<RefineLevel>,
}

impl RefineReport {
    /// `(E_{k+1} − E_k)/|E_k|` between consecutive levels.
    pub fn energy_drifts(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| (w[1].energy - w[0].energy) / w[0].energy.abs()).collect()
    }

    pub fn norm_drifts(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| (w[1].psi_norm - w[0].psi_norm) / w[0].psi_norm).collect()
    }
}

/// Solves independently at each truncation in `levels`. Quadrature and loop
/// resolution scale with `k_max` unless set explicitly.
pub fn refine_check<T: Real>(cfg: &GeodesicConfig, levels: &[usize]) -> Result<RefineReport, GeodesicError> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GeodesicError::Config(format!("truncation levels must be nonempty and ascending, got {levels:?}")));
    }
    let mut out = Vec::new();
    for &k in levels {
        let mut c = cfg.clone();
        c.k_max = k;
        c.n_grid = cfg.n_grid.map(|n| (n * k).div_ceil(cfg.k_max).max(4 * k));
        c.m_phi = cfg.m_phi.map(|m| (m * k / cfg.k_max).max(1));
        c.z2_check = false;
        let rep = solve_class::<T>(&c)?.best;
        out.push(RefineLevel {
            k_max: k,
            energy: rep.energy,
            psi_norm: rep.psi_norm,
            converged: rep.converged(),
            iterations: rep.iterations,
            el: rep.el,
        });
    }
    Ok(RefineReport { levels: out })
}

/// Nehari invariants plus both Euler-Lagrange residuals at `(u, v)`.
pub fn verify_solution<T: Real>(
    ctx: &GeodesicContext<T>,
    u: &DVector<T>,
    v: &DVector<T>,
    tol: f64,
) -> Result<InvariantReport, GeodesicError> {
    let finite = u.iter().chain(v.iter()).all(|x| x.is_finite());
    let mut rep = InvariantReport::default();
    rep.push(Verdict::at_most("finite", if finite { 0.0 } else { 1.0 }, 0.0));
    if !finite {
        return Ok(rep);
    }
    rep.extend(invariant_suite(ctx, u, v, tol)?);
    let el = el_residual(ctx, u, v)?;
    rep.push(Verdict::at_most("el_residual_phi", el.phi, tol));
    rep.push(Verdict::at_most("el_residual_psi", el.psi, tol));
    Ok(rep)
}
