//! Pass/fail audit of a claimed Nehari point.

use crate::nehari::context_internals::{eigen_residual, minus_dual_norm, quadratic};
use crate::nehari::{NehariError, ProblemContext};
use crate::num::Real;
use nalgebra::DVector;
use serde::Serialize;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Verdict {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Verdict { name: name.into(), passed: value <= threshold, value, threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Verdict { name: name.into(), passed: value >= threshold, value, threshold }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Verdict { name: name.into(), passed: value > threshold, value, threshold }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct InvariantReport {
    pub verdicts: Vec<Verdict>,
}

impl InvariantReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn push(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn extend(&mut self, other: InvariantReport) {
        self.verdicts.extend(other.verdicts);
    }
}

/// Checks, at `(u, v)`:
///
/// * `positive_part`: `‖v⁺‖_V > 0`;
/// * `r_scalar`, `r_minus`: both Nehari residuals at most `tol`;
/// * `minus_le_plus`: `‖v⁻‖²_V ≤ ‖v⁺‖²_V`;
/// * `minus_energy_identity`: `|‖v⁻‖²_V + ⟨∇_v b, v⁻⟩| ≤ tol·max(1, ‖v‖²_V)`;
/// * `norm_growth_bound`: `‖v‖²_V ≤ f(1 + 2f/μ)|v|²_W` with `f` the context's
///   growth factor and `μ` the smallest `|λ|` (skipped without a factor);
/// * `positive_energy`: `E₂(u, v) > 0`.
pub fn invariant_suite<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    u: &DVector<T>,
    v: &DVector<T>,
    tol: f64,
) -> Result<InvariantReport, NehariError> {
    let model = ctx.model(u)?;
    let a = model.coords(v);
    let grad_b = ctx.b_gradient(u, v)?;
    let r = eigen_residual(&model, &a, &grad_b);
    let sum = |idx: &[usize]| idx.iter().fold(T::zero(), |s, &i| s + model.weight(i) * a[i] * a[i]).to_f64();
    let plus_sq = sum(model.index_plus());
    let minus_sq = sum(model.index_minus());
    let total_sq = plus_sq + minus_sq + sum(model.index_zero());
    let db = model.dual_coords(&grad_b);
    let b_minus = model.index_minus().iter().fold(T::zero(), |s, &i| s + db[i] * a[i]).to_f64();

    let mut rep = InvariantReport::default();
    rep.push(Verdict::above("positive_part", plus_sq.sqrt(), 1e-12));
    rep.push(Verdict::at_most("r_scalar", r.dot(&a).to_f64().abs(), tol));
    rep.push(Verdict::at_most("r_minus", minus_dual_norm(&model, &r).to_f64(), tol));
    rep.push(Verdict::at_most("minus_le_plus", minus_sq - plus_sq, 0.0));
    rep.push(Verdict::at_most("minus_energy_identity", (minus_sq + b_minus).abs(), tol * total_sq.max(1.0)));
    if let Some(f) = ctx.growth_factor(u, v) {
        let f = f.to_f64();
        let mu = model.spectral_gap().to_f64();
        let w_sq = match model.gram() {
            Some(g) => v.dot(&(g * v)).to_f64(),
            None => v.norm_squared().to_f64(),
        };
        let bound = f * (1.0 + 2.0 * f / mu) * w_sq;
        rep.push(Verdict::at_most("norm_growth_bound", total_sq - bound, 1e-10 * total_sq.max(1.0)));
    }
    let e2 = (quadratic(&model, &a) / T::lit(2.0) - ctx.b(u, v)?).to_f64();
    rep.push(Verdict::above("positive_energy", e2, 0.0));
    Ok(rep)
}
