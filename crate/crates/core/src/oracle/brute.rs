//! Exhaustive grid search for the half-space maximizer of small problems.

use crate::nehari::{NehariError, ProblemContext};
use crate::num::Real;
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BruteError {
    #[error("best grid point lies on the grid boundary (t = {t}); enlarge the grid")]
    GridTooSmall { t: f64 },
    #[error("brute force supports at most 3 negative directions, got {0}")]
    TooManyDirections(usize),
    #[error("positive part of v vanishes")]
    Degenerate,
    #[error(transparent)]
    Context(#[from] NehariError),
}

/// Search box `t ∈ (0, t_max]`, `w_i ∈ [−w_max, w_max]`, final resolution
/// `step`.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub t_max: f64,
    pub w_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { t_max: 3.0, w_max: 3.0, step: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct BruteResult {
    /// Ray coefficient along `e = v⁺/‖v⁺‖_V`.
    pub t: f64,
    /// Eigen coordinates of the `V⁻` part, in the order of the model's
    /// negative index set.
    pub w: Vec<f64>,
    /// Full eigen-coordinate vector of the maximizer.
    pub coords: Vec<f64>,
    pub energy: f64,
    /// Energy gap to the second-best discrete local maximum of the coarse
    /// grid (`∞` when the coarse grid has a single one).
    pub runner_up_gap: f64,
    pub evaluations: usize,
}

struct Grid {
    lo: Vec<f64>,
    h: Vec<f64>,
    n: Vec<usize>,
}

impl Grid {
    fn len(&self) -> usize {
        self.n.iter().product()
    }

    fn index(&self, mut k: usize) -> Vec<usize> {
        let mut out = vec![0; self.n.len()];
        for d in (0..self.n.len()).rev() {
            out[d] = k % self.n[d];
            k /= self.n[d];
        }
        out
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.n).fold(0, |acc, (i, n)| acc * n + i)
    }

    fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(d, &i)| self.lo[d] + self.h[d] * i as f64).collect()
    }
}

/// Grid search over `(t, w) ∈ (0, t_max] × [−w_max, w_max]^m` for the maximizer
/// of `E₂(u, t e + w)`, refined by successive zoom grids down to
/// `grid.step`.
pub fn brute_force_halfspace_max<T: Real, C: ProblemContext<T> + ?Sized>(
    ctx: &C,
    u: &DVector<T>,
    v: &DVector<T>,
    grid: &GridSpec,
) -> Result<BruteResult, BruteError> {
    let model = ctx.model(u)?;
    let minus = model.index_minus().to_vec();
    let m = minus.len();
    if m > 3 {
        return Err(BruteError::TooManyDirections(m));
    }
    let a = model.coords(v);
    let plus_norm = model.index_plus().iter().fold(T::zero(), |s, &i| s + model.weight(i) * a[i] * a[i]).sqrt();
    if plus_norm == T::zero() {
        return Err(BruteError::Degenerate);
    }
    let dim = a.len();
    let mut e = DVector::zeros(dim);
    for &i in model.index_plus() {
        e[i] = a[i] / plus_norm;
    }
    let mut evaluations = 0usize;
    let mut energy = |p: &[f64]| -> Result<f64, BruteError> {
        evaluations += 1;
        let mut z = &e * T::lit(p[0]);
        for (k, &i) in minus.iter().enumerate() {
            z[i] = T::lit(p[k + 1]);
        }
        let mut q = T::zero();
        for i in 0..dim {
            q += model.eigenvalues()[i] * z[i] * z[i];
        }
        let x = model.synthesize(&z);
        Ok((q / T::lit(2.0) - ctx.b(u, &x)?).to_f64())
    };

    let coarse_n = [301usize, 121, 61, 31][m];
    let mut g = Grid {
        lo: std::iter::once(grid.t_max / coarse_n as f64).chain(std::iter::repeat_n(-grid.w_max, m)).collect(),
        h: std::iter::once(grid.t_max / coarse_n as f64).chain(std::iter::repeat_n(2.0 * grid.w_max / (coarse_n - 1) as f64, m)).collect(),
        n: vec![coarse_n; m + 1],
    };
    let values: Vec<f64> = (0..g.len()).map(|k| energy(&g.point(&g.index(k)))).collect::<Result<_, _>>()?;

    // discrete local maxima of the coarse grid
    let mut maxima: Vec<(f64, usize)> = Vec::new();
    for k in 0..values.len() {
        let idx = g.index(k);
        let mut is_max = true;
        for d in 0..=m {
            for delta in [-1i64, 1] {
                let j = idx[d] as i64 + delta;
                if j < 0 || j >= g.n[d] as i64 {
                    continue;
                }
                let mut nb = idx.clone();
                nb[d] = j as usize;
                if values[g.flat(&nb)] > values[k] {
                    is_max = false;
                }
            }
        }
        if is_max {
            maxima.push((values[k], k));
        }
    }
    maxima.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let (best_value, best_k) = maxima[0];
    let runner_up_gap = maxima.get(1).map_or(f64::INFINITY, |r| best_value - r.0);
    let best_idx = g.index(best_k);
    let on_boundary = best_idx[0] + 1 == g.n[0] || best_idx[1..].iter().zip(&g.n[1..]).any(|(&i, &n)| i == 0 || i + 1 == n);
    if on_boundary {
        return Err(BruteError::GridTooSmall { t: g.point(&best_idx)[0] });
    }

    // zoom: re-grid a box of ±2 coarse cells around the incumbent
    let mut center = g.point(&best_idx);
    let mut best = best_value;
    let zoom_n = 11usize;
    while g.h.iter().cloned().fold(0.0, f64::max) > grid.step * (1.0 + 1e-9) {
        let h: Vec<f64> = g.h.iter().map(|&h| (4.0 * h / (zoom_n - 1) as f64).max(grid.step)).collect();
        let half = (zoom_n / 2) as f64;
        g = Grid { lo: center.iter().zip(&h).map(|(c, h)| c - half * h).collect(), h, n: vec![zoom_n; m + 1] };
        for k in 0..g.len() {
            let p = g.point(&g.index(k));
            if p[0] <= 0.0 {
                continue;
            }
            let val = energy(&p)?;
            if val > best {
                best = val;
                center = p;
            }
        }
    }

    let mut coords = vec![0.0; dim];
    for i in 0..dim {
        coords[i] = e[i].to_f64() * center[0];
    }
    for (k, &i) in minus.iter().enumerate() {
        coords[i] = center[k + 1];
    }
    Ok(BruteResult { t: center[0], w: center[1..].to_vec(), coords, energy: best, runner_up_gap, evaluations })
}
