//! Central finite differences.

use crate::num::Real;
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdError {
    #[error("step {0:e} outside [1e-8, 1e-2]")]
    Step(f64),
    #[error("functional returned a non-finite value at coordinate {0}")]
    NonFinite(usize),
    #[error("functional evaluation failed: {0}")]
    Eval(String),
}

/// `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h` for every coordinate.
pub fn fd_gradient<T: Real, E: std::fmt::Display>(
    mut f: impl FnMut(&DVector<T>) -> Result<T, E>,
    x: &DVector<T>,
    step: T,
) -> Result<DVector<T>, FdError> {
    let h = step.to_f64();
    if !(1e-8..=1e-2).contains(&h) {
        return Err(FdError::Step(h));
    }
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let fp = f(&xp).map_err(|e| FdError::Eval(e.to_string()))?;
        xp[i] = x[i] - step;
        let fm = f(&xp).map_err(|e| FdError::Eval(e.to_string()))?;
        xp[i] = x[i];
        let d = (fp - fm) / (step + step);
        if !d.is_finite() {
            return Err(FdError::NonFinite(i));
        }
        g[i] = d;
    }
    Ok(g)
}

/// `‖a − b‖ / ‖b‖`, or the absolute difference when `b` vanishes.
pub fn relative_error<T: Real>(a: &DVector<T>, b: &DVector<T>) -> T {
    let d = (a - b).norm();
    let n = b.norm();
    if n > T::zero() {
        d / n
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let g = fd_gradient(|x: &DVector<f64>| Ok::<_, String>(0.5 * 3.0 * x[0] * x[0]), &DVector::from_element(1, 1.0), 1e-4).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn guards() {
        let x = DVector::from_element(1, 1.0);
        assert_eq!(fd_gradient(|_: &DVector<f64>| Ok::<_, String>(0.0), &x, 1.0).unwrap_err(), FdError::Step(1.0));
        assert_eq!(fd_gradient(|_: &DVector<f64>| Ok::<_, String>(f64::NAN), &x, 1e-4).unwrap_err(), FdError::NonFinite(0));
    }
}
