//! Closed-form single-mode ground state on the circle.
//!
//! For `ψ = t·e^{iks}` with `|ψ| ≡ t` on an eigenmode of eigenvalue `λ > 0`
//! and constant `b`, the circle-integrated energy is
//! `h(t) = πλt² − 2πb t^{p+1}/(p+1)`, maximized at `λt = b t^p`.

/// `(t*, e*)` with `t* = (λ/b)^{1/(p−1)}` and `e* = πλt*²(p−1)/(p+1)`.
pub fn scalar_ground_state_oracle(lambda: f64, b: f64, p: f64) -> (f64, f64) {
    assert!(lambda > 0.0 && b > 0.0 && p > 1.0, "oracle needs λ > 0, b > 0, p > 1");
    let t = (lambda / b).powf(1.0 / (p - 1.0));
    (t, std::f64::consts::PI * lambda * t * t * (p - 1.0) / (p + 1.0))
}

/// Maximizes `h(t)` by golden-section search on `(0, t_max]`; an
/// independent check of [`scalar_ground_state_oracle`].
pub fn ray_maximum(lambda: f64, b: f64, p: f64, t_max: f64) -> (f64, f64) {
    let pi = std::f64::consts::PI;
    let h = |t: f64| pi * lambda * t * t - 2.0 * pi * b * t.powf(p + 1.0) / (p + 1.0);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut c) = (0.0, t_max);
    let mut x1 = c - r * (c - a);
    let mut x2 = a + r * (c - a);
    let (mut f1, mut f2) = (h(x1), h(x2));
    while c - a > 1e-13 * t_max {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (c - a);
            f2 = h(x2);
        } else {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - r * (c - a);
            f1 = h(x1);
        }
    }
    let t = 0.5 * (a + c);
    (t, h(t))
}
