use nalgebra::{DMatrix, DVector};
use nehari::nehari::{
    e2_energy, maximize_on_halfspace, minimize_reduced, nehari_residuals, reduced_energy, reduced_gradient, MaximizerOptions,
    MinimizerOptions, NehariError, Termination,
};
use nehari::oracle::{brute_force_halfspace_max, fd_gradient, invariant_suite, relative_error, GridSpec, PlaneRotation, ToyProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quartic_pair() -> ToyProblem<f64> {
    // L = diag(−1, 1): index 0 is the negative mode
    ToyProblem::diagonal(&[-1.0, 1.0], 3.0, 1.0)
}

fn empty() -> DVector<f64> {
    DVector::zeros(0)
}

#[test]
fn quartic_pair_maximizer() {
    let toy = quartic_pair();
    let opts = MaximizerOptions::default();
    let r = maximize_on_halfspace(&toy, &empty(), &DVector::from_vec(vec![0.0, 1.0]), &opts).unwrap();
    assert!((r.t - 1.0).abs() < 1e-10 && r.g[0].abs() < 1e-10 && (r.g[1] - 1.0).abs() < 1e-10);
    assert!((r.energy - 0.25).abs() < 1e-12);
    let shifted = maximize_on_halfspace(&toy, &empty(), &DVector::from_vec(vec![0.7, 1.0]), &opts).unwrap();
    assert!((&shifted.g - &r.g).norm() < 1e-10);
    let again = maximize_on_halfspace(&toy, &empty(), &r.g, &opts).unwrap();
    assert_eq!(again.iterations, 0);
    assert!((&again.g - &r.g).norm() < 1e-12);
    assert!(r.r_scalar.abs() <= 1e-10 && r.r_minus <= 1e-10);
}

#[test]
fn weighted_quartic_ray() {
    let toy = ToyProblem::diagonal(&[-1.0, 1.0], 3.0, 2.0);
    let r = maximize_on_halfspace(&toy, &empty(), &DVector::from_vec(vec![0.0, 1.0]), &MaximizerOptions::default()).unwrap();
    assert!((r.t - 0.5f64.sqrt()).abs() < 1e-10);
    let b = brute_force_halfspace_max(&toy, &empty(), &DVector::from_vec(vec![0.0, 1.0]), &GridSpec::default()).unwrap();
    assert!((b.t - 0.5f64.sqrt()).abs() < 2e-3);
}

#[test]
fn degenerate_and_kernel_rejected() {
    let toy = quartic_pair();
    let e = maximize_on_halfspace(&toy, &empty(), &DVector::from_vec(vec![1.0, 0.0]), &MaximizerOptions::default());
    assert!(matches!(e, Err(NehariError::Degenerate(_))));
    let kern = ToyProblem::diagonal(&[-1.0, 0.0, 1.0], 3.0, 1.0);
    let e = maximize_on_halfspace(&kern, &empty(), &DVector::from_vec(vec![0.0, 0.0, 1.0]), &MaximizerOptions::default());
    assert_eq!(e.unwrap_err(), NehariError::Kernel(1));
}

#[test]
fn e2_closed_form() {
    let toy = ToyProblem::diagonal(&[-1.0, 2.0], 3.0, 1.0);
    let t = 0.7;
    let e = e2_energy(&toy, &empty(), &DVector::from_vec(vec![0.0, t])).unwrap();
    assert!((e - (0.5 * 2.0 * t * t - t.powi(4) / 4.0)).abs() < 1e-15);
    assert_eq!(e2_energy(&toy, &empty(), &DVector::zeros(2)).unwrap(), 0.0);
    assert_eq!(nehari_residuals(&toy, &empty(), &DVector::zeros(2)).unwrap(), (0.0, 0.0));
}

#[test]
fn brute_force_rejects_unbounded_ray() {
    let toy = ToyProblem::diagonal(&[-1.0, 1.0], 3.0, 0.0);
    let r = brute_force_halfspace_max(&toy, &empty(), &DVector::from_vec(vec![0.0, 1.0]), &GridSpec::default());
    assert!(matches!(r, Err(nehari::oracle::BruteError::GridTooSmall { .. })));
}

#[test]
fn random_toys_agree_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = GridSpec::default();
    let mut done = 0;
    while done < 20 {
        let dim = rng.gen_range(2..=8);
        let n_minus = rng.gen_range(1..=3.min(dim - 1));
        let toy = ToyProblem::<f64>::random(&mut rng, dim, n_minus, 0);
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let opts = MaximizerOptions { multistart: 10, seed: done as u64, ..MaximizerOptions::default() };
        let m = match maximize_on_halfspace(&toy, &empty(), &v, &opts) {
            Ok(m) => m,
            Err(NehariError::Degenerate(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let b = match brute_force_halfspace_max(&toy, &empty(), &v, &grid) {
            Ok(b) => b,
            Err(nehari::oracle::BruteError::GridTooSmall { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let dist = m.coords.iter().zip(&b.coords).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dist <= 10.0 * grid.step, "toy {done}: distance {dist}");
        assert!(m.multistart_distance.unwrap() <= 1e-6);
        assert!(m.energy > 0.0);
        done += 1;
    }
}

#[test]
fn reduced_gradient_matches_finite_differences_with_moving_splitting() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..5 {
        let toy = ToyProblem::<f64>::random(&mut rng, 5, 2, 2).with_rotation(PlaneRotation { i: 1, j: 3, rate: 0.8 });
        let u = DVector::from_fn(2, |_, _| rng.gen_range(-0.5..0.5));
        let v = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
        let opts = MaximizerOptions::default();
        let g = reduced_gradient(&toy, &u, &v, &opts).unwrap();
        let fu = fd_gradient(|uu: &DVector<f64>| reduced_energy(&toy, uu, &v, &opts), &u, 1e-5).unwrap();
        assert!(relative_error(&g.u_dual, &fu) <= 1e-4, "{} vs {}", g.u_dual, fu);
        let fv = fd_gradient(|vv: &DVector<f64>| reduced_energy(&toy, &u, vv, &opts), &v, 1e-5).unwrap();
        // v_dual is in eigen coordinates: dẼ[η] = v_dual · Bᵀη
        let model = g.maximizer.model.clone();
        let ambient = model.basis() * &g.v_dual;
        assert!(relative_error(&ambient, &fv) <= 1e-4, "{} vs {}", ambient, fv);
    }
}

#[test]
fn minimizer_reaches_quartic_pair_point() {
    let toy = quartic_pair();
    let out = minimize_reduced(&toy, &empty(), &DVector::from_vec(vec![0.3, -2.0]), &MinimizerOptions::default()).unwrap();
    assert_eq!(out.termination, Termination::Converged);
    assert!((out.point.energy - 0.25).abs() < 1e-10);
    assert!(out.iterations <= 200);
    let again = minimize_reduced(&toy, &empty(), &out.point.v, &MinimizerOptions::default()).unwrap();
    assert_eq!(again.iterations, 0);
}

#[test]
fn minimizer_on_coupled_toy_is_monotone_and_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let toy = ToyProblem::<f64>::random(&mut rng, 6, 2, 3).with_rotation(PlaneRotation { i: 2, j: 0, rate: 0.5 });
    let u0 = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
    let v0 = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
    let out = minimize_reduced(&toy, &u0, &v0, &MinimizerOptions::default()).unwrap();
    assert!(out.converged(), "{:?} after {}", out.termination, out.iterations);
    for w in out.trace.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs().max(1.0));
    }
    let rep = invariant_suite(&toy, &out.point.u, &out.point.v, 1e-8).unwrap();
    assert!(rep.all_passed(), "{:?}", rep.failures().collect::<Vec<_>>());
    let _ = DMatrix::<f64>::identity(1, 1);
}
