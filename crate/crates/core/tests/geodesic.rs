use nalgebra::DVector;
use nehari::circle::{hypothesis_audit, Nonlinearity, SpinorField};
use nehari::geodesic::{
    build_context, el_residual, initial_state, refine_check, solve_class, total_energy, verify_solution, ChartSpec, GeodesicConfig,
    GeodesicContext,
};
use nehari::nehari::{reduced_energy, reduced_gradient, MaximizerOptions, ProblemContext};
use nehari::oracle::{fd_gradient, relative_error, scalar_ground_state_oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn flat(k_max: usize) -> GeodesicConfig {
    GeodesicConfig { k_max, z2_check: false, ..GeodesicConfig::default() }
}

fn sphere(k_max: usize) -> GeodesicConfig {
    GeodesicConfig { chart: ChartSpec::RoundSphere2, k_max, z2_check: false, ..GeodesicConfig::default() }
}

fn random_point(ctx: &GeodesicContext<f64>, seed: u64, amp: f64) -> (DVector<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = DVector::from_fn(ctx.u_dim(), |_, _| amp * rng.gen_range(-1.0..1.0));
    let v = DVector::from_fn(ctx.v_dim(), |_, _| 0.3 * rng.gen_range(-1.0..1.0));
    (u, v)
}

#[test]
fn flat_ground_state_matches_scalar_oracle() {
    let (_, e_star) = scalar_ground_state_oracle(0.5, 1.0, 3.0);
    let r = solve_class::<f64>(&flat(16)).unwrap().best;
    assert!(r.converged());
    assert!((r.energy - e_star).abs() <= 1e-10 * e_star, "{} vs {e_star}", r.energy);
    assert!(r.el.max() <= 1e-8);
    assert!(r.psi_minus_norm <= r.psi_plus_norm && r.psi_norm > 0.0);
    // decoupling: kinetic part vanishes, spinor part carries the energy
    assert!(r.phi_energy.abs() < 1e-12);
    assert!((r.dirac_energy - r.k_energy - r.energy).abs() < 1e-12);
}

#[test]
fn winding_adds_pi_w_squared() {
    let base = solve_class::<f64>(&flat(8)).unwrap().best.energy;
    let wound = solve_class::<f64>(&GeodesicConfig { winding: vec![2], ..flat(8) }).unwrap().best;
    assert!(wound.converged());
    assert!((wound.energy - (base + 4.0 * PI)).abs() <= 1e-10 * wound.energy);
}

#[test]
fn z2_partner_has_equal_energy_and_negated_spinor() {
    let cfg = GeodesicConfig { z2_check: true, b_cos: 0.5, p: 2.5, ..flat(8) };
    let r = solve_class::<f64>(&cfg).unwrap().best;
    let z = r.z2.unwrap();
    assert!(z.energy_gap <= 1e-10, "{z:?}");
    assert!(z.spinor_gap <= 1e-6 && z.phi_gap <= 1e-6, "{z:?}");
}

#[test]
fn clifford_sign_flip_keeps_energy() {
    let plus = solve_class::<f64>(&GeodesicConfig { b_cos: 0.5, ..flat(8) }).unwrap().best;
    let minus = solve_class::<f64>(&GeodesicConfig { b_cos: 0.5, clifford_sign: -1, ..flat(8) }).unwrap().best;
    assert!((plus.energy - minus.energy).abs() <= 1e-10, "{} vs {}", plus.energy, minus.energy);
    // the minimizer lives on the mode of eigenvalue 1/2: k = −σ/2
    let dominant =
        |s: &SpinorField<f64>| (0..s.coeffs.nrows()).max_by(|&a, &b| s.coeffs[(a, 0)].norm().total_cmp(&s.coeffs[(b, 0)].norm())).unwrap();
    let ctx = build_context::<f64>(&flat(8)).unwrap();
    assert_eq!(ctx.domain().mode_numerator(dominant(&plus.psi)), -1);
    assert_eq!(ctx.domain().mode_numerator(dominant(&minus.psi)), 1);
}

#[test]
fn perturbed_solution_is_stable_under_refinement() {
    let cfg = GeodesicConfig { p: 2.5, b_cos: 0.5, ..flat(8) };
    let rep = refine_check::<f64>(&cfg, &[8, 16, 32]).unwrap();
    assert!(rep.levels.iter().all(|l| l.converged && l.psi_norm > 0.0 && l.el.max() <= 1e-8));
    assert!(rep.energy_drifts().iter().all(|d| d.abs() <= 1e-10));
    assert!(rep.norm_drifts().iter().all(|d| d.abs() <= 0.1));
    let single = refine_check::<f64>(&cfg, &[8]).unwrap();
    assert!(single.energy_drifts().is_empty());
    assert!(refine_check::<f64>(&cfg, &[16, 8]).is_err());
}

#[test]
fn flat_analytic_case_has_no_refinement_drift() {
    let rep = refine_check::<f64>(&flat(4), &[4, 8, 16]).unwrap();
    assert!(rep.energy_drifts().iter().all(|d| d.abs() <= 1e-10));
}

#[test]
fn sphere_solve_reaches_constant_loop() {
    let r = solve_class::<f64>(&sphere(8)).unwrap().best;
    assert!(r.converged());
    assert!(r.el.max() <= 1e-6);
    // isometry invariance: a constant loop with the flat ground-state spinor
    assert!(r.max_speed < 1e-6, "{}", r.max_speed);
    assert!((r.energy - PI / 8.0).abs() < 1e-8);
}

#[test]
fn flat_model_spectrum_is_independent_of_loop() {
    let ctx = build_context::<f64>(&GeodesicConfig { chart: ChartSpec::FlatTorus(2), ..flat(4) }).unwrap();
    let (u, _) = random_point(&ctx, 3, 0.5);
    let m = ctx.model(&u).unwrap();
    assert!((m.spectral_gap() - 0.5).abs() < 1e-14);
}

#[test]
fn constant_b_cubic_passes_hypothesis_audit() {
    let ctx = build_context::<f64>(&flat(4)).unwrap();
    let nl: &Nonlinearity<f64> = ctx.nonlinearity();
    let a = hypothesis_audit(nl, 200, 1);
    assert!(a.passed());
    assert!((a.c2 - 0.5).abs() < 1e-15);
}

#[test]
fn total_energy_examples() {
    let ctx = build_context::<f64>(&GeodesicConfig { winding: vec![1], ..flat(4) }).unwrap();
    let u = DVector::zeros(ctx.u_dim());
    let zero = DVector::zeros(ctx.v_dim());
    assert!((total_energy(&ctx, &u, &zero).unwrap() - PI).abs() < 1e-13);
    let (u_rand, v) = random_point(&ctx, 5, 0.3);
    assert!((total_energy(&ctx, &u_rand, &zero).unwrap() - ctx.e1(&u_rand).unwrap()).abs() < 1e-14);
    // pure winding: total = π|w|² + E₂(ψ)
    let e2 = ctx.model(&u).unwrap();
    let a = e2.coords(&v);
    let quad: f64 = (0..a.len()).map(|i| e2.eigenvalues()[i] * a[i] * a[i]).sum();
    let expected = PI + quad / 2.0 - ctx.b(&u, &v).unwrap();
    assert!((total_energy(&ctx, &u, &v).unwrap() - expected).abs() < 1e-10);
}

#[test]
fn trivial_solution_fails_membership_but_has_zero_residual() {
    let ctx = build_context::<f64>(&GeodesicConfig { winding: vec![1], ..flat(4) }).unwrap();
    let u = DVector::zeros(ctx.u_dim());
    let v = DVector::zeros(ctx.v_dim());
    let el = el_residual(&ctx, &u, &v).unwrap();
    assert_eq!((el.phi, el.psi), (0.0, 0.0));
    let rep = verify_solution(&ctx, &u, &v, 1e-8).unwrap();
    assert!(!rep.get("positive_part").unwrap().passed);
    assert!(rep.get("el_residual_phi").unwrap().passed && rep.get("el_residual_psi").unwrap().passed);
}

#[test]
fn converged_solutions_verify() {
    for cfg in [GeodesicConfig { p: 2.5, b_cos: 0.5, ..flat(8) }, sphere(6)] {
        let r = solve_class::<f64>(&cfg).unwrap().best;
        let ctx = build_context::<f64>(&cfg).unwrap();
        let rep = verify_solution(&ctx, &r.u, &r.v, 1e-8).unwrap();
        assert!(rep.all_passed(), "{:?}", rep.failures().collect::<Vec<_>>());
    }
}

/// `∂_a Ẽ` in eigen coordinates corresponds to the ambient covector `G B ∂_a Ẽ`.
fn ambient_v_dual(ctx: &GeodesicContext<f64>, u: &DVector<f64>, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let g = reduced_gradient(ctx, u, v, &MaximizerOptions::default()).unwrap();
    let m = g.maximizer.model.clone();
    let amb = m.basis() * &g.v_dual;
    let amb = match m.gram() {
        Some(gram) => gram * amb,
        None => amb,
    };
    (g.u_dual, amb)
}

fn check_reduced_gradient(cfg: &GeodesicConfig, amp: f64) {
    let ctx = build_context::<f64>(cfg).unwrap();
    let (u0, _) = random_point(&ctx, 11, amp);
    let (_, v) = initial_state(&ctx, cfg, 4).unwrap();
    let opts = MaximizerOptions::default();
    let (du, dv) = ambient_v_dual(&ctx, &u0, &v);
    let fu = fd_gradient(|uu: &DVector<f64>| reduced_energy(&ctx, uu, &v, &opts), &u0, 1e-5).unwrap();
    assert!(relative_error(&du, &fu) <= 1e-4, "u: {}", relative_error(&du, &fu));
    let fv = fd_gradient(|vv: &DVector<f64>| reduced_energy(&ctx, &u0, vv, &opts), &v, 1e-5).unwrap();
    assert!(relative_error(&dv, &fv) <= 1e-4, "v: {}", relative_error(&dv, &fv));
}

#[test]
fn reduced_gradient_matches_fd_on_flat_context() {
    check_reduced_gradient(&GeodesicConfig { b_cos: 0.5, m_phi: Some(3), winding: vec![1], ..flat(4) }, 0.2);
}

#[test]
fn reduced_gradient_matches_fd_on_sphere_context() {
    check_reduced_gradient(&GeodesicConfig { m_phi: Some(2), ..sphere(3) }, 0.2);
}

#[test]
fn el_residual_matches_fd_of_total_energy() {
    for cfg in [GeodesicConfig { b_cos: 0.5, m_phi: Some(3), ..flat(4) }, GeodesicConfig { m_phi: Some(2), ..sphere(3) }] {
        let ctx = build_context::<f64>(&cfg).unwrap();
        let (u, v) = random_point(&ctx, 21, 0.2);
        let fu = fd_gradient(|uu: &DVector<f64>| total_energy(&ctx, uu, &v), &u, 1e-5).unwrap();
        let phi_fd = fu.dot(&ctx.u_precondition(&u, &fu)).sqrt();
        let fv = fd_gradient(|vv: &DVector<f64>| total_energy(&ctx, &u, vv), &v, 1e-5).unwrap();
        let m = ctx.model(&u).unwrap();
        let r = m.dual_coords(&fv);
        let psi_fd = (0..r.len()).map(|i| r[i] * r[i] / (1.0 + m.eigenvalues()[i].abs())).sum::<f64>().sqrt();
        let el = el_residual(&ctx, &u, &v).unwrap();
        assert!((el.phi - phi_fd).abs() <= 1e-4 * phi_fd, "{} vs {phi_fd}", el.phi);
        assert!((el.psi - psi_fd).abs() <= 1e-4 * psi_fd, "{} vs {psi_fd}", el.psi);
    }
}

#[test]
fn identical_seeds_are_bitwise_reproducible() {
    let cfg = GeodesicConfig { p: 2.5, b_cos: 0.5, multistart: 3, ..flat(6) };
    let a = solve_class::<f64>(&cfg).unwrap();
    let b = solve_class::<f64>(&cfg).unwrap();
    assert_eq!(a.best.v, b.best.v);
    assert_eq!(a.best.seed, b.best.seed);
    assert_eq!(a.runs.len(), 3);
}
