use crate::config::{parse_ints, ConfigError, RunConfig, SweepAxis};
use crate::solution::{context_for, fmt_f64, write_atomic, Footer, Solution};
use nalgebra::DVector;
use nehari::circle::{assemble_twisted_dirac, gram_hermiticity_defect, hypothesis_audit};
use nehari::geodesic::{build_context, initial_state, solve_class_with, verify_solution, GeodesicConfig, GeodesicError};
use nehari::nehari::{maximize_on_halfspace, reduced_energy, reduced_gradient, MaximizerOptions, NehariError, ProblemContext, TraceEntry};
use nehari::oracle::{
    brute_force_halfspace_max, fd_gradient, ray_maximum, relative_error, scalar_ground_state_oracle, BruteError, GridSpec, InvariantReport,
    PlaneRotation, ToyProblem, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    NotConverged(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::NotConverged(m) => write!(f, "solver failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Invalid(e.0)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<GeodesicError> for CliError {
    fn from(e: GeodesicError) -> Self {
        match e {
            GeodesicError::Config(m) => CliError::Invalid(m),
            other => CliError::NotConverged(other.to_string()),
        }
    }
}

impl From<NehariError> for CliError {
    fn from(e: NehariError) -> Self {
        CliError::NotConverged(e.to_string())
    }
}

/// Result of a command: text for stdout and the exit code.
#[derive(Debug)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

pub fn load_config(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_text(&text)?;
    if out.is_some() {
        cfg.out = out;
    }
    if let Some(s) = seed {
        cfg.geo.seed = s;
    }
    Ok(cfg)
}

fn save_csv(cfg: &RunConfig, name: &str, text: &str) -> Result<(), CliError> {
    if let Some(dir) = &cfg.out {
        write_atomic(&dir.join(name), text.as_bytes())?;
    }
    Ok(())
}

fn echo_header(cfg: &RunConfig) -> String {
    cfg.physical_pairs().iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
}

/// Eigenvalues of the twisted Dirac operator at the starting loop of
/// `cfg.seed`. Each complex eigenvalue appears once.
pub fn spectrum(cfg: &RunConfig) -> Result<Output, CliError> {
    let ctx = build_context::<f64>(&cfg.geo)?;
    let (u0, _) = initial_state(&ctx, &cfg.geo, cfg.geo.seed)?;
    let defect = gram_hermiticity_defect(
        &assemble_twisted_dirac(ctx.domain(), &ctx.loop_map(&u0)).map_err(|e| CliError::NotConverged(e.to_string()))?,
    );
    let model = ctx.model(&u0)?;
    let mut ev: Vec<f64> = model.eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let mut s = echo_header(cfg);
    s.push_str("index,eigenvalue,symmetric_defect\n");
    // the real form doubles every eigenvalue
    for (i, l) in ev.iter().step_by(2).enumerate() {
        let _ = writeln!(s, "{i},{},{}", fmt_f64(*l), fmt_f64(defect));
    }
    save_csv(cfg, "spectrum.csv", &s)?;
    Ok(Output { stdout: s, code: EXIT_OK })
}

fn trace_json(seed: u64, e: &TraceEntry) -> String {
    serde_json::json!({
        "seed": seed,
        "iter": e.iter,
        "energy": e.energy,
        "r_scalar": e.r_scalar,
        "r_minus": e.r_minus,
        "grad_u": e.grad_u,
        "grad_v": e.grad_v,
        "step": e.step,
    })
    .to_string()
}

/// Minimizes, then writes `solution.txt`, `solve.log.jsonl` and
/// `summary.json` into the output directory.
pub fn solve(cfg: &RunConfig) -> Result<Output, CliError> {
    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let traces: Mutex<BTreeMap<u64, Vec<String>>> = Mutex::new(BTreeMap::new());
    let observer = |seed: u64, e: &TraceEntry| {
        log::debug!("seed {seed} iter {} energy {:.12e} grad {:.3e}/{:.3e}", e.iter, e.energy, e.grad_u, e.grad_v);
        traces.lock().expect("trace lock").entry(seed).or_default().push(trace_json(seed, e));
    };
    let summary = solve_class_with::<f64>(&cfg.geo, &observer)?;
    let best = &summary.best;
    let converged = best.converged();
    let sol = Solution {
        config: cfg.clone(),
        converged,
        termination: format!("{:?}", best.termination),
        iterations: best.iterations,
        winding: best.phi.winding().to_vec(),
        phi: best.phi.coeffs().clone(),
        psi: best.psi.coeffs.clone(),
        footer: Footer { energy: best.energy, residual_phi: best.el.phi, residual_psi: best.el.psi },
    };
    write_atomic(&out_dir.join("solution.txt"), sol.render().as_bytes())?;
    let log: String = traces.into_inner().expect("trace lock").into_values().flatten().map(|l| l + "\n").collect();
    write_atomic(&out_dir.join("solve.log.jsonl"), log.as_bytes())?;
    let z2 = best.z2.as_ref().map(|z| {
        serde_json::json!({
            "partner_energy": z.partner_energy,
            "energy_gap": z.energy_gap,
            "spinor_gap": z.spinor_gap,
            "phi_gap": z.phi_gap,
        })
    });
    let config: serde_json::Map<String, serde_json::Value> =
        cfg.physical_pairs().into_iter().map(|(k, v)| (k.to_string(), serde_json::Value::String(v))).collect();
    let report = serde_json::json!({
        "config": config,
        "converged": converged,
        "termination": format!("{:?}", best.termination),
        "seed": best.seed,
        "iterations": best.iterations,
        "energy": best.energy,
        "phi_energy": best.phi_energy,
        "dirac_energy": best.dirac_energy,
        "k_energy": best.k_energy,
        "r_scalar": best.r_scalar,
        "r_minus": best.r_minus,
        "grad_u": best.grad_u,
        "grad_v": best.grad_v,
        "residual_phi": best.el.phi,
        "residual_psi": best.el.psi,
        "psi_norm": best.psi_norm,
        "psi_plus_norm": best.psi_plus_norm,
        "psi_minus_norm": best.psi_minus_norm,
        "max_speed": best.max_speed,
        "spectral_gap": best.spectral_gap,
        "collapse_restarts": best.collapse_restarts,
        "z2": z2,
        "runs": summary.runs,
    });
    let pretty = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out_dir.join("summary.json"), (pretty + "\n").as_bytes())?;
    let stdout = format!(
        "energy = {}\nresidual_phi = {}\nresidual_psi = {}\nconverged = {converged}\niterations = {}\nsolution = {}\n",
        fmt_f64(best.energy),
        fmt_f64(best.el.phi),
        fmt_f64(best.el.psi),
        best.iterations,
        out_dir.join("solution.txt").display()
    );
    Ok(Output { stdout, code: if converged { EXIT_OK } else { EXIT_NOT_CONVERGED } })
}

fn verdict_table(rep: &InvariantReport) -> String {
    let mut s = String::from("check,value,threshold,passed\n");
    for v in &rep.verdicts {
        let _ = writeln!(s, "{},{},{},{}", v.name, fmt_f64(v.value), fmt_f64(v.threshold), v.passed);
    }
    s
}

/// Re-evaluates a solution file from its coefficients and conventions.
pub fn verify_text(text: &str) -> Result<(InvariantReport, Solution), CliError> {
    let sol = Solution::parse(text)?;
    let ctx = context_for(&sol)?;
    let (u, v) = sol.coordinates(&ctx);
    let mut rep = verify_solution(&ctx, &u, &v, sol.config.geo.tol)?;
    if rep.all_passed() {
        let energy = nehari::geodesic::total_energy(&ctx, &u, &v)?;
        let gap = (energy - sol.footer.energy).abs() / energy.abs().max(1.0);
        rep.push(Verdict::at_most("energy_matches_footer", gap, 1e-12));
    }
    Ok((rep, sol))
}

pub fn verify(path: &Path) -> Result<Output, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let (rep, _) = verify_text(&text)?;
    let mut stdout = verdict_table(&rep);
    for f in rep.failures() {
        let _ = writeln!(stdout, "FAILED: {}", f.name);
    }
    Ok(Output { stdout, code: if rep.all_passed() { EXIT_OK } else { EXIT_VERIFY } })
}

fn sweep_point(base: &GeodesicConfig, axis: SweepAxis, raw: &str) -> Result<GeodesicConfig, CliError> {
    let mut c = base.clone();
    match axis {
        SweepAxis::Winding => {
            let mut w = parse_ints("sweep_values", raw)?;
            if w.len() == 1 && c.fiber_dim() > 1 {
                w.resize(c.fiber_dim(), 0);
            }
            c.winding = w;
        }
        SweepAxis::P => c.p = raw.parse().map_err(|_| CliError::Invalid(format!("invalid exponent `{raw}`")))?,
        SweepAxis::KMax => {
            let k: usize = raw.parse().map_err(|_| CliError::Invalid(format!("invalid k_max `{raw}`")))?;
            c.n_grid = base.n_grid.map(|n| (n * k).div_ceil(base.k_max).max(4 * k));
            c.m_phi = base.m_phi.map(|m| (m * k / base.k_max).max(1));
            c.k_max = k;
            c.z2_check = false;
        }
    }
    c.validate()?;
    Ok(c)
}

/// One row per axis value, solved concurrently. Exits 0 when at least one
/// row converged.
pub fn sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    let axis = cfg.sweep_axis.ok_or_else(|| CliError::Invalid("`sweep_axis` is required".into()))?;
    if cfg.sweep_values.is_empty() {
        return Err(CliError::Invalid("`sweep_values` is empty".into()));
    }
    let points: Vec<GeodesicConfig> = cfg.sweep_values.iter().map(|raw| sweep_point(&cfg.geo, axis, raw)).collect::<Result<_, _>>()?;
    let rows: Vec<Result<nehari::geodesic::SolveReport<f64>, String>> =
        points.par_iter().map(|c| solve_class_with::<f64>(c, &|_, _| {}).map(|s| s.best).map_err(|e| e.to_string())).collect();
    let mut s = echo_header(cfg);
    s.push_str("value,status,energy,drift,r_scalar,r_minus,residual_phi,residual_psi,psi_norm,psi_plus_norm,psi_minus_norm,iterations\n");
    let mut prev: Option<f64> = None;
    let mut any = false;
    for (raw, row) in cfg.sweep_values.iter().zip(&rows) {
        let label = raw.replace(',', " ");
        match row {
            Ok(r) => {
                any |= r.converged();
                let drift = prev.map(|p| fmt_f64((r.energy - p) / p.abs())).unwrap_or_default();
                prev = Some(r.energy);
                let status = if r.converged() { "converged".to_string() } else { format!("{:?}", r.termination) };
                let _ = writeln!(
                    s,
                    "{label},{status},{},{drift},{},{},{},{},{},{},{},{}",
                    fmt_f64(r.energy),
                    fmt_f64(r.r_scalar),
                    fmt_f64(r.r_minus),
                    fmt_f64(r.el.phi),
                    fmt_f64(r.el.psi),
                    fmt_f64(r.psi_norm),
                    fmt_f64(r.psi_plus_norm),
                    fmt_f64(r.psi_minus_norm),
                    r.iterations
                );
            }
            Err(e) => {
                prev = None;
                let _ = writeln!(s, "{label},error: {},,,,,,,,,,", e.replace(',', ";"));
            }
        }
    }
    save_csv(cfg, "sweep.csv", &s)?;
    Ok(Output { stdout: s, code: if any { EXIT_OK } else { EXIT_NOT_CONVERGED } })
}

/// Oracle checks: closed forms, maximizer against brute force and gradients
/// against finite differences on random toys, and audits of the configured
/// problem.
pub fn oracle_report(cfg: &RunConfig) -> Result<InvariantReport, CliError> {
    let mut rep = InvariantReport::default();
    let (t, e) = scalar_ground_state_oracle(0.5, 1.0, 3.0);
    let (tr, er) = ray_maximum(0.5, 1.0, 3.0, 4.0);
    rep.push(Verdict::at_most("scalar_oracle_closed_form", (e - std::f64::consts::PI / 8.0).abs(), 1e-15));
    rep.push(Verdict::at_most("scalar_oracle_ray_search", ((er - e) / e).abs().max((tr - t).abs()), 1e-8));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.geo.seed);
    let grid = GridSpec::default();
    let empty = DVector::<f64>::zeros(0);
    let (mut done, mut attempts) = (0usize, 0usize);
    let (mut dist, mut spread) = (0.0f64, 0.0f64);
    while done < cfg.oracle_toys && attempts < 50 * cfg.oracle_toys.max(1) {
        attempts += 1;
        let dim = rng.gen_range(2..=8);
        let n_minus = rng.gen_range(1..=3.min(dim - 1));
        let toy = ToyProblem::<f64>::random(&mut rng, dim, n_minus, 0);
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let opts = MaximizerOptions { multistart: 10, seed: done as u64, ..MaximizerOptions::default() };
        let m = match maximize_on_halfspace(&toy, &empty, &v, &opts) {
            Ok(m) => m,
            Err(NehariError::Degenerate(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let b = match brute_force_halfspace_max(&toy, &empty, &v, &grid) {
            Ok(b) => b,
            Err(BruteError::GridTooSmall { .. }) => continue,
            Err(e) => return Err(CliError::NotConverged(e.to_string())),
        };
        dist = dist.max(m.coords.iter().zip(&b.coords).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        spread = spread.max(m.multistart_distance.unwrap_or(0.0));
        done += 1;
    }
    rep.push(Verdict::at_least("toys_compared", done as f64, cfg.oracle_toys as f64));
    rep.push(Verdict::at_most("toy_maximizer_vs_brute_force", dist, 10.0 * grid.step));
    rep.push(Verdict::at_most("toy_multistart_spread", spread, 1e-6));

    let mut worst = 0.0f64;
    for _ in 0..5 {
        let toy = ToyProblem::<f64>::random(&mut rng, 5, 2, 2).with_rotation(PlaneRotation { i: 1, j: 3, rate: 0.8 });
        let u = DVector::from_fn(2, |_, _| rng.gen_range(-0.5..0.5));
        let v = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
        let opts = MaximizerOptions::default();
        let g = reduced_gradient(&toy, &u, &v, &opts)?;
        let fu = fd_gradient(|x: &DVector<f64>| reduced_energy(&toy, x, &v, &opts), &u, 1e-5)
            .map_err(|e| CliError::NotConverged(e.to_string()))?;
        let fv = fd_gradient(|x: &DVector<f64>| reduced_energy(&toy, &u, x, &opts), &v, 1e-5)
            .map_err(|e| CliError::NotConverged(e.to_string()))?;
        let ambient = g.maximizer.model.basis() * &g.v_dual;
        worst = worst.max(relative_error(&g.u_dual, &fu)).max(relative_error(&ambient, &fv));
    }
    rep.push(Verdict::at_most("toy_reduced_gradient_fd", worst, 1e-4));

    let ctx = build_context::<f64>(&cfg.geo)?;
    let audit = hypothesis_audit(ctx.nonlinearity(), 2000, cfg.geo.seed);
    rep.push(Verdict::at_most("config_hypothesis_violations", audit.violations.len() as f64, 0.0));
    let (u0, _) = initial_state(&ctx, &cfg.geo, cfg.geo.seed)?;
    let pair = assemble_twisted_dirac(ctx.domain(), &ctx.loop_map(&u0)).map_err(|e| CliError::NotConverged(e.to_string()))?;
    rep.push(Verdict::at_most("config_gram_hermiticity", gram_hermiticity_defect(&pair), 1e-9));
    Ok(rep)
}

pub fn oracle(cfg: &RunConfig) -> Result<Output, CliError> {
    let rep = oracle_report(cfg)?;
    let s = verdict_table(&rep);
    save_csv(cfg, "oracle.csv", &s)?;
    Ok(Output { stdout: s, code: if rep.all_passed() { EXIT_OK } else { EXIT_VERIFY } })
}
