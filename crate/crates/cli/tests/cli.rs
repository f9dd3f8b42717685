use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nehari")).args(args).output().expect("spawn nehari");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows of a CSV with `#` header lines, keyed by column name.
fn csv(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines.map(|l| head.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect()
}

fn footer_energy(path: &Path) -> f64 {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().find_map(|l| l.strip_prefix("# energy = ")).unwrap().parse().unwrap()
}

#[test]
fn flat_spectrum_is_half_integer() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 2\n");
    let (code, out, _) = run(&["spectrum", "--config", s(&cfg)]);
    assert_eq!(code, 0);
    let ev: Vec<f64> = csv(&out).iter().map(|r| r["eigenvalue"].parse().unwrap()).collect();
    assert_eq!(ev, vec![-1.5, -0.5, 0.5, 1.5]);
    assert!(out.contains("# k_max = 2"));
}

#[test]
fn sphere_spectrum_reports_small_defect() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "chart = round_sphere2\nk_max = 6\nphi_init = 0.3\n");
    let (code, out, _) = run(&["spectrum", "--config", s(&cfg), "--out", s(&d.path().join("o"))]);
    assert_eq!(code, 0);
    let rows = csv(&out);
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().all(|r| r["symmetric_defect"].parse::<f64>().unwrap() <= 1e-9));
    assert_eq!(std::fs::read_to_string(d.path().join("o/spectrum.csv")).unwrap(), out);
}

#[test]
fn bad_key_exits_3_with_name() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 4\nmystery_knob = 2\n");
    for cmd in ["spectrum", "solve", "sweep", "oracle"] {
        let (code, _, err) = run(&[cmd, "--config", s(&cfg)]);
        assert_eq!(code, 3, "{cmd}");
        assert!(err.contains("mystery_knob"), "{err}");
    }
    let (code, _, _) = run(&["solve", "--config", s(&d.path().join("missing.cfg"))]);
    assert_eq!(code, 3);
}

#[test]
fn default_solve_matches_oracle_and_writes_log() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "# defaults\n");
    let out = d.path().join("o");
    let (code, _, _) = run(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code, 0);
    let e = footer_energy(&out.join("solution.txt"));
    assert!((e - PI / 8.0).abs() <= 1e-6 * PI / 8.0);
    let log = std::fs::read_to_string(out.join("solve.log.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["iter", "energy", "r_scalar", "r_minus", "grad_u", "grad_v", "step"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["converged"], true);
    assert_eq!(summary["config"]["p"], "3.0");
}

#[test]
fn iteration_cap_exits_2_and_still_writes() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 8\nmax_iter = 1\n");
    let out = d.path().join("o");
    let (code, _, _) = run(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code, 2);
    let text = std::fs::read_to_string(out.join("solution.txt")).unwrap();
    assert!(text.contains("# converged = false"));
    // a flagged iterate is not a solution
    let (code, _, _) = run(&["verify", "--config", s(&out.join("solution.txt"))]);
    assert_eq!(code, 4);
}

#[test]
fn winding_two_adds_four_pi() {
    let d = TempDir::new().unwrap();
    let mut e = Vec::new();
    for w in [0, 2] {
        let cfg = write(&d, &format!("w{w}.cfg"), &format!("k_max = 8\nwinding = {w}\n"));
        let out = d.path().join(format!("o{w}"));
        assert_eq!(run(&["solve", "--config", s(&cfg), "--out", s(&out)]).0, 0);
        e.push(footer_energy(&out.join("solution.txt")));
    }
    assert!(((e[1] - e[0]) - 4.0 * PI).abs() <= 1e-6 * 4.0 * PI);
}

#[test]
fn seed_flag_overrides_config() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 6\nb_cos = 0.5\np = 2.5\n");
    let out = d.path().join("o");
    assert_eq!(run(&["solve", "--config", s(&cfg), "--out", s(&out), "--seed", "42"]).0, 0);
    assert!(std::fs::read_to_string(out.join("solution.txt")).unwrap().contains("# seed = 42"));
}

#[test]
fn verify_rejects_truncated_and_malformed_files() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 6\n");
    let out = d.path().join("o");
    assert_eq!(run(&["solve", "--config", s(&cfg), "--out", s(&out)]).0, 0);
    let text = std::fs::read_to_string(out.join("solution.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let truncated = write(&d, "t.txt", &(lines[..lines.len() / 2].join("\n") + "\n"));
    assert_eq!(run(&["verify", "--config", s(&truncated)]).0, 3);
    let no_footer = write(&d, "nf.txt", &(lines[..lines.len() - 1].join("\n") + "\n"));
    assert_eq!(run(&["verify", "--config", s(&no_footer)]).0, 3);
    let garbled = write(&d, "g.txt", &text.replacen("PSI, ", "PSI, x", 1));
    assert_eq!(run(&["verify", "--config", s(&garbled)]).0, 3);
    let dropped: Vec<&str> = lines.iter().copied().filter(|l| !l.starts_with("PHI, 0,")).collect();
    let dropped = write(&d, "d.txt", &(dropped.join("\n") + "\n"));
    assert_eq!(run(&["verify", "--config", s(&dropped)]).0, 3);
}

#[test]
fn verify_names_failing_invariant_for_footer_mismatch() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 6\n");
    let out = d.path().join("o");
    assert_eq!(run(&["solve", "--config", s(&cfg), "--out", s(&out)]).0, 0);
    let text = std::fs::read_to_string(out.join("solution.txt")).unwrap();
    let line = text.lines().find(|l| l.starts_with("# energy = ")).unwrap();
    let forged = write(&d, "f.txt", &text.replace(line, "# energy = 1.0000000000000000e0"));
    let (code, table, _) = run(&["verify", "--config", s(&forged)]);
    assert_eq!(code, 4);
    assert!(table.contains("FAILED: energy_matches_footer"), "{table}");
}

#[test]
fn winding_sweep_reproduces_offsets() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 8\nsweep_axis = winding\nsweep_values = 0, 1, 2\n");
    let (code, out, _) = run(&["sweep", "--config", s(&cfg)]);
    assert_eq!(code, 0);
    let e: Vec<f64> = csv(&out).iter().map(|r| r["energy"].parse().unwrap()).collect();
    assert_eq!(e.len(), 3);
    for (w, ew) in e.iter().enumerate() {
        let expect = e[0] + PI * (w * w) as f64;
        assert!((ew - expect).abs() <= 1e-6 * expect);
    }
}

#[test]
fn truncation_sweep_has_nonincreasing_drift() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "p = 2.5\nb_cos = 0.5\nsweep_axis = k_max\nsweep_values = 8, 16, 32\n");
    let (code, out, _) = run(&["sweep", "--config", s(&cfg), "--out", s(&d.path().join("o"))]);
    assert_eq!(code, 0);
    let rows = csv(&out);
    assert!(rows.iter().all(|r| r["status"] == "converged"));
    for r in &rows[1..] {
        let drift: f64 = r["drift"].parse().unwrap();
        assert!(drift <= 1e-13 && drift.abs() <= 1e-4, "{drift}");
    }
    assert!(d.path().join("o/sweep.csv").exists());
}

#[test]
fn sweep_records_row_failures() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 6\nmax_iter = 1\nsweep_axis = p\nsweep_values = 2.5, 3\n");
    let (code, out, _) = run(&["sweep", "--config", s(&cfg)]);
    assert_eq!(code, 2);
    assert!(csv(&out).iter().all(|r| r["status"] == "IterationCap"));
    let cfg = write(&d, "c2.cfg", "k_max = 6\nsweep_axis = p\nsweep_values = 0.5, 3\n");
    assert_eq!(run(&["sweep", "--config", s(&cfg)]).0, 3);
}

#[test]
fn empty_sweep_axis_exits_3() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "sweep_axis = winding\nsweep_values =\n");
    assert_eq!(run(&["sweep", "--config", s(&cfg)]).0, 3);
    let cfg = write(&d, "c2.cfg", "k_max = 4\n");
    assert_eq!(run(&["sweep", "--config", s(&cfg)]).0, 3);
}

#[test]
fn oracle_verdicts_pass() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 4\noracle_toys = 5\n");
    let (code, out, _) = run(&["oracle", "--config", s(&cfg)]);
    assert_eq!(code, 0, "{out}");
    let rows = csv(&out);
    assert!(rows.len() >= 8 && rows.iter().all(|r| r["passed"] == "true"));
}

#[test]
fn thread_override_is_validated() {
    let d = TempDir::new().unwrap();
    let cfg = write(&d, "c.cfg", "k_max = 2\n");
    let bad =
        Command::new(env!("CARGO_BIN_EXE_nehari")).args(["spectrum", "--config", s(&cfg)]).env("NEHARI_THREADS", "lots").output().unwrap();
    assert_eq!(bad.status.code(), Some(3));
    let ok =
        Command::new(env!("CARGO_BIN_EXE_nehari")).args(["spectrum", "--config", s(&cfg)]).env("NEHARI_THREADS", "1").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
