//! Plain-text solution files.
//!
//! ```text
//! # nehari solution
//! # version = 1
//! # circle_length = 6.2831853071795862e0
//! # spin_structure = antiperiodic
//! # chart = flat_torus
//! ...
//! # clifford_sign = 1
//! ...
//! WINDING, 0, 1
//! PHI, -16, 0, 0.0000000000000000e0
//! PSI, -31, 0, 0.0000000000000000e0, 0.0000000000000000e0
//! # energy = ...
//! # residual_phi = ...
//! # residual_psi = ...
//! ```
//!
//! Floats carry 17 significant digits, so loading reproduces the stored
//! values bit for bit.

use crate::config::{ConfigError, RunConfig};
use nalgebra::{Complex, DMatrix, DVector};
use nehari::circle::{CircleDomain, SpinorField};
use nehari::geodesic::{build_context, GeodesicContext};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

pub const VERSION: u32 = 1;
pub const SPIN_STRUCTURE: &str = "antiperiodic";
const FOOTER: [&str; 3] = ["energy", "residual_phi", "residual_psi"];
/// Header keys that are conventions or run metadata rather than config.
const META: [&str; 6] = ["version", "circle_length", "spin_structure", "converged", "termination", "iterations"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Footer {
    pub energy: f64,
    pub residual_phi: f64,
    pub residual_psi: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub config: RunConfig,
    pub converged: bool,
    pub termination: String,
    pub iterations: usize,
    pub winding: Vec<i64>,
    /// `(2 m_phi + 1) × n`, row `m + m_phi`.
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<Complex<f64>>,
    pub footer: Footer,
}

impl Solution {
    /// Solver coordinates `(u, v)` in `ctx`.
    pub fn coordinates(&self, ctx: &GeodesicContext<f64>) -> (DVector<f64>, DVector<f64>) {
        let mut phi = ctx.template().clone();
        *phi.coeffs_mut() = self.phi.clone();
        (phi.to_vec(), SpinorField { coeffs: self.psi.clone() }.to_real())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let g = &self.config.geo;
        let _ = writeln!(s, "# nehari solution");
        let _ = writeln!(s, "# version = {VERSION}");
        let _ = writeln!(s, "# circle_length = {}", fmt_f64(TAU));
        let _ = writeln!(s, "# spin_structure = {SPIN_STRUCTURE}");
        for (k, v) in self.config.physical_pairs() {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "# converged = {}", self.converged);
        let _ = writeln!(s, "# termination = {}", self.termination);
        let _ = writeln!(s, "# iterations = {}", self.iterations);
        for (c, w) in self.winding.iter().enumerate() {
            let _ = writeln!(s, "WINDING, {c}, {w}");
        }
        let m_phi = (self.phi.nrows() - 1) / 2;
        for r in 0..self.phi.nrows() {
            for c in 0..self.phi.ncols() {
                let _ = writeln!(s, "PHI, {}, {c}, {}", r as i64 - m_phi as i64, fmt_f64(self.phi[(r, c)]));
            }
        }
        let domain = domain_of(&self.config).expect("valid config");
        for q in 0..self.psi.nrows() {
            for c in 0..self.psi.ncols() {
                let z = self.psi[(q, c)];
                let _ = writeln!(s, "PSI, {}, {c}, {}, {}", domain.mode_numerator(q), fmt_f64(z.re), fmt_f64(z.im));
            }
        }
        let f = &self.footer;
        let _ = writeln!(s, "# energy = {}", fmt_f64(f.energy));
        let _ = writeln!(s, "# residual_phi = {}", fmt_f64(f.residual_phi));
        let _ = writeln!(s, "# residual_psi = {}", fmt_f64(f.residual_psi));
        debug_assert_eq!(g.fiber_dim(), self.phi.ncols());
        s
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let err = |n: usize, m: String| ConfigError(format!("line {}: {m}", n + 1));
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut footer: BTreeMap<String, f64> = BTreeMap::new();
        let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
        let mut in_footer = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let Some((k, v)) = rest.split_once('=') else { continue };
                let (k, v) = (k.trim(), v.trim());
                if FOOTER.contains(&k) {
                    in_footer = true;
                    let x = v.parse().map_err(|_| err(n, format!("bad number for `{k}`: `{v}`")))?;
                    if footer.insert(k.to_string(), x).is_some() {
                        return Err(err(n, format!("duplicate `{k}`")));
                    }
                } else if in_footer || !rows.is_empty() {
                    return Err(err(n, format!("header key `{k}` after data rows")));
                } else if header.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(err(n, format!("duplicate header key `{k}`")));
                }
                continue;
            }
            if in_footer {
                return Err(err(n, "data row after footer".into()));
            }
            rows.push((n, line.split(',').map(|f| f.trim().to_string()).collect()));
        }
        for k in FOOTER {
            if !footer.contains_key(k) {
                return Err(ConfigError(format!("missing footer `{k}` (truncated file?)")));
            }
        }
        let version = header.get("version").ok_or_else(|| ConfigError("missing header `version`".into()))?;
        if version != &VERSION.to_string() {
            return Err(ConfigError(format!("unsupported version `{version}`")));
        }
        match header.get("spin_structure").map(String::as_str) {
            Some(SPIN_STRUCTURE) => {}
            other => return Err(ConfigError(format!("unsupported spin structure {other:?}"))),
        }
        let length: f64 = header
            .get("circle_length")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ConfigError("missing or invalid `circle_length`".into()))?;
        if (length - TAU).abs() > 1e-12 {
            return Err(ConfigError(format!("circle length {length} is not 2π")));
        }
        let bool_of = |k: &str| header.get(k).map(|v| v == "true").unwrap_or(false);
        let converged = bool_of("converged");
        let termination = header.get("termination").cloned().unwrap_or_default();
        let iterations = header.get("iterations").and_then(|v| v.parse().ok()).unwrap_or(0);
        let config_pairs: BTreeMap<String, String> =
            header.iter().filter(|(k, _)| !META.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
        let config = RunConfig::from_pairs(&config_pairs)?;
        let domain = domain_of(&config)?;
        let n = config.geo.fiber_dim();
        let m_phi = config.geo.m_phi();
        let mut winding: Vec<Option<i64>> = vec![None; n];
        let mut phi: DMatrix<Option<f64>> = DMatrix::from_element(2 * m_phi + 1, n, None);
        let mut psi: DMatrix<Option<Complex<f64>>> = DMatrix::from_element(domain.mode_count(), n, None);
        for (ln, f) in &rows {
            let ln = *ln;
            let num = |i: usize| -> Result<f64, ConfigError> {
                f[i].parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| err(ln, format!("bad number `{}`", f[i])))
            };
            let int = |i: usize| -> Result<i64, ConfigError> { f[i].parse().map_err(|_| err(ln, format!("bad integer `{}`", f[i]))) };
            let comp = |i: usize| -> Result<usize, ConfigError> {
                f[i].parse::<usize>().ok().filter(|&c| c < n).ok_or_else(|| err(ln, format!("bad component `{}`", f[i])))
            };
            let arity = |k: usize| if f.len() == k { Ok(()) } else { Err(err(ln, format!("{} row needs {k} fields", f[0]))) };
            let slot_taken = || err(ln, "duplicate row".into());
            match f[0].as_str() {
                "WINDING" => {
                    arity(3)?;
                    let c = comp(1)?;
                    if winding[c].replace(int(2)?).is_some() {
                        return Err(slot_taken());
                    }
                }
                "PHI" => {
                    arity(4)?;
                    let m = int(1)?;
                    if m.unsigned_abs() as usize > m_phi {
                        return Err(err(ln, format!("loop mode {m} outside ±{m_phi}")));
                    }
                    let c = comp(2)?;
                    if phi[((m + m_phi as i64) as usize, c)].replace(num(3)?).is_some() {
                        return Err(slot_taken());
                    }
                }
                "PSI" => {
                    arity(5)?;
                    let k = int(1)?;
                    let q = domain.mode_index(k).ok_or_else(|| err(ln, format!("spinor mode numerator {k} not in basis")))?;
                    let c = comp(2)?;
                    if psi[(q, c)].replace(Complex::new(num(3)?, num(4)?)).is_some() {
                        return Err(slot_taken());
                    }
                }
                other => return Err(err(ln, format!("unknown row tag `{other}`"))),
            }
        }
        let missing = |what: &str| ConfigError(format!("missing {what} rows (truncated file?)"));
        let winding: Vec<i64> = winding.into_iter().collect::<Option<_>>().ok_or_else(|| missing("WINDING"))?;
        let expected = if config.geo.winding.is_empty() { vec![0; n] } else { config.geo.winding.clone() };
        if winding != expected {
            return Err(ConfigError(format!("WINDING rows {winding:?} disagree with header {expected:?}")));
        }
        let phi = unwrap_all(phi).ok_or_else(|| missing("PHI"))?;
        let psi = unwrap_all(psi).ok_or_else(|| missing("PSI"))?;
        let footer = Footer { energy: footer["energy"], residual_phi: footer["residual_phi"], residual_psi: footer["residual_psi"] };
        Ok(Solution { config, converged, termination, iterations, winding, phi, psi, footer })
    }
}

fn unwrap_all<T: Clone + PartialEq + std::fmt::Debug + 'static>(m: DMatrix<Option<T>>) -> Option<DMatrix<T>> {
    if m.iter().any(Option::is_none) {
        return None;
    }
    Some(m.map(|x| x.expect("checked")))
}

fn domain_of(cfg: &RunConfig) -> Result<CircleDomain<f64>, ConfigError> {
    let g = &cfg.geo;
    CircleDomain::with_clifford_sign(g.k_max, g.fiber_dim(), g.n_grid(), g.clifford_sign).map_err(|e| ConfigError(e.to_string()))
}

/// Context matching a loaded solution's configuration.
pub fn context_for(sol: &Solution) -> Result<GeodesicContext<f64>, ConfigError> {
    build_context::<f64>(&sol.config.geo).map_err(|e| ConfigError(e.to_string()))
}

/// Writes `contents` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}
