//! Flat `key = value` run configuration.

use nehari::geodesic::{ChartSpec, GeodesicConfig};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Winding,
    P,
    KMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geo: GeodesicConfig,
    pub out: Option<PathBuf>,
    pub log_level: String,
    pub sweep_axis: Option<SweepAxis>,
    /// Raw comma-separated entries; each entry may be a space-separated vector.
    pub sweep_values: Vec<String>,
    pub oracle_toys: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geo: GeodesicConfig::default(),
            out: None,
            log_level: "warn".into(),
            sweep_axis: None,
            sweep_values: Vec::new(),
            oracle_toys: 20,
        }
    }
}

/// Keys accepted in a configuration file.
pub const KEYS: &[&str] = &[
    "chart",
    "torus_dim",
    "k_max",
    "m_phi",
    "n_grid",
    "p",
    "b_mean",
    "b_cos",
    "b_sin",
    "winding",
    "clifford_sign",
    "tol",
    "max_iter",
    "maximizer_tol",
    "seed",
    "multistart",
    "phi_init",
    "fix_phi",
    "z2_check",
    "out",
    "log_level",
    "sweep_axis",
    "sweep_values",
    "oracle_toys",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError(format!("invalid value for `{key}`: `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError(format!("invalid value for `{key}`: `{value}` (expected true/false)"))),
    }
}

pub fn parse_ints(key: &str, value: &str) -> Result<Vec<i64>, ConfigError> {
    value.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

/// Splits `text` into key/value pairs, rejecting malformed lines and
/// duplicates. `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if map.insert(k.clone(), v).is_some() {
            return Err(ConfigError(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(map)
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn from_pairs(map: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut torus_dim = 1usize;
        let mut chart = "flat_torus".to_string();
        for (k, v) in map {
            let g = &mut cfg.geo;
            match k.as_str() {
                "chart" => chart = v.clone(),
                "torus_dim" => torus_dim = parse(k, v)?,
                "k_max" => g.k_max = parse(k, v)?,
                "m_phi" => g.m_phi = Some(parse(k, v)?),
                "n_grid" => g.n_grid = Some(parse(k, v)?),
                "p" => g.p = parse(k, v)?,
                "b_mean" => g.b_mean = parse(k, v)?,
                "b_cos" => g.b_cos = parse(k, v)?,
                "b_sin" => g.b_sin = parse(k, v)?,
                "winding" => g.winding = parse_ints(k, v)?,
                "clifford_sign" => g.clifford_sign = parse(k, v)?,
                "tol" => g.tol = parse(k, v)?,
                "max_iter" => g.max_iter = parse(k, v)?,
                "maximizer_tol" => g.maximizer_tol = parse(k, v)?,
                "seed" => g.seed = parse(k, v)?,
                "multistart" => g.multistart = parse(k, v)?,
                "phi_init" => g.phi_init = parse(k, v)?,
                "fix_phi" => g.fix_phi = parse_bool(k, v)?,
                "z2_check" => g.z2_check = parse_bool(k, v)?,
                "out" => cfg.out = Some(PathBuf::from(v)),
                "log_level" => cfg.log_level = v.clone(),
                "sweep_axis" => {
                    cfg.sweep_axis = Some(match v.as_str() {
                        "winding" => SweepAxis::Winding,
                        "p" => SweepAxis::P,
                        "k_max" => SweepAxis::KMax,
                        _ => return Err(ConfigError(format!("invalid value for `sweep_axis`: `{v}`"))),
                    })
                }
                "sweep_values" => cfg.sweep_values = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                "oracle_toys" => cfg.oracle_toys = parse(k, v)?,
                _ => return Err(ConfigError(format!("unknown key `{k}` (accepted: {})", KEYS.join(", ")))),
            }
        }
        cfg.geo.chart = match chart.as_str() {
            "flat_torus" => ChartSpec::FlatTorus(torus_dim),
            "round_sphere2" => ChartSpec::RoundSphere2,
            _ => return Err(ConfigError(format!("invalid value for `chart`: `{chart}`"))),
        };
        cfg.geo.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    /// Physical and solver parameters as `(key, value)` pairs, suitable for
    /// echoing into outputs and parsing back with [`RunConfig::from_pairs`].
    pub fn physical_pairs(&self) -> Vec<(&'static str, String)> {
        let g = &self.geo;
        let (chart, dim) = match g.chart {
            ChartSpec::FlatTorus(n) => ("flat_torus", n),
            ChartSpec::RoundSphere2 => ("round_sphere2", 2),
        };
        let winding = if g.winding.is_empty() { vec![0; g.fiber_dim()] } else { g.winding.clone() };
        let mut out = vec![("chart", chart.to_string())];
        if chart == "flat_torus" {
            out.push(("torus_dim", dim.to_string()));
        }
        out.extend([
            ("k_max", g.k_max.to_string()),
            ("m_phi", g.m_phi().to_string()),
            ("n_grid", g.n_grid().to_string()),
            ("p", format!("{:?}", g.p)),
            ("b_mean", format!("{:?}", g.b_mean)),
            ("b_cos", format!("{:?}", g.b_cos)),
            ("b_sin", format!("{:?}", g.b_sin)),
            ("winding", winding.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ")),
            ("clifford_sign", g.clifford_sign.to_string()),
            ("tol", format!("{:?}", g.tol)),
            ("max_iter", g.max_iter.to_string()),
            ("maximizer_tol", format!("{:?}", g.maximizer_tol)),
            ("seed", g.seed.to_string()),
            ("multistart", g.multistart.to_string()),
            ("phi_init", format!("{:?}", g.phi_init)),
            ("fix_phi", g.fix_phi.to_string()),
            ("z2_check", g.z2_check.to_string()),
        ]);
        out
    }
}
