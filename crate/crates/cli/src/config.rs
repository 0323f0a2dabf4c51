//! Flat TOML scenario files with command-line overrides.

use std::path::{Path, PathBuf};

use plap::RhoStrategy;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    /// `ω ≡ weight_value`.
    #[default]
    Constant,
    /// `ω(s) = weight_value + weight_slope · s`.
    Linear,
    /// `ω(s) = weight_value · exp(-s²)`.
    Gaussian,
    /// Columns `s,omega` read from `weight_csv`.
    Csv,
}

/// Which `k₁` enters the upper bound of the box hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum K1Source {
    /// `k₁(B_R)` for the constant weight `‖ω‖_∞`, as the comparison step needs.
    #[default]
    Outer,
    /// `k₁(B_ρ)` for `ω_ρ`.
    Inner,
}

fn default_grid_n() -> usize {
    plap::RadialGrid::DEFAULT_NODES
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    10_000
}
fn default_damping() -> f64 {
    1.0
}
fn default_samples() -> usize {
    plap::hypotheses::DEFAULT_SAMPLES
}
fn default_weight_value() -> f64 {
    1.0
}
fn default_strategy() -> RhoStrategy {
    RhoStrategy::Circumscribed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub p: f64,
    pub dim: usize,
    pub q_exp: Option<f64>,
    pub lambda: Option<f64>,
    /// `λ = lambda_fraction · λ*`, used when `lambda` is absent.
    pub lambda_fraction: Option<f64>,
    pub rho: Option<f64>,
    pub r_star: Option<f64>,
    pub r_circ: Option<f64>,
    #[serde(default)]
    pub convex: bool,
    #[serde(default = "default_strategy")]
    pub rho_strategy: RhoStrategy,
    #[serde(default)]
    pub weight: WeightKind,
    #[serde(default = "default_weight_value")]
    pub weight_value: f64,
    pub weight_slope: Option<f64>,
    pub weight_csv: Option<PathBuf>,
    /// Overrides the sup of the weight taken from its samples.
    pub weight_sup: Option<f64>,
    #[serde(default)]
    pub k1_source: K1Source,
    pub delta: Option<f64>,
    pub m: Option<f64>,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub out_dir: Option<PathBuf>,
    /// Key swept by the `sweep` subcommand.
    pub sweep_param: Option<String>,
    pub sweep_values: Option<Vec<f64>>,
    /// Subcommand run for every sweep point.
    pub sweep_command: Option<String>,
}

/// Keys a sweep may vary.
pub const SWEEP_KEYS: &[&str] =
    &["p", "q_exp", "lambda", "lambda_fraction", "rho", "r_star", "r_circ", "weight_value", "grid_n", "damping"];

fn positive(name: &str, v: Option<f64>) -> Result<(), String> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(format!("{name} must be positive and finite, got {x}")),
        _ => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn from_table(table: toml::Table) -> Result<Self, String> {
        let cfg: ScenarioConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| e.message().to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(format!("p must be > 1, got {}", self.p));
        }
        if self.dim < 2 {
            return Err(format!("dim must be at least 2, got {}", self.dim));
        }
        if let Some(q) = self.q_exp {
            if !(q > 1.0 && q < self.p) {
                return Err(format!("q_exp must lie in (1, p) = (1, {}), got {q}", self.p));
            }
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("rho", self.rho),
            ("r_star", self.r_star),
            ("r_circ", self.r_circ),
            ("weight_sup", self.weight_sup),
            ("delta", self.delta),
            ("m", self.m),
            ("weight_value", Some(self.weight_value)),
            ("tol", Some(self.tol)),
        ] {
            positive(name, v)?;
        }
        if let Some(f) = self.lambda_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(format!("lambda_fraction must lie in (0, 1], got {f}"));
            }
        }
        if let (Some(d), Some(m)) = (self.delta, self.m) {
            if d >= m {
                return Err(format!("delta = {d} must be below m = {m}"));
            }
        }
        if self.rho.is_none() && self.r_star.is_none() {
            return Err("one of rho or r_star is required".into());
        }
        if let (Some(rho), Some(rs)) = (self.rho, self.r_star) {
            if rho > rs {
                return Err(format!("rho = {rho} exceeds the inradius r_star = {rs}"));
            }
        }
        let inner = self.r_star.or(self.rho).unwrap_or(0.0);
        if let Some(rc) = self.r_circ {
            if rc < inner {
                return Err(format!("r_circ = {rc} is smaller than the inradius {inner}"));
            }
        }
        if self.rho_strategy == RhoStrategy::Convex && !self.convex && self.rho.is_none() {
            return Err("rho_strategy = \"convex\" needs convex = true".into());
        }
        if self.grid_n < 3 {
            return Err(format!("grid_n must be at least 3, got {}", self.grid_n));
        }
        if self.max_iter == 0 {
            return Err("max_iter must be positive".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.samples < 2 {
            return Err(format!("samples must be at least 2, got {}", self.samples));
        }
        match self.weight {
            WeightKind::Linear if self.weight_slope.is_none() => {
                return Err("weight = \"linear\" needs weight_slope".into());
            }
            WeightKind::Csv if self.weight_csv.is_none() => {
                return Err("weight = \"csv\" needs weight_csv".into());
            }
            _ => {}
        }
        if let Some(key) = &self.sweep_param {
            if !SWEEP_KEYS.contains(&key.as_str()) {
                return Err(format!("sweep_param must be one of {SWEEP_KEYS:?}, got {key:?}"));
            }
        }
        Ok(())
    }
}

/// Reads a scenario file; relative `weight_csv` paths are resolved against
/// the file's directory.
pub fn load_table(path: &Path) -> Result<toml::Table, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| format!("{}: {}", path.display(), e.message()))?;
    if let Some(toml::Value::String(csv)) = table.get("weight_csv") {
        let p = Path::new(csv);
        if p.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            let joined = base.join(p).to_string_lossy().into_owned();
            table.insert("weight_csv".into(), toml::Value::String(joined));
        }
    }
    Ok(table)
}

/// Parses `key=value`, reading the value as TOML and falling back to a string.
pub fn parse_assignment(raw: &str) -> Result<(String, toml::Value), String> {
    let (key, value) = raw.split_once('=').ok_or_else(|| format!("expected key=value, got {raw:?}"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(format!("empty key in {raw:?}"));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(src: &str) -> toml::Table {
        src.parse().unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::from_table(table("p = 2.0\ndim = 3\nrho = 1.0")).unwrap();
        assert_eq!(cfg.grid_n, 2049);
        assert_eq!(cfg.weight, WeightKind::Constant);
        assert_eq!(cfg.weight_value, 1.0);
        assert_eq!(cfg.k1_source, K1Source::Outer);
        assert_eq!(cfg.rho_strategy, RhoStrategy::Circumscribed);
    }

    #[test]
    fn rejects_bad_values() {
        for src in [
            "p = 1.0\ndim = 3\nrho = 1.0",
            "p = 2.0\ndim = 1\nrho = 1.0",
            "p = 2.0\ndim = 3",
            "p = 2.0\ndim = 3\nrho = 1.0\nq_exp = 2.5",
            "p = 2.0\ndim = 3\nrho = 1.0\ndamping = 0.0",
            "p = 2.0\ndim = 3\nrho = 1.0\nbogus = 1",
            "p = 2.0\ndim = 3\nrho = 1.0\nweight = \"linear\"",
            "p = 2.0\ndim = 3\nrho = 2.0\nr_circ = 1.0",
            "p = 2.0\ndim = 3\nr_star = 1.0\nrho_strategy = \"convex\"",
            "p = 2.0\ndim = 3\nrho = 1.0\nsweep_param = \"dim\"",
        ] {
            assert!(ScenarioConfig::from_table(table(src)).is_err(), "{src}");
        }
    }

    #[test]
    fn assignments() {
        assert_eq!(parse_assignment("p=3").unwrap(), ("p".into(), toml::Value::Integer(3)));
        assert_eq!(parse_assignment(" q_exp = 1.5 ").unwrap(), ("q_exp".into(), toml::Value::Float(1.5)));
        assert_eq!(parse_assignment("weight=gaussian").unwrap().1, toml::Value::String("gaussian".into()));
        assert!(parse_assignment("novalue").is_err());
    }

    #[test]
    fn integer_values_are_accepted_for_reals() {
        let cfg = ScenarioConfig::from_table(table("p = 2\ndim = 3\nrho = 1")).unwrap();
        assert_eq!(cfg.p, 2.0);
    }
}
