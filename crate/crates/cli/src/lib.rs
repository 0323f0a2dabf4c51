//! Scenario runner for `plap`: configuration, subcommand pipelines, sweeps
//! and artifact output.

pub mod config;
pub mod output;
pub mod scenario;

use rayon::prelude::*;
use serde_json::json;

pub use config::{load_table, parse_assignment, ScenarioConfig};
pub use scenario::{run_scenario, Artifact, Command, ConfigError, Outcome};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "PLAP_OUT_DIR";

/// One sweep point, written to its own subdirectory.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub dir: String,
    pub value: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub passed: bool,
    pub points: Vec<SweepPoint>,
    pub summary: String,
    pub artifacts: Vec<Artifact>,
}

/// Runs the configured subcommand once per value of `sweep_param`, in
/// parallel. Any configuration error aborts the whole sweep.
pub fn run_sweep(table: &toml::Table) -> Result<SweepOutcome, ConfigError> {
    let base = ScenarioConfig::from_table(table.clone()).map_err(ConfigError)?;
    let key = base.sweep_param.clone().ok_or_else(|| ConfigError("sweep needs sweep_param".into()))?;
    let values = base.sweep_values.clone().ok_or_else(|| ConfigError("sweep needs sweep_values".into()))?;
    if values.is_empty() {
        return Err(ConfigError("sweep_values is empty".into()));
    }
    let cmd_name = base.sweep_command.as_deref().unwrap_or("sub-super");
    let cmd = Command::parse(cmd_name).ok_or_else(|| ConfigError(format!("unknown sweep_command {cmd_name:?}")))?;

    let configs = values
        .iter()
        .map(|&v| {
            let mut t = table.clone();
            let value = if key == "grid_n" {
                if !(v >= 3.0 && v.fract() == 0.0) {
                    return Err(ConfigError(format!("grid_n sweep value {v} is not an integer >= 3")));
                }
                toml::Value::Integer(v as i64)
            } else {
                toml::Value::Float(v)
            };
            if key == "lambda_fraction" {
                t.remove("lambda");
            }
            t.insert(key.clone(), value);
            ScenarioConfig::from_table(t).map_err(|e| ConfigError(format!("{key} = {v}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let outcomes: Vec<Result<Outcome, ConfigError>> =
        configs.par_iter().map(|cfg| run_scenario(cfg, cmd)).collect();
    let mut points = Vec::with_capacity(values.len());
    for (i, (v, out)) in values.iter().zip(outcomes).enumerate() {
        let outcome = out.map_err(|e| ConfigError(format!("{key} = {v}: {e}")))?;
        points.push(SweepPoint { dir: format!("point_{i:03}"), value: *v, outcome });
    }

    let passed = points.iter().all(|p| p.outcome.passed);
    let mut summary = format!("sweep of {cmd_name} over {key} ({} points)\n", points.len());
    for p in &points {
        summary.push_str(&format!(
            "  {key} = {}: {} [{}]\n",
            p.value,
            if p.outcome.passed { "PASS" } else { "FAIL" },
            p.dir
        ));
    }
    let report = json!({
        "command": "sweep",
        "config": base,
        "sweep_param": key,
        "sweep_command": cmd_name,
        "points": points.iter().map(|p| json!({ "value": p.value, "dir": p.dir, "passed": p.outcome.passed })).collect::<Vec<_>>(),
        "passed": passed,
    });
    let mut contents = serde_json::to_vec_pretty(&report).expect("serializes");
    contents.push(b'\n');
    Ok(SweepOutcome {
        passed,
        points,
        summary,
        artifacts: vec![Artifact { name: "sweep.json".into(), contents }],
    })
}
