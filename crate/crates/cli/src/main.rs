use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plap_cli::output::write_artifacts;
use plap_cli::{load_table, parse_assignment, run_scenario, run_sweep, Artifact, Command, ScenarioConfig, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "plap", version, about = "Radial p-Laplacian constants, fixed points and sub/super-solution checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// k1, k2, t, gamma for the ball and the torsion profile.
    Constants(Common),
    /// Fixed point of T inside the box for the lambda family.
    SolveRadial(Common),
    /// Sampled box checks for the lambda family.
    VerifyHypotheses(Common),
    /// M*, lambda* and delta_lambda.
    LambdaStar(Common),
    /// Solve, assemble and verify the ordered sub/super pair.
    SubSuper(Common),
    /// Run a subcommand over a list of parameter values.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Flat TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    q_exp: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    r_star: Option<f64>,
    #[arg(long)]
    r_circ: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Any other key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn table(&self) -> Result<toml::Table, String> {
        let mut t = match &self.config {
            Some(path) => load_table(path)?,
            None => toml::Table::new(),
        };
        let floats = [
            ("tol", self.tol),
            ("damping", self.damping),
            ("p", self.p),
            ("q_exp", self.q_exp),
            ("lambda", self.lambda),
            ("rho", self.rho),
            ("r_star", self.r_star),
            ("r_circ", self.r_circ),
        ];
        for (k, v) in floats {
            if let Some(v) = v {
                t.insert(k.into(), toml::Value::Float(v));
            }
        }
        for (k, v) in [("grid_n", self.grid_n), ("dim", self.dim), ("samples", self.samples)] {
            if let Some(v) = v {
                t.insert(k.into(), toml::Value::Integer(v as i64));
            }
        }
        for raw in &self.set {
            let (k, v) = parse_assignment(raw)?;
            t.insert(k, v);
        }
        Ok(t)
    }
}

fn fail_config(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, cmd) = match &cli.cmd {
        Cmd::Constants(c) => (c, Some(Command::Constants)),
        Cmd::SolveRadial(c) => (c, Some(Command::SolveRadial)),
        Cmd::VerifyHypotheses(c) => (c, Some(Command::VerifyHypotheses)),
        Cmd::LambdaStar(c) => (c, Some(Command::LambdaStar)),
        Cmd::SubSuper(c) => (c, Some(Command::SubSuper)),
        Cmd::Sweep(c) => (c, None),
    };
    let table = match common.table() {
        Ok(t) => t,
        Err(e) => return fail_config(&e),
    };
    let cfg = match ScenarioConfig::from_table(table.clone()) {
        Ok(c) => c,
        Err(e) => return fail_config(&e),
    };
    let out = common.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("plap-out"));

    let summary_artifact = |s: &str| Artifact { name: "summary.txt".into(), contents: s.as_bytes().to_vec() };
    let (passed, write) = match cmd {
        Some(cmd) => match run_scenario(&cfg, cmd) {
            Ok(mut o) => {
                print!("{}", o.summary);
                o.artifacts.push(summary_artifact(&o.summary));
                (o.passed, write_artifacts(&out, &o.artifacts))
            }
            Err(e) => return fail_config(&e.0),
        },
        None => match run_sweep(&table) {
            Ok(mut s) => {
                print!("{}", s.summary);
                for p in &s.points {
                    print!("[{}] {}", p.dir, p.outcome.summary);
                }
                s.artifacts.push(summary_artifact(&s.summary));
                let mut result = write_artifacts(&out, &s.artifacts);
                for p in &s.points {
                    let mut arts = p.outcome.artifacts.clone();
                    arts.push(summary_artifact(&p.outcome.summary));
                    result = result.and_then(|_| write_artifacts(&out.join(&p.dir), &arts));
                }
                (s.passed, result)
            }
            Err(e) => return fail_config(&e.0),
        },
    };
    if let Err(e) = write {
        return fail_config(&format!("cannot write to {}: {e}", out.display()));
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
