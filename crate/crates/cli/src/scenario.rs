//! Subcommand pipelines. Each run computes everything in memory and returns
//! its artifacts; nothing touches the filesystem until the caller writes them.

use std::fmt::Write as _;

use plap::constants::{
    c_np, gamma_constant_weight, k1_constant_weight, payne_philippin_check, select_rho, PaynePhilippinReport,
    RhoChoice,
};
use plap::hypotheses::{verify_box_hypotheses, BoxHypothesisReport, BoxParams};
use plap::radial::{build_envelopes_with, check_box_membership, solve_fixed_point, Attempt, MembershipReport};
use plap::subsuper::{verify_pair, PairReport};
use plap::{
    analyze_lambda_family, DomainSummary, Error, FixedPointOptions, LambdaFamily, LambdaFamilyReport, PExponent,
    ProblemConstants, RadialGrid, RadialOperator, RadialProfile, RadialWeight, SubSuperPair,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{K1Source, ScenarioConfig, WeightKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    SolveRadial,
    VerifyHypotheses,
    LambdaStar,
    SubSuper,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::SolveRadial => "solve-radial",
            Command::VerifyHypotheses => "verify-hypotheses",
            Command::LambdaStar => "lambda-star",
            Command::SubSuper => "sub-super",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Command::Constants, Command::SolveRadial, Command::VerifyHypotheses, Command::LambdaStar, Command::SubSuper]
            .into_iter()
            .find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub artifacts: Vec<Artifact>,
}

/// A configuration that cannot be run as given.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// Geometry and weight after defaults and the radius rule are applied.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub rho: f64,
    pub r_circ: f64,
    pub rho_choice: Option<RhoChoice>,
    pub omega_sup: f64,
    pub weight_is_constant: bool,
    pub k1_source: K1Source,
    /// `k₁` used in the upper box bound and in `λ*`.
    pub k1_box: f64,
}

struct Setup {
    p: PExponent,
    weight: RadialWeight,
    op: RadialOperator,
    consts: ProblemConstants,
    resolved: Resolved,
}

fn weight_fn(cfg: &ScenarioConfig) -> Box<dyn Fn(f64) -> f64> {
    let a = cfg.weight_value;
    match cfg.weight {
        WeightKind::Constant | WeightKind::Csv => Box::new(move |_| a),
        WeightKind::Linear => {
            let b = cfg.weight_slope.unwrap_or(0.0);
            Box::new(move |s| a + b * s)
        }
        WeightKind::Gaussian => Box::new(move |s| a * (-s * s).exp()),
    }
}

fn setup(cfg: &ScenarioConfig) -> Result<Setup, ConfigError> {
    cfg.validate().map_err(ConfigError)?;
    let p = PExponent::new(cfg.p)?;
    let constant = cfg.weight == WeightKind::Constant;

    // the sup is needed before ρ is known when ρ comes from the radius rule
    let outer_guess = cfg.r_circ.or(cfg.r_star).or(cfg.rho).expect("validated");
    let csv_table = match cfg.weight {
        WeightKind::Csv => {
            let path = cfg.weight_csv.as_ref().expect("validated");
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read weight file {}: {e}", path.display())))?;
            Some(text)
        }
        _ => None,
    };
    let sampled_sup = match &csv_table {
        Some(text) => csv_sup(text)?,
        None => {
            let f = weight_fn(cfg);
            let grid = RadialGrid::uniform(outer_guess, cfg.grid_n)?;
            grid.nodes().into_iter().map(f).fold(0.0, f64::max)
        }
    };
    let omega_sup = cfg.weight_sup.unwrap_or(sampled_sup);
    if !(omega_sup > 0.0 && omega_sup.is_finite()) {
        return Err(ConfigError(format!("sup of the weight must be positive, got {omega_sup}")));
    }

    let (rho, rho_choice) = match (cfg.rho, cfg.r_star) {
        (Some(rho), _) => (rho, None),
        (None, Some(r_star)) => {
            let dom = DomainSummary::new(r_star, cfg.r_circ.unwrap_or(r_star), cfg.convex, omega_sup)?;
            let choice = select_rho(&dom, p, cfg.dim, constant, cfg.rho_strategy)?;
            (choice.rho, Some(choice))
        }
        (None, None) => unreachable!("validated"),
    };
    let r_circ = cfg.r_circ.unwrap_or(cfg.r_star.unwrap_or(rho));

    let grid = RadialGrid::uniform(rho, cfg.grid_n)?;
    let weight = match (&csv_table, cfg.weight) {
        (Some(text), _) => RadialWeight::from_csv(text.as_bytes(), grid)?,
        (None, WeightKind::Constant) => RadialWeight::constant(grid, cfg.weight_value)?,
        (None, _) => RadialWeight::from_fn(grid, weight_fn(cfg))?,
    };
    if weight.sup() > omega_sup * (1.0 + 1e-12) {
        return Err(ConfigError(format!("weight_sup = {omega_sup} is below the sampled sup {}", weight.sup())));
    }
    let op = RadialOperator::new(&weight, p, cfg.dim)?;
    let consts = ProblemConstants::compute_with(&op)?;
    let k1_box = match cfg.k1_source {
        K1Source::Outer => k1_constant_weight(cfg.p, cfg.dim, r_circ, omega_sup),
        K1Source::Inner => consts.k1,
    };
    Ok(Setup {
        p,
        weight,
        op,
        consts,
        resolved: Resolved {
            rho,
            r_circ,
            rho_choice,
            omega_sup,
            weight_is_constant: constant,
            k1_source: cfg.k1_source,
            k1_box,
        },
    })
}

fn csv_sup(text: &str) -> Result<f64, ConfigError> {
    let mut max = f64::NEG_INFINITY;
    for (i, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .nth(1)
            .and_then(|x| x.trim().parse::<f64>().ok())
            .ok_or_else(|| ConfigError(format!("weight file line {}: expected s,omega", i + 1)))?;
        max = max.max(v);
    }
    Ok(max)
}

struct Family {
    report: LambdaFamilyReport,
    f: LambdaFamily,
    delta: f64,
    m: f64,
}

fn family(cfg: &ScenarioConfig, s: &Setup) -> Result<Family, ConfigError> {
    let q = cfg.q_exp.ok_or_else(|| ConfigError("q_exp is required for this subcommand".into()))?;
    let (k1, k2, gamma) = (s.resolved.k1_box, s.consts.k2, s.consts.gamma);
    let star = analyze_lambda_family(cfg.p, q, gamma, k1, k2, None)?.lambda_star;
    let lambda = cfg.lambda.unwrap_or(cfg.lambda_fraction.unwrap_or(1.0) * star);
    let report = analyze_lambda_family(cfg.p, q, gamma, k1, k2, Some(lambda))?;
    Ok(Family {
        f: LambdaFamily { lambda, q_exp: q, p: cfg.p },
        delta: cfg.delta.unwrap_or(report.delta_lambda.expect("lambda given")),
        m: cfg.m.unwrap_or(report.m_star),
        report,
    })
}

fn json_artifact(name: &str, value: &serde_json::Value) -> Artifact {
    let mut contents = serde_json::to_vec_pretty(value).expect("reports serialize");
    contents.push(b'\n');
    Artifact { name: name.into(), contents }
}

fn csv_artifact(name: &str, header: &str, grid: &RadialGrid, cols: &[&[f64]]) -> Artifact {
    let mut out = String::with_capacity(grid.len() * 64);
    out.push_str(header);
    out.push('\n');
    for (k, r) in grid.nodes().iter().enumerate() {
        write!(out, "{r:?}").unwrap();
        for c in cols {
            write!(out, ",{:?}", c[k]).unwrap();
        }
        out.push('\n');
    }
    Artifact { name: name.into(), contents: out.into_bytes() }
}

fn profile_csv(name: &str, u: &RadialProfile) -> Artifact {
    csv_artifact(name, "r,u,du", &u.grid, &[&u.u, &u.du])
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn header(cmd: Command, cfg: &ScenarioConfig, s: &Setup) -> String {
    let mut out = format!(
        "{}: p = {}, N = {}, rho = {}, R = {}, weight = {:?}\n",
        cmd.name(),
        cfg.p,
        cfg.dim,
        s.resolved.rho,
        s.resolved.r_circ,
        cfg.weight
    );
    if let Some(c) = &s.resolved.rho_choice {
        writeln!(out, "  rho rule: {} (Omega_2 quotient bound {})", c.case.tag(), c.omega2_quotient).unwrap();
    }
    writeln!(
        out,
        "  k1 = {}, k2 = {}, t = {}, gamma = {}",
        s.consts.k1, s.consts.k2, s.consts.t, s.consts.gamma
    )
    .unwrap();
    out
}

pub fn run_scenario(cfg: &ScenarioConfig, cmd: Command) -> Result<Outcome, ConfigError> {
    let s = setup(cfg)?;
    match cmd {
        Command::Constants => constants(cfg, &s),
        Command::LambdaStar => lambda_star(cfg, &s),
        Command::VerifyHypotheses => hypotheses(cfg, &s),
        Command::SolveRadial => solve(cfg, &s, false),
        Command::SubSuper => solve(cfg, &s, true),
    }
}

fn constants(cfg: &ScenarioConfig, s: &Setup) -> Result<Outcome, ConfigError> {
    let c = &s.consts;
    let phi = s.op.torsion()?;
    let unit = RadialOperator::new(&RadialWeight::unit(*s.weight.grid()), s.p, cfg.dim)?.torsion()?;
    let gradient: PaynePhilippinReport = payne_philippin_check(&unit, s.p, cfg.dim, 1e-8)?;
    let closed = s.weight.constant_value().map(|w| {
        json!({
            "k1": k1_constant_weight(cfg.p, cfg.dim, c.rho, w),
            "k2": c_np(cfg.p, cfg.dim) / (w * c.rho.powf(cfg.p)),
            "gamma": gamma_constant_weight(cfg.p, c.rho),
        })
    });
    let k1_below_k2 = c.k1 < c.k2;
    let gross = c.gamma * c.rho >= 1.0;
    let passed = k1_below_k2 && gross && gradient.passed;
    let report = json!({
        "command": "constants",
        "config": cfg,
        "resolved": s.resolved,
        "constants": c,
        "closed_form": closed,
        "gradient_bound": gradient,
        "checks": { "k1_below_k2": k1_below_k2, "gamma_rho_at_least_inv_rho": gross },
        "passed": passed,
    });
    let mut summary = header(Command::Constants, cfg, s);
    writeln!(summary, "  k1 < k2: {}", verdict(k1_below_k2)).unwrap();
    writeln!(summary, "  gamma >= 1/rho: {}", verdict(gross)).unwrap();
    writeln!(
        summary,
        "  gradient bound {} <= {}: {}",
        gradient.grad_sup,
        gradient.grad_bound,
        verdict(gradient.passed)
    )
    .unwrap();
    Ok(Outcome {
        passed,
        summary,
        artifacts: vec![json_artifact("constants.json", &report), profile_csv("torsion.csv", &phi)],
    })
}

fn lambda_star(cfg: &ScenarioConfig, s: &Setup) -> Result<Outcome, ConfigError> {
    let fam = family(cfg, s)?;
    let r = &fam.report;
    let d = r.delta_lambda.expect("lambda given");
    let chain = d <= r.delta_bound && r.delta_bound < r.m_star;
    let report = json!({
        "command": "lambda-star",
        "config": cfg,
        "resolved": s.resolved,
        "constants": s.consts,
        "family": r,
        "checks": { "delta_chain": chain },
        "passed": chain,
    });
    let mut summary = header(Command::LambdaStar, cfg, s);
    writeln!(summary, "  M* = {}, H(M*) = {}, lambda* = {}", r.m_star, r.h_at_m_star, r.lambda_star).unwrap();
    writeln!(summary, "  lambda = {}, delta_lambda = {}", fam.f.lambda, d).unwrap();
    writeln!(summary, "  delta_lambda <= {} < M*: {}", r.delta_bound, verdict(chain)).unwrap();
    Ok(Outcome { passed: chain, summary, artifacts: vec![json_artifact("lambda_star.json", &report)] })
}

fn box_params(s: &Setup, fam: &Family) -> BoxParams {
    BoxParams {
        k1: s.resolved.k1_box,
        k2: s.consts.k2,
        gamma: s.consts.gamma,
        p: s.p.p,
        delta: fam.delta,
        m: fam.m,
    }
}

fn hypotheses(cfg: &ScenarioConfig, s: &Setup) -> Result<Outcome, ConfigError> {
    let fam = family(cfg, s)?;
    let params = box_params(s, &fam);
    let rep: BoxHypothesisReport = verify_box_hypotheses(&fam.f, params, cfg.samples)?;
    let report = json!({
        "command": "verify-hypotheses",
        "config": cfg,
        "resolved": s.resolved,
        "constants": s.consts,
        "family": fam.report,
        "box": params,
        "hypotheses": rep,
        "verification": "sampled",
        "passed": rep.pass(),
    });
    let mut summary = header(Command::VerifyHypotheses, cfg, s);
    writeln!(summary, "  box: delta = {}, M = {}, lambda = {}", fam.delta, fam.m, fam.f.lambda).unwrap();
    writeln!(summary, "  upper bound (sampled): {} (margin {:e})", verdict(rep.h1_pass), rep.h1_worst.margin).unwrap();
    writeln!(summary, "  lower bound (sampled): {} (margin {:e})", verdict(rep.h2_pass), rep.h2_worst.margin).unwrap();
    Ok(Outcome { passed: rep.pass(), summary, artifacts: vec![json_artifact("hypotheses.json", &report)] })
}

#[derive(Serialize)]
struct SolveReport<'a> {
    converged: bool,
    iterations: usize,
    final_residual: f64,
    damping: f64,
    attempts: &'a [Attempt],
    history: &'a [f64],
    sup_u: f64,
    sup_du: f64,
    membership: MembershipReport,
}

fn solve(cfg: &ScenarioConfig, s: &Setup, pair: bool) -> Result<Outcome, ConfigError> {
    let cmd = if pair { Command::SubSuper } else { Command::SolveRadial };
    let fam = family(cfg, s)?;
    let boxy = build_envelopes_with(&s.consts, &s.op, fam.delta, fam.m)?;
    let opts = FixedPointOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        damping: cfg.damping,
        ..FixedPointOptions::default()
    };
    let mut summary = header(cmd, cfg, s);
    writeln!(summary, "  box: delta = {}, M = {}, lambda = {}", fam.delta, fam.m, fam.f.lambda).unwrap();
    let base = json!({
        "command": cmd.name(),
        "config": cfg,
        "resolved": s.resolved,
        "constants": s.consts,
        "family": fam.report,
        "box": box_params(s, &fam),
    });
    let json_name = if pair { "sub_super.json" } else { "solve.json" };

    let sol = match solve_fixed_point(&fam.f, &boxy, &s.op, &opts) {
        Ok(sol) => sol,
        Err(e @ Error::BoxViolation { .. }) => {
            writeln!(summary, "  iteration left the box: {e}").unwrap();
            let mut report = base;
            report["error"] = json!(e.to_string());
            report["passed"] = json!(false);
            return Ok(Outcome { passed: false, summary, artifacts: vec![json_artifact(json_name, &report)] });
        }
        Err(e) => return Err(e.into()),
    };
    let membership = check_box_membership(&sol.profile, &boxy, opts.membership_tol * fam.m);
    let sup_u = sol.profile.max_u();
    let sup_du = sol.profile.max_du();
    let solved = sol.converged && membership.member;
    writeln!(
        summary,
        "  fixed point: {} after {} iterations (residual {:e}, damping {})",
        verdict(sol.converged),
        sol.iterations,
        sol.final_residual,
        sol.damping
    )
    .unwrap();
    writeln!(summary, "  |u| = {sup_u}, |u'| = {sup_du}, in box: {}", verdict(membership.member)).unwrap();
    let solve_report = SolveReport {
        converged: sol.converged,
        iterations: sol.iterations,
        final_residual: sol.final_residual,
        damping: sol.damping,
        attempts: &sol.attempts,
        history: &sol.history,
        sup_u,
        sup_du,
        membership,
    };
    let mut report = base;
    report["solve"] = serde_json::to_value(&solve_report).expect("serializes");

    if !pair {
        report["passed"] = json!(solved);
        return Ok(Outcome {
            passed: solved,
            summary,
            artifacts: vec![json_artifact(json_name, &report), profile_csv("profile.csv", &sol.profile)],
        });
    }

    let assembled = SubSuperPair::assemble(
        s.consts,
        sol.profile.clone(),
        s.resolved.r_circ,
        fam.m,
        s.resolved.omega_sup,
        cfg.grid_n,
    )?;
    let rep: PairReport = verify_pair(&assembled, &fam.f, &s.weight)?;
    let passed = solved && rep.pass;
    writeln!(summary, "  ordering: {} (margin {:e})", verdict(rep.ordering_pass), rep.ordering_margin).unwrap();
    writeln!(summary, "  comparison premise: {} (margin {:e})", verdict(rep.premise_pass), rep.premise_margin).unwrap();
    writeln!(
        summary,
        "  quotient {} <= gamma {}: {}",
        rep.super_quotient,
        rep.gamma_rho,
        verdict(rep.quotient_pass)
    )
    .unwrap();
    writeln!(summary, "  k1(B_R) <= k1(B_rho): {}", verdict(rep.k1_monotone)).unwrap();
    if !rep.interior_critical_radii.is_empty() {
        writeln!(summary, "  note: u_rho' vanishes at {} interior nodes", rep.interior_critical_radii.len()).unwrap();
    }
    report["pair"] = serde_json::to_value(&rep).expect("serializes");
    report["passed"] = json!(passed);
    Ok(Outcome {
        passed,
        summary,
        artifacts: vec![
            json_artifact(json_name, &report),
            profile_csv("profile.csv", &sol.profile),
            csv_artifact("sub_super.csv", "r,sub,super", &assembled.sub.grid, &[&assembled.sub.u, &assembled.sup.u]),
        ],
    })
}
