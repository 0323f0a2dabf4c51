//! The radial integral operator `T`, the envelopes `Ψ_δ`, `Φ_M`, `Γ_M` of the
//! invariant box `Y`, and damped Picard iteration of `T` inside `Y`.
//!
//! For a source `h ≥ 0` on `[0, ρ]` the radial Dirichlet problem
//! `-(r^{N-1} φ_p(v'))' = r^{N-1} h`, `v'(0) = 0`, `v(ρ) = 0` has the solution
//!
//! ```text
//! v(r)  = ∫_r^ρ φ_q(θ^{1-N} J(θ)) dθ,   J(θ) = ∫_0^θ s^{N-1} h(s) ds,
//! v'(r) = -φ_q(r^{1-N} J(r)).
//! ```
//!
//! `T` is this solution map applied to `h = ω_ρ · f(u, |u'|)`.

use serde::Serialize;

use crate::constants::ProblemConstants;
use crate::error::{Error, Result};
use crate::grid::{check_samples, phi_q_unchecked, tail_power_integral, PExponent, PowerWeightedRule, RadialGrid};
use crate::weights::RadialWeight;

/// Samples of a radial function and its derivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub grid: RadialGrid,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: RadialGrid, u: Vec<f64>, du: Vec<f64>) -> Result<Self> {
        check_samples(&grid, &u)?;
        check_samples(&grid, &du)?;
        Ok(Self { grid, u, du })
    }

    pub fn zero(grid: RadialGrid) -> Self {
        Self { grid, u: vec![0.0; grid.len()], du: vec![0.0; grid.len()] }
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_du(&self) -> f64 {
        self.du.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete `C¹` distance `‖u - v‖_∞ + ‖u' - v'‖_∞`.
    pub fn c1_distance(&self, other: &RadialProfile) -> f64 {
        let d0 = self.u.iter().zip(&other.u).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        let d1 = self.du.iter().zip(&other.du).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        d0 + d1
    }

    pub fn scaled(&self, c: f64) -> RadialProfile {
        RadialProfile {
            grid: self.grid,
            u: self.u.iter().map(|v| c * v).collect(),
            du: self.du.iter().map(|v| c * v).collect(),
        }
    }

    /// `a·self + b·other`, samplewise.
    pub fn combine(&self, a: f64, other: &RadialProfile, b: f64) -> RadialProfile {
        RadialProfile {
            grid: self.grid,
            u: self.u.iter().zip(&other.u).map(|(x, y)| a * x + b * y).collect(),
            du: self.du.iter().zip(&other.du).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    /// Cubic Hermite interpolation of `(u, u')` at `r ∈ [0, ρ]`.
    pub fn hermite(&self, r: f64) -> (f64, f64) {
        let k = self.grid.panel_of(r);
        let h = self.grid.spacing();
        let x = ((r - self.grid.node(k)) / h).clamp(0.0, 1.0);
        let (u0, u1, d0, d1) = (self.u[k], self.u[k + 1], self.du[k] * h, self.du[k + 1] * h);
        let x2 = x * x;
        let x3 = x2 * x;
        let u = (2.0 * x3 - 3.0 * x2 + 1.0) * u0
            + (x3 - 2.0 * x2 + x) * d0
            + (-2.0 * x3 + 3.0 * x2) * u1
            + (x3 - x2) * d1;
        let du = ((6.0 * x2 - 6.0 * x) * u0
            + (3.0 * x2 - 4.0 * x + 1.0) * d0
            + (-6.0 * x2 + 6.0 * x) * u1
            + (3.0 * x2 - 2.0 * x) * d1)
            / h;
        (u, du)
    }
}

/// A nonlinearity `f(u, s) ≥ 0`, with `s` standing for `|∇u|`.
pub trait Nonlinearity: Sync {
    fn eval(&self, u: f64, s: f64) -> f64;

    fn describe(&self) -> String {
        "f(u, s)".to_string()
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> Nonlinearity for F {
    fn eval(&self, u: f64, s: f64) -> f64 {
        self(u, s)
    }
}

/// `f_λ(u, s) = λ u^{q-1} (1 + s^p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaFamily {
    pub lambda: f64,
    pub q_exp: f64,
    pub p: f64,
}

impl Nonlinearity for LambdaFamily {
    fn eval(&self, u: f64, s: f64) -> f64 {
        let base = if u <= 0.0 { 0.0 } else { u.powf(self.q_exp - 1.0) };
        self.lambda * base * (1.0 + s.powf(self.p))
    }

    fn describe(&self) -> String {
        format!("{} * u^({} - 1) * (1 + s^{})", self.lambda, self.q_exp, self.p)
    }
}

/// `f ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantSource(pub f64);

impl Nonlinearity for ConstantSource {
    fn eval(&self, _u: f64, _s: f64) -> f64 {
        self.0
    }

    fn describe(&self) -> String {
        format!("{}", self.0)
    }
}

/// Solution map of the radial Dirichlet problem on a fixed grid, weight and `(p, N)`.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    grid: RadialGrid,
    p: PExponent,
    n_dim: usize,
    weight: Vec<f64>,
    inner: PowerWeightedRule,
    outer: PowerWeightedRule,
}

impl RadialOperator {
    pub fn new(weight: &RadialWeight, p: PExponent, n_dim: usize) -> Result<Self> {
        if n_dim < 2 {
            return Err(Error::Domain(format!("dimension must be at least 2, got {n_dim}")));
        }
        let grid = *weight.grid();
        Ok(Self {
            grid,
            p,
            n_dim,
            weight: weight.samples().to_vec(),
            inner: PowerWeightedRule::new(grid, (n_dim - 1) as f64),
            outer: PowerWeightedRule::new(grid, p.inv_pm1()),
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn p(&self) -> PExponent {
        self.p
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    /// `J(r_k) = ∫_0^{r_k} s^{N-1} h(s) ds`.
    pub(crate) fn flux(&self, source: &[f64]) -> Vec<f64> {
        self.inner.prefix(source)
    }

    /// `J(r)` at an arbitrary `r ∈ [0, ρ]`.
    pub(crate) fn flux_at(&self, source: &[f64], flux: &[f64], r: f64) -> f64 {
        let k = self.grid.panel_of(r);
        flux[k] + self.inner.partial_panel((self.n_dim - 1) as f64, source, k, r)
    }

    /// Solves `-Δ_p v = h` radially on the ball with `v(ρ) = 0`.
    pub fn solve_source(&self, source: &[f64]) -> Result<RadialProfile> {
        check_samples(&self.grid, source)?;
        if let Some(k) = source.iter().position(|&v| v < 0.0) {
            return Err(Error::Input(format!("negative source {} at node {k}", source[k])));
        }
        let n = self.grid.len();
        let nf = self.n_dim as f64;
        let alpha = self.p.inv_pm1();
        let flux = self.flux(source);
        // φ_q(θ^{1-N} J) = θ^α (J/θ^N)^α; the second factor is smooth and is what gets interpolated.
        let mut smooth = vec![0.0; n];
        smooth[0] = phi_q_unchecked(source[0] / nf, self.p);
        for k in 1..n {
            let r = self.grid.node(k);
            smooth[k] = phi_q_unchecked(flux[k].max(0.0) / r.powf(nf), self.p);
        }
        let u = self.outer.suffix(&smooth);
        let du = (0..n)
            .map(|k| if k == 0 { 0.0 } else { -self.grid.node(k).powf(alpha) * smooth[k] })
            .collect();
        Ok(RadialProfile { grid: self.grid, u, du })
    }

    /// `φ_ρ`, the solution with source `ω_ρ`.
    pub fn torsion(&self) -> Result<RadialProfile> {
        self.solve_source(&self.weight)
    }

    /// `ω_ρ(r) f(u(r), |u'(r)|)` at every node.
    pub fn source_of(&self, u: &RadialProfile, f: &dyn Nonlinearity) -> Result<Vec<f64>> {
        if u.grid != self.grid {
            return Err(Error::Input("profile and operator use different grids".into()));
        }
        u.u.iter()
            .zip(&u.du)
            .zip(&self.weight)
            .map(|((&uk, &dk), &w)| {
                let s = dk.abs();
                let v = f.eval(uk, s);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Nonlinearity { u: uk, s, value: v });
                }
                Ok(w * v)
            })
            .collect()
    }

    /// `(Tu, (Tu)')`.
    pub fn apply(&self, u: &RadialProfile, f: &dyn Nonlinearity) -> Result<RadialProfile> {
        let source = self.source_of(u, f)?;
        self.solve_source(&source)
    }

    /// `‖u - Tu‖_∞ + ‖u' - (Tu)'‖_∞`.
    pub fn residual(&self, u: &RadialProfile, f: &dyn Nonlinearity) -> Result<f64> {
        Ok(u.c1_distance(&self.apply(u, f)?))
    }
}

/// `T u` for the weight, exponent and dimension given.
pub fn apply_t(
    u: &RadialProfile,
    f: &dyn Nonlinearity,
    w: &RadialWeight,
    p: PExponent,
    n_dim: usize,
) -> Result<RadialProfile> {
    RadialOperator::new(w, p, n_dim)?.apply(u, f)
}

pub fn residual(
    u: &RadialProfile,
    f: &dyn Nonlinearity,
    w: &RadialWeight,
    p: PExponent,
    n_dim: usize,
) -> Result<f64> {
    RadialOperator::new(w, p, n_dim)?.residual(u, f)
}

/// The set `Y = {u : Ψ_δ ≤ u ≤ Φ_M, |u'| ≤ Γ_M}` in sampled form.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxY {
    pub delta: f64,
    pub m: f64,
    pub t: f64,
    pub gamma_rho: f64,
    pub psi: RadialProfile,
    pub phi: RadialProfile,
    pub gamma_env: Vec<f64>,
}

/// Builds `Ψ_δ`, `Φ_M = M φ_ρ/‖φ_ρ‖_∞` and `Γ_M = M |φ_ρ'|/‖φ_ρ‖_∞`.
///
/// Fails when `k₂ δ^{p-1} > k₁ M^{p-1}`: the lower envelope would then cross
/// the upper one and `Y` is empty.
pub fn build_envelopes(consts: &ProblemConstants, w: &RadialWeight, delta: f64, m: f64) -> Result<BoxY> {
    let op = RadialOperator::new(w, consts.p, consts.n_dim)?;
    build_envelopes_with(consts, &op, delta, m)
}

pub fn build_envelopes_with(
    consts: &ProblemConstants,
    op: &RadialOperator,
    delta: f64,
    m: f64,
) -> Result<BoxY> {
    if !(delta > 0.0 && delta < m && m.is_finite()) {
        return Err(Error::Precondition(format!("need 0 < delta < M, got delta = {delta}, M = {m}")));
    }
    if op.grid().rho() != consts.rho || op.p() != consts.p || op.n_dim() != consts.n_dim {
        return Err(Error::Input("constants were computed for a different ball".into()));
    }
    let p = consts.p.p;
    let lower = consts.k2 * delta.powf(p - 1.0);
    let upper = consts.k1 * m.powf(p - 1.0);
    if lower > upper * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "k2 delta^(p-1) = {lower} exceeds k1 M^(p-1) = {upper}; the box is empty"
        )));
    }
    let phi_rho = op.torsion()?;
    let sup = phi_rho.u[0];
    let grid = *op.grid();
    let phi = phi_rho.scaled(m / sup);
    let gamma_env: Vec<f64> = phi.du.iter().map(|d| d.abs()).collect();

    let e = (1.0 - consts.n_dim as f64) * consts.p.inv_pm1();
    let tail_t = tail_power_integral(consts.t, consts.rho, e);
    let (psi_u, psi_du): (Vec<f64>, Vec<f64>) = grid
        .nodes()
        .into_iter()
        .map(|r| {
            if r <= consts.t {
                (delta, 0.0)
            } else {
                (delta * tail_power_integral(r, consts.rho, e) / tail_t, -delta * r.powf(e) / tail_t)
            }
        })
        .unzip();
    let psi = RadialProfile { grid, u: psi_u, du: psi_du };

    let slack = 1e-12 * m;
    if let Some(k) = (0..grid.len()).find(|&k| psi.u[k] > phi.u[k] + slack) {
        return Err(Error::Precondition(format!(
            "lower envelope {} exceeds upper envelope {} at r = {}",
            psi.u[k],
            phi.u[k],
            grid.node(k)
        )));
    }
    Ok(BoxY { delta, m, t: consts.t, gamma_rho: consts.gamma, psi, phi, gamma_env })
}

/// Pointwise comparison of a profile against the envelopes of `Y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub member: bool,
    /// `min (u - Ψ_δ)`.
    pub lower_margin: f64,
    /// `min (Φ_M - u)`.
    pub upper_margin: f64,
    /// `min (Γ_M - |u'|)`.
    pub slope_margin: f64,
    pub lower_violations: usize,
    pub upper_violations: usize,
    pub slope_violations: usize,
    pub worst_lower_r: f64,
    pub worst_upper_r: f64,
    pub worst_slope_r: f64,
}

/// Checks `Ψ_δ ≤ u ≤ Φ_M` and `|u'| ≤ Γ_M` node by node, allowing `tol` of slack.
pub fn check_box_membership(u: &RadialProfile, boxy: &BoxY, tol: f64) -> MembershipReport {
    let grid = boxy.phi.grid;
    let mut rep = MembershipReport {
        member: true,
        lower_margin: f64::INFINITY,
        upper_margin: f64::INFINITY,
        slope_margin: f64::INFINITY,
        lower_violations: 0,
        upper_violations: 0,
        slope_violations: 0,
        worst_lower_r: 0.0,
        worst_upper_r: 0.0,
        worst_slope_r: 0.0,
    };
    if u.grid != grid {
        rep.member = false;
        return rep;
    }
    for k in 0..grid.len() {
        let r = grid.node(k);
        let lower = u.u[k] - boxy.psi.u[k];
        let upper = boxy.phi.u[k] - u.u[k];
        let slope = boxy.gamma_env[k] - u.du[k].abs();
        if lower < rep.lower_margin {
            rep.lower_margin = lower;
            rep.worst_lower_r = r;
        }
        if upper < rep.upper_margin {
            rep.upper_margin = upper;
            rep.worst_upper_r = r;
        }
        if slope < rep.slope_margin {
            rep.slope_margin = slope;
            rep.worst_slope_r = r;
        }
        rep.lower_violations += usize::from(lower < -tol);
        rep.upper_violations += usize::from(upper < -tol);
        rep.slope_violations += usize::from(slope < -tol);
    }
    rep.member = rep.lower_violations + rep.upper_violations + rep.slope_violations == 0;
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    /// Damping for a second attempt when the first does not converge.
    pub fallback_damping: Option<f64>,
    /// Relative slack (times `M`) for the box check after each `T` step.
    pub membership_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, damping: 1.0, fallback_damping: Some(0.5), membership_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub damping: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSolution {
    pub profile: RadialProfile,
    pub converged: bool,
    /// Index of the returned iterate.
    pub iterations: usize,
    /// `‖u - Tu‖_{C¹}` of the returned iterate.
    pub final_residual: f64,
    /// Residual of every iterate of the attempt that produced `profile`.
    pub history: Vec<f64>,
    pub damping: f64,
    pub attempts: Vec<Attempt>,
}

/// Iterates `u ← (1-d) u + d T u` from `u₀ = Φ_M`.
///
/// Every `T u_k` is checked against the box; a violation means the box
/// hypotheses do not hold for `f` and is reported as an error. Running out of
/// iterations is not an error: the best iterate is returned with
/// `converged == false`.
pub fn solve_fixed_point(
    f: &dyn Nonlinearity,
    boxy: &BoxY,
    op: &RadialOperator,
    opts: &FixedPointOptions,
) -> Result<FixedPointSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Precondition(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    let mut attempts = Vec::new();
    let first = iterate(f, boxy, op, opts, opts.damping)?;
    attempts.push(first.attempt());
    let mut best = first;
    if !best.converged {
        if let Some(d) = opts.fallback_damping.filter(|&d| d != opts.damping && d > 0.0 && d <= 1.0) {
            let second = iterate(f, boxy, op, opts, d)?;
            attempts.push(second.attempt());
            if second.converged || second.final_residual < best.final_residual {
                best = second;
            }
        }
    }
    best.attempts = attempts;
    Ok(best)
}

impl FixedPointSolution {
    fn attempt(&self) -> Attempt {
        Attempt {
            damping: self.damping,
            iterations: self.iterations,
            converged: self.converged,
            final_residual: self.final_residual,
        }
    }
}

fn iterate(
    f: &dyn Nonlinearity,
    boxy: &BoxY,
    op: &RadialOperator,
    opts: &FixedPointOptions,
    damping: f64,
) -> Result<FixedPointSolution> {
    let slack = opts.membership_tol * boxy.m;
    let mut u = boxy.phi.clone();
    let mut history = Vec::new();
    let mut best: Option<(f64, RadialProfile, usize)> = None;
    for k in 0..=opts.max_iter {
        let tu = op.apply(&u, f)?;
        let rep = check_box_membership(&tu, boxy, slack);
        if !rep.member {
            return Err(Error::BoxViolation {
                iteration: k,
                lower_margin: rep.lower_margin,
                upper_margin: rep.upper_margin,
                slope_margin: rep.slope_margin,
            });
        }
        let res = u.c1_distance(&tu);
        history.push(res);
        if res <= opts.tol {
            return Ok(FixedPointSolution {
                profile: u,
                converged: true,
                iterations: k,
                final_residual: res,
                history,
                damping,
                attempts: Vec::new(),
            });
        }
        if best.as_ref().is_none_or(|b| res < b.0) {
            best = Some((res, u.clone(), k));
        }
        if k == opts.max_iter {
            break;
        }
        u = if damping == 1.0 { tu } else { u.combine(1.0 - damping, &tu, damping) };
    }
    let (res, profile, k) = best.expect("at least one iterate");
    Ok(FixedPointSolution {
        profile,
        converged: false,
        iterations: k,
        final_residual: res,
        history,
        damping,
        attempts: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_setup(p: f64, n_dim: usize, rho: f64, n: usize) -> (RadialWeight, PExponent, RadialOperator) {
        let grid = RadialGrid::uniform(rho, n).unwrap();
        let w = RadialWeight::unit(grid);
        let p = PExponent::new(p).unwrap();
        let op = RadialOperator::new(&w, p, n_dim).unwrap();
        (w, p, op)
    }

    #[test]
    fn boundary_conditions_are_exact() {
        let (_, _, op) = unit_setup(3.0, 2, 1.0, 101);
        let u = op.torsion().unwrap();
        assert_eq!(u.u[100], 0.0);
        assert_eq!(u.du[0], 0.0);
        assert!(u.u.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_nonlinearity_reproduces_torsion() {
        let (_, _, op) = unit_setup(2.5, 3, 1.0, 201);
        let phi = op.torsion().unwrap();
        let arbitrary = phi.scaled(3.7);
        let tu = op.apply(&arbitrary, &ConstantSource(1.0)).unwrap();
        assert!(tu.c1_distance(&phi) < 1e-14);
        assert!(op.residual(&phi, &ConstantSource(1.0)).unwrap() < 1e-10);
        let zero = op.apply(&phi, &ConstantSource(0.0)).unwrap();
        assert!(zero.u.iter().chain(&zero.du).all(|&v| v == 0.0));
    }

    #[test]
    fn scaled_constant_gives_phi_m() {
        // f ≡ k₁ M^{p-1} maps everything to Φ_M
        let (_, p, op) = unit_setup(3.0, 2, 0.8, 257);
        let phi = op.torsion().unwrap();
        let k1 = phi.u[0].powf(1.0 - p.p);
        let m: f64 = 0.37;
        let f = ConstantSource(k1 * m.powf(p.p - 1.0));
        let phi_m = phi.scaled(m / phi.u[0]);
        let tu = op.apply(&RadialProfile::zero(*op.grid()), &f).unwrap();
        assert!(tu.c1_distance(&phi_m) < 1e-12);
        assert!(op.residual(&phi_m, &f).unwrap() < 1e-10);
    }

    #[test]
    fn trivial_fixed_point_at_zero() {
        let (_, _, op) = unit_setup(2.0, 3, 1.0, 65);
        let f = LambdaFamily { lambda: 1.0, q_exp: 1.5, p: 2.0 };
        assert_eq!(op.residual(&RadialProfile::zero(*op.grid()), &f).unwrap(), 0.0);
    }

    #[test]
    fn negative_nonlinearity_is_rejected() {
        let (_, _, op) = unit_setup(2.0, 3, 1.0, 33);
        let phi = op.torsion().unwrap();
        let err = op.apply(&phi, &|u: f64, _s: f64| u - 0.1).unwrap_err();
        assert!(matches!(err, Error::Nonlinearity { .. }));
    }

    #[test]
    fn hermite_is_exact_for_cubics() {
        let grid = RadialGrid::uniform(1.0, 11).unwrap();
        let u: Vec<f64> = grid.nodes().iter().map(|r| r * r * r - r).collect();
        let du: Vec<f64> = grid.nodes().iter().map(|r| 3.0 * r * r - 1.0).collect();
        let prof = RadialProfile::new(grid, u, du).unwrap();
        for &r in &[0.0, 0.05, 0.333, 0.99, 1.0] {
            let (v, d) = prof.hermite(r);
            assert!((v - (r * r * r - r)).abs() < 1e-14);
            assert!((d - (3.0 * r * r - 1.0)).abs() < 1e-12);
        }
    }
}
