//! Ball constants `k₁`, `k₂`, `t`, `γ_ρ`, their closed forms for constant
//! weights, the choice of the inner radius `ρ`, and the gradient bound for
//! torsion profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{tail_power_integral, PExponent, RadialGrid};
use crate::radial::{ConstantSource, RadialOperator, RadialProfile};
use crate::weights::{symmetrize, AmbientWeight, RadialWeight};

/// Constants of the ball `B_ρ` for a radial weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub p: PExponent,
    pub n_dim: usize,
    pub rho: f64,
    /// `‖φ_ρ‖_∞^{-(p-1)}`.
    pub k1: f64,
    /// `[max_r ∫_r^ρ φ_q(θ^{1-N} J(r)) dθ]^{1-p}`.
    pub k2: f64,
    /// Maximizer in the definition of `k2`.
    pub t: f64,
    /// `‖φ_ρ'‖_∞ / ‖φ_ρ‖_∞`.
    pub gamma: f64,
    pub phi_sup: f64,
    pub dphi_sup: f64,
}

impl ProblemConstants {
    pub fn compute(w: &RadialWeight, p: PExponent, n_dim: usize) -> Result<Self> {
        let op = RadialOperator::new(w, p, n_dim)?;
        Self::compute_with(&op)
    }

    pub fn compute_with(op: &RadialOperator) -> Result<Self> {
        let phi = op.torsion()?;
        let (phi_sup, dphi_sup) = sup_norms(&phi)?;
        let (k2, t) = k2_with(op)?;
        Ok(Self {
            p: op.p(),
            n_dim: op.n_dim(),
            rho: op.grid().rho(),
            k1: phi_sup.powf(1.0 - op.p().p),
            k2,
            t,
            gamma: dphi_sup / phi_sup,
            phi_sup,
            dphi_sup,
        })
    }
}

fn sup_norms(phi: &RadialProfile) -> Result<(f64, f64)> {
    // φ_ρ is nonincreasing, so its sup is the value at the center
    let sup = phi.u[0];
    if !(sup > 0.0) {
        return Err(Error::Weight("torsion profile vanishes; weight is zero".into()));
    }
    Ok((sup, phi.max_du()))
}

/// `φ_ρ` with `φ_ρ'` for the weight's own grid.
pub fn torsion_profile(w: &RadialWeight, p: PExponent, n_dim: usize) -> Result<RadialProfile> {
    RadialOperator::new(w, p, n_dim)?.torsion()
}

pub fn k1_of_ball(w: &RadialWeight, p: PExponent, n_dim: usize) -> Result<f64> {
    let (sup, _) = sup_norms(&torsion_profile(w, p, n_dim)?)?;
    Ok(sup.powf(1.0 - p.p))
}

pub fn gamma_of_ball(w: &RadialWeight, p: PExponent, n_dim: usize) -> Result<f64> {
    let (sup, dsup) = sup_norms(&torsion_profile(w, p, n_dim)?)?;
    Ok(dsup / sup)
}

/// `(k₂, t)`.
pub fn k2_of_ball(w: &RadialWeight, p: PExponent, n_dim: usize) -> Result<(f64, f64)> {
    k2_with(&RadialOperator::new(w, p, n_dim)?)
}

fn k2_with(op: &RadialOperator) -> Result<(f64, f64)> {
    let grid = *op.grid();
    let rho = grid.rho();
    let alpha = op.p().inv_pm1();
    let e = (1.0 - op.n_dim() as f64) * alpha;
    let source = op.weight();
    let flux = op.flux(source);
    // With J(r) frozen, the θ-integral is an explicit power (or log) integral.
    let g = |r: f64, j: f64| -> f64 {
        if r <= 0.0 || j <= 0.0 {
            0.0
        } else {
            j.powf(alpha) * tail_power_integral(r, rho, e)
        }
    };
    let (kmax, gmax) = (1..grid.len() - 1)
        .map(|k| (k, g(grid.node(k), flux[k])))
        .fold((0, 0.0), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    if !(gmax > 0.0) {
        return Err(Error::Weight("k2 integrand vanishes; weight is zero".into()));
    }
    let lo = grid.node(kmax - 1);
    let hi = grid.node(kmax + 1);
    let eval = |r: f64| g(r, op.flux_at(source, &flux, r));
    let (mut t, mut gt) = golden_section_max(eval, lo, hi, 1e-10);
    if gt < gmax {
        t = grid.node(kmax);
        gt = gmax;
    }
    if !(t > 0.0 && t < rho) {
        return Err(Error::Weight(format!("k2 maximizer t = {t} is not interior to (0, {rho})")));
    }
    Ok((gt.powf(1.0 - op.p().p), t))
}

/// Maximizes `f` on `[a, b]` until the bracket is narrower than `tol`.
pub(crate) fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)].into_iter().fold((x, fx), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// `C_{N,p}` with `k₂(B_ρ) = C_{N,p}/ρ^p` for `ω ≡ 1`.
pub fn c_np(p: f64, n_dim: usize) -> f64 {
    let n = n_dim as f64;
    if (n - p).abs() < 1e-12 {
        p.powf(p) / (p - 1.0).powf(p - 1.0) * (p - 1.0).exp()
    } else {
        n.powf(p) / (p - 1.0).powf(p - 1.0) * (p / n).powf(p * (p - 1.0) / (p - n))
    }
}

/// `k₂(B_ρ)` for the constant weight `c`.
pub fn k2_constant_weight(p: f64, n_dim: usize, rho: f64, c: f64) -> f64 {
    c_np(p, n_dim) / (c * rho.powf(p))
}

/// `k₁(B_R) = ((p-1)/p)^{1-p} N / (‖ω‖_∞ R^p)`, from the explicit `φ_R`.
pub fn k1_constant_weight(p: f64, n_dim: usize, r_ball: f64, omega_sup: f64) -> f64 {
    ((p - 1.0) / p).powf(1.0 - p) * n_dim as f64 / (omega_sup * r_ball.powf(p))
}

/// `φ_R(r) = ((p-1)/p) (‖ω‖_∞/N)^{1/(p-1)} (R^{p/(p-1)} - r^{p/(p-1)})`.
pub fn torsion_constant_weight(p: f64, n_dim: usize, r_ball: f64, omega_sup: f64, r: f64) -> f64 {
    let q = p / (p - 1.0);
    (p - 1.0) / p * (omega_sup / n_dim as f64).powf(1.0 / (p - 1.0)) * (r_ball.powf(q) - r.powf(q))
}

/// `γ_ρ = p/((p-1)ρ)` for constant weights.
pub fn gamma_constant_weight(p: f64, rho: f64) -> f64 {
    p / ((p - 1.0) * rho)
}

/// Scalar description of the domain `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainSummary {
    /// Inradius `r* = sup d(x, ∂Ω)`.
    pub r_star: f64,
    /// Radius of a ball containing `Ω`.
    pub r_circ: f64,
    pub convex: bool,
    pub omega_sup: f64,
}

impl DomainSummary {
    pub fn new(r_star: f64, r_circ: f64, convex: bool, omega_sup: f64) -> Result<Self> {
        if !(r_star > 0.0 && r_star.is_finite()) {
            return Err(Error::Input(format!("inradius must be positive, got {r_star}")));
        }
        if !(r_circ >= r_star && r_circ.is_finite()) {
            return Err(Error::Input(format!("circumradius {r_circ} is smaller than inradius {r_star}")));
        }
        if !(omega_sup > 0.0 && omega_sup.is_finite()) {
            return Err(Error::Input(format!("sup of the weight must be positive, got {omega_sup}")));
        }
        Ok(Self { r_star, r_circ, convex, omega_sup })
    }
}

/// A domain described by its distance to the boundary.
pub trait Domain {
    fn dim(&self) -> usize;

    /// `d(x, ∂Ω)` for `x ∈ Ω`, negative outside.
    fn boundary_distance(&self, x: &[f64]) -> f64;

    fn summary(&self, omega_sup: f64) -> Result<DomainSummary>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallDomain {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Domain for BallDomain {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.radius - euclid(x, &self.center)
    }

    fn summary(&self, omega_sup: f64) -> Result<DomainSummary> {
        DomainSummary::new(self.radius, self.radius, true, omega_sup)
    }
}

/// Axis-aligned box `∏ [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain for BoxDomain {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(xi, (l, h))| (xi - l).min(h - xi))
            .fold(f64::INFINITY, f64::min)
    }

    fn summary(&self, omega_sup: f64) -> Result<DomainSummary> {
        let half: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (h - l)).collect();
        let r_star = half.iter().copied().fold(f64::INFINITY, f64::min);
        let r_circ = half.iter().map(|v| v * v).sum::<f64>().sqrt();
        DomainSummary::new(r_star, r_circ, true, omega_sup)
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaBound {
    pub value: f64,
    /// `true` for the closed form; otherwise `value` is the minimum over the
    /// candidates and only an upper bound on the infimum over all balls.
    pub exact: bool,
    pub best_candidate: Option<usize>,
}

/// `Λ = inf { k₂(B_ρ) : B_ρ ⊂ Ω }`.
pub fn lambda_inf_k2(
    weight: &AmbientWeight,
    domain: &dyn Domain,
    candidates: &[CandidateBall],
    p: PExponent,
    n_dim: usize,
    grid_nodes: usize,
    directions: usize,
) -> Result<LambdaBound> {
    if let Some(c) = weight.constant_value() {
        let dom = domain.summary(c)?;
        return Ok(LambdaBound {
            value: k2_constant_weight(p.p, n_dim, dom.r_star, c),
            exact: true,
            best_candidate: None,
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, ball) in candidates.iter().enumerate() {
        if ball.center.len() != domain.dim() || !(ball.radius > 0.0) {
            continue;
        }
        if domain.boundary_distance(&ball.center) < ball.radius * (1.0 - 1e-12) {
            continue;
        }
        let grid = RadialGrid::uniform(ball.radius, grid_nodes)?;
        let w = symmetrize(weight, &ball.center, grid, directions)?;
        let (k2, _) = k2_of_ball(&w, p, n_dim)?;
        if best.is_none_or(|(_, v)| k2 < v) {
            best = Some((i, k2));
        }
    }
    let (i, value) = best.ok_or_else(|| Error::Input("no candidate ball fits inside the domain".into()))?;
    Ok(LambdaBound { value, exact: false, best_candidate: Some(i) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoStrategy {
    /// `Ω₂ = B_R ⊃ Ω`.
    Circumscribed,
    /// `Ω₂ = Ω`, convex.
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoCase {
    /// `r* ≤ R/q`: `ρ = r*`.
    SmallInradius,
    /// `R/q ≤ r*`: `ρ = R/q`.
    LargeInradius,
    /// Constant weight, circumscribed ball: `ρ = r*`.
    ConstantWeight,
    /// `ρ = r* / (q N^{1/p})`.
    Convex,
    /// Constant weight, convex domain: `ρ = r* / N^{1/p}`.
    ConvexConstantWeight,
}

impl RhoCase {
    pub fn tag(&self) -> &'static str {
        match self {
            RhoCase::SmallInradius => "circumscribed-i",
            RhoCase::LargeInradius => "circumscribed-ii",
            RhoCase::ConstantWeight => "circumscribed-constant-weight",
            RhoCase::Convex => "convex",
            RhoCase::ConvexConstantWeight => "convex-constant-weight",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoChoice {
    pub rho: f64,
    pub case: RhoCase,
    /// Bound on `‖∇φ_{Ω₂}‖_∞ / ‖φ_{Ω₂}‖_∞` that `γ_ρ` has to dominate.
    pub omega2_quotient: f64,
}

/// Picks `ρ ≤ r*` so that the `Ω₂` quotient stays below `γ_ρ`.
pub fn select_rho(
    dom: &DomainSummary,
    p: PExponent,
    n_dim: usize,
    omega_constant: bool,
    strategy: RhoStrategy,
) -> Result<RhoChoice> {
    let q = p.p_conj;
    match strategy {
        RhoStrategy::Circumscribed => {
            let omega2_quotient = q / dom.r_circ;
            let (rho, case) = if omega_constant {
                (dom.r_star, RhoCase::ConstantWeight)
            } else if dom.r_star <= dom.r_circ / q {
                (dom.r_star, RhoCase::SmallInradius)
            } else {
                (dom.r_circ / q, RhoCase::LargeInradius)
            };
            Ok(RhoChoice { rho, case, omega2_quotient })
        }
        RhoStrategy::Convex => {
            if !dom.convex {
                return Err(Error::Precondition("convex strategy requires a convex domain".into()));
            }
            let root = (n_dim as f64).powf(1.0 / p.p);
            let omega2_quotient = root * q / dom.r_star;
            let (rho, case) = if omega_constant {
                (dom.r_star / root, RhoCase::ConvexConstantWeight)
            } else {
                (dom.r_star / (q * root), RhoCase::Convex)
            };
            Ok(RhoChoice { rho, case, omega2_quotient })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaynePhilippinReport {
    pub residual: f64,
    pub psi_sup: f64,
    pub grad_sup: f64,
    /// `(q ‖ψ‖_∞)^{1/p}`.
    pub grad_bound: f64,
    pub margin: f64,
    /// Location of the maximum of `2((p-1)/p)|ψ'|^p + 2ψ` on the grid.
    pub functional_argmax_r: f64,
    pub argmax_at_center: bool,
    pub passed: bool,
}

/// Checks the gradient bound `‖ψ'‖_∞ ≤ (q‖ψ‖_∞)^{1/p}` for a radial
/// solution of `-Δ_p ψ = 1`, and that the P-function peaks at the center.
///
/// Refuses (returns an error) when `profile` is not such a solution to within
/// `tol`.
pub fn payne_philippin_check(
    profile: &RadialProfile,
    p: PExponent,
    n_dim: usize,
    tol: f64,
) -> Result<PaynePhilippinReport> {
    let op = RadialOperator::new(&RadialWeight::unit(profile.grid), p, n_dim)?;
    let residual = op.residual(profile, &ConstantSource(1.0))?;
    if !(residual <= tol) {
        return Err(Error::Precondition(format!(
            "profile does not solve the torsion problem: residual {residual:e} > {tol:e}"
        )));
    }
    let psi_sup = profile.max_u();
    let grad_sup = profile.max_du();
    let grad_bound = (p.p_conj * psi_sup).powf(1.0 / p.p);
    let c = 2.0 * (p.p - 1.0) / p.p;
    let (kmax, _) = profile
        .u
        .iter()
        .zip(&profile.du)
        .map(|(u, d)| c * d.abs().powf(p.p) + 2.0 * u)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    let margin = grad_bound - grad_sup;
    Ok(PaynePhilippinReport {
        residual,
        psi_sup,
        grad_sup,
        grad_bound,
        margin,
        functional_argmax_r: profile.grid.node(kmax),
        argmax_at_center: kmax == 0,
        passed: margin >= 0.0 && kmax == 0,
    })
}
