//! Ordered sub/super-solution pairs on a ball `B_R ⊃ B_ρ`.
//!
//! The sub-solution is a radial solution `u_ρ` on `B_ρ` extended by zero, and
//! the super-solution is `M φ_R/‖φ_R‖_∞ = M (1 - (r/R)^{p/(p-1)})`, the
//! normalized torsion profile of `B_R` for the constant weight `‖ω‖_∞`.

use serde::Serialize;

use crate::constants::{k1_constant_weight, ProblemConstants};
use crate::error::{Error, Result};
use crate::grid::{phi_p, PExponent, PowerWeightedRule, RadialGrid};
use crate::radial::{Nonlinearity, RadialProfile};
use crate::weights::RadialWeight;

/// Slack on margins when comparing sampled profiles.
pub const MARGIN_RTOL: f64 = 1e-12;

/// Extends `u_ρ` by zero to `[0, R]`, sampled on `n` uniform nodes.
pub fn build_subsolution(u_rho: &RadialProfile, r_big: f64, n: usize) -> Result<RadialProfile> {
    let rho = u_rho.grid.rho();
    if !(r_big >= rho && r_big.is_finite()) {
        return Err(Error::Input(format!("outer radius {r_big} is smaller than rho = {rho}")));
    }
    let scale = u_rho.max_u().max(f64::MIN_POSITIVE);
    let tail = *u_rho.u.last().expect("grid has nodes");
    if tail.abs() > 1e-10 * scale {
        return Err(Error::Input(format!("u_rho(rho) = {tail} does not vanish")));
    }
    if let Some(v) = u_rho.u.iter().find(|v| **v < -1e-12 * scale) {
        return Err(Error::Input(format!("u_rho takes the negative value {v}")));
    }
    let grid = RadialGrid::uniform(r_big, n)?;
    if grid == u_rho.grid {
        let mut sub = u_rho.clone();
        *sub.u.last_mut().expect("grid has nodes") = 0.0;
        return Ok(sub);
    }
    let (u, du) = grid
        .nodes()
        .into_iter()
        .map(|r| if r < rho { u_rho.hermite(r) } else { (0.0, 0.0) })
        .unzip();
    RadialProfile::new(grid, u, du)
}

/// `M (1 - (r/R)^{p/(p-1)})` with its derivative on `n` uniform nodes.
pub fn build_supersolution(m: f64, p: PExponent, r_big: f64, n: usize) -> Result<RadialProfile> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Input(format!("M must be positive, got {m}")));
    }
    let grid = RadialGrid::uniform(r_big, n)?;
    let q = p.p_conj;
    let (u, du) = grid
        .nodes()
        .into_iter()
        .map(|r| {
            let x = r / r_big;
            (m * (1.0 - x.powf(q)), -m * q * x.powf(q - 1.0) / r_big)
        })
        .unzip();
    RadialProfile::new(grid, u, du)
}

/// Relative defect of `r^{N-1} φ_p(ū') = -∫_0^r s^{N-1} k₁ M^{p-1} ‖ω‖_∞ ds`,
/// the integrated form of `-Δ_p ū = k₁ M^{p-1} ‖ω‖_∞`.
pub fn supersolution_identity_defect(
    sup: &RadialProfile,
    p: PExponent,
    n_dim: usize,
    k1_outer: f64,
    m: f64,
    omega_sup: f64,
) -> f64 {
    let c = k1_outer * m.powf(p.p - 1.0) * omega_sup;
    let rule = PowerWeightedRule::new(sup.grid, n_dim as f64 - 1.0);
    let integral = rule.prefix(&vec![c; sup.grid.len()]);
    let scale = integral.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    sup.grid
        .nodes()
        .iter()
        .zip(&sup.du)
        .zip(&integral)
        .map(|((r, d), i)| (r.powi(n_dim as i32 - 1) * phi_p(*d, p) + i).abs())
        .fold(0.0, f64::max)
        / scale
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubSuperPair {
    pub rho: f64,
    pub r_big: f64,
    pub m: f64,
    pub omega_sup: f64,
    /// `u_ρ` on its own grid over `[0, ρ]`.
    pub inner: RadialProfile,
    pub sub: RadialProfile,
    #[serde(rename = "super")]
    pub sup: RadialProfile,
    pub consts: ProblemConstants,
    /// `k₁(B_R)` for the constant weight `‖ω‖_∞`.
    pub k1_outer: f64,
}

impl SubSuperPair {
    /// Pairs `u_ρ` with the super-solution of height `M` on `B_R`. When
    /// `R = ρ` the pair lives on the grid of `u_ρ`; otherwise on `n_outer`
    /// uniform nodes.
    pub fn assemble(
        consts: ProblemConstants,
        u_rho: RadialProfile,
        r_big: f64,
        m: f64,
        omega_sup: f64,
        n_outer: usize,
    ) -> Result<Self> {
        if u_rho.grid.rho() != consts.rho {
            return Err(Error::Input("u_rho and the constants live on different balls".into()));
        }
        if !(omega_sup > 0.0 && omega_sup.is_finite()) {
            return Err(Error::Input(format!("sup of the weight must be positive, got {omega_sup}")));
        }
        let n = if r_big == consts.rho { u_rho.grid.len() } else { n_outer };
        let sub = build_subsolution(&u_rho, r_big, n)?;
        let sup = build_supersolution(m, consts.p, r_big, n)?;
        Ok(Self {
            rho: consts.rho,
            r_big,
            m,
            omega_sup,
            inner: u_rho,
            sub,
            sup,
            consts,
            k1_outer: k1_constant_weight(consts.p.p, consts.n_dim, r_big, omega_sup),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub ordering_pass: bool,
    /// `min (super - sub)` over the shared grid.
    pub ordering_margin: f64,
    pub ordering_worst_r: f64,
    pub premise_pass: bool,
    /// `k₁(B_R) M^{p-1} ‖ω‖_∞ - max ω_ρ f(u_ρ, |u_ρ'|)` over the inner grid.
    pub premise_margin: f64,
    pub premise_worst_r: f64,
    pub quotient_pass: bool,
    pub super_quotient: f64,
    pub gamma_rho: f64,
    /// `γ_ρ - ‖ū'‖_∞/‖ū‖_∞`.
    pub quotient_margin: f64,
    /// Interior nodes of `(0, ρ)` where `u_ρ'` vanishes.
    pub interior_critical_radii: Vec<f64>,
    pub k1_outer: f64,
    pub k1_inner: f64,
    pub k1_monotone: bool,
    pub super_identity_defect: f64,
    pub pass: bool,
}

/// Checks ordering, the comparison premise and the quotient condition.
pub fn verify_pair(
    pair: &SubSuperPair,
    f: &dyn Nonlinearity,
    w_rho: &RadialWeight,
) -> Result<PairReport> {
    if *w_rho.grid() != pair.inner.grid {
        return Err(Error::Input("weight and u_rho are sampled on different grids".into()));
    }
    let p = pair.consts.p;
    let nodes = pair.sub.grid.nodes();
    let (ordering_margin, ordering_worst_r) = nodes
        .iter()
        .zip(pair.sup.u.iter().zip(&pair.sub.u))
        .map(|(r, (a, b))| (a - b, *r))
        .fold((f64::INFINITY, 0.0), |acc, v| if v.0 < acc.0 { v } else { acc });

    let bound = pair.k1_outer * pair.m.powf(p.p - 1.0) * pair.omega_sup;
    let inner_nodes = pair.inner.grid.nodes();
    let (premise_margin, premise_worst_r) = inner_nodes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let v = w_rho.samples()[k] * f.eval(pair.inner.u[k], pair.inner.du[k].abs());
            (bound - v, *r)
        })
        .fold((f64::INFINITY, 0.0), |acc, v| if v.0 < acc.0 || v.0.is_nan() { v } else { acc });

    let super_quotient = pair.sup.max_du() / pair.sup.max_u();
    let gamma_rho = pair.consts.gamma;
    let quotient_margin = gamma_rho - super_quotient;

    let slope_floor = 1e-14 * pair.inner.max_du().max(f64::MIN_POSITIVE);
    let last = pair.inner.grid.len() - 1;
    let interior_critical_radii = (1..last)
        .filter(|&k| pair.inner.du[k].abs() <= slope_floor)
        .map(|k| inner_nodes[k])
        .collect();

    let k1_inner = pair.consts.k1;
    let k1_monotone = pair.k1_outer <= k1_inner * (1.0 + MARGIN_RTOL);
    let ordering_pass = ordering_margin >= -MARGIN_RTOL * pair.m;
    let premise_pass = premise_margin >= -MARGIN_RTOL * bound;
    let quotient_pass = quotient_margin >= -MARGIN_RTOL * gamma_rho;
    let super_identity_defect =
        supersolution_identity_defect(&pair.sup, p, pair.consts.n_dim, pair.k1_outer, pair.m, pair.omega_sup);
    Ok(PairReport {
        ordering_pass,
        ordering_margin,
        ordering_worst_r,
        premise_pass,
        premise_margin,
        premise_worst_r,
        quotient_pass,
        super_quotient,
        gamma_rho,
        quotient_margin,
        interior_critical_radii,
        k1_outer: pair.k1_outer,
        k1_inner,
        k1_monotone,
        super_identity_defect,
        pass: ordering_pass && premise_pass && quotient_pass && k1_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::torsion_profile;
    use crate::radial::ConstantSource;

    fn setup(rho: f64) -> (RadialWeight, ProblemConstants, RadialProfile) {
        let grid = RadialGrid::uniform(rho, 513).unwrap();
        let w = RadialWeight::unit(grid);
        let p = PExponent::new(2.0).unwrap();
        let consts = ProblemConstants::compute(&w, p, 3).unwrap();
        let phi = torsion_profile(&w, p, 3).unwrap();
        (w, consts, phi)
    }

    #[test]
    fn supersolution_closed_form() {
        let p = PExponent::new(2.0).unwrap();
        let s = build_supersolution(1.0, p, 1.0, 101).unwrap();
        for (k, r) in s.grid.nodes().iter().enumerate() {
            assert!((s.u[k] - (1.0 - r * r)).abs() < 1e-15);
        }
        assert_eq!(s.u[0], 1.0);
        assert_eq!(*s.u.last().unwrap(), 0.0);
        assert!((s.max_du() / s.max_u() - 2.0).abs() < 1e-15);
        let p3 = PExponent::new(3.0).unwrap();
        let k1 = k1_constant_weight(3.0, 2, 0.7, 2.0);
        let s = build_supersolution(0.4, p3, 0.7, 1025).unwrap();
        assert!(supersolution_identity_defect(&s, p3, 2, k1, 0.4, 2.0) < 1e-12);
    }

    #[test]
    fn subsolution_extension() {
        let (_, _, phi) = setup(0.5);
        let sub = build_subsolution(&phi, 1.0, 1025).unwrap();
        for (k, r) in sub.grid.nodes().iter().enumerate() {
            if *r >= 0.5 {
                assert_eq!(sub.u[k], 0.0);
            } else {
                assert!((sub.u[k] - (0.25 - r * r) / 6.0).abs() < 1e-9);
            }
        }
        let same = build_subsolution(&phi, 0.5, 513).unwrap();
        assert_eq!(same.u[..512], phi.u[..512]);
        let lifted = RadialProfile::new(phi.grid, phi.u.iter().map(|v| v + 0.01).collect(), phi.du.clone()).unwrap();
        assert!(matches!(build_subsolution(&lifted, 1.0, 65), Err(Error::Input(_))));
        assert!(build_subsolution(&phi, 0.4, 65).is_err());
    }

    #[test]
    fn torsion_pair_checks() {
        let (w, consts, phi) = setup(1.0);
        // -Δ φ = 1 ≤ k₁(B_1) M with M = ‖φ‖: the pair (φ, φ) is tight
        let m = phi.max_u();
        let pair = SubSuperPair::assemble(consts, phi.clone(), 1.0, m, 1.0, 513).unwrap();
        let rep = verify_pair(&pair, &ConstantSource(1.0), &w).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.ordering_margin.abs() < 1e-12);
        assert!(rep.premise_margin.abs() < 1e-9);
        assert!(rep.interior_critical_radii.is_empty());
        assert!(rep.super_identity_defect < 1e-12);

        let doubled = SubSuperPair::assemble(consts, phi.clone(), 1.0, 2.0 * m, 1.0, 513).unwrap();
        assert!(verify_pair(&doubled, &ConstantSource(1.0), &w).unwrap().ordering_pass);

        let mut shrunk = pair.clone();
        shrunk.consts.gamma /= 10.0;
        let rep = verify_pair(&shrunk, &ConstantSource(1.0), &w).unwrap();
        assert!(!rep.quotient_pass && !rep.pass);
    }
}
