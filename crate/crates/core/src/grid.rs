//! Uniform radial grids, cumulative quadrature and the power maps `φ_p`, `φ_q`.
//!
//! Every nested integral in the radial problem has the shape
//! `∫ s^β g(s) ds` where `s^β` is a known power (the Jacobian `s^{N-1}` of
//! polar coordinates, or the `θ^{1/(p-1)}` factor that the outer integrand
//! inherits near the origin) and `g` is smooth and sampled on the grid.
//! [`PowerWeightedRule`] integrates the power exactly against the piecewise
//! quadratic interpolant of `g`. With `β = 0` it is composite Simpson.

use crate::error::{Error, Result};

/// Uniformly spaced nodes `0 = r_0 < … < r_{n-1} = ρ`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RadialGrid {
    rho: f64,
    n: usize,
}

impl RadialGrid {
    pub const DEFAULT_NODES: usize = 2049;

    pub fn uniform(rho: f64, n: usize) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Grid(format!("radius must be positive and finite, got {rho}")));
        }
        if n < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Self { rho, n })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.rho / (self.n - 1) as f64
    }

    /// Node `k`; `node(0) == 0` and `node(n-1) == rho` exactly.
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.rho
        } else {
            self.rho * (k as f64 / (self.n - 1) as f64)
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Index `k` of the panel `[r_k, r_{k+1}]` containing `r` (clamped to the grid).
    pub fn panel_of(&self, r: f64) -> usize {
        let k = (r / self.spacing()).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n - 2)
        }
    }

    /// Grid on `[0, rho]` whose spacing is as close as possible to `h`.
    pub fn with_spacing(rho: f64, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Grid(format!("spacing must be positive, got {h}")));
        }
        let panels = (rho / h).round().max(2.0) as usize;
        Self::uniform(rho, panels + 1)
    }
}

/// The exponent `p > 1` together with its conjugate `p/(p-1)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PExponent {
    pub p: f64,
    pub p_conj: f64,
}

impl PExponent {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Domain(format!("p must satisfy p > 1, got {p}")));
        }
        Ok(Self { p, p_conj: p / (p - 1.0) })
    }

    /// `1/(p-1)`, the exponent of `φ_q`.
    #[inline]
    pub fn inv_pm1(&self) -> f64 {
        1.0 / (self.p - 1.0)
    }
}

/// `φ_p(ξ) = |ξ|^{p-2} ξ`.
pub fn phi_p(xi: f64, p: PExponent) -> f64 {
    if xi == 0.0 {
        0.0
    } else {
        xi.abs().powf(p.p - 2.0) * xi
    }
}

/// `φ_q(x) = x^{1/(p-1)}` for `x ≥ 0`, the inverse of [`phi_p`] on the half line.
pub fn phi_q(x: f64, p: PExponent) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("phi_q needs a nonnegative argument, got {x}")));
    }
    Ok(phi_q_unchecked(x, p))
}

#[inline]
pub(crate) fn phi_q_unchecked(x: f64, p: PExponent) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.powf(p.inv_pm1())
    }
}

/// `G(r_k) = ∫_0^{r_k} g`, with `G(0) = 0`.
pub fn prefix_integral(grid: &RadialGrid, g: &[f64]) -> Result<Vec<f64>> {
    check_samples(grid, g)?;
    Ok(PowerWeightedRule::new(*grid, 0.0).prefix(g))
}

/// `G(r_k) = ∫_{r_k}^ρ g`, with `G(ρ) = 0`.
pub fn suffix_integral(grid: &RadialGrid, g: &[f64]) -> Result<Vec<f64>> {
    check_samples(grid, g)?;
    Ok(PowerWeightedRule::new(*grid, 0.0).suffix(g))
}

pub(crate) fn check_samples(grid: &RadialGrid, g: &[f64]) -> Result<()> {
    if g.len() != grid.len() {
        return Err(Error::Input(format!(
            "expected {} samples, got {}",
            grid.len(),
            g.len()
        )));
    }
    if let Some(k) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite sample {} at node {k}", g[k])));
    }
    Ok(())
}

/// Product-integration rule for `∫ s^β g(s) ds` on a uniform grid.
///
/// Panels are paired Simpson-style from the anchored end; a node that leaves
/// an odd panel count gets a single panel integrated against the quadratic
/// through its three nearest nodes. Weights of panels touching the origin
/// are exact in closed form, all others use 16-point Gauss–Legendre on the
/// smooth product `s^β L_j(s)`.
#[derive(Debug, Clone)]
pub(crate) struct PowerWeightedRule {
    grid: RadialGrid,
    /// Weights for the pair `[r_k, r_{k+2}]`, stencil `k, k+1, k+2`.
    pair: Vec<[f64; 3]>,
    /// Weights for the panel `[r_k, r_{k+1}]` and the first node of its stencil.
    single: Vec<([f64; 3], usize)>,
}

impl PowerWeightedRule {
    pub(crate) fn new(grid: RadialGrid, beta: f64) -> Self {
        debug_assert!(beta > -1.0);
        let n = grid.len();
        let pair = (0..n - 2).map(|k| panel_weights(&grid, beta, k, k, 2.0)).collect();
        let single = (0..n - 1)
            .map(|k| {
                let start = if k + 2 < n { k } else { k - 1 };
                (panel_weights(&grid, beta, start, k, 1.0), start)
            })
            .collect();
        Self { grid, pair, single }
    }

    pub(crate) fn prefix(&self, g: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for k in 1..n {
            out[k] = if k % 2 == 0 {
                out[k - 2] + dot3(&self.pair[k - 2], &g[k - 2..k + 1])
            } else {
                let (w, s) = &self.single[k - 1];
                out[k - 1] + dot3(w, &g[*s..s + 3])
            };
        }
        out
    }

    pub(crate) fn suffix(&self, g: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for k in (0..n - 1).rev() {
            out[k] = if (n - 1 - k).is_multiple_of(2) {
                out[k + 2] + dot3(&self.pair[k], &g[k..k + 3])
            } else {
                let (w, s) = &self.single[k];
                out[k + 1] + dot3(w, &g[*s..s + 3])
            };
        }
        out
    }

    /// `∫_{r_k}^{r} s^β g(s) ds` for `r` inside panel `k`, using the panel's quadratic.
    pub(crate) fn partial_panel(&self, beta: f64, g: &[f64], k: usize, r: f64) -> f64 {
        let (_, start) = self.single[k];
        let h = self.grid.spacing();
        let x0 = self.grid.node(start);
        let a = self.grid.node(k);
        if r <= a {
            return 0.0;
        }
        let ta = (a - x0) / h;
        let tb = (r - x0) / h;
        let w = if a == 0.0 {
            origin_weights(beta, h, ta, tb)
        } else {
            gauss_weights(beta, h, x0, ta, tb)
        };
        dot3(&w, &g[start..start + 3])
    }
}

#[inline]
fn dot3(w: &[f64; 3], g: &[f64]) -> f64 {
    w[0] * g[0] + w[1] * g[1] + w[2] * g[2]
}

/// Weights of the quadratic through nodes `start..start+3` integrated over
/// `[r_k, r_k + width·h]`.
fn panel_weights(grid: &RadialGrid, beta: f64, start: usize, k: usize, width: f64) -> [f64; 3] {
    let h = grid.spacing();
    let x0 = grid.node(start);
    let ta = (k - start) as f64;
    let tb = ta + width;
    if k == 0 {
        origin_weights(beta, h, ta, tb)
    } else {
        gauss_weights(beta, h, x0, ta, tb)
    }
}

/// Lagrange basis on `τ ∈ {0, 1, 2}` as monomial coefficients `[c0, c1, c2]`.
const LAGRANGE: [[f64; 3]; 3] = [[1.0, -1.5, 0.5], [0.0, 2.0, -1.0], [0.0, -0.5, 0.5]];

/// Exact weights when the stencil starts at the origin: `s = hτ`.
fn origin_weights(beta: f64, h: f64, ta: f64, tb: f64) -> [f64; 3] {
    let scale = h.powf(beta + 1.0);
    let moment = |k: usize| {
        let e = beta + k as f64 + 1.0;
        (tb.powf(e) - if ta > 0.0 { ta.powf(e) } else { 0.0 }) / e
    };
    let m = [moment(0), moment(1), moment(2)];
    let mut w = [0.0; 3];
    for (wj, c) in w.iter_mut().zip(LAGRANGE.iter()) {
        *wj = scale * (c[0] * m[0] + c[1] * m[1] + c[2] * m[2]);
    }
    w
}

fn gauss_weights(beta: f64, h: f64, x0: f64, ta: f64, tb: f64) -> [f64; 3] {
    let (nodes, weights) = gauss_legendre_16();
    let half = 0.5 * (tb - ta);
    let mid = 0.5 * (tb + ta);
    let mut w = [0.0; 3];
    for (x, wt) in nodes.iter().zip(weights.iter()) {
        let tau = mid + half * x;
        let s = x0 + h * tau;
        let ws = if beta == 0.0 { 1.0 } else { s.powf(beta) };
        let basis = [
            0.5 * (tau - 1.0) * (tau - 2.0),
            -tau * (tau - 2.0),
            0.5 * tau * (tau - 1.0),
        ];
        for j in 0..3 {
            w[j] += wt * ws * basis[j];
        }
    }
    for wj in &mut w {
        *wj *= half * h;
    }
    w
}

fn gauss_legendre_16() -> &'static ([f64; 16], [f64; 16]) {
    static RULE: std::sync::OnceLock<([f64; 16], [f64; 16])> = std::sync::OnceLock::new();
    RULE.get_or_init(gauss_legendre::<16>)
}

/// Nodes and weights of the `M`-point Gauss–Legendre rule on `[-1, 1]` (Newton on `P_M`).
fn gauss_legendre<const M: usize>() -> ([f64; M], [f64; M]) {
    let mut x = [0.0; M];
    let mut w = [0.0; M];
    let m = M as f64;
    for i in 0..M.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=M {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = m * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[M - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[M - 1 - i] = wi;
    }
    (x, w)
}

/// `∫_r^ρ θ^e dθ` in closed form (logarithmic when `e = -1`).
pub(crate) fn tail_power_integral(r: f64, rho: f64, e: f64) -> f64 {
    if (e + 1.0).abs() < 1e-12 {
        if r <= 0.0 {
            f64::INFINITY
        } else {
            (rho / r).ln()
        }
    } else {
        let e1 = e + 1.0;
        let lower = if r <= 0.0 {
            if e1 > 0.0 {
                0.0
            } else {
                return f64::INFINITY;
            }
        } else {
            r.powf(e1)
        };
        (rho.powf(e1) - lower) / e1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rho: f64, n: usize) -> RadialGrid {
        RadialGrid::uniform(rho, n).unwrap()
    }

    #[test]
    fn grid_endpoints_are_exact() {
        for &(rho, n) in &[(1.0, 3), (0.3, 2049), (7.1, 1000)] {
            let g = grid(rho, n);
            assert_eq!(g.node(0), 0.0);
            assert_eq!(g.node(n - 1), rho);
            let h = g.spacing();
            for k in 1..n {
                assert!((g.node(k) - g.node(k - 1) - h).abs() < 1e-13 * rho);
            }
        }
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(RadialGrid::uniform(1.0, 2).is_err());
        assert!(RadialGrid::uniform(0.0, 10).is_err());
        assert!(RadialGrid::uniform(f64::NAN, 10).is_err());
    }

    #[test]
    fn conjugate_exponent() {
        for p in [1.2, 1.5, 2.0, 3.0, 7.3] {
            let e = PExponent::new(p).unwrap();
            assert!((1.0 / e.p + 1.0 / e.p_conj - 1.0).abs() < 1e-12);
        }
        assert!(PExponent::new(1.0).is_err());
    }

    #[test]
    fn phi_p_values() {
        let p3 = PExponent::new(3.0).unwrap();
        let p2 = PExponent::new(2.0).unwrap();
        let p15 = PExponent::new(1.5).unwrap();
        assert_eq!(phi_p(2.0, p3), 4.0);
        assert_eq!(phi_p(-2.0, p3), -4.0);
        assert_eq!(phi_p(-1.0, p2), -1.0);
        assert_eq!(phi_p(0.0, p15), 0.0);
        // sqrt(0.5), cross-checked through the inverse map
        let v = phi_p(0.5, p15);
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((phi_q(v, p15).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn phi_q_values() {
        let p4 = PExponent::new(4.0).unwrap();
        assert!((phi_q(8.0, p4).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(phi_q(1.0, PExponent::new(7.3).unwrap()).unwrap(), 1.0);
        let p3 = PExponent::new(3.0).unwrap();
        assert!((phi_q(0.25, p3).unwrap() - 0.5).abs() < 1e-15);
        assert!((phi_p(0.5, p3) - 0.25).abs() < 1e-15);
        assert!(matches!(phi_q(-1.0, p3), Err(Error::Domain(_))));
    }

    #[test]
    fn prefix_of_zero_is_zero() {
        let g = grid(1.0, 11);
        let out = prefix_integral(&g, &[0.0; 11]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn prefix_is_exact_for_quadratics() {
        let g = grid(1.0, 1001);
        let s2: Vec<f64> = g.nodes().iter().map(|s| s * s).collect();
        let out = prefix_integral(&g, &s2).unwrap();
        assert!((out[1000] - 1.0 / 3.0).abs() < 1e-10);
        for (k, r) in g.nodes().iter().enumerate() {
            assert!((out[k] - r.powi(3) / 3.0).abs() < 1e-10, "node {k}");
        }
    }

    #[test]
    fn prefix_handles_odd_panel_counts() {
        let g = grid(1.0, 1000);
        let s2: Vec<f64> = g.nodes().iter().map(|s| s * s).collect();
        let out = prefix_integral(&g, &s2).unwrap();
        for (k, r) in g.nodes().iter().enumerate() {
            assert!((out[k] - r.powi(3) / 3.0).abs() < 1e-12, "node {k}");
        }
    }

    #[test]
    fn suffix_examples() {
        let g = grid(1.0, 101);
        let out = suffix_integral(&g, &[1.0; 101]).unwrap();
        for (k, r) in g.nodes().iter().enumerate() {
            assert!((out[k] - (1.0 - r)).abs() < 1e-12);
        }
        let g2 = grid(2.0, 101);
        let theta = g2.nodes();
        assert!((suffix_integral(&g2, &theta).unwrap()[0] - 2.0).abs() < 1e-10);
        // θ^{1/(p-1)} with p = 2 integrates to 1/2 on [0, 1]
        let p = PExponent::new(2.0).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|&t| phi_q(t, p).unwrap()).collect();
        assert!((suffix_integral(&g, &vals).unwrap()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_samples() {
        let g = grid(1.0, 5);
        let err = prefix_integral(&g, &[0.0, 1.0, f64::NAN, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
        assert!(suffix_integral(&g, &[0.0; 4]).is_err());
    }

    #[test]
    fn power_weight_is_integrated_exactly_near_origin() {
        // ∫_0^r θ^{1/2} dθ = (2/3) r^{3/2}; plain Simpson loses accuracy here
        let g = grid(1.0, 257);
        let rule = PowerWeightedRule::new(g, 0.5);
        let out = rule.prefix(&vec![1.0; 257]);
        for (k, r) in g.nodes().iter().enumerate() {
            assert!((out[k] - 2.0 / 3.0 * r.powf(1.5)).abs() < 1e-13, "node {k}");
        }
        let suf = rule.suffix(&vec![1.0; 257]);
        for (k, r) in g.nodes().iter().enumerate() {
            assert!((suf[k] - 2.0 / 3.0 * (1.0 - r.powf(1.5))).abs() < 1e-13, "node {k}");
        }
    }

    #[test]
    fn partial_panel_matches_closed_form() {
        let g = grid(1.0, 65);
        let beta = 2.0;
        let rule = PowerWeightedRule::new(g, beta);
        let ones = vec![1.0; 65];
        for &r in &[0.001, 0.013, 0.5, 0.77777, 0.999] {
            let k = g.panel_of(r);
            let full = rule.prefix(&ones)[k] + rule.partial_panel(beta, &ones, k, r);
            assert!((full - r.powi(3) / 3.0).abs() < 1e-14, "r = {r}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre::<16>();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn tail_integral_branches() {
        assert!((tail_power_integral(0.5, 1.0, -1.0) - 2f64.ln()).abs() < 1e-15);
        assert!((tail_power_integral(0.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((tail_power_integral(0.5, 1.0, -2.0) - 1.0).abs() < 1e-15);
        assert!(tail_power_integral(0.0, 1.0, -2.0).is_infinite());
    }
}
