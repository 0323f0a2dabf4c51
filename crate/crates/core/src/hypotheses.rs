//! Sampled checks of the box hypotheses on a nonlinearity, and the
//! closed-form parameter analysis for `f_λ(u, s) = λ u^{q-1} (1 + s^p)`.
//!
//! The box checks evaluate `f` on a lattice and then zoom in around the worst
//! lattice point. They are sampled verifications, not proofs.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::radial::Nonlinearity;

/// Default lattice size per axis.
pub const DEFAULT_SAMPLES: usize = 256;

/// Relative slack allowed when `f` touches a bound exactly.
pub const BOUNDARY_RTOL: f64 = 1e-12;

const ZOOM_ROUNDS: usize = 4;
const ZOOM_SAMPLES: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampledPoint {
    pub u: f64,
    pub s: f64,
    pub value: f64,
    pub bound: f64,
    /// Signed distance to failure; negative means violated.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub pass: bool,
    pub worst: SampledPoint,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub u_lo: f64,
    pub u_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
}

/// Minimizes `margin` over the rectangle, first on an `n × n` lattice and
/// then on shrinking lattices around the current worst point.
fn scan(
    rect: Rect,
    n: usize,
    margin: &(dyn Fn(f64, f64) -> Result<SampledPoint> + Sync),
) -> Result<(SampledPoint, usize)> {
    let n = n.max(2);
    let lattice = |rect: Rect, n: usize| -> Result<SampledPoint> {
        let du = (rect.u_hi - rect.u_lo) / (n - 1) as f64;
        let ds = (rect.s_hi - rect.s_lo) / (n - 1) as f64;
        let rows: Vec<Result<SampledPoint>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let u = if i == n - 1 { rect.u_hi } else { rect.u_lo + i as f64 * du };
                let mut worst: Option<SampledPoint> = None;
                for j in 0..n {
                    let s = if j == n - 1 { rect.s_hi } else { rect.s_lo + j as f64 * ds };
                    let pt = margin(u, s)?;
                    if worst.is_none_or(|w| pt.margin < w.margin) {
                        worst = Some(pt);
                    }
                }
                Ok(worst.expect("n >= 2"))
            })
            .collect();
        let mut worst: Option<SampledPoint> = None;
        for row in rows {
            let pt = row?;
            if worst.is_none_or(|w| pt.margin < w.margin) {
                worst = Some(pt);
            }
        }
        Ok(worst.expect("n >= 2"))
    };

    let mut worst = lattice(rect, n)?;
    let mut count = n * n;
    let mut half_u = (rect.u_hi - rect.u_lo) / (n - 1) as f64;
    let mut half_s = (rect.s_hi - rect.s_lo) / (n - 1) as f64;
    for _ in 0..ZOOM_ROUNDS {
        let local = Rect {
            u_lo: (worst.u - half_u).max(rect.u_lo),
            u_hi: (worst.u + half_u).min(rect.u_hi),
            s_lo: (worst.s - half_s).max(rect.s_lo),
            s_hi: (worst.s + half_s).min(rect.s_hi),
        };
        let cand = lattice(local, ZOOM_SAMPLES)?;
        count += ZOOM_SAMPLES * ZOOM_SAMPLES;
        if cand.margin < worst.margin {
            worst = cand;
        }
        half_u *= 2.0 / (ZOOM_SAMPLES - 1) as f64;
        half_s *= 2.0 / (ZOOM_SAMPLES - 1) as f64;
    }
    Ok((worst, count))
}

fn finite_value(f: &dyn Nonlinearity, u: f64, s: f64) -> Result<f64> {
    let v = f.eval(u, s);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Input(format!("f({u}, {s}) = {v} is not finite on the box")))
    }
}

/// `0 ≤ f(u, s) ≤ k₁ M^{p-1}` on `[0, M] × [0, γM]`.
///
/// The margin is `f` where `f` is negative and `k₁ M^{p-1} - f` elsewhere.
pub fn check_h1(
    f: &dyn Nonlinearity,
    k1: f64,
    m: f64,
    gamma: f64,
    p: f64,
    samples_per_axis: usize,
) -> Result<HypothesisCheck> {
    if !(m > 0.0 && gamma > 0.0 && m.is_finite() && gamma.is_finite()) {
        return Err(Error::Precondition(format!("need M > 0 and gamma > 0, got M = {m}, gamma = {gamma}")));
    }
    let bound = k1 * m.powf(p - 1.0);
    let rect = Rect { u_lo: 0.0, u_hi: m, s_lo: 0.0, s_hi: gamma * m };
    let (worst, samples) = scan(rect, samples_per_axis, &|u, s| {
        let value = finite_value(f, u, s)?;
        Ok(SampledPoint { u, s, value, bound, margin: if value < 0.0 { value } else { bound - value } })
    })?;
    Ok(HypothesisCheck { pass: worst.margin >= -BOUNDARY_RTOL * bound, worst, samples })
}

/// `f(u, s) ≥ k₂ δ^{p-1}` on `[δ, M] × [0, γM]`.
pub fn check_h2(
    f: &dyn Nonlinearity,
    k2: f64,
    delta: f64,
    m: f64,
    gamma: f64,
    p: f64,
    samples_per_axis: usize,
) -> Result<HypothesisCheck> {
    if !(delta > 0.0 && delta < m && m.is_finite()) {
        return Err(Error::Precondition(format!("need 0 < delta < M, got delta = {delta}, M = {m}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Precondition(format!("need gamma > 0, got {gamma}")));
    }
    let bound = k2 * delta.powf(p - 1.0);
    let rect = Rect { u_lo: delta, u_hi: m, s_lo: 0.0, s_hi: gamma * m };
    let (worst, samples) = scan(rect, samples_per_axis, &|u, s| {
        let value = finite_value(f, u, s)?;
        Ok(SampledPoint { u, s, value, bound, margin: value - bound })
    })?;
    Ok(HypothesisCheck { pass: worst.margin >= -BOUNDARY_RTOL * bound, worst, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub pass: bool,
    /// Point with the smallest `C(u) - f(u, s)/(1 + s^p)`.
    pub worst: SampledPoint,
    pub samples: usize,
    /// Always `true`: growth is only checked on the sampled rectangle.
    pub sampled_only: bool,
}

/// `f(u, s) ≤ C(u) (1 + s^p)` on the rectangle. Non-finite values count as
/// violations.
pub fn check_h3(
    f: &dyn Nonlinearity,
    c_growth: &(dyn Fn(f64) -> f64 + Sync),
    p: f64,
    rect: Rect,
    samples_per_axis: usize,
) -> GrowthCheck {
    let (worst, samples) = scan(rect, samples_per_axis, &|u, s| {
        let ratio = f.eval(u, s) / (1.0 + s.powf(p));
        let bound = c_growth(u);
        let margin = if ratio.is_finite() && bound.is_finite() { bound - ratio } else { f64::NEG_INFINITY };
        Ok(SampledPoint { u, s, value: ratio, bound, margin })
    })
    .expect("growth margin is infallible");
    let pass = worst.margin >= -BOUNDARY_RTOL * worst.bound.abs();
    GrowthCheck { pass, worst, samples, sampled_only: true }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleCounts {
    pub h1: usize,
    pub h2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxHypothesisReport {
    pub h1_pass: bool,
    pub h1_worst: SampledPoint,
    pub h2_pass: bool,
    pub h2_worst: SampledPoint,
    pub sample_counts: SampleCounts,
}

impl BoxHypothesisReport {
    pub fn pass(&self) -> bool {
        self.h1_pass && self.h2_pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxParams {
    pub k1: f64,
    pub k2: f64,
    pub gamma: f64,
    pub p: f64,
    pub delta: f64,
    pub m: f64,
}

pub fn verify_box_hypotheses(
    f: &dyn Nonlinearity,
    params: BoxParams,
    samples_per_axis: usize,
) -> Result<BoxHypothesisReport> {
    let BoxParams { k1, k2, gamma, p, delta, m } = params;
    let h1 = check_h1(f, k1, m, gamma, p, samples_per_axis)?;
    let h2 = check_h2(f, k2, delta, m, gamma, p, samples_per_axis)?;
    Ok(BoxHypothesisReport {
        h1_pass: h1.pass,
        h1_worst: h1.worst,
        h2_pass: h2.pass,
        h2_worst: h2.worst,
        sample_counts: SampleCounts { h1: h1.samples, h2: h2.samples },
    })
}

/// `H(M) = M^{q-p} (1 + μ^p M^p)`.
pub fn eval_h(m: f64, p: f64, q_exp: f64, mu: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::Domain(format!("H needs M > 0, got {m}")));
    }
    Ok(m.powf(q_exp - p) * (1.0 + (mu * m).powf(p)))
}

/// `G(x) = x^{q-p}`.
pub fn eval_g(x: f64, p: f64, q_exp: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("G needs x > 0, got {x}")));
    }
    Ok(x.powf(q_exp - p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaFamilyReport {
    pub p: f64,
    pub q_exp: f64,
    /// Slope coefficient, taken equal to `γ_ρ`.
    pub mu: f64,
    pub m_star: f64,
    pub h_at_m_star: f64,
    pub lambda_star: f64,
    pub lambda: Option<f64>,
    /// `(λ/k₂)^{1/(p-q)}` for the requested `λ`.
    pub delta_lambda: Option<f64>,
    /// `M* (q/p)^{1/(p-q)}`, an upper bound for every `δ_λ` with `λ ≤ λ*`.
    pub delta_bound: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Optimal box height `M*`, the threshold `λ*` and, for a given `λ ≤ λ*`, the
/// lower level `δ_λ`.
pub fn analyze_lambda_family(
    p: f64,
    q_exp: f64,
    mu: f64,
    k1: f64,
    k2: f64,
    lambda: Option<f64>,
) -> Result<LambdaFamilyReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("need p > 1, got {p}")));
    }
    if !(q_exp > 1.0 && q_exp < p) {
        return Err(Error::Precondition(format!("need 1 < q < p, got q = {q_exp}, p = {p}")));
    }
    if !(mu > 0.0 && k1 > 0.0 && k2 > 0.0) || !(mu.is_finite() && k1.is_finite() && k2.is_finite()) {
        return Err(Error::Precondition(format!("mu, k1, k2 must be positive, got {mu}, {k1}, {k2}")));
    }
    if !(k1 < k2) {
        return Err(Error::Precondition(format!("need k1 < k2, got k1 = {k1}, k2 = {k2}")));
    }
    let ratio = p / q_exp - 1.0;
    let m_star = ratio.powf(1.0 / p) / mu;
    let h_at_m_star = mu.powf(p - q_exp) * ratio.powf((q_exp - p) / p) * (p / q_exp);
    let lambda_star = k1 / h_at_m_star;
    let delta_bound = m_star * (q_exp / p).powf(1.0 / (p - q_exp));
    let delta_lambda = match lambda {
        None => None,
        Some(l) if !(l > 0.0 && l.is_finite()) => {
            return Err(Error::Input(format!("lambda must be positive, got {l}")));
        }
        Some(l) if l > lambda_star * (1.0 + BOUNDARY_RTOL) => {
            return Err(Error::OutOfRange { value: l, max: lambda_star });
        }
        Some(l) => Some((l / k2).powf(1.0 / (p - q_exp))),
    };
    Ok(LambdaFamilyReport {
        p,
        q_exp,
        mu,
        m_star,
        h_at_m_star,
        lambda_star,
        lambda,
        delta_lambda,
        delta_bound,
        k1,
        k2,
    })
}
