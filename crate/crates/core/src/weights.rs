//! Weight functions and their radial symmetrization about a ball center.

use std::io::Read;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;

/// A nonnegative radial weight `s ↦ ω_ρ(s)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialWeight {
    grid: RadialGrid,
    samples: Vec<f64>,
    constant: Option<f64>,
}

impl RadialWeight {
    pub fn constant(grid: RadialGrid, value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Weight(format!("constant weight must be positive, got {value}")));
        }
        Ok(Self { grid, samples: vec![value; grid.len()], constant: Some(value) })
    }

    pub fn unit(grid: RadialGrid) -> Self {
        Self { grid, samples: vec![1.0; grid.len()], constant: Some(1.0) }
    }

    pub fn from_samples(grid: RadialGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Input(format!(
                "expected {} weight samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        validate_weight(&samples)?;
        Ok(Self { grid, samples, constant: None })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_samples(grid, grid.nodes().into_iter().map(f).collect())
    }

    /// Reads `s,omega` rows and resamples them linearly onto `grid`.
    ///
    /// The rows must cover `[0, grid.rho()]`.
    pub fn from_csv<R: Read>(reader: R, grid: RadialGrid) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Row {
            s: f64,
            omega: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for row in rdr.deserialize() {
            let Row { s, omega } = row?;
            if !(s.is_finite() && omega.is_finite()) {
                return Err(Error::Input(format!("non-finite weight row ({s}, {omega})")));
            }
            rows.push((s, omega));
        }
        if rows.len() < 2 {
            return Err(Error::Input("weight CSV needs at least two rows".into()));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Input("duplicate abscissa in weight CSV".into()));
        }
        let (s_min, s_max) = (rows[0].0, rows[rows.len() - 1].0);
        let tol = 1e-12 * grid.rho();
        if s_min > tol || s_max < grid.rho() - tol {
            return Err(Error::Input(format!(
                "weight CSV covers [{s_min}, {s_max}], need [0, {}]",
                grid.rho()
            )));
        }
        let samples = grid
            .nodes()
            .into_iter()
            .map(|r| {
                let j = rows.partition_point(|&(s, _)| s <= r).clamp(1, rows.len() - 1);
                let (s0, w0) = rows[j - 1];
                let (s1, w1) = rows[j];
                w0 + (w1 - w0) * (r - s0) / (s1 - s0)
            })
            .collect();
        Self::from_samples(grid, samples)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// The constant value when the weight was built as a constant.
    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    pub fn sup(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }
}

/// Outcome of [`validate_weight`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightReport {
    pub max: f64,
    pub zero_nodes: Vec<usize>,
    /// Two or more adjacent zero samples; accepted, since positivity at a
    /// single point is all the construction needs.
    pub zero_plateau: bool,
}

pub fn validate_weight(samples: &[f64]) -> Result<WeightReport> {
    if let Some(k) = samples.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Weight(format!("sample {} at node {k} is not a nonnegative number", samples[k])));
    }
    let max = samples.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::Weight("weight vanishes identically".into()));
    }
    let zero_nodes: Vec<usize> =
        samples.iter().enumerate().filter(|(_, v)| **v == 0.0).map(|(k, _)| k).collect();
    let zero_plateau = zero_nodes.windows(2).any(|w| w[1] == w[0] + 1);
    Ok(WeightReport { max, zero_nodes, zero_plateau })
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A weight `ω` on a region of `R^N`, with an optional known `‖ω‖_∞`.
#[derive(Clone)]
pub struct AmbientWeight {
    dim: usize,
    eval: Evaluator,
    sup_norm: Option<f64>,
    constant: Option<f64>,
}

impl std::fmt::Debug for AmbientWeight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AmbientWeight")
            .field("dim", &self.dim)
            .field("sup_norm", &self.sup_norm)
            .field("constant", &self.constant)
            .finish_non_exhaustive()
    }
}

impl AmbientWeight {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, eval: Arc::new(eval), sup_norm: None, constant: None }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self { dim, eval: Arc::new(move |_| value), sup_norm: Some(value), constant: Some(value) }
    }

    pub fn with_sup_norm(mut self, sup: f64) -> Self {
        self.sup_norm = Some(sup);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sup_norm(&self) -> Option<f64> {
        self.sup_norm
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
}

/// Default size of the direction set used by [`symmetrize`].
pub fn default_direction_count(dim: usize) -> usize {
    if dim <= 3 {
        512
    } else {
        (512usize << (dim - 3).min(5)).min(16384)
    }
}

/// `ω_ρ(s) = min_{|x - center| = s} ω(x)`, with the minimum taken over a
/// deterministic direction set, and `ω_ρ(0) = ω(center)`.
pub fn symmetrize(
    omega: &AmbientWeight,
    center: &[f64],
    grid: RadialGrid,
    directions: usize,
) -> Result<RadialWeight> {
    if center.len() != omega.dim {
        return Err(Error::Input(format!(
            "center has dimension {}, weight has {}",
            center.len(),
            omega.dim
        )));
    }
    if directions == 0 {
        return Err(Error::Input("need at least one direction".into()));
    }
    if let Some(c) = omega.constant {
        return RadialWeight::constant(grid, c);
    }
    let dirs = sphere_directions(omega.dim, directions);
    let sup = omega.sup_norm;
    let checked = |x: &[f64]| -> Result<f64> {
        let v = omega.eval(x);
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Input(format!("weight evaluates to {v} at {x:?}")));
        }
        if let Some(s) = sup {
            if v > s * (1.0 + 1e-12) {
                return Err(Error::Input(format!("weight value {v} exceeds declared sup norm {s}")));
            }
        }
        Ok(v)
    };
    let samples = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let s = grid.node(k);
            if k == 0 {
                return checked(center);
            }
            let mut x = vec![0.0; center.len()];
            let mut best = f64::INFINITY;
            for d in &dirs {
                for ((xi, ci), di) in x.iter_mut().zip(center).zip(d) {
                    *xi = ci + s * di;
                }
                best = best.min(checked(&x)?);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    RadialWeight::from_samples(grid, samples)
}

/// Deterministic unit vectors; the first `m` of a size-`2m` set are the size-`m` set.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::TAU;
    match dim {
        0 => Vec::new(),
        1 => [1.0, -1.0].iter().cycle().take(count.max(1)).map(|&v| vec![v]).collect(),
        2 => (0..count)
            .map(|k| {
                let a = TAU * radical_inverse(k as u64, 2);
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => (0..count)
            .map(|k| {
                let z = 1.0 - 2.0 * radical_inverse(k as u64, 2);
                let a = TAU * radical_inverse(k as u64, 3);
                let r = (1.0 - z * z).max(0.0).sqrt();
                vec![r * a.cos(), r * a.sin(), z]
            })
            .collect(),
        _ => {
            let pairs = dim.div_ceil(2);
            let mut out = Vec::with_capacity(count);
            let mut k = 1u64;
            while out.len() < count {
                let mut v = Vec::with_capacity(2 * pairs);
                for j in 0..pairs {
                    let u1 = radical_inverse(k, PRIMES[2 * j]);
                    let u2 = radical_inverse(k, PRIMES[2 * j + 1]);
                    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
                    v.push(r * (TAU * u2).cos());
                    v.push(r * (TAU * u2).sin());
                }
                v.truncate(dim);
                let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                k += 1;
                if norm > 1e-12 {
                    out.push(v.into_iter().map(|c| c / norm).collect());
                }
            }
            out
        }
    }
}

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131,
];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * f;
        k /= base;
        f *= inv;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::uniform(1.0, 33).unwrap()
    }

    #[test]
    fn constant_weight_symmetrizes_to_itself() {
        let w = symmetrize(&AmbientWeight::constant(3, 1.0), &[0.3, -0.2, 0.0], grid(), 64).unwrap();
        assert!(w.samples().iter().all(|&v| v == 1.0));
        let w = symmetrize(&AmbientWeight::new(2, |_| 1.0), &[0.0, 0.0], grid(), 64).unwrap();
        assert!(w.samples().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn radial_input_is_recovered() {
        let c = [0.5, 0.25, -1.0];
        let omega = AmbientWeight::new(3, move |x| {
            x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum()
        });
        let w = symmetrize(&omega, &c, grid(), 128).unwrap();
        for (k, s) in grid().nodes().iter().enumerate() {
            assert!((w.samples()[k] - s * s).abs() < 1e-12);
        }
    }

    #[test]
    fn tilted_weight_minimum_is_on_negative_axis() {
        // min over |x| = s of 1 + x₁ is 1 - s, attained at x = -s e₁
        let omega = AmbientWeight::new(2, |x| 1.0 + x[0]);
        let w = symmetrize(&omega, &[0.0, 0.0], grid(), 512).unwrap();
        for (k, s) in grid().nodes().iter().enumerate() {
            assert!((w.samples()[k] - (1.0 - s)).abs() < 1e-12);
        }
        let omega3 = AmbientWeight::new(3, |x| 1.0 + x[0]);
        let brute: Vec<f64> = grid()
            .nodes()
            .iter()
            .map(|&s| {
                // dense brute-force sweep over the sphere
                let mut best = f64::INFINITY;
                for i in 0..=400 {
                    let th = std::f64::consts::PI * i as f64 / 400.0;
                    for j in 0..400 {
                        let ph = std::f64::consts::TAU * j as f64 / 400.0;
                        best = best.min(1.0 + s * th.sin() * ph.cos());
                    }
                }
                best
            })
            .collect();
        let w3 = symmetrize(&omega3, &[0.0; 3], grid(), 512).unwrap();
        for (k, (&got, &want)) in w3.samples().iter().zip(&brute).enumerate() {
            assert!((got - want).abs() < 0.01, "node {k}");
            assert!(got >= want - 1e-12);
        }
    }

    #[test]
    fn refinement_never_increases_the_minimum() {
        let omega = AmbientWeight::new(3, |x| 2.0 + x[0] * x[1] - 0.5 * x[2] + (3.0 * x[1]).sin());
        for count in [16, 32, 64, 128] {
            let a = symmetrize(&omega, &[0.1, 0.0, 0.2], grid(), count).unwrap();
            let b = symmetrize(&omega, &[0.1, 0.0, 0.2], grid(), 2 * count).unwrap();
            for (x, y) in a.samples().iter().zip(b.samples()) {
                assert!(y <= x);
            }
        }
    }

    #[test]
    fn higher_dimensional_directions_are_unit_and_nested() {
        let a = sphere_directions(5, 100);
        let b = sphere_directions(5, 200);
        assert_eq!(&b[..100], &a[..]);
        for d in &b {
            assert_eq!(d.len(), 5);
            assert!((d.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrize_rejects_bad_evaluations() {
        let neg = AmbientWeight::new(2, |x| x[0]);
        assert!(matches!(symmetrize(&neg, &[0.0, 0.0], grid(), 8), Err(Error::Input(_))));
        let over = AmbientWeight::new(2, |x| 1.0 + x[0]).with_sup_norm(1.5);
        assert!(symmetrize(&over, &[0.9, 0.0], grid(), 8).is_err());
    }

    #[test]
    fn validation_examples() {
        let ok = validate_weight(&[1.0; 5]).unwrap();
        assert!(ok.zero_nodes.is_empty());
        let lin = validate_weight(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(lin.zero_nodes, vec![0]);
        assert!(!lin.zero_plateau);
        assert!(validate_weight(&[0.0, 0.0, 1.0]).unwrap().zero_plateau);
        assert!(matches!(validate_weight(&[0.0; 4]), Err(Error::Weight(_))));
        assert!(validate_weight(&[1.0, -1e-9, 1.0]).is_err());
    }

    #[test]
    fn csv_import_resamples_linearly() {
        let data = "s,omega\n0,1\n0.5,0.5\n1,1\n";
        let w = RadialWeight::from_csv(data.as_bytes(), RadialGrid::uniform(1.0, 5).unwrap()).unwrap();
        assert_eq!(w.samples(), &[1.0, 0.75, 0.5, 0.75, 1.0]);
        let short = "s,omega\n0,1\n0.5,1\n";
        assert!(RadialWeight::from_csv(short.as_bytes(), grid()).is_err());
        let neg = "s,omega\n0,1\n1,-1\n";
        assert!(RadialWeight::from_csv(neg.as_bytes(), grid()).is_err());
    }
}
