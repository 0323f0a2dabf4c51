//! Constructive tools for positive radial solutions of
//! `-Δ_p u = ω(x) f(u, |∇u|)` with zero Dirichlet data.
//!
//! The crate computes the torsion-type profile `φ_ρ` of a ball and the box
//! constants `k₁`, `k₂`, `γ_ρ` derived from it, builds the envelopes that
//! bound the fixed-point set of the radial integral operator `T`, iterates
//! `T` inside that set, checks the box hypotheses on a nonlinearity, and
//! assembles and verifies an ordered sub/super-solution pair.
//!
//! Module map:
//! - [`grid`]: uniform radial grids, cumulative quadrature, `φ_p`/`φ_q`.
//! - [`weights`]: radial weights and the spherical-minimum symmetrization.
//! - [`constants`]: `φ_ρ`, `k₁`, `k₂`, `γ_ρ`, closed forms, radius selection.
//! - [`radial`]: the operator `T`, envelopes and the fixed-point solver.
//! - [`hypotheses`]: sampled box checks and the `λ u^{q-1}(1+s^p)` family.
//! - [`subsuper`]: sub/super-solution assembly and verification.

// `!(x > 0.0)` style guards are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod grid;
pub mod hypotheses;
pub mod radial;
pub mod subsuper;
pub mod weights;

pub use constants::{DomainSummary, ProblemConstants, RhoCase, RhoStrategy};
pub use error::{Error, Result};
pub use grid::{phi_p, phi_q, prefix_integral, suffix_integral, PExponent, RadialGrid};
pub use hypotheses::{analyze_lambda_family, LambdaFamilyReport};
pub use radial::{
    BoxY, FixedPointOptions, FixedPointSolution, LambdaFamily, Nonlinearity, RadialOperator,
    RadialProfile,
};
pub use subsuper::{PairReport, SubSuperPair};
pub use weights::{AmbientWeight, RadialWeight};
