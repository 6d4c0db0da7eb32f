//! Cumulants of linear statistics.
//!
//! [`combinatorics`] holds the exact algebra of `G_k`, [`symmetry`] the
//! finite-difference checks of its diagonal identities, [`integrals`] the
//! deterministic quadrature and [`montecarlo`] the sampled cumulant integrals.

pub mod combinatorics;
pub mod integrals;
pub mod montecarlo;
pub mod symmetry;

pub use combinatorics::{composition_sums, compositions, eval_g, Composition, CompositionSums};
pub use integrals::{
    cyclic_product, expectation, expectation_abs, limit_predictions, nonreproducing_rate,
    variance_quadrature, LimitPredictions, VarianceQuadrature,
};
pub use montecarlo::{cumulant2_quadrature, cumulant_mc, CumulantEstimate, Method};
pub use symmetry::{symmetry_checks, SymmetryReport};
