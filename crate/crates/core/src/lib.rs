//! Planar determinantal point processes and the fluctuations of their smooth
//! linear statistics.
//!
//! The crate is organised around six pieces:
//!
//! * [`kernels`]: Ginibre and Weyl–Heisenberg correlation kernels, scaling and dilation.
//! * [`envelopes`]: envelope functions dominating a kernel, and the moment checks
//!   (size, uniform integrability, interaction decay) they are expected to pass.
//! * [`testfunctions`]: compactly supported C³ bumps with exact derivatives.
//! * [`cumulants`]: the cumulant integrand `G_k`, its exact combinatorics, and
//!   quadrature / Monte Carlo evaluation of means, variances and cumulants.
//! * [`sampler`]: grid discretisation and spectral (HKPV) sampling on a window.
//! * [`harness`]: Monte Carlo CLT studies over a dilation schedule.
//!
//! Parallel loops go through [`parallel`], which falls back to sequential
//! execution when the `parallel` feature is disabled. Results never depend on
//! the number of worker threads.

pub mod cumulants;
pub mod envelopes;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod testfunctions;

mod ddouble;

pub use error::{Error, Result};
pub use kernels::{Kernel, PlanarPoint, Window};
pub use testfunctions::TestFunction;
