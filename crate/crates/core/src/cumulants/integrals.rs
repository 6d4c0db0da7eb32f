//! Deterministic quadrature for the mean, variance and limit predictions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::envelopes::envelope_of;
use crate::error::{Error, Result};
use crate::kernels::{Kernel, PlanarPoint};
use crate::quadrature::PlanarRule;
use crate::stats::CompensatedSum;
use crate::testfunctions::TestFunction;

/// `K(z_1, z_2) K(z_2, z_3) .. K(z_k, z_1)`; the diagonal for one point.
pub fn cyclic_product(kernel: &Kernel, points: &[PlanarPoint]) -> Result<Complex64> {
    if points.is_empty() {
        return Err(Error::Argument("cyclic product needs at least one point".into()));
    }
    let k = points.len();
    let mut acc = Complex64::new(1.0, 0.0);
    for i in 0..k {
        acc *= kernel.eval(points[i], points[(i + 1) % k])?;
    }
    Ok(acc)
}

/// Polar rule on the support disk of `f`, with the radius split into panels.
fn support_rule(f: &TestFunction, panels: usize, n_r: usize, n_theta: usize) -> PlanarRule {
    let r = f.support_radius();
    let p: Vec<(f64, f64, usize)> = (0..panels)
        .map(|i| (r * i as f64 / panels as f64, r * (i + 1) as f64 / panels as f64, n_r))
        .collect();
    PlanarRule::disk_panels(PlanarPoint::default(), &p, n_theta)
}

/// `E[Tr(f)] = ∫ f(z) K(z, z) dA(z)`.
pub fn expectation(kernel: &Kernel, f: &TestFunction) -> Result<f64> {
    let rule = support_rule(f, 2, 24, 64);
    let mut acc = CompensatedSum::default();
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        acc.add(w * f.value(*p) * kernel.diagonal(*p)?);
    }
    Ok(acc.value())
}

/// `∫ |f(z)| K(z, z) dA(z)`.
pub fn expectation_abs(kernel: &Kernel, f: &TestFunction) -> Result<f64> {
    // |f| has a kink along Re z = 0 for the tilted bump; a fine angular rule keeps it accurate
    let rule = support_rule(f, 2, 24, 2048);
    let mut acc = CompensatedSum::default();
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        acc.add(w * f.value(*p).abs() * kernel.diagonal(*p)?);
    }
    Ok(acc.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VarianceQuadrature {
    /// The variance: `half_form` for reproducing kernels, `general_form` otherwise.
    pub value: f64,
    /// `½ ∬ (f(z) - f(w))^2 |K(z, w)|^2`, evaluated as
    /// `∫ f(z) ∫ (f(z) - f(w)) |K(z, w)|^2 dA(w) dA(z)` (equal by `z <-> w` symmetry).
    pub half_form: f64,
    /// `∫ f^2 K(z, z) - ∬ f(z) f(w) |K(z, w)|^2`, valid for any kernel.
    pub general_form: f64,
    /// `∫ f^2 (K(z, z) - ∫ |K(z, w)|^2 dA(w))`; zero for reproducing kernels.
    pub diagonal_deficit: f64,
    /// Radius of the `w - z` disk.
    pub cutoff: f64,
}

/// `Var[Tr(f)]` by four-dimensional quadrature. The inner integral runs over
/// `|w - z| <= cutoff`, where the envelope has dropped below `1e-10` of `phi(0)`
/// in squared terms.
pub fn variance_quadrature(kernel: &Kernel, f: &TestFunction) -> Result<VarianceQuadrature> {
    let env = envelope_of(kernel)?;
    let cutoff = env.tail_radius(1e-5) * 1.5;
    let outer = support_rule(f, 2, 24, 64);
    // inner rule around the origin; Gauss–Legendre in |u| split into panels
    let panels: Vec<(f64, f64, usize)> = (0..8)
        .map(|i| (cutoff * i as f64 / 8.0, cutoff * (i + 1) as f64 / 8.0, 12))
        .collect();
    let inner = PlanarRule::disk_panels(PlanarPoint::default(), &panels, 48);

    let per_point = crate::parallel::try_map_indexed(outer.len(), |i| {
        let z = outer.points[i];
        let fz = f.value(z);
        let mut diff = CompensatedSum::default();
        let mut mass = CompensatedSum::default();
        let mut cross = CompensatedSum::default();
        for (u, wu) in inner.points.iter().zip(&inner.weights) {
            let w = z + *u;
            let k2 = kernel.eval(z, w)?.norm_sqr();
            let fw = f.value(w);
            diff.add(wu * (fz - fw) * k2);
            mass.add(wu * k2);
            cross.add(wu * fw * k2);
        }
        let diag = kernel.diagonal(z)?;
        let wz = outer.weights[i];
        Ok::<_, Error>([
            wz * fz * diff.value(),
            wz * fz * fz * (diag - mass.value()),
            wz * (fz * fz * diag - fz * cross.value()),
        ])
    })?;
    let sum = |j: usize| per_point.iter().map(|v| v[j]).collect::<CompensatedSum>().value();
    let half_form = sum(0);
    let diagonal_deficit = sum(1);
    let general_form = sum(2);
    Ok(VarianceQuadrature {
        value: if kernel.is_reproducing() {
            half_form
        } else {
            general_form
        },
        half_form,
        general_form,
        diagonal_deficit,
        cutoff,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitPredictions {
    /// `phi(0) ∫ f dA`.
    pub mu_f: f64,
    /// `½ ∬ (∇f(z) · w)^2 phi(w)^2 dA(w) dA(z)`.
    pub sigma2_f: f64,
}

/// Limits of `(E[Tr_rho f] - rho mu_f)` and `Var[Tr_rho f]` for kernels whose
/// modulus is translation invariant. Dilation of the input is ignored.
pub fn limit_predictions(kernel: &Kernel, f: &TestFunction) -> Result<LimitPredictions> {
    let base = kernel.undilated();
    if !base.has_translation_invariant_modulus() {
        return Err(Error::Capability(format!(
            "limit predictions need a translation-invariant modulus, got {base}"
        )));
    }
    let env = envelope_of(base)?;
    let m = env.second_moment_matrix_sq()?;
    // ∫ ∂_i f ∂_j f dA; the integrands are polynomials on the disk
    let rule = support_rule(f, 1, 16, 48);
    let mut g = [[CompensatedSum::default(), CompensatedSum::default()], [CompensatedSum::default(), CompensatedSum::default()]];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let (gx, gy) = f.gradient(*p);
        let d = [gx, gy];
        for i in 0..2 {
            for j in 0..2 {
                g[i][j].add(w * d[i] * d[j]);
            }
        }
    }
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += g[i][j].value() * m[i][j];
        }
    }
    Ok(LimitPredictions {
        mu_f: env.phi(PlanarPoint::default()) * f.integral(),
        sigma2_f: 0.5 * s,
    })
}

/// `(c (1 - c) / pi) ∫ f^2`: the rate of growth of the variance of scaled
/// Ginibre kernels `c K`, `Var / rho -> c (1 - c) phi(0) ∫ f^2`.
pub fn nonreproducing_rate(c: f64, f: &TestFunction) -> f64 {
    c * (1.0 - c) / PI * f.integral_sq()
}
