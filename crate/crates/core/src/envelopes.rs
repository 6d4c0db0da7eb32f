//! Envelopes `phi` with `|K(z, w)| <= phi(z - w)`, and numerical checks of
//! the size, uniform-integrability and interaction-decay conditions under
//! dilation `phi_rho(z) = rho phi(sqrt(rho) z)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{wh_ambiguity, Kernel, PlanarPoint, Window};
use crate::quadrature::{integrate_plane, GaussRule, PlaneIntegral};
use crate::stats::{ols_slope, CompensatedSum};

/// Relative size of the last annulus at which a plane integral is accepted.
pub const TAIL_TOLERANCE: f64 = 1e-12;
const MAX_DOUBLINGS: usize = 60;
const PANELS_PER_ANNULUS: usize = 8;
const PANEL_NODES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub enum Envelope {
    /// `(1/pi) exp(-|z|^2 / 2)`.
    GinibreGauss,
    /// `exp(-pi |z|^2 / 2)`.
    WhGaussian,
    /// Modulus of the Weyl–Heisenberg ambiguity integral of a window.
    Ambiguity(Window),
    Scaled { base: Box<Envelope>, c: f64 },
    Dilated { base: Box<Envelope>, rho: f64 },
    /// `amplitude (1 + |z|^2)^{-exponent / 2}`; heavy-tailed, for exercising
    /// the divergence reporting.
    PowerLaw { amplitude: f64, exponent: f64 },
}

/// The envelope of a kernel: the modulus `|K(z, w)|` as a function of `z - w`.
pub fn envelope_of(kernel: &Kernel) -> Result<Envelope> {
    match kernel {
        Kernel::Ginibre => Ok(Envelope::GinibreGauss),
        Kernel::WeylHeisenberg(Window::Gaussian) => Ok(Envelope::WhGaussian),
        Kernel::WeylHeisenberg(w) => Ok(Envelope::Ambiguity(w.clone())),
        Kernel::Scaled { base, c } => Ok(Envelope::Scaled {
            base: Box::new(envelope_of(base)?),
            c: *c,
        }),
        Kernel::Dilated { base, rho } => envelope_of(base)?.dilate(*rho),
        Kernel::Zero => Err(Error::Capability("the zero kernel has no envelope family".into())),
    }
}

/// Zeros of the Laguerre polynomial `L_n` on `(0, inf)`.
fn laguerre_zeros(n: u32) -> Vec<f64> {
    let l = |x: f64| {
        let (mut a, mut b) = (1.0, 1.0 - x);
        if n == 0 {
            return a;
        }
        for k in 1..n {
            let kf = k as f64;
            let c = ((2.0 * kf + 1.0 - x) * b - kf * a) / (kf + 1.0);
            a = b;
            b = c;
        }
        b
    };
    let hi = 4.0 * n as f64 + 10.0;
    let steps = 20_000;
    let mut zeros = Vec::new();
    let mut x0 = 0.0;
    let mut f0 = l(x0);
    for i in 1..=steps {
        let x1 = hi * i as f64 / steps as f64;
        let f1 = l(x1);
        if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = l(m);
                if fm * fa <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
                if b - a <= 4.0 * f64::EPSILON * b {
                    break;
                }
            }
            zeros.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    zeros
}

impl Envelope {
    pub fn phi(&self, z: PlanarPoint) -> f64 {
        match self {
            Envelope::GinibreGauss => (-z.norm_sqr() / 2.0).exp() / PI,
            Envelope::WhGaussian => (-PI * z.norm_sqr() / 2.0).exp(),
            Envelope::Ambiguity(w) => match wh_ambiguity(w, -z.re, -z.im) {
                Ok(c) => c.norm(),
                // beyond the table the window products vanish identically
                Err(Error::Domain(_)) => 0.0,
                Err(_) => f64::NAN,
            },
            Envelope::Scaled { base, c } => c * base.phi(z),
            Envelope::Dilated { base, rho } => rho * base.phi(z * rho.sqrt()),
            Envelope::PowerLaw {
                amplitude,
                exponent,
            } => amplitude * (1.0 + z.norm_sqr()).powf(-exponent / 2.0),
        }
    }

    /// `phi_rho`; dilations compose multiplicatively.
    pub fn dilate(&self, rho: f64) -> Result<Envelope> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Argument(format!("dilation rho = {rho} must be positive")));
        }
        Ok(match self {
            Envelope::Dilated { base, rho: r } => Envelope::Dilated {
                base: base.clone(),
                rho: r * rho,
            },
            other => Envelope::Dilated {
                base: Box::new(other.clone()),
                rho,
            },
        })
    }

    /// `(a, b)` with `phi(z) = a exp(-b |z|^2)`, when the envelope has that form.
    pub fn gaussian_profile(&self) -> Option<(f64, f64)> {
        match self {
            Envelope::GinibreGauss => Some((1.0 / PI, 0.5)),
            Envelope::WhGaussian => Some((1.0, PI / 2.0)),
            Envelope::Ambiguity(Window::Gaussian) => Some((1.0, PI / 2.0)),
            Envelope::Scaled { base, c } => base.gaussian_profile().map(|(a, b)| (c * a, b)),
            Envelope::Dilated { base, rho } => {
                base.gaussian_profile().map(|(a, b)| (rho * a, rho * b))
            }
            _ => None,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        self.gaussian_profile().is_some() || matches!(self, Envelope::PowerLaw { .. })
    }

    /// All shipped envelopes satisfy `phi(z) = phi(-z)`.
    pub fn is_symmetric(&self) -> bool {
        true
    }

    /// Whether `phi` depends on `|z|` only.
    pub fn is_radial(&self) -> bool {
        match self {
            Envelope::GinibreGauss | Envelope::WhGaussian | Envelope::PowerLaw { .. } => true,
            Envelope::Ambiguity(w) => matches!(w, Window::Gaussian | Window::Hermite(_)),
            Envelope::Scaled { base, .. } | Envelope::Dilated { base, .. } => base.is_radial(),
        }
    }

    /// Total dilation factor.
    pub fn rho(&self) -> f64 {
        match self {
            Envelope::Dilated { base, rho } => rho * base.rho(),
            Envelope::Scaled { base, .. } => base.rho(),
            _ => 1.0,
        }
    }

    /// Natural length scale, `1 / sqrt(rho)`.
    pub fn length_scale(&self) -> f64 {
        1.0 / self.rho().sqrt()
    }

    /// Radii where a radial envelope has a kink (zeros of the signed profile).
    fn kinks(&self) -> Vec<f64> {
        match self {
            Envelope::Ambiguity(Window::Hermite(n)) => laguerre_zeros(*n)
                .into_iter()
                .map(|x| (x / PI).sqrt())
                .collect(),
            Envelope::Scaled { base, .. } => base.kinks(),
            Envelope::Dilated { base, rho } => {
                let s = rho.sqrt();
                base.kinks().into_iter().map(|r| r / s).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Smallest radius beyond which `phi < rel * phi(0)`, found on a scan
    /// over rays.
    pub fn tail_radius(&self, rel: f64) -> f64 {
        if let Some((_, b)) = self.gaussian_profile() {
            return (rel.recip().ln() / b).sqrt();
        }
        match self {
            Envelope::Dilated { base, rho } => base.tail_radius(rel) / rho.sqrt(),
            Envelope::Scaled { base, .. } => base.tail_radius(rel),
            Envelope::PowerLaw { exponent, .. } => rel.powf(-1.0 / exponent),
            _ => {
                let phi0 = self.phi(PlanarPoint::default());
                let rays = if self.is_radial() { 1 } else { 16 };
                let step = 0.01;
                let mut last_above = 0.0;
                let mut r = step;
                while r < 50.0 {
                    for k in 0..rays {
                        let th = PI * k as f64 / rays as f64;
                        if self.phi(PlanarPoint::new(r * th.cos(), r * th.sin())) >= rel * phi0 {
                            last_above = r;
                        }
                    }
                    if r - last_above > 2.0 {
                        break;
                    }
                    r += step;
                }
                last_above + step
            }
        }
    }

    /// Smallest radius `m` with `∫_{|z| > m} phi < frac ∫ phi`, resolved to
    /// 1/400 of the reach of the envelope.
    pub fn mass_radius(&self, frac: f64) -> f64 {
        if let Some((_, b)) = self.gaussian_profile() {
            return (frac.recip().ln() / b).sqrt();
        }
        let reach = self.tail_radius(1e-14);
        let panels = 400;
        let rays = if self.is_radial() { 1 } else { 32 };
        let rule = GaussRule::legendre(8);
        let mut shells = Vec::with_capacity(panels);
        for i in 0..panels {
            let (a, b) = (reach * i as f64 / panels as f64, reach * (i + 1) as f64 / panels as f64);
            let v = rule.mapped(a, b).integrate(|r| {
                let avg = (0..rays)
                    .map(|k| {
                        let th = 2.0 * PI * (k as f64 + 0.5) / rays as f64;
                        self.phi(PlanarPoint::new(r * th.cos(), r * th.sin()))
                    })
                    .sum::<f64>()
                    / rays as f64;
                2.0 * PI * r * avg
            });
            shells.push(v);
        }
        let total: f64 = shells.iter().sum();
        let mut tail = total;
        for (i, v) in shells.iter().enumerate() {
            tail -= v;
            if tail < frac * total {
                return reach * (i + 1) as f64 / panels as f64;
            }
        }
        reach
    }

    /// `∫ |z|^p phi(z)^q dA`, integrated out to where the last annulus
    /// contributes less than [`TAIL_TOLERANCE`] of the total.
    pub fn moment(&self, p: f64, q: i32) -> PlaneIntegral {
        let r0 = self.length_scale();
        if self.is_radial() {
            let kinks = self.kinks();
            integrate_radial(
                |r| 2.0 * PI * r.powf(p + 1.0) * self.phi(PlanarPoint::new(r, 0.0)).powi(q),
                r0,
                &kinks,
            )
        } else {
            integrate_plane(
                |z| z.norm().powf(p) * self.phi(z).powi(q),
                PlanarPoint::default(),
                r0,
                TAIL_TOLERANCE,
                MAX_DOUBLINGS,
            )
        }
    }

    /// Second-moment matrix `∫ w w^T phi(w)^2 dA`.
    pub fn second_moment_matrix_sq(&self) -> Result<[[f64; 2]; 2]> {
        let diverged = || Error::Accuracy("second moment of phi^2 does not converge".into());
        if self.is_radial() {
            let m = self.moment(2.0, 2).value().ok_or_else(diverged)? / 2.0;
            return Ok([[m, 0.0], [0.0, m]]);
        }
        let r0 = self.length_scale();
        let comp = |g: &dyn Fn(PlanarPoint) -> f64| {
            integrate_plane(|z| g(z) * self.phi(z).powi(2), PlanarPoint::default(), r0, TAIL_TOLERANCE, MAX_DOUBLINGS)
                .value()
                .ok_or_else(diverged)
        };
        let xx = comp(&|z| z.re * z.re)?;
        let xy = comp(&|z| z.re * z.im)?;
        let yy = comp(&|z| z.im * z.im)?;
        Ok([[xx, xy], [xy, yy]])
    }

    /// `sup_z phi(z)`, by a grid search (rays for radial envelopes).
    pub fn sup(&self) -> f64 {
        let reach = self.tail_radius(1e-6);
        let mut best = self.phi(PlanarPoint::default());
        if self.is_radial() {
            let n = 4000;
            for i in 1..=n {
                best = best.max(self.phi(PlanarPoint::new(reach * i as f64 / n as f64, 0.0)));
            }
        } else {
            let n = 200;
            for i in -n..=n {
                for j in -n..=n {
                    let z = PlanarPoint::new(reach * i as f64 / n as f64, reach * j as f64 / n as f64);
                    best = best.max(self.phi(z));
                }
            }
        }
        best
    }
}

/// `∫_0^inf g(r) dr` over panels `[0, r0]`, `[r0, 2 r0]`, `[2 r0, 4 r0]`, ...,
/// each split at the given kinks and into equal sub-panels.
fn integrate_radial(g: impl Fn(f64) -> f64, r0: f64, kinks: &[f64]) -> PlaneIntegral {
    let rule = GaussRule::legendre(PANEL_NODES);
    let piece = |a: f64, b: f64| -> f64 {
        let mut cuts = vec![a];
        cuts.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
        cuts.push(b);
        let mut acc = CompensatedSum::default();
        for w in cuts.windows(2) {
            let h = (w[1] - w[0]) / PANELS_PER_ANNULUS as f64;
            for s in 0..PANELS_PER_ANNULUS {
                let lo = w[0] + s as f64 * h;
                acc.add(rule.mapped(lo, lo + h).integrate(&g));
            }
        }
        acc.value()
    };
    let mut total = piece(0.0, r0);
    let mut inner = r0;
    let mut last = f64::INFINITY;
    let mut growing = 0;
    for _ in 0..MAX_DOUBLINGS {
        let outer = 2.0 * inner;
        let part = piece(inner, outer);
        total += part;
        if !total.is_finite() {
            return PlaneIntegral::Diverged {
                partial: total,
                radius: outer,
            };
        }
        if part.abs() <= TAIL_TOLERANCE * total.abs() {
            return PlaneIntegral::Converged {
                value: total,
                radius: outer,
            };
        }
        if part.abs() >= last {
            growing += 1;
            if growing >= 6 {
                return PlaneIntegral::Diverged {
                    partial: total,
                    radius: outer,
                };
            }
        } else {
            growing = 0;
        }
        last = part.abs();
        inner = outer;
    }
    PlaneIntegral::Diverged {
        partial: total,
        radius: inner,
    }
}

/// Measured envelope quantities at one dilation. Non-convergent integrals
/// are reported as infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub rho: f64,
    /// `sup phi_rho / rho`.
    pub sup_over_rho: f64,
    /// `∫ phi_rho dA`.
    pub l1: f64,
    /// `rho ∫ |z|^3 phi_rho dA`.
    pub third_moment_scaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub reports: Vec<MomentReport>,
    /// Log-log slope of `third_moment_scaled` against `rho`.
    pub fitted_slope: f64,
    /// `sup phi_rho / rho` finite and the same for every `rho`.
    pub size_ok: bool,
    /// `∫ phi_rho` finite and the same for every `rho` (relative 1e-8).
    pub integrability_ok: bool,
    /// `rho ∫ |z|^3 phi_rho` finite and strictly decreasing in `rho`.
    pub decay_ok: bool,
}

impl AxiomReport {
    pub fn all_ok(&self) -> bool {
        self.size_ok && self.integrability_ok && self.decay_ok
    }
}

/// Moment checks for the dilations of the envelope of `kernel`.
pub fn check_envelope_axioms(kernel: &Kernel, rhos: &[f64]) -> Result<AxiomReport> {
    check_axioms_for(&envelope_of(kernel)?, rhos)
}

pub fn check_axioms_for(envelope: &Envelope, rhos: &[f64]) -> Result<AxiomReport> {
    if rhos.is_empty() {
        return Err(Error::Argument("empty rho schedule".into()));
    }
    if rhos.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::Argument("rho values must be positive".into()));
    }
    if rhos.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("rho values must be strictly ascending".into()));
    }
    let reports: Vec<MomentReport> = crate::parallel::try_map_indexed(rhos.len(), |i| {
        let rho = rhos[i];
        let env = envelope.dilate(rho)?;
        let finite = |p: PlaneIntegral| p.value().unwrap_or(f64::INFINITY);
        Ok::<_, Error>(MomentReport {
            rho,
            sup_over_rho: env.sup() / rho,
            l1: finite(env.moment(0.0, 1)),
            third_moment_scaled: rho * finite(env.moment(3.0, 1)),
        })
    })?;

    let spread = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (slo, shi) = spread(&mut reports.iter().map(|r| r.sup_over_rho));
    let (llo, lhi) = spread(&mut reports.iter().map(|r| r.l1));
    let size_ok = shi.is_finite() && shi - slo <= 1e-8 * shi.abs().max(f64::MIN_POSITIVE);
    let integrability_ok = lhi.is_finite() && lhi - llo <= 1e-8 * lhi.abs();
    let decay_ok = reports.iter().all(|r| r.third_moment_scaled.is_finite())
        && reports
            .windows(2)
            .all(|w| w[1].third_moment_scaled < w[0].third_moment_scaled);
    let fitted_slope = if reports.len() >= 2 {
        let xs: Vec<f64> = reports.iter().map(|r| r.rho.ln()).collect();
        let ys: Vec<f64> = reports.iter().map(|r| r.third_moment_scaled.ln()).collect();
        ols_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(AxiomReport {
        reports,
        fitted_slope,
        size_ok,
        integrability_ok,
        decay_ok,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub z: PlanarPoint,
    pub w: PlanarPoint,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub trials: usize,
    /// Largest `|K(z, w)| / phi(z - w)` observed.
    pub max_ratio: f64,
    pub violations: Vec<Violation>,
}

impl DominationReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples pairs in `[-8, 8]^2` and compares `|K(z, w)|` with `phi(z - w)`.
pub fn verify_domination(
    kernel: &Kernel,
    envelope: &Envelope,
    trials: usize,
    seed: u64,
) -> Result<DominationReport> {
    use rand::Rng;
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let mut rng = crate::rng::stream(seed, 0);
    let pairs: Vec<(PlanarPoint, PlanarPoint)> = (0..trials)
        .map(|_| {
            let mut p = || PlanarPoint::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
            (p(), p())
        })
        .collect();
    let ratios = crate::parallel::try_map_indexed(trials, |i| {
        let (z, w) = pairs[i];
        let k = kernel.eval(z, w)?.norm();
        let phi = envelope.phi(z - w);
        Ok::<_, Error>(if k == 0.0 {
            0.0
        } else if phi > 0.0 {
            k / phi
        } else {
            f64::INFINITY
        })
    })?;
    let mut max_ratio: f64 = 0.0;
    let mut violations = Vec::new();
    for (i, &r) in ratios.iter().enumerate() {
        max_ratio = max_ratio.max(r);
        if !(r <= 1.0 + 1e-9) {
            violations.push(Violation {
                z: pairs[i].0,
                w: pairs[i].1,
                ratio: r,
            });
        }
    }
    Ok(DominationReport {
        trials,
        max_ratio,
        violations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproducingMoments {
    pub phi0: f64,
    pub l2sq: f64,
    /// `phi(0) - ∫ phi^2`: zero for reproducing kernels, positive otherwise.
    pub residual: f64,
}

/// Compares the diagonal `phi(0)` with `∫ phi^2 dA`.
pub fn reproducing_moment_identity(envelope: &Envelope) -> Result<ReproducingMoments> {
    let phi0 = envelope.phi(PlanarPoint::default());
    let l2sq = envelope
        .moment(0.0, 2)
        .value()
        .ok_or_else(|| Error::Accuracy("envelope is not square integrable".into()))?;
    Ok(ReproducingMoments {
        phi0,
        l2sq,
        residual: phi0 - l2sq,
    })
}

/// `|K|^2` integrated against a point: `∫ |K(z, w)|^2 dA(w)`, used to cross
/// check the envelope-based identities without assuming translation invariance.
pub fn kernel_l2sq_at(kernel: &Kernel, z: PlanarPoint, radius: f64) -> Result<f64> {
    let rule = crate::quadrature::PlanarRule::disk(z, radius, 96, 128);
    let mut acc = CompensatedSum::default();
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let k: Complex64 = kernel.eval(z, *p)?;
        acc.add(w * k.norm_sqr());
    }
    Ok(acc.value())
}
