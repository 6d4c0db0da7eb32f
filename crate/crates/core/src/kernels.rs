//! Correlation kernels on the plane.
//!
//! Three families are provided, all Hermitian:
//!
//! * the Ginibre kernel `(1/pi) exp(z conj(w) - |z|^2/2 - |w|^2/2)`;
//! * Weyl–Heisenberg kernels built from time–frequency shifts of a window
//!   `g` on the real line, `K(z, w) = ∫ conj(g(t - x1)) g(t - x2) e^{2 pi i t (y2 - y1)} dt`;
//! * `c * K` for a base kernel `K` (not reproducing when `c < 1`).
//!
//! Any of them can be dilated, `K_rho(z, w) = rho K(sqrt(rho) z, sqrt(rho) w)`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

/// A point of the complex plane, `re + i im`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub re: f64,
    pub im: f64,
}

impl PlanarPoint {
    pub const fn new(re: f64, im: f64) -> Self {
        PlanarPoint { re, im }
    }

    /// Rejects NaN and infinite coordinates.
    pub fn try_new(re: f64, im: f64) -> Result<Self> {
        let p = PlanarPoint { re, im };
        p.check()?;
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("non-finite point ({}, {})", self.re, self.im)))
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn from_complex(z: Complex64) -> Self {
        PlanarPoint::new(z.re, z.im)
    }

    pub fn scale(self, s: f64) -> Self {
        PlanarPoint::new(self.re * s, self.im * s)
    }
}

impl Add for PlanarPoint {
    type Output = PlanarPoint;
    fn add(self, o: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for PlanarPoint {
    type Output = PlanarPoint;
    fn sub(self, o: PlanarPoint) -> PlanarPoint {
        PlanarPoint::new(self.re - o.re, self.im - o.im)
    }
}

impl Neg for PlanarPoint {
    type Output = PlanarPoint;
    fn neg(self) -> PlanarPoint {
        PlanarPoint::new(-self.re, -self.im)
    }
}

impl Mul<f64> for PlanarPoint {
    type Output = PlanarPoint;
    fn mul(self, s: f64) -> PlanarPoint {
        self.scale(s)
    }
}

/// Highest Hermite window order accepted.
pub const MAX_HERMITE_ORDER: u32 = 12;

const GH_BASE_ORDER: usize = 64;
const QUADRATURE_AGREEMENT: f64 = 1e-8;

/// A real window function on the line, normalised in `L^2(R)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Window {
    /// `2^{1/4} exp(-pi t^2)`.
    Gaussian,
    /// The Hermite function of order `n` in the same scaling as [`Window::Gaussian`].
    Hermite(u32),
    Tabulated(TabulatedWindow),
}

/// A window given by samples on a uniform grid, interpolated with
/// Catmull–Rom cubics and taken as zero outside the table.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedWindow {
    samples: Vec<f64>,
    step: f64,
    start: f64,
}

impl TabulatedWindow {
    /// `samples[i] = g(start + i * step)`.
    pub fn new(samples: Vec<f64>, step: f64, start: f64) -> Result<Self> {
        if samples.len() < 4 {
            return Err(Error::Argument("tabulated window needs at least 4 samples".into()));
        }
        if !(step > 0.0 && step.is_finite()) || !start.is_finite() {
            return Err(Error::Argument("tabulated window needs a positive finite step".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Argument("tabulated window samples must be finite".into()));
        }
        Ok(TabulatedWindow {
            samples,
            step,
            start,
        })
    }

    /// Samples `g` on `[-half_span, half_span]` with the given step.
    pub fn from_fn(g: impl Fn(f64) -> f64, half_span: f64, step: f64) -> Result<Self> {
        let m = (half_span / step).ceil() as i64;
        let samples = (-m..=m).map(|i| g(i as f64 * step)).collect();
        TabulatedWindow::new(samples, step, -(m as f64) * step)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn span(&self) -> (f64, f64) {
        (self.start, self.start + (self.samples.len() - 1) as f64 * self.step)
    }

    pub fn value(&self, t: f64) -> f64 {
        let u = (t - self.start) / self.step;
        let last = (self.samples.len() - 1) as f64;
        if !(0.0..=last).contains(&u) {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.samples.len() - 2);
        let s = u - i as f64;
        let at = |j: isize| -> f64 {
            if j < 0 || j as usize >= self.samples.len() {
                0.0
            } else {
                self.samples[j as usize]
            }
        };
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        0.5 * (2.0 * p1
            + (-p0 + p2) * s
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s * s
            + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s * s * s)
    }
}

/// Physicists' Hermite polynomial `H_n` at a complex argument.
fn hermite_poly(n: u32, x: Complex64) -> Complex64 {
    let mut h0 = Complex64::new(1.0, 0.0);
    if n == 0 {
        return h0;
    }
    let mut h1 = x * 2.0;
    for k in 1..n {
        let h2 = x * h1 * 2.0 - h0 * (2.0 * k as f64);
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Squared normalisation `c_n^2 = sqrt(2) / (2^n n!)` of the Hermite window.
fn hermite_norm_sq(n: u32) -> f64 {
    let mut c = std::f64::consts::SQRT_2;
    for k in 1..=n {
        c /= 2.0 * k as f64;
    }
    c
}

impl Window {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Window::Gaussian => 2f64.powf(0.25) * (-PI * t * t).exp(),
            Window::Hermite(n) => {
                let a = (2.0 * PI).sqrt();
                hermite_norm_sq(*n).sqrt()
                    * hermite_poly(*n, Complex64::new(a * t, 0.0)).re
                    * (-PI * t * t).exp()
            }
            Window::Tabulated(tab) => tab.value(t),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Window::Gaussian => "gaussian".into(),
            Window::Hermite(n) => format!("hermite:{n}"),
            Window::Tabulated(t) => format!("tabulated:{}:{}", t.samples.len(), t.step),
        }
    }
}

/// The `L^2(R)`-normalised Hermite window of order `n`; order 0 is the
/// Gaussian window. The normalisation is verified by Gauss–Hermite quadrature.
pub fn hermite_window(n: u32) -> Result<Window> {
    if n > MAX_HERMITE_ORDER {
        return Err(Error::Argument(format!(
            "Hermite window order {n} exceeds {MAX_HERMITE_ORDER}"
        )));
    }
    let norm = window_norm_sq(&Window::Hermite(n));
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Accuracy(format!(
            "Hermite window {n} has squared norm {norm}"
        )));
    }
    Ok(if n == 0 {
        Window::Gaussian
    } else {
        Window::Hermite(n)
    })
}

/// `∫ |g|^2 dt`, by Gauss–Hermite quadrature for the analytic windows and by
/// the trapezoidal rule on the table otherwise.
pub fn window_norm_sq(window: &Window) -> f64 {
    match window {
        Window::Gaussian | Window::Hermite(_) => {
            let n = match window {
                Window::Hermite(n) => *n,
                _ => 0,
            };
            let a = (2.0 * PI).sqrt();
            let rule = GaussRule::hermite(GH_BASE_ORDER);
            let c2 = hermite_norm_sq(n);
            rule.integrate(|x| c2 * hermite_poly(n, Complex64::new(x, 0.0)).re.powi(2)) / a
        }
        Window::Tabulated(t) => t.samples.iter().map(|s| s * s).sum::<f64>() * t.step,
    }
}

/// The Weyl–Heisenberg integral with the phase `exp(2 pi i eta m)` stripped,
/// where `dx = x2 - x1`, `eta = y2 - y1` and `m = (x1 + x2) / 2`.
///
/// Its modulus is `|K(z, w)|` and depends only on `w - z`.
pub fn wh_ambiguity(window: &Window, dx: f64, eta: f64) -> Result<Complex64> {
    match window {
        Window::Gaussian => Ok(Complex64::new((-PI * (dx * dx + eta * eta) / 2.0).exp(), 0.0)),
        Window::Hermite(n) => {
            let coarse = wh_hermite_core(*n, dx, eta, GH_BASE_ORDER);
            let mut order = 2 * GH_BASE_ORDER;
            let mut fine = wh_hermite_core(*n, dx, eta, order);
            let mut prev = coarse;
            while (fine - prev).norm() > QUADRATURE_AGREEMENT {
                if order >= 8 * GH_BASE_ORDER {
                    return Err(Error::Accuracy(format!(
                        "Weyl-Heisenberg quadrature at ({dx}, {eta}) disagrees by {}",
                        (fine - prev).norm()
                    )));
                }
                order *= 2;
                prev = fine;
                fine = wh_hermite_core(*n, dx, eta, order);
            }
            Ok(fine)
        }
        Window::Tabulated(tab) => wh_tabulated_core(tab, dx, eta),
    }
}

/// Hermite window: completing the square moves the oscillation into a
/// complex shift of the Gaussian weight, after which the integrand is a
/// polynomial of degree `2n` against `exp(-2 pi s^2)`. Gauss–Hermite with
/// `order > n` nodes is then exact.
fn wh_hermite_core(n: u32, dx: f64, eta: f64, order: usize) -> Complex64 {
    let a = (2.0 * PI).sqrt();
    let rule = hermite_rule(order);
    let prefactor = (-PI * (dx * dx + eta * eta) / 2.0).exp();
    // t - x1 = s + dx/2 + i eta/2,  t - x2 = s - dx/2 + i eta/2
    let shift1 = Complex64::new(a * dx / 2.0, a * eta / 2.0);
    let shift2 = Complex64::new(-a * dx / 2.0, a * eta / 2.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let xc = Complex64::new(x, 0.0);
        acc += hermite_poly(n, xc + shift1) * hermite_poly(n, xc + shift2) * w;
    }
    acc * (hermite_norm_sq(n) * prefactor / a)
}

fn hermite_rule(order: usize) -> std::sync::Arc<GaussRule> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("hermite rule cache poisoned");
    guard
        .entry(order)
        .or_insert_with(|| Arc::new(GaussRule::hermite(order)))
        .clone()
}

/// Tabulated window: trapezoidal rule on the table grid centred at the
/// midpoint `m`, i.e. `∫ g(s + d) g(s - d) e^{2 pi i eta s} ds` with
/// `d = dx / 2`. The node set is symmetric, so swapping `z` and `w` yields
/// the exact complex conjugate.
fn wh_tabulated_core(tab: &TabulatedWindow, dx: f64, eta: f64) -> Result<Complex64> {
    let (lo, hi) = tab.span();
    if dx.abs() > hi - lo {
        return Err(Error::Domain(format!(
            "|x2 - x1| = {} exceeds the tabulated window span {}",
            dx.abs(),
            hi - lo
        )));
    }
    let d = dx / 2.0;
    let reach = lo.abs().max(hi.abs()) + d.abs();
    let m = (reach / tab.step).ceil() as i64;
    let sum_with_stride = |stride: i64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut i = -(m - m.rem_euclid(stride));
        while i <= m {
            let s = i as f64 * tab.step;
            let g = tab.value(s + d) * tab.value(s - d);
            if g != 0.0 {
                acc += Complex64::from_polar(g, 2.0 * PI * eta * s);
            }
            i += stride;
        }
        acc * (tab.step * stride as f64)
    };
    let fine = sum_with_stride(1);
    let coarse = sum_with_stride(2);
    if (fine - coarse).norm() > QUADRATURE_AGREEMENT {
        return Err(Error::Accuracy(format!(
            "trapezoidal Weyl-Heisenberg integral at ({dx}, {eta}) changes by {} under refinement",
            (fine - coarse).norm()
        )));
    }
    Ok(fine)
}

/// A planar correlation kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// The identically zero kernel (empty process).
    Zero,
    Ginibre,
    WeylHeisenberg(Window),
    Scaled { base: Box<Kernel>, c: f64 },
    Dilated { base: Box<Kernel>, rho: f64 },
}

impl Kernel {
    pub fn ginibre() -> Kernel {
        Kernel::Ginibre
    }

    pub fn weyl_heisenberg(window: Window) -> Kernel {
        Kernel::WeylHeisenberg(window)
    }

    /// `c * base` with `0 < c <= 1`.
    pub fn scaled(base: Kernel, c: f64) -> Result<Kernel> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::Argument(format!("scale c = {c} must lie in (0, 1]")));
        }
        Ok(Kernel::Scaled {
            base: Box::new(base),
            c,
        })
    }

    /// `rho K(sqrt(rho) z, sqrt(rho) w)`. Dilations compose multiplicatively.
    pub fn dilate(&self, rho: f64) -> Result<Kernel> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Argument(format!("dilation rho = {rho} must be positive")));
        }
        Ok(match self {
            Kernel::Dilated { base, rho: r } => Kernel::Dilated {
                base: base.clone(),
                rho: r * rho,
            },
            other => Kernel::Dilated {
                base: Box::new(other.clone()),
                rho,
            },
        })
    }

    pub fn eval(&self, z: PlanarPoint, w: PlanarPoint) -> Result<Complex64> {
        z.check()?;
        w.check()?;
        self.eval_unchecked(z, w)
    }

    fn eval_unchecked(&self, z: PlanarPoint, w: PlanarPoint) -> Result<Complex64> {
        match self {
            Kernel::Zero => Ok(Complex64::new(0.0, 0.0)),
            Kernel::Ginibre => {
                // z conj(w) - |z|^2/2 - |w|^2/2 = -|z - w|^2/2 + i Im(z conj(w))
                let dre = z.re - w.re;
                let dim = z.im - w.im;
                let modulus = (-(dre * dre + dim * dim) / 2.0).exp() / PI;
                let phase = z.im * w.re - z.re * w.im;
                Ok(Complex64::from_polar(modulus, phase))
            }
            Kernel::WeylHeisenberg(window) => {
                let dx = w.re - z.re;
                let eta = w.im - z.im;
                let m = 0.5 * (z.re + w.re);
                let core = wh_ambiguity(window, dx, eta)?;
                Ok(core * Complex64::from_polar(1.0, 2.0 * PI * eta * m))
            }
            Kernel::Scaled { base, c } => Ok(base.eval_unchecked(z, w)? * *c),
            Kernel::Dilated { base, rho } => {
                let s = rho.sqrt();
                Ok(base.eval_unchecked(z * s, w * s)? * *rho)
            }
        }
    }

    /// `K(z, z)`, real and nonnegative.
    pub fn diagonal(&self, z: PlanarPoint) -> Result<f64> {
        Ok(self.eval(z, z)?.re)
    }

    /// Whether the kernel is claimed to be reproducing (a projection kernel).
    pub fn is_reproducing(&self) -> bool {
        match self {
            Kernel::Zero | Kernel::Ginibre | Kernel::WeylHeisenberg(_) => true,
            Kernel::Scaled { base, c } => *c >= 1.0 && base.is_reproducing(),
            Kernel::Dilated { base, .. } => base.is_reproducing(),
        }
    }

    /// Whether `|K(z, w)|` depends on `z - w` only.
    pub fn has_translation_invariant_modulus(&self) -> bool {
        match self {
            Kernel::Zero | Kernel::Ginibre | Kernel::WeylHeisenberg(_) => true,
            Kernel::Scaled { base, .. } | Kernel::Dilated { base, .. } => {
                base.has_translation_invariant_modulus()
            }
        }
    }

    /// Total dilation factor (1 for undilated kernels).
    pub fn rho(&self) -> f64 {
        match self {
            Kernel::Dilated { base, rho } => rho * base.rho(),
            Kernel::Scaled { base, .. } => base.rho(),
            _ => 1.0,
        }
    }

    /// The kernel with outer dilations removed.
    pub fn undilated(&self) -> &Kernel {
        match self {
            Kernel::Dilated { base, .. } => base.undilated(),
            other => other,
        }
    }

    /// Identifier in the configuration grammar (dilation excluded).
    pub fn id(&self) -> String {
        match self {
            Kernel::Zero => "zero".into(),
            Kernel::Ginibre => "ginibre".into(),
            Kernel::WeylHeisenberg(w) => format!("wh:{}", w.id()),
            Kernel::Scaled { base, c } => format!("scaled:{c}:{}", base.id()),
            Kernel::Dilated { base, .. } => base.id(),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Dilated { base, rho } => write!(f, "{base}@rho={rho}"),
            other => f.write_str(&other.id()),
        }
    }
}

/// Parses `ginibre | wh:gaussian | wh:hermite:<n> | scaled:<c>:<base> | zero`.
impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Kernel> {
        let s = s.trim();
        let bad = || Error::Argument(format!("unrecognised kernel '{s}'"));
        match s {
            "ginibre" => return Ok(Kernel::Ginibre),
            "zero" => return Ok(Kernel::Zero),
            "wh:gaussian" => return Ok(Kernel::WeylHeisenberg(Window::Gaussian)),
            _ => {}
        }
        if let Some(order) = s.strip_prefix("wh:hermite:") {
            let n: u32 = order.parse().map_err(|_| bad())?;
            return Ok(Kernel::WeylHeisenberg(hermite_window(n)?));
        }
        if let Some(rest) = s.strip_prefix("scaled:") {
            let (c, base) = rest.split_once(':').ok_or_else(bad)?;
            let c: f64 = c.parse().map_err(|_| bad())?;
            return Kernel::scaled(base.parse()?, c);
        }
        Err(bad())
    }
}

/// `∫ K(z, u) K(u, w) dA(u) - K(z, w)` over the disk of radius `radius`
/// about the midpoint of `z` and `w`: zero for reproducing kernels and
/// `(c^2 - c) K(z, w)` for `c K` with `K` reproducing.
pub fn reproducing_residual(kernel: &Kernel, z: PlanarPoint, w: PlanarPoint, radius: f64) -> Result<Complex64> {
    z.check()?;
    w.check()?;
    let mid = (z + w) * 0.5;
    let panels: Vec<(f64, f64, usize)> = (0..16)
        .map(|i| (radius * i as f64 / 16.0, radius * (i + 1) as f64 / 16.0, 16))
        .collect();
    let rule = crate::quadrature::PlanarRule::disk_panels(mid, &panels, 256);
    let (mut re, mut im) = (crate::stats::CompensatedSum::default(), crate::stats::CompensatedSum::default());
    for (u, wt) in rule.points.iter().zip(&rule.weights) {
        let v = kernel.eval(z, *u)? * kernel.eval(*u, w)? * *wt;
        re.add(v.re);
        im.add(v.im);
    }
    Ok(Complex64::new(re.value(), im.value()) - kernel.eval(z, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_point(rng: &mut impl Rng, half: f64) -> PlanarPoint {
        PlanarPoint::new(rng.random_range(-half..half), rng.random_range(-half..half))
    }

    #[test]
    fn ginibre_values() {
        let k = Kernel::ginibre();
        let o = PlanarPoint::default();
        let v = k.eval(o, o).unwrap();
        assert!((v.re - 1.0 / PI).abs() < 1e-16 && v.im == 0.0);
        let z = PlanarPoint::new(1.3, -0.7);
        assert!((k.diagonal(z).unwrap() - 1.0 / PI).abs() < 1e-15);
        // oracle: e^{-1/2} / pi = 0.19306470705289372...
        let v = k.eval(PlanarPoint::new(1.0, 0.0), o).unwrap();
        assert!((v.norm() - 0.193_064_705_260_107_82).abs() < 1e-15);
    }

    #[test]
    fn ginibre_matches_direct_complex_formula() {
        let k = Kernel::ginibre();
        let mut rng = crate::rng::stream(11, 0);
        for _ in 0..100 {
            let z = random_point(&mut rng, 3.0);
            let w = random_point(&mut rng, 3.0);
            let (zc, wc) = (z.to_complex(), w.to_complex());
            let direct = (zc * wc.conj() - z.norm_sqr() / 2.0 - w.norm_sqr() / 2.0).exp() / PI;
            assert!((k.eval(z, w).unwrap() - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn wh_gaussian_modulus_at_unit_distance() {
        let k = Kernel::weyl_heisenberg(Window::Gaussian);
        let v = k
            .eval(PlanarPoint::new(0.2, 0.5), PlanarPoint::new(0.8, 1.3))
            .unwrap();
        assert!((v.norm() - (-PI / 2.0).exp()).abs() < 1e-15);
        assert!((k.diagonal(PlanarPoint::new(3.0, -1.0)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wh_gaussian_closed_form_matches_hermite_zero_quadrature() {
        let closed = Kernel::weyl_heisenberg(Window::Gaussian);
        let quad = Kernel::weyl_heisenberg(Window::Hermite(0));
        let mut rng = crate::rng::stream(12, 0);
        for _ in 0..200 {
            let z = random_point(&mut rng, 3.0);
            let w = random_point(&mut rng, 3.0);
            let d = (closed.eval(z, w).unwrap() - quad.eval(z, w).unwrap()).norm();
            assert!(d < 1e-12, "difference {d}");
        }
    }

    #[test]
    fn wh_gaussian_matches_real_line_quadrature() {
        // brute force: trapezoid in t of the defining integral
        let (z, w) = (PlanarPoint::new(0.3, -0.4), PlanarPoint::new(-0.2, 0.5));
        let g = |t: f64| Window::Gaussian.value(t);
        let dt = 1e-3;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in -8000..=8000 {
            let t = i as f64 * dt;
            acc += Complex64::from_polar(g(t - z.re) * g(t - w.re), 2.0 * PI * t * (w.im - z.im)) * dt;
        }
        let k = Kernel::weyl_heisenberg(Window::Gaussian).eval(z, w).unwrap();
        assert!((acc - k).norm() < 1e-12);
    }

    #[test]
    fn wh_hermite_matches_real_line_quadrature_and_laguerre_modulus() {
        let win = hermite_window(3).unwrap();
        let (z, w) = (PlanarPoint::new(0.4, 0.1), PlanarPoint::new(-0.3, 0.6));
        let dt = 1e-3;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in -8000..=8000 {
            let t = i as f64 * dt;
            acc += Complex64::from_polar(
                win.value(t - z.re) * win.value(t - w.re),
                2.0 * PI * t * (w.im - z.im),
            ) * dt;
        }
        let k = Kernel::weyl_heisenberg(win).eval(z, w).unwrap();
        assert!((acc - k).norm() < 1e-11);
        // modulus is exp(-x/2) |L_3(x)| with x = pi |z - w|^2
        let x = PI * (z - w).norm_sqr();
        let l3 = 1.0 - 3.0 * x + 1.5 * x * x - x * x * x / 6.0;
        assert!((k.norm() - (-x / 2.0).exp() * l3.abs()).abs() < 1e-13);
    }

    #[test]
    fn hermite_window_contract() {
        assert_eq!(hermite_window(0).unwrap(), Window::Gaussian);
        let h1 = hermite_window(1).unwrap();
        assert_eq!(h1.value(0.0), 0.0);
        let h3 = hermite_window(3).unwrap();
        assert!((window_norm_sq(&h3) - 1.0).abs() < 1e-10);
        assert!(hermite_window(12).is_ok());
        assert!(matches!(hermite_window(13), Err(Error::Argument(_))));
    }

    #[test]
    fn hermite_norm_by_independent_trapezoid() {
        for n in [1, 3, 7, 12] {
            let win = Window::Hermite(n);
            let dt = 1e-3;
            let s: f64 = (-10000..=10000).map(|i| win.value(i as f64 * dt).powi(2)).sum::<f64>() * dt;
            assert!((s - 1.0).abs() < 1e-10, "order {n}: {s}");
        }
    }

    #[test]
    fn tabulated_gaussian_window_tracks_closed_form() {
        let tab = TabulatedWindow::from_fn(|t| Window::Gaussian.value(t), 4.0, 0.005).unwrap();
        let k_tab = Kernel::weyl_heisenberg(Window::Tabulated(tab));
        let k = Kernel::weyl_heisenberg(Window::Gaussian);
        let (z, w) = (PlanarPoint::new(0.1, 0.2), PlanarPoint::new(0.6, -0.3));
        let d = (k_tab.eval(z, w).unwrap() - k.eval(z, w).unwrap()).norm();
        assert!(d < 1e-6, "difference {d}");
        let far = PlanarPoint::new(20.0, 0.0);
        assert!(matches!(k_tab.eval(far, PlanarPoint::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn scaled_and_dilated() {
        let g = Kernel::ginibre();
        let s = Kernel::scaled(g.clone(), 0.5).unwrap();
        assert!(!s.is_reproducing());
        assert!(Kernel::scaled(g.clone(), 1.0).unwrap().is_reproducing());
        assert!(Kernel::scaled(g.clone(), 0.0).is_err());
        assert!(Kernel::scaled(g.clone(), 1.5).is_err());
        let o = PlanarPoint::default();
        assert!((s.eval(o, o).unwrap().re - 0.5 / PI).abs() < 1e-16);

        let d4 = g.dilate(4.0).unwrap();
        assert!((d4.diagonal(o).unwrap() - 4.0 / PI).abs() < 1e-15);
        assert!(g.dilate(0.0).is_err());
        assert!(g.dilate(-1.0).is_err());
        assert!(d4.is_reproducing());
        assert_eq!(d4.rho(), 4.0);

        let one = g.dilate(1.0).unwrap();
        let (z, w) = (PlanarPoint::new(0.3, 0.1), PlanarPoint::new(-0.5, 0.9));
        assert_eq!(one.eval(z, w).unwrap(), g.eval(z, w).unwrap());
    }

    #[test]
    fn dilation_composes() {
        let k = Kernel::weyl_heisenberg(Window::Gaussian);
        let a = k.dilate(4.0).unwrap().dilate(9.0).unwrap();
        let b = k.dilate(36.0).unwrap();
        let mut rng = crate::rng::stream(13, 0);
        for _ in 0..200 {
            let z = random_point(&mut rng, 1.0);
            let w = random_point(&mut rng, 1.0);
            let (va, vb) = (a.eval(z, w).unwrap(), b.eval(z, w).unwrap());
            assert!((va - vb).norm() <= 1e-12 * vb.norm().max(1.0));
        }
    }

    #[test]
    fn non_finite_points_rejected() {
        let k = Kernel::ginibre();
        assert!(matches!(
            k.eval(PlanarPoint::new(f64::NAN, 0.0), PlanarPoint::default()),
            Err(Error::Domain(_))
        ));
        assert!(PlanarPoint::try_new(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn grammar_round_trip() {
        for s in ["ginibre", "wh:gaussian", "wh:hermite:3", "scaled:0.5:ginibre", "scaled:0.25:wh:hermite:2"] {
            let k: Kernel = s.parse().unwrap();
            assert_eq!(k.id(), s);
        }
        assert_eq!("wh:hermite:0".parse::<Kernel>().unwrap(), Kernel::WeylHeisenberg(Window::Gaussian));
        assert!("ginibre2".parse::<Kernel>().is_err());
        assert!("scaled:2:ginibre".parse::<Kernel>().is_err());
        assert!("wh:hermite:20".parse::<Kernel>().is_err());
        assert!(!"scaled:0.5:ginibre".parse::<Kernel>().unwrap().is_reproducing());
    }

    fn all_families() -> Vec<(Kernel, f64)> {
        vec![
            (Kernel::ginibre(), 1e-12),
            (Kernel::weyl_heisenberg(Window::Gaussian), 1e-12),
            (Kernel::weyl_heisenberg(hermite_window(2).unwrap()), 1e-8),
            (Kernel::scaled(Kernel::ginibre(), 0.5).unwrap(), 1e-12),
            (Kernel::ginibre().dilate(16.0).unwrap(), 1e-12),
        ]
    }

    #[test]
    fn hermitian_symmetry_on_random_pairs() {
        let mut rng = crate::rng::stream(14, 0);
        for (k, tol) in all_families() {
            let trials = if matches!(k, Kernel::WeylHeisenberg(Window::Hermite(_))) { 2_000 } else { 10_000 };
            for _ in 0..trials {
                let z = random_point(&mut rng, 4.0);
                let w = random_point(&mut rng, 4.0);
                let a = k.eval(z, w).unwrap();
                let b = k.eval(w, z).unwrap().conj();
                assert!((a - b).norm() <= tol * a.norm().max(1.0), "{k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn translation_invariant_modulus() {
        let mut rng = crate::rng::stream(15, 0);
        for (k, _) in all_families() {
            for _ in 0..500 {
                let z = random_point(&mut rng, 2.0);
                let w = random_point(&mut rng, 2.0);
                let t = random_point(&mut rng, 3.0);
                let a = k.eval(z, w).unwrap().norm();
                let b = k.eval(z + t, w + t).unwrap().norm();
                assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{k}");
            }
        }
    }

    proptest! {
        #[test]
        fn diagonal_real_nonnegative(re in -5.0f64..5.0, im in -5.0f64..5.0, rho in 0.1f64..100.0) {
            for (k, _) in all_families() {
                let kd = k.dilate(rho).unwrap();
                let v = kd.eval(PlanarPoint::new(re, im), PlanarPoint::new(re, im)).unwrap();
                prop_assert!(v.re >= 0.0);
                prop_assert!(v.im.abs() <= 1e-12 * v.re.max(1.0));
            }
        }
    }

    #[test]
    fn reproducing_formula() {
        let pairs = [
            (PlanarPoint::new(0.3, -0.4), PlanarPoint::new(-0.9, 0.8)),
            (PlanarPoint::new(1.5, 0.2), PlanarPoint::new(0.1, -0.5)),
        ];
        for (z, w) in pairs {
            for k in [Kernel::ginibre(), Kernel::weyl_heisenberg(Window::Gaussian)] {
                assert!(reproducing_residual(&k, z, w, 8.0).unwrap().norm() < 1e-9);
            }
            let half = Kernel::scaled(Kernel::ginibre(), 0.5).unwrap();
            let r = reproducing_residual(&half, z, w, 8.0).unwrap();
            let want = half.eval(z, w).unwrap() * -0.5;
            assert!((r - want).norm() < 1e-9);
        }
    }
}
