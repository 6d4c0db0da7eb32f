//! Compactly supported C³ test functions.
//!
//! Both shapes are built on the quartic bump `b(z) = (1 - |z|^2/R^2)^4` on
//! `|z| <= R`: the radial bump is `b` itself, the tilted bump is `Re(z) b(z)`.
//! An amplitude factor is carried so that homogeneity in `f` can be tested.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ddouble::DD;
use crate::error::{Error, Result};
use crate::kernels::PlanarPoint;
use crate::quadrature::GaussRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BumpKind {
    Radial,
    Tilted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: BumpKind,
    pub radius: f64,
    pub amplitude: f64,
}

/// Radial nodes: every radial integrand below is a polynomial in `r` of
/// degree at most 20, so 16 Gauss–Legendre nodes integrate it exactly.
const RADIAL_NODES: usize = 16;

impl TestFunction {
    pub fn radial(radius: f64) -> Result<TestFunction> {
        TestFunction::new(BumpKind::Radial, radius)
    }

    pub fn tilted(radius: f64) -> Result<TestFunction> {
        TestFunction::new(BumpKind::Tilted, radius)
    }

    pub fn new(kind: BumpKind, radius: f64) -> Result<TestFunction> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Argument(format!("support radius {radius} must be positive")));
        }
        Ok(TestFunction {
            kind,
            radius,
            amplitude: 1.0,
        })
    }

    /// `lambda * f`.
    pub fn scaled(self, lambda: f64) -> TestFunction {
        TestFunction {
            amplitude: self.amplitude * lambda,
            ..self
        }
    }

    pub fn support_radius(&self) -> f64 {
        self.radius
    }

    pub fn id(&self) -> String {
        let kind = match self.kind {
            BumpKind::Radial => "radial",
            BumpKind::Tilted => "tilted",
        };
        if self.amplitude == 1.0 {
            format!("{kind}:{}", self.radius)
        } else {
            format!("{}*{kind}:{}", self.amplitude, self.radius)
        }
    }

    fn s(&self, z: PlanarPoint) -> f64 {
        z.norm_sqr() / (self.radius * self.radius)
    }

    pub fn value(&self, z: PlanarPoint) -> f64 {
        let s = self.s(z);
        if s >= 1.0 {
            return 0.0;
        }
        let b = (1.0 - s).powi(4);
        self.amplitude
            * match self.kind {
                BumpKind::Radial => b,
                BumpKind::Tilted => z.re * b,
            }
    }

    /// Value in double-double arithmetic.
    pub(crate) fn value_dd(&self, x: DD, y: DD) -> DD {
        let r2 = DD::new(self.radius * self.radius);
        let s = (x * x + y * y) / r2;
        if s.hi >= 1.0 {
            return DD::ZERO;
        }
        let b = (DD::ONE - s).powi(4);
        let v = match self.kind {
            BumpKind::Radial => b,
            BumpKind::Tilted => x * b,
        };
        v * self.amplitude
    }

    /// `(df/dx, df/dy)`.
    pub fn gradient(&self, z: PlanarPoint) -> (f64, f64) {
        let s = self.s(z);
        if s >= 1.0 {
            return (0.0, 0.0);
        }
        let r2 = self.radius * self.radius;
        let t = 1.0 - s;
        let b = t.powi(4);
        let c = -8.0 * t.powi(3) / r2;
        let (bx, by) = (c * z.re, c * z.im);
        let (gx, gy) = match self.kind {
            BumpKind::Radial => (bx, by),
            BumpKind::Tilted => (b + z.re * bx, z.re * by),
        };
        (self.amplitude * gx, self.amplitude * gy)
    }

    /// `[[f_xx, f_xy], [f_xy, f_yy]]`.
    pub fn hessian(&self, z: PlanarPoint) -> [[f64; 2]; 2] {
        let s = self.s(z);
        if s >= 1.0 {
            return [[0.0; 2]; 2];
        }
        let r2 = self.radius * self.radius;
        let (x, y) = (z.re, z.im);
        let t = 1.0 - s;
        let c1 = -8.0 * t.powi(3) / r2;
        let c2 = 48.0 * t * t / (r2 * r2);
        let (bx, by) = (c1 * x, c1 * y);
        let bxx = c1 + c2 * x * x;
        let byy = c1 + c2 * y * y;
        let bxy = c2 * x * y;
        let (fxx, fxy, fyy) = match self.kind {
            BumpKind::Radial => (bxx, bxy, byy),
            BumpKind::Tilted => (2.0 * bx + x * bxx, by + x * bxy, x * byy),
        };
        let a = self.amplitude;
        [[a * fxx, a * fxy], [a * fxy, a * fyy]]
    }

    /// `∫_0^R g(r) dr` for a polynomial radial integrand.
    fn radial_integral(&self, g: impl Fn(f64) -> f64) -> f64 {
        GaussRule::legendre(RADIAL_NODES)
            .mapped(0.0, self.radius)
            .integrate(g)
    }

    fn profile(&self, r: f64) -> (f64, f64) {
        let r2 = self.radius * self.radius;
        let t = 1.0 - r * r / r2;
        (t.powi(4), -8.0 * r * t.powi(3) / r2)
    }

    /// `∫ f dA`.
    pub fn integral(&self) -> f64 {
        match self.kind {
            BumpKind::Radial => {
                self.amplitude * 2.0 * PI * self.radial_integral(|r| self.profile(r).0 * r)
            }
            BumpKind::Tilted => 0.0,
        }
    }

    /// `∫ f^2 dA`.
    pub fn integral_sq(&self) -> f64 {
        let a2 = self.amplitude * self.amplitude;
        a2 * match self.kind {
            BumpKind::Radial => 2.0 * PI * self.radial_integral(|r| self.profile(r).0.powi(2) * r),
            BumpKind::Tilted => PI * self.radial_integral(|r| self.profile(r).0.powi(2) * r.powi(3)),
        }
    }

    /// `∫ |f| dA`.
    pub fn integral_abs(&self) -> f64 {
        self.amplitude.abs()
            * match self.kind {
                BumpKind::Radial => 2.0 * PI * self.radial_integral(|r| self.profile(r).0 * r),
                BumpKind::Tilted => 4.0 * self.radial_integral(|r| self.profile(r).0 * r * r),
            }
    }

    /// `∫ |∇f|^2 dA`.
    pub fn grad_l2sq(&self) -> f64 {
        let a2 = self.amplitude * self.amplitude;
        a2 * match self.kind {
            BumpKind::Radial => 2.0 * PI * self.radial_integral(|r| self.profile(r).1.powi(2) * r),
            BumpKind::Tilted => {
                // |∇(x b)|^2 = b^2 + 2 b b' r cos^2 + b'^2 r^2 cos^2 in polar form
                2.0 * PI
                    * self.radial_integral(|r| {
                        let (b, db) = self.profile(r);
                        (b * b + b * db * r + db * db * r * r / 2.0) * r
                    })
            }
        }
    }

    /// Largest deviation between the gradient and central differences of the
    /// value with step `h`, over `trials` random points of the support.
    pub fn gradient_check(&self, trials: usize, h: f64, seed: u64) -> Result<f64> {
        if !(h > 0.0 && h <= 1e-4) {
            return Err(Error::Argument(format!("finite-difference step {h} must lie in (0, 1e-4]")));
        }
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let r = self.radius * rng.random::<f64>().sqrt();
            let th = rng.random_range(0.0..2.0 * PI);
            let (x, y) = (r * th.cos(), r * th.sin());
            let central = |dx: f64, dy: f64| {
                let hd = DD::new(h);
                let p = self.value_dd(DD::new(x) + hd * dx, DD::new(y) + hd * dy);
                let m = self.value_dd(DD::new(x) - hd * dx, DD::new(y) - hd * dy);
                ((p - m) / (hd * 2.0)).to_f64()
            };
            let (gx, gy) = self.gradient(PlanarPoint::new(x, y));
            worst = worst
                .max((central(1.0, 0.0) - gx).abs())
                .max((central(0.0, 1.0) - gy).abs());
        }
        Ok(worst)
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Parses `radial:<R> | tilted:<R>`.
impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<TestFunction> {
        let s = s.trim();
        let bad = || Error::Argument(format!("unrecognised test function '{s}'"));
        let (kind, r) = s.split_once(':').ok_or_else(bad)?;
        let radius: f64 = r.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "radial" => TestFunction::radial(radius),
            "tilted" => TestFunction::tilted(radius),
            _ => Err(bad()),
        }
    }
}
