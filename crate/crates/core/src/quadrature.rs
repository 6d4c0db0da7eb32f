//! Gauss rules and tensor/polar product rules on planar domains.

use std::f64::consts::PI;

use crate::kernels::PlanarPoint;

/// A one-dimensional quadrature rule.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Gauss–Legendre rule on `[-1, 1]`.
    pub fn legendre(n: usize) -> GaussRule {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp;
            loop {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Gauss–Hermite rule for the weight `exp(-x^2)` on the real line.
    pub fn hermite(n: usize) -> GaussRule {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        // ascending order
        nodes.reverse();
        weights.reverse();
        GaussRule { nodes, weights }
    }

    /// Affine map of a `[-1, 1]` rule onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> GaussRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GaussRule {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// A weighted point set in the plane.
#[derive(Clone, Debug, Default)]
pub struct PlanarRule {
    pub points: Vec<PlanarPoint>,
    pub weights: Vec<f64>,
}

impl PlanarRule {
    /// Polar product rule on the annulus `r0 <= |z - center| <= r1`:
    /// Gauss–Legendre in the radius (with the Jacobian `r`) and the
    /// trapezoidal rule in the angle.
    pub fn annulus(center: PlanarPoint, r0: f64, r1: f64, n_r: usize, n_theta: usize) -> PlanarRule {
        let radial = GaussRule::legendre(n_r).mapped(r0, r1);
        let mut rule = PlanarRule::default();
        rule.push_polar(center, &radial, n_theta);
        rule
    }

    /// Polar rule on a disk, with the radius split into the given panels
    /// (each `(r0, r1, n_r)`).
    pub fn disk_panels(center: PlanarPoint, panels: &[(f64, f64, usize)], n_theta: usize) -> PlanarRule {
        let mut rule = PlanarRule::default();
        for &(r0, r1, n_r) in panels {
            let radial = GaussRule::legendre(n_r).mapped(r0, r1);
            rule.push_polar(center, &radial, n_theta);
        }
        rule
    }

    pub fn disk(center: PlanarPoint, radius: f64, n_r: usize, n_theta: usize) -> PlanarRule {
        PlanarRule::annulus(center, 0.0, radius, n_r, n_theta)
    }

    fn push_polar(&mut self, center: PlanarPoint, radial: &GaussRule, n_theta: usize) {
        let dtheta = 2.0 * PI / n_theta as f64;
        for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
            for t in 0..n_theta {
                // half-step offset keeps nodes off the coordinate axes
                let theta = (t as f64 + 0.5) * dtheta;
                let (s, c) = theta.sin_cos();
                self.points
                    .push(PlanarPoint::new(center.re + r * c, center.im + r * s));
                self.weights.push(wr * r * dtheta);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(PlanarPoint) -> f64) -> f64 {
        let mut acc = crate::stats::CompensatedSum::default();
        for (p, w) in self.points.iter().zip(&self.weights) {
            acc.add(w * f(*p));
        }
        acc.value()
    }
}

/// Outcome of an integral over the whole plane computed by annulus doubling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PlaneIntegral {
    Converged { value: f64, radius: f64 },
    Diverged { partial: f64, radius: f64 },
}

impl PlaneIntegral {
    pub fn value(&self) -> Option<f64> {
        match *self {
            PlaneIntegral::Converged { value, .. } => Some(value),
            PlaneIntegral::Diverged { .. } => None,
        }
    }
}

/// Integrates `g` over the plane: a disk of radius `r0` followed by annuli of
/// doubling radius, stopping once an annulus contributes less than `rel_tol`
/// of the running total. Reports divergence if that never happens within
/// `max_doublings` or if the annulus contributions keep growing.
pub fn integrate_plane(
    g: impl Fn(PlanarPoint) -> f64,
    center: PlanarPoint,
    r0: f64,
    rel_tol: f64,
    max_doublings: usize,
) -> PlaneIntegral {
    const N_R: usize = 48;
    const N_THETA: usize = 64;
    let mut total = PlanarRule::disk(center, r0, N_R, N_THETA).integrate(&g);
    let mut inner = r0;
    let mut last = f64::INFINITY;
    let mut growing = 0usize;
    for _ in 0..max_doublings {
        let outer = 2.0 * inner;
        let part = PlanarRule::annulus(center, inner, outer, N_R, N_THETA).integrate(&g);
        total += part;
        if !total.is_finite() {
            return PlaneIntegral::Diverged {
                partial: total,
                radius: outer,
            };
        }
        if part.abs() <= rel_tol * total.abs() {
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
