//! Finite-difference checks of the diagonal identities of `G_k`.
//!
//! At a diagonal point `(z0, .., z0)`:
//!
//! * (i)   `G_k = 0`;
//! * (ii)  `Σ_r ∂_{r,j} G_k = 0`;
//! * (iii) `Σ_{r1,r2} ∂_{r1,m} ∂_{r2,l} G_k = 0`;
//! * (iv)  `Σ_r ∂_{r,m} ∂_{r,l} G_k = 0`;
//! * (v)   `Σ_{r1 != r2} ∂_{r1,m} ∂_{r2,l} G_k = 0`.
//!
//! Derivatives are central differences of `G_k` evaluated in double-double
//! arithmetic, so rounding stays far below the `h^2` truncation term. The
//! reported residual is the Richardson combination `(4 D(h/2) - D(h)) / 3`,
//! which removes that `h^2` term; the raw differences are reported alongside.

use serde::Serialize;

use super::combinatorics::{diagonal_coefficient, GTable};
use crate::ddouble::DD;
use crate::error::{Error, Result};
use crate::kernels::PlanarPoint;
use crate::testfunctions::TestFunction;
use num_traits::ToPrimitive;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residual {
    /// Largest `|Richardson value|` over the coordinate directions.
    pub richardson: f64,
    /// Largest `|D(h)|`.
    pub raw_h: f64,
    /// Largest `|D(h/2)|`.
    pub raw_half_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub k: usize,
    pub z0: PlanarPoint,
    pub h: f64,
    /// `G_k(z0, .., z0)` from the exact coefficient sum.
    pub diagonal_exact: f64,
    /// `G_k(z0, .., z0)` evaluated term by term in floating point.
    pub diagonal_float: f64,
    pub first_sum: Residual,
    pub full_second_sum: Residual,
    pub same_point_second_sum: Residual,
    pub cross_second_sum: Residual,
}

impl SymmetryReport {
    pub fn bound(&self) -> f64 {
        10.0 * self.h * self.h
    }

    /// Residuals (i)..(v) as listed in the module docs.
    pub fn residuals(&self) -> [f64; 5] {
        [
            self.diagonal_exact.abs(),
            self.first_sum.richardson,
            self.full_second_sum.richardson,
            self.same_point_second_sum.richardson,
            self.cross_second_sum.richardson,
        ]
    }

    pub fn passes(&self) -> bool {
        self.residuals().iter().all(|r| *r <= self.bound())
    }
}

struct Stencil<'a> {
    table: &'a GTable,
    f: &'a TestFunction,
    x0: DD,
    y0: DD,
}

impl Stencil<'_> {
    /// `G_k` with slot `r` displaced by `(dx, dy)` for every `(r, dx, dy)`.
    fn g(&self, shifts: &[(usize, [DD; 2])]) -> DD {
        let mut fv = Vec::with_capacity(self.table.k);
        for slot in 0..self.table.k {
            let (mut x, mut y) = (self.x0, self.y0);
            for (r, d) in shifts {
                if *r == slot {
                    x = x + d[0];
                    y = y + d[1];
                }
            }
            fv.push(self.f.value_dd(x, y));
        }
        self.table.eval_dd(&fv)
    }

    fn step(dir: usize, h: DD) -> [DD; 2] {
        if dir == 0 {
            [h, DD::ZERO]
        } else {
            [DD::ZERO, h]
        }
    }

    fn first(&self, r: usize, j: usize, h: DD) -> DD {
        let p = self.g(&[(r, Self::step(j, h))]);
        let m = self.g(&[(r, Self::step(j, -h))]);
        (p - m) / (h * 2.0)
    }

    fn second(&self, r1: usize, m: usize, r2: usize, l: usize, h: DD) -> DD {
        if r1 == r2 && m == l {
            let p = self.g(&[(r1, Self::step(m, h))]);
            let z = self.g(&[]);
            let q = self.g(&[(r1, Self::step(m, -h))]);
            return (p - z * 2.0 + q) / (h * h);
        }
        let at = |s1: f64, s2: f64| {
            self.g(&[(r1, Self::step(m, h * s1)), (r2, Self::step(l, h * s2))])
        };
        (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (h * h * 4.0)
    }
}

fn combine(values: impl Iterator<Item = (DD, DD)>) -> Residual {
    let mut out = Residual {
        richardson: 0.0,
        raw_h: 0.0,
        raw_half_h: 0.0,
    };
    for (dh, dh2) in values {
        let rich = (dh2 * 4.0 - dh) / DD::new(3.0);
        out.richardson = out.richardson.max(rich.to_f64().abs());
        out.raw_h = out.raw_h.max(dh.to_f64().abs());
        out.raw_half_h = out.raw_half_h.max(dh2.to_f64().abs());
    }
    out
}

/// Evaluates the five diagonal identities at `z0` with step `h`.
///
/// `k` ranges over `2..=5`; at `k = 2` only (i)–(iii) are expected to vanish.
pub fn symmetry_checks(k: usize, f: &TestFunction, z0: PlanarPoint, h: f64) -> Result<SymmetryReport> {
    if !(2..=5).contains(&k) {
        return Err(Error::Argument(format!("symmetry checks need 2 <= k <= 5, got {k}")));
    }
    if !(h > 0.0 && h <= 1e-4) {
        return Err(Error::Argument(format!("step h = {h} must lie in (0, 1e-4]")));
    }
    z0.check()?;
    if z0.norm() + 2.0 * h >= f.support_radius() {
        return Err(Error::Argument("z0 must lie in the interior of the support".into()));
    }
    let table = GTable::new(k)?;
    let st = Stencil {
        table: &table,
        f,
        x0: DD::new(z0.re),
        y0: DD::new(z0.im),
    };
    let hs = [DD::new(h), DD::new(h) * 0.5];

    let first_sum = combine((0..2).map(|j| {
        let d = |h: DD| (0..k).fold(DD::ZERO, |acc, r| acc + st.first(r, j, h));
        (d(hs[0]), d(hs[1]))
    }));

    let mut same = Vec::new();
    let mut cross = Vec::new();
    let mut full = Vec::new();
    for m in 0..2 {
        for l in 0..2 {
            let mut s = [DD::ZERO; 2];
            let mut c = [DD::ZERO; 2];
            for (i, &hh) in hs.iter().enumerate() {
                for r1 in 0..k {
                    for r2 in 0..k {
                        let v = st.second(r1, m, r2, l, hh);
                        if r1 == r2 {
                            s[i] = s[i] + v;
                        } else {
                            c[i] = c[i] + v;
                        }
                    }
                }
            }
            same.push((s[0], s[1]));
            cross.push((c[0], c[1]));
            full.push((s[0] + c[0], s[1] + c[1]));
        }
    }

    let fz = f.value(z0);
    let coef = diagonal_coefficient(k as u32).to_f64().unwrap_or(f64::NAN);
    Ok(SymmetryReport {
        k,
        z0,
        h,
        diagonal_exact: coef * fz.powi(k as i32),
        diagonal_float: table.eval(&vec![fz; k]),
        first_sum,
        full_second_sum: combine(full.into_iter()),
        same_point_second_sum: combine(same.into_iter()),
        cross_second_sum: combine(cross.into_iter()),
    })
}
