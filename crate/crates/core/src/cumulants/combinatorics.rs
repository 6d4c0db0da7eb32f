//! Exact combinatorics of the cumulant integrand
//!
//! `G_k(z_1..z_k) = Σ_j (-1)^{j-1}/j Σ_{k_1+..+k_j=k} k!/(k_1!..k_j!) Π_{l<=j} f(z_l)^{k_l}`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::ddouble::DD;
use crate::error::{Error, Result};
use crate::kernels::PlanarPoint;
use crate::testfunctions::TestFunction;

pub const MAX_G_ORDER: usize = 8;
pub const MAX_SUM_ORDER: usize = 12;

/// An ordered composition `k = k_1 + .. + k_j` with its multinomial weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Composition {
    pub parts: Vec<u32>,
    /// `k! / (k_1! .. k_j!)`.
    pub weight: BigRational,
}

impl Composition {
    pub fn order(&self) -> u32 {
        self.parts.iter().sum()
    }

    /// `(-1)^{j-1} / j` times the multinomial weight.
    pub fn coefficient(&self) -> BigRational {
        let j = self.parts.len() as i64;
        let sign = if j % 2 == 1 { 1 } else { -1 };
        &self.weight * BigRational::new(BigInt::from(sign), BigInt::from(j))
    }
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// All `2^{k-1}` compositions of `k`, grouped by the number of parts.
pub fn compositions(k: u32) -> Vec<Composition> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let kf = factorial(k);
    // bit i of the mask set means a cut after position i + 1
    for mask in 0u32..(1 << (k - 1)) {
        let mut parts = Vec::new();
        let mut run = 1;
        for i in 0..k - 1 {
            if mask >> i & 1 == 1 {
                parts.push(run);
                run = 1;
            } else {
                run += 1;
            }
        }
        parts.push(run);
        let denom = parts.iter().fold(BigInt::one(), |acc, &p| acc * factorial(p));
        out.push(Composition {
            weight: BigRational::new(kf.clone(), denom),
            parts,
        });
    }
    out.sort_by(|a, b| a.parts.len().cmp(&b.parts.len()).then(a.parts.cmp(&b.parts)));
    out
}

fn check_g_order(k: usize) -> Result<()> {
    if !(1..=MAX_G_ORDER).contains(&k) {
        return Err(Error::Argument(format!("G_k needs 1 <= k <= {MAX_G_ORDER}, got {k}")));
    }
    Ok(())
}

/// Coefficients as `(parts, coefficient)` in floating point and double-double.
#[derive(Clone, Debug)]
pub(crate) struct GTable {
    pub k: usize,
    pub terms: Vec<(Vec<u32>, f64, DD)>,
}

impl GTable {
    pub fn new(k: usize) -> Result<GTable> {
        check_g_order(k)?;
        let terms = compositions(k as u32)
            .into_iter()
            .map(|c| {
                let q = c.coefficient();
                let num = q.numer().to_f64().expect("small numerator");
                let den = q.denom().to_f64().expect("small denominator");
                (c.parts, num / den, DD::new(num) / DD::new(den))
            })
            .collect();
        Ok(GTable { k, terms })
    }

    /// `G_k` from the values `f(z_1), .., f(z_k)`.
    pub fn eval(&self, fv: &[f64]) -> f64 {
        let mut acc = crate::stats::CompensatedSum::default();
        for (parts, c, _) in &self.terms {
            let prod: f64 = parts.iter().zip(fv).map(|(&p, &v)| v.powi(p as i32)).product();
            acc.add(c * prod);
        }
        acc.value()
    }

    pub fn eval_dd(&self, fv: &[DD]) -> DD {
        let mut acc = DD::ZERO;
        for (parts, _, c) in &self.terms {
            let mut prod = *c;
            for (&p, &v) in parts.iter().zip(fv) {
                prod = prod * v.powi(p);
            }
            acc = acc + prod;
        }
        acc
    }
}

/// `G_k(z_1, .., z_k)` for the test function `f`.
pub fn eval_g(k: usize, f: &TestFunction, points: &[PlanarPoint]) -> Result<f64> {
    check_g_order(k)?;
    if points.len() != k {
        return Err(Error::Argument(format!("G_{k} needs {k} points, got {}", points.len())));
    }
    for p in points {
        p.check()?;
    }
    let fv: Vec<f64> = points.iter().map(|&z| f.value(z)).collect();
    Ok(GTable::new(k)?.eval(&fv))
}

/// Sum of all coefficients of `G_k`; `G_k(z, .., z) = f(z)^k` times this.
pub fn diagonal_coefficient(k: u32) -> BigRational {
    compositions(k)
        .iter()
        .fold(BigRational::zero(), |acc, c| acc + c.coefficient())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositionSums {
    pub k: u32,
    /// Exact value as a reduced fraction string.
    pub s: String,
    pub s_prime: String,
    /// Contributions by number of parts `j = 1..k`.
    pub s_terms: Vec<String>,
    pub s_prime_terms: Vec<String>,
    pub both_zero: bool,
}

/// `S_k = Σ_j (-1)^{j-1}/j Σ k! (Σ_l k_l(k_l - 1)) / Π k_l!` and
/// `S'_k = Σ_j (-1)^{j-1}/j Σ k k! / Π k_l!`, in exact rational arithmetic.
pub fn composition_sums(k: u32) -> Result<CompositionSums> {
    if !(3..=MAX_SUM_ORDER as u32).contains(&k) {
        return Err(Error::Argument(format!(
            "composition sums need 3 <= k <= {MAX_SUM_ORDER}, got {k}"
        )));
    }
    let mut s_terms = vec![BigRational::zero(); k as usize];
    let mut sp_terms = vec![BigRational::zero(); k as usize];
    for c in compositions(k) {
        let j = c.parts.len();
        let coef = c.coefficient();
        let pairs: u64 = c.parts.iter().map(|&p| (p as u64) * (p as u64 - 1)).sum();
        s_terms[j - 1] += &coef * BigRational::from_integer(BigInt::from(pairs));
        sp_terms[j - 1] += &coef * BigRational::from_integer(BigInt::from(k));
    }
    let s: BigRational = s_terms.iter().sum();
    let sp: BigRational = sp_terms.iter().sum();
    let show = |q: &BigRational| {
        if q.is_integer() {
            q.numer().to_string()
        } else {
            format!("{}/{}", q.numer(), q.denom())
        }
    };
    Ok(CompositionSums {
        k,
        both_zero: s.is_zero() && sp.is_zero(),
        s: show(&s),
        s_prime: show(&sp),
        s_terms: s_terms.iter().map(show).collect(),
        s_prime_terms: sp_terms.iter().map(show).collect(),
    })
}

/// Largest absolute coefficient of `G_k`, a scale for cancellation in floating point.
pub fn max_abs_coefficient(k: u32) -> f64 {
    compositions(k)
        .iter()
        .map(|c| c.coefficient().abs().to_f64().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}
