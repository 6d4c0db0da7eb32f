//! Importance-sampled Monte Carlo for the cumulant integrals
//! `C_k = ∫ G_k(z_1..z_k) R_k(z_1..z_k) dA^k`, `k in {2, 3}`.
//!
//! For `k <= 3` the real part of the cyclic product is symmetric under all
//! permutations of its arguments, so `G_k` may be replaced by its
//! symmetrisation: `½ (f_1 - f_2)^2` for `k = 2` and
//! `(3/2) Σ_a (f_a - mean f)^3` for `k = 3`. Both vanish when no point lies
//! in the support of `f`.
//!
//! Proposal: an anchor uniform on the support disk, followed by a chain of
//! differences drawn from the normalised envelope. The weight divides by the
//! proposal density symmetrised over relabellings of the points, which keeps
//! the estimator unbiased although the anchor is restricted to the support.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::envelopes::{envelope_of, Envelope};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, PlanarPoint};
use crate::rng::{derive_seed, stream};
use crate::stats::CompensatedSum;
use crate::testfunctions::TestFunction;

pub const BLOCKS: usize = 64;
pub const MIN_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantEstimate {
    pub order: usize,
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub rho: f64,
}

/// Density for the differences `z_{i+1} - z_i`.
enum Proposal {
    /// `(beta / pi) exp(-beta |d|^2)`.
    Gaussian { beta: f64 },
    /// Piecewise-constant density on a square grid of cells.
    Table {
        half: f64,
        n: usize,
        cdf: Vec<f64>,
        density: Vec<f64>,
    },
}

impl Proposal {
    fn from_envelope(env: &Envelope) -> Result<Proposal> {
        if let Some((a, b)) = env.gaussian_profile() {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::Capability("degenerate envelope".into()));
            }
            return Ok(Proposal::Gaussian { beta: b });
        }
        let half = env.tail_radius(1e-9);
        let n = 256;
        let h = 2.0 * half / n as f64;
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let c = PlanarPoint::new(-half + (i as f64 + 0.5) * h, -half + (j as f64 + 0.5) * h);
                weights.push(env.phi(c));
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Capability("degenerate envelope".into()));
        }
        let mut cdf = Vec::with_capacity(weights.len());
        let mut run = 0.0;
        for w in &weights {
            run += w / total;
            cdf.push(run);
        }
        let density = weights.iter().map(|w| w / (total * h * h)).collect();
        Ok(Proposal::Table {
            half,
            n,
            cdf,
            density,
        })
    }

    fn draw(&self, rng: &mut impl Rng) -> PlanarPoint {
        match self {
            Proposal::Gaussian { beta } => {
                let s = (0.5 / beta).sqrt();
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                PlanarPoint::new(s * x, s * y)
            }
            Proposal::Table { half, n, cdf, .. } => {
                let u: f64 = rng.random();
                let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                let h = 2.0 * half / *n as f64;
                let (i, j) = (idx / n, idx % n);
                PlanarPoint::new(
                    -half + (i as f64 + rng.random::<f64>()) * h,
                    -half + (j as f64 + rng.random::<f64>()) * h,
                )
            }
        }
    }

    fn density(&self, d: PlanarPoint) -> f64 {
        match self {
            Proposal::Gaussian { beta } => beta / PI * (-beta * d.norm_sqr()).exp(),
            Proposal::Table {
                half, n, density, ..
            } => {
                let h = 2.0 * half / *n as f64;
                let i = ((d.re + half) / h).floor();
                let j = ((d.im + half) / h).floor();
                if i < 0.0 || j < 0.0 || i >= *n as f64 || j >= *n as f64 {
                    0.0
                } else {
                    density[i as usize * n + j as usize]
                }
            }
        }
    }
}

const PERMS_2: [[usize; 2]; 2] = [[0, 1], [1, 0]];
const PERMS_3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

struct Integrand<'a> {
    kernel: &'a Kernel,
    f: &'a TestFunction,
    proposal: Proposal,
    k: usize,
}

impl Integrand<'_> {
    fn symmetric_g(&self, fv: &[f64]) -> f64 {
        match self.k {
            2 => 0.5 * (fv[0] - fv[1]).powi(2),
            _ => {
                let m = (fv[0] + fv[1] + fv[2]) / 3.0;
                1.5 * fv.iter().map(|v| (v - m).powi(3)).sum::<f64>()
            }
        }
    }

    /// Proposal density averaged over relabellings, with the area of the
    /// support factored out.
    fn symmetric_density(&self, pts: &[PlanarPoint]) -> f64 {
        let r2 = self.f.support_radius().powi(2);
        let inside = |p: PlanarPoint| p.norm_sqr() < r2;
        let path = |perm: &[usize]| -> f64 {
            if !inside(pts[perm[0]]) {
                return 0.0;
            }
            perm.windows(2)
                .map(|w| self.proposal.density(pts[w[1]] - pts[w[0]]))
                .product()
        };
        match self.k {
            2 => PERMS_2.iter().map(|p| path(p)).sum::<f64>() / 2.0,
            _ => PERMS_3.iter().map(|p| path(p)).sum::<f64>() / 6.0,
        }
    }

    fn weight(&self, pts: &[PlanarPoint]) -> Result<f64> {
        let fv: Vec<f64> = pts.iter().map(|&p| self.f.value(p)).collect();
        let g = self.symmetric_g(&fv);
        if g == 0.0 {
            return Ok(0.0);
        }
        let r = match self.k {
            2 => self.kernel.eval(pts[0], pts[1])?.norm_sqr(),
            _ => crate::cumulants::cyclic_product(self.kernel, pts)?.re,
        };
        let area = PI * self.f.support_radius().powi(2);
        Ok(g * r * area / self.symmetric_density(pts))
    }
}

/// Monte Carlo estimate of the cumulant `C_k`, `k in {2, 3}`, with a
/// delete-one-block jackknife standard error. `samples` integrand
/// evaluations are spent in antithetic pairs `(d, -d)`, split into
/// [`BLOCKS`] blocks with their own random streams, so the result does not
/// depend on the number of worker threads.
pub fn cumulant_mc(
    kernel: &Kernel,
    f: &TestFunction,
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<CumulantEstimate> {
    if !(k == 2 || k == 3) {
        return Err(Error::Capability(format!(
            "Monte Carlo cumulants are available for k = 2, 3 only, got {k}"
        )));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::Argument(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    let env = envelope_of(kernel)?;
    let integrand = Integrand {
        kernel,
        f,
        proposal: Proposal::from_envelope(&env)?,
        k,
    };
    let pairs = samples / 2;
    let block_seed = derive_seed(seed, k as u64);
    let radius = f.support_radius();
    let blocks = crate::parallel::try_map_indexed(BLOCKS, |b| {
        let lo = b * pairs / BLOCKS;
        let hi = (b + 1) * pairs / BLOCKS;
        let mut rng = stream(block_seed, b as u64);
        let mut acc = CompensatedSum::default();
        let mut pts = vec![PlanarPoint::default(); k];
        for _ in lo..hi {
            let r = radius * rng.random::<f64>().sqrt();
            let th = rng.random_range(0.0..2.0 * PI);
            let anchor = PlanarPoint::new(r * th.cos(), r * th.sin());
            let diffs: Vec<PlanarPoint> = (1..k).map(|_| integrand.proposal.draw(&mut rng)).collect();
            let mut pair = 0.0;
            for sign in [1.0, -1.0] {
                pts[0] = anchor;
                for i in 1..k {
                    pts[i] = pts[i - 1] + diffs[i - 1] * sign;
                }
                pair += integrand.weight(&pts)?;
            }
            acc.add(0.5 * pair);
        }
        Ok::<_, Error>((acc.value(), (hi - lo) as f64))
    })?;
    let total: f64 = blocks.iter().map(|b| b.0).collect::<CompensatedSum>().value();
    let count: f64 = blocks.iter().map(|b| b.1).sum();
    let value = total / count;
    let loo: Vec<f64> = blocks.iter().map(|(s, n)| (total - s) / (count - n)).collect();
    let mean_loo = loo.iter().sum::<f64>() / loo.len() as f64;
    let nb = loo.len() as f64;
    let var = (nb - 1.0) / nb * loo.iter().map(|x| (x - mean_loo).powi(2)).sum::<f64>();
    Ok(CumulantEstimate {
        order: k,
        value,
        stderr: var.sqrt(),
        method: Method::MonteCarlo,
        rho: kernel.rho(),
    })
}

/// `C_2` by deterministic quadrature (the reproducing form of the variance).
pub fn cumulant2_quadrature(kernel: &Kernel, f: &TestFunction) -> Result<CumulantEstimate> {
    let v = crate::cumulants::variance_quadrature(kernel, f)?;
    Ok(CumulantEstimate {
        order: 2,
        value: v.half_form,
        stderr: 0.0,
        method: Method::Quadrature,
        rho: kernel.rho(),
    })
}
