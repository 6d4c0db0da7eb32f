//! Sample statistics: compensated sums, k-statistics with jackknife errors,
//! moment diagnostics and the Kolmogorov–Smirnov distance to N(0, 1).

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().collect::<CompensatedSum>().value()
}

/// An estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Unbiased cumulant estimators `k1..k4` from power sums of a sample.
fn kstats_from_sums(n: f64, s1: f64, s2: f64, s3: f64, s4: f64) -> [f64; 4] {
    let k1 = s1 / n;
    let k2 = (n * s2 - s1 * s1) / (n * (n - 1.0));
    let k3 = (2.0 * s1.powi(3) - 3.0 * n * s1 * s2 + n * n * s3) / (n * (n - 1.0) * (n - 2.0));
    let k4 = (-6.0 * s1.powi(4) + 12.0 * n * s1 * s1 * s2
        - 3.0 * n * (n - 1.0) * s2 * s2
        - 4.0 * n * (n + 1.0) * s1 * s3
        + n * n * (n + 1.0) * s4)
        / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));
    [k1, k2, k3, k4]
}

/// k-statistics of order 1 to 4 with delete-one jackknife standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KStatistics {
    pub k: [Estimate; 4],
}

impl KStatistics {
    /// Requires at least 5 observations (delete-one needs `n - 1 >= 4`).
    pub fn from_sample(xs: &[f64]) -> Option<KStatistics> {
        let n = xs.len();
        if n < 5 {
            return None;
        }
        // k2..k4 are shift invariant; work with data centred at the mean
        let shift = compensated_sum(xs.iter().copied()) / n as f64;
        let ys: Vec<f64> = xs.iter().map(|x| x - shift).collect();
        let sums: [f64; 4] = [1, 2, 3, 4].map(|p| compensated_sum(ys.iter().map(|y| y.powi(p))));
        let nf = n as f64;
        let mut full = kstats_from_sums(nf, sums[0], sums[1], sums[2], sums[3]);
        full[0] += shift;

        let mut loo: Vec<[f64; 4]> = Vec::with_capacity(n);
        for y in &ys {
            let mut k = kstats_from_sums(
                nf - 1.0,
                sums[0] - y,
                sums[1] - y * y,
                sums[2] - y.powi(3),
                sums[3] - y.powi(4),
            );
            k[0] += shift;
            loo.push(k);
        }
        let k = std::array::from_fn(|p| {
            let mean = compensated_sum(loo.iter().map(|k| k[p])) / nf;
            let ss = compensated_sum(loo.iter().map(|k| (k[p] - mean).powi(2)));
            Estimate {
                value: full[p],
                stderr: ((nf - 1.0) / nf * ss).sqrt(),
            }
        });
        Some(KStatistics { k })
    }

    pub fn variance(&self) -> f64 {
        self.k[1].value
    }

    /// `k3 / k2^{3/2}`.
    pub fn skewness(&self) -> f64 {
        self.k[2].value / self.k[1].value.powf(1.5)
    }

    /// `k4 / k2^2`.
    pub fn excess_kurtosis(&self) -> f64 {
        self.k[3].value / (self.k[1].value * self.k[1].value)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `xs` and N(0, 1).
pub fn ks_distance_normal(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 1.0;
    }
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf(x);
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    d.clamp(0.0, 1.0)
}

/// Mean with its standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_with_stderr(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return Estimate {
            value: mean,
            stderr: f64::NAN,
        };
    }
    let var = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
    Estimate {
        value: mean,
        stderr: (var / n).sqrt(),
    }
}

/// Weighted least-squares line `y = a + b x`; returns the slope with its
/// standard error. Weights are `1 / sigma^2`.
pub fn weighted_slope(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Estimate {
    let w: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(xs).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(ys).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(xs).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(xs.iter().zip(ys)).map(|(w, (x, y))| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    Estimate {
        value: (sw * sxy - sx * sy) / det,
        stderr: (sw / det).sqrt(),
    }
}

/// Ordinary least-squares slope.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fixed-range histogram; values outside `[lo, hi)` land in the edge bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for &x in xs {
            if !x.is_finite() {
                continue;
            }
            let b = ((x - lo) / width).floor();
            let b = b.clamp(0.0, (bins - 1) as f64) as usize;
            counts[b] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn kstats_of_small_sample_by_hand() {
        // 1,2,3,4,10: mean 4, m2 sum 50 -> k2 = 12.5
        let ks = KStatistics::from_sample(&[1.0, 2.0, 3.0, 4.0, 10.0]).unwrap();
        assert!((ks.k[0].value - 4.0).abs() < 1e-14);
        assert!((ks.k[1].value - 12.5).abs() < 1e-12);
        // sum of cubed deviations: -27 - 8 - 1 + 0 + 216 = 180; k3 = n/((n-1)(n-2)) * 180 = 75
        assert!((ks.k[2].value - 75.0).abs() < 1e-10);
    }

    #[test]
    fn kstats_of_normal_sample_are_near_zero_beyond_two() {
        let mut rng = crate::rng::stream(1, 0);
        let xs: Vec<f64> = (0..20000)
            .map(|_| {
                // Box-Muller
                let u: f64 = rng.random::<f64>().max(1e-300);
                let v: f64 = rng.random();
                (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
            })
            .collect();
        let ks = KStatistics::from_sample(&xs).unwrap();
        assert!((ks.k[1].value - 1.0).abs() < 4.0 * ks.k[1].stderr);
        assert!(ks.k[2].value.abs() < 4.0 * ks.k[2].stderr);
        assert!(ks.k[3].value.abs() < 4.0 * ks.k[3].stderr);
        assert!(ks_distance_normal(&xs) < 0.02);
        // jackknife error of the mean equals s / sqrt(n)
        let m = mean_with_stderr(&xs);
        assert!((ks.k[0].stderr - m.stderr).abs() < 1e-10);
    }

    #[test]
    fn ks_distance_of_shifted_sample_is_large() {
        let xs: Vec<f64> = (0..1000).map(|i| 3.0 + i as f64 * 1e-4).collect();
        assert!(ks_distance_normal(&xs) > 0.99);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let v = normal_cdf(1.959_963_984_540_054);
        assert!((v - 0.975).abs() < 1e-11, "{v}");
    }

    #[test]
    fn slope_of_exact_line() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        assert!((ols_slope(&xs, &ys) + 0.5).abs() < 1e-14);
        let s = weighted_slope(&xs, &ys, &[1.0; 4]);
        assert!((s.value + 0.5).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn kstats_shift_invariance(xs in proptest::collection::vec(-10.0f64..10.0, 6..40), c in -100.0f64..100.0) {
            let a = KStatistics::from_sample(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let b = KStatistics::from_sample(&shifted).unwrap();
            prop_assert!((a.k[0].value + c - b.k[0].value).abs() < 1e-9);
            for p in 1..4 {
                let scale = a.k[p].value.abs().max(1.0);
                prop_assert!((a.k[p].value - b.k[p].value).abs() < 1e-8 * scale);
            }
        }
    }
}
