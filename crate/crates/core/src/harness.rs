//! Monte Carlo studies of `Tr_rho(f)` along a schedule of dilations.
//!
//! For each `rho` the harness discretises `K_rho`, samples the marginal of
//! the grid process on the cells meeting the support of `f` (or the whole
//! window), and compares the empirical k-statistics of the linear statistic
//! with the quadrature expectation, the quadrature variance and the limits
//! `rho mu_f`, `sigma_f^2`.

use serde::Serialize;

use crate::cumulants::{expectation, expectation_abs, limit_predictions, nonreproducing_rate, variance_quadrature};
use crate::envelopes::envelope_of;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::parallel::try_map_indexed;
use crate::rng::derive_seed;
use crate::sampler::{linear_statistic, ClampReport, DppSampler, GridSpec, Window, MIN_GRID};
use crate::stats::{ks_distance_normal, mean_with_stderr, weighted_slope, Estimate, Histogram, KStatistics};
use crate::testfunctions::TestFunction;

/// Deltas for which Soshnikov ratios are reported.
pub const SOSHNIKOV_DELTAS: [f64; 3] = [0.25, 0.5, 1.0];
/// Envelope mass fraction allowed outside the margin.
pub const MARGIN_TAIL: f64 = 1e-3;
pub const MIN_REPLICAS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    /// The undilated kernel.
    pub kernel: Kernel,
    pub f: TestFunction,
    pub schedule: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub grid_n: usize,
    pub half_width: f64,
    pub jitter: bool,
    /// Sample only the cells meeting the support of `f`.
    pub restrict_to_support: bool,
    pub variance_quadrature: bool,
    /// Histogram bins for the standardised sample; 0 disables histograms.
    pub histogram_bins: usize,
}

impl StudyConfig {
    pub fn new(kernel: Kernel, f: TestFunction, schedule: Vec<f64>) -> StudyConfig {
        StudyConfig {
            kernel,
            f,
            schedule,
            replicas: 2000,
            seed: 0,
            grid_n: 96,
            half_width: 2.0,
            jitter: false,
            restrict_to_support: true,
            variance_quadrature: true,
            histogram_bins: 40,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::Argument("rho schedule is empty".into()));
        }
        if let Some(r) = self.schedule.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Argument(format!("rho = {r} must be positive")));
        }
        if self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("rho schedule must be strictly ascending".into()));
        }
        if self.replicas < MIN_REPLICAS {
            return Err(Error::Argument(format!(
                "replicas = {} is below the minimum {MIN_REPLICAS}",
                self.replicas
            )));
        }
        if self.grid_n < MIN_GRID {
            return Err(Error::Argument(format!(
                "grid n = {} is below the minimum {MIN_GRID}",
                self.grid_n
            )));
        }
        if !(self.half_width > self.f.support_radius()) {
            return Err(Error::Argument(format!(
                "window half-width {} does not contain the support radius {}",
                self.half_width,
                self.f.support_radius()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SoshnikovEntry {
    pub delta: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhoRecord {
    pub rho: f64,
    pub replicas: usize,
    /// `∫ f K_rho(z, z) dA` by quadrature.
    pub expectation: f64,
    /// `∫ |f| K_rho(z, z) dA` by quadrature.
    pub expectation_abs: f64,
    /// `rho mu_f`, for translation-invariant kernels.
    pub predicted_mean: Option<f64>,
    pub sigma2_f: Option<f64>,
    pub variance_quadrature: Option<f64>,
    /// k-statistics `k1..k4` of `Tr_rho(f)` with jackknife errors.
    pub kstats: KStatistics,
    /// Mean of `Tr_rho(f) - expectation`.
    pub centered_mean: Estimate,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_distance: f64,
    pub soshnikov: Vec<SoshnikovEntry>,
    pub expected_count: f64,
    pub mean_count: Estimate,
    pub cells: usize,
    pub clamp: ClampReport,
    /// Envelope mass radius at `MARGIN_TAIL`.
    pub margin: f64,
    /// Whether the window leaves that margin around the support of `f`.
    pub margin_ok: bool,
    pub histogram: Option<Histogram>,
    #[serde(skip)]
    pub tr: Vec<f64>,
}

impl RhoRecord {
    pub fn variance(&self) -> Estimate {
        self.kstats.k[1]
    }

    /// `(Tr - E) / sqrt(k2)` per replica.
    pub fn standardized(&self) -> Vec<f64> {
        let s = self.variance().value.sqrt();
        self.tr.iter().map(|t| (t - self.expectation) / s).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltReport {
    pub kernel: String,
    pub test_function: String,
    pub reproducing: bool,
    pub seed: u64,
    pub grid_n: usize,
    pub half_width: f64,
    pub jitter: bool,
    pub restrict_to_support: bool,
    pub records: Vec<RhoRecord>,
}

/// `E[Tr |f|] / Var^delta`; zero variance gives infinity, or NaN when the
/// numerator vanishes too.
fn ratio(e_abs: f64, var: f64, delta: f64) -> f64 {
    if var <= 0.0 {
        if e_abs == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        e_abs / var.powf(delta)
    }
}

/// Soshnikov ratio per `rho` with the quadrature `E[Tr |f|]` and the
/// empirical variance.
pub fn soshnikov_ratio(report: &CltReport, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("delta = {delta} must be positive")));
    }
    Ok(report
        .records
        .iter()
        .map(|r| ratio(r.expectation_abs, r.variance().value, delta))
        .collect())
}

/// Weighted slope of `log Var` against `log rho` across the schedule.
pub fn variance_slope(report: &CltReport) -> Estimate {
    let xs: Vec<f64> = report.records.iter().map(|r| r.rho.ln()).collect();
    let ys: Vec<f64> = report.records.iter().map(|r| r.variance().value.ln()).collect();
    let ss: Vec<f64> = report
        .records
        .iter()
        .map(|r| r.variance().stderr / r.variance().value)
        .collect();
    weighted_slope(&xs, &ys, &ss)
}

fn sampler_for(config: &StudyConfig, kernel: &Kernel) -> Result<DppSampler> {
    let window = Window::centered(config.half_width)?;
    let grid = GridSpec::new(config.grid_n)?;
    let s = if config.restrict_to_support {
        DppSampler::on_disk(kernel, &window, &grid, config.f.support_radius())?
    } else {
        DppSampler::new(kernel, &window, &grid)?
    };
    Ok(s.with_jitter(config.jitter))
}

fn margin_for(kernel: &Kernel) -> Result<f64> {
    if matches!(kernel.undilated(), Kernel::Zero) {
        return Ok(0.0);
    }
    Ok(envelope_of(kernel)?.mass_radius(MARGIN_TAIL))
}

fn run_rho(config: &StudyConfig, rho: f64) -> Result<RhoRecord> {
    let f = &config.f;
    let kernel = config.kernel.dilate(rho)?;
    let sampler = sampler_for(config, &kernel)?;
    let seed = derive_seed(config.seed, rho.to_bits());
    let draws = try_map_indexed(config.replicas, |r| {
        sampler
            .sample(seed, r as u64)
            .map(|c| (linear_statistic(&c, f), c.len() as f64))
    })?;
    let tr: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let counts: Vec<f64> = draws.iter().map(|d| d.1).collect();

    let e = expectation(&kernel, f)?;
    let e_abs = expectation_abs(&kernel, f)?;
    let base = config.kernel.undilated();
    let limits = if base.has_translation_invariant_modulus() && !matches!(base, Kernel::Zero) {
        Some(limit_predictions(base, f)?)
    } else {
        None
    };
    let vq = if config.variance_quadrature {
        Some(variance_quadrature(&kernel, f)?.value)
    } else {
        None
    };
    let kstats = KStatistics::from_sample(&tr)
        .ok_or_else(|| Error::Argument("too few replicas for k-statistics".into()))?;
    let centered: Vec<f64> = tr.iter().map(|t| t - e).collect();
    let var = kstats.variance();
    let standardized: Vec<f64> = centered.iter().map(|c| c / var.sqrt()).collect();
    let margin = margin_for(&kernel)?;
    let histogram = (config.histogram_bins > 0).then(|| Histogram::new(&standardized, -5.0, 5.0, config.histogram_bins));
    Ok(RhoRecord {
        rho,
        replicas: config.replicas,
        expectation: e,
        expectation_abs: e_abs,
        predicted_mean: limits.map(|l| rho * l.mu_f),
        sigma2_f: limits.map(|l| l.sigma2_f),
        variance_quadrature: vq,
        centered_mean: mean_with_stderr(&centered),
        skewness: kstats.skewness(),
        excess_kurtosis: kstats.excess_kurtosis(),
        ks_distance: ks_distance_normal(&standardized),
        soshnikov: SOSHNIKOV_DELTAS
            .iter()
            .map(|&delta| SoshnikovEntry {
                delta,
                ratio: ratio(e_abs, var, delta),
            })
            .collect(),
        kstats,
        expected_count: sampler.spectrum().expected_count(),
        mean_count: mean_with_stderr(&counts),
        cells: sampler.cells().len(),
        clamp: sampler.spectrum().clamp,
        margin,
        margin_ok: config.half_width >= f.support_radius() + margin,
        histogram,
        tr,
    })
}

pub fn run_study(config: &StudyConfig) -> Result<CltReport> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.schedule.len());
    for &rho in &config.schedule {
        records.push(run_rho(config, rho).map_err(|e| e.at_rho(rho))?);
    }
    Ok(CltReport {
        kernel: config.kernel.id(),
        test_function: config.f.id(),
        reproducing: config.kernel.is_reproducing(),
        seed: config.seed,
        grid_n: config.grid_n,
        half_width: config.half_width,
        jitter: config.jitter,
        restrict_to_support: config.restrict_to_support,
        records,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthPoint {
    pub rho: f64,
    pub var_over_rho: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonreproducingReport {
    pub c: f64,
    /// `c (1 - c) / pi ∫ f^2`.
    pub rate: f64,
    /// `0.9 rate`, the bound checked at the largest `rho`.
    pub threshold: f64,
    pub trajectory: Vec<GrowthPoint>,
    pub holds: bool,
    pub study: CltReport,
}

/// Runs the study for `c K_Ginibre` and checks `Var / rho >= 0.9 rate` at the
/// largest `rho`. The kernel of `config` is ignored.
pub fn nonreproducing_study(c: f64, config: &StudyConfig) -> Result<NonreproducingReport> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Argument(format!("c = {c} must lie in (0, 1]")));
    }
    let mut cfg = config.clone();
    cfg.kernel = Kernel::scaled(Kernel::ginibre(), c)?;
    let study = run_study(&cfg)?;
    let rate = nonreproducing_rate(c, &cfg.f);
    let threshold = 0.9 * rate;
    let trajectory: Vec<GrowthPoint> = study
        .records
        .iter()
        .map(|r| {
            let v = r.variance();
            GrowthPoint {
                rho: r.rho,
                var_over_rho: Estimate {
                    value: v.value / r.rho,
                    stderr: v.stderr / r.rho,
                },
            }
        })
        .collect();
    let holds = trajectory
        .last()
        .is_some_and(|g| g.var_over_rho.value >= threshold);
    Ok(NonreproducingReport {
        c,
        rate,
        threshold,
        trajectory,
        holds,
        study,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kernel: Kernel, f: TestFunction, schedule: Vec<f64>) -> StudyConfig {
        StudyConfig {
            replicas: 400,
            grid_n: 48,
            half_width: 1.5,
            variance_quadrature: false,
            seed: 9,
            ..StudyConfig::new(kernel, f, schedule)
        }
    }

    #[test]
    fn validation() {
        let f = TestFunction::radial(1.0).unwrap();
        let ok = StudyConfig::new(Kernel::ginibre(), f, vec![4.0, 16.0]);
        assert!(ok.validate().is_ok());
        for bad in [
            StudyConfig { schedule: vec![], ..ok.clone() },
            StudyConfig { schedule: vec![16.0, 4.0], ..ok.clone() },
            StudyConfig { schedule: vec![-1.0], ..ok.clone() },
            StudyConfig { replicas: 99, ..ok.clone() },
            StudyConfig { grid_n: 31, ..ok.clone() },
            StudyConfig { half_width: 1.0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn zero_test_function_has_zero_cumulants() {
        let f = TestFunction::radial(1.0).unwrap().scaled(0.0);
        let r = run_study(&small(Kernel::ginibre(), f, vec![4.0])).unwrap();
        let rec = &r.records[0];
        for k in rec.kstats.k {
            assert_eq!(k.value, 0.0);
        }
        let ratios = soshnikov_ratio(&r, 1.0).unwrap();
        assert!(ratios[0].is_nan());
    }

    #[test]
    fn zero_variance_ratio_is_infinite() {
        assert_eq!(ratio(1.0, 0.0, 0.5), f64::INFINITY);
        assert!(ratio(0.0, 0.0, 0.5).is_nan());
        assert!((ratio(2.0, 4.0, 0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_ginibre_study_is_centred() {
        let f = TestFunction::radial(1.0).unwrap();
        let r = run_study(&small(Kernel::ginibre(), f, vec![4.0, 16.0])).unwrap();
        for rec in &r.records {
            assert!(rec.centered_mean.value.abs() < 4.0 * rec.centered_mean.stderr);
            assert!((rec.predicted_mean.unwrap() - rec.expectation).abs() < 1e-10);
            assert!((rec.sigma2_f.unwrap() - 2.0 / 7.0).abs() < 1e-10);
            assert!((0.0..=1.0).contains(&rec.ks_distance));
            assert!(rec.kstats.k.iter().all(|k| k.stderr >= 0.0));
            assert_eq!(rec.histogram.as_ref().unwrap().counts.iter().sum::<u64>(), 400);
        }
        // E grows like rho while Var stays bounded
        let s = soshnikov_ratio(&r, 0.5).unwrap();
        assert!(s[1] > s[0]);
        assert!(r.reproducing);
    }

    #[test]
    fn sampler_errors_name_the_rho() {
        let f = TestFunction::radial(1.0).unwrap();
        let cfg = StudyConfig {
            grid_n: 32,
            half_width: 2.0,
            ..small(Kernel::ginibre(), f, vec![4.0, 256.0])
        };
        match run_study(&cfg) {
            Err(Error::AtRho { rho, source }) => {
                assert_eq!(rho, 256.0);
                assert!(matches!(*source, Error::RefineGrid { .. }));
            }
            other => panic!("expected an annotated error, got {other:?}"),
        }
    }

    #[test]
    fn margin_is_reported() {
        let f = TestFunction::radial(1.0).unwrap();
        let cfg = StudyConfig {
            half_width: 2.0,
            grid_n: 64,
            ..small(Kernel::ginibre(), f, vec![4.0, 16.0])
        };
        let r = run_study(&cfg).unwrap();
        // margin sqrt(2 ln 1000 / rho): 1.86 at rho = 4, 0.93 at rho = 16
        assert!(!r.records[0].margin_ok);
        assert!(r.records[1].margin_ok);
        assert!((r.records[1].margin - (2.0 * 1000f64.ln() / 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn nonreproducing_bound_constants() {
        let f = TestFunction::radial(1.0).unwrap();
        let half = nonreproducing_rate(0.5, &f);
        assert!((half - 1.0 / 36.0).abs() < 1e-12);
        assert!(half > nonreproducing_rate(0.25, &f));
        assert_eq!(nonreproducing_rate(1.0, &f), 0.0);
        let cfg = small(Kernel::ginibre(), f, vec![16.0]);
        let rep = nonreproducing_study(0.5, &cfg).unwrap();
        assert!(!rep.study.reproducing);
        assert!((rep.threshold - 0.9 / 36.0).abs() < 1e-12);
        let v = rep.trajectory[0].var_over_rho.value;
        // c (1 - c) rho / pi ∫ f^2 dominates at rho = 16
        assert!(v > 0.5 * half && v < 2.0 * half + 2.0 / 7.0 / 16.0, "{v}");
        assert!(matches!(nonreproducing_study(0.0, &cfg), Err(Error::Argument(_))));
    }
}
