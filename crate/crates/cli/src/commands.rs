//! Subcommand pipelines. Each returns whether its scientific checks passed.

use std::fmt::Write as _;

use planar_dpp::cumulants::{
    composition_sums, cumulant_mc, expectation, limit_predictions, symmetry_checks, variance_quadrature,
    CompositionSums, CumulantEstimate, LimitPredictions, SymmetryReport, VarianceQuadrature,
};
use planar_dpp::envelopes::{
    check_axioms_for, envelope_of, reproducing_moment_identity, verify_domination, AxiomReport, DominationReport,
    Envelope, ReproducingMoments,
};
use planar_dpp::harness::{nonreproducing_study, run_study, CltReport, NonreproducingReport, RhoRecord};
use planar_dpp::kernels::PlanarPoint;
use planar_dpp::rng::{derive_seed, stream};
use planar_dpp::sampler::{ClampReport, DppSampler, GridSpec, Window};
use planar_dpp::{Error, Kernel};
use rand::Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Meta, OutputDir};

/// `auto | scaled:<c> | powerlaw:<amplitude>:<exponent>`; `scaled` multiplies
/// the kernel's own envelope.
pub fn parse_envelope(spec: &str, kernel: &Kernel) -> Result<Envelope, Error> {
    let bad = || Error::Argument(format!("unrecognised envelope '{spec}'"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.trim().split(':').collect();
    match parts.as_slice() {
        ["auto"] => envelope_of(kernel),
        ["scaled", c] => {
            let c = num(c)?;
            if !(c > 0.0 && c.is_finite()) {
                return Err(bad());
            }
            Ok(Envelope::Scaled {
                base: Box::new(envelope_of(kernel)?),
                c,
            })
        }
        ["powerlaw", a, e] => {
            let (amplitude, exponent) = (num(a)?, num(e)?);
            if !(amplitude > 0.0 && exponent > 0.0) {
                return Err(bad());
            }
            Ok(Envelope::PowerLaw { amplitude, exponent })
        }
        _ => Err(bad()),
    }
}

#[derive(Serialize)]
struct EnvelopeReport {
    kernel: String,
    envelope: String,
    axioms: AxiomReport,
    domination: DominationSummary,
    moment_identity: Option<ReproducingMoments>,
    passed: bool,
}

#[derive(Serialize)]
struct DominationSummary {
    trials: usize,
    max_ratio: f64,
    violations: usize,
    holds: bool,
}

impl From<&DominationReport> for DominationSummary {
    fn from(d: &DominationReport) -> Self {
        DominationSummary {
            trials: d.trials,
            max_ratio: d.max_ratio,
            violations: d.violations.len(),
            holds: d.holds(),
        }
    }
}

pub fn check_envelope(config: &RunConfig, out: &OutputDir) -> Result<bool, CliError> {
    let meta = Meta::new("check-envelope", config);
    let kernel = config.kernel()?;
    let env = parse_envelope(&config.envelope, &kernel)?;
    let axioms = check_axioms_for(&env, &config.rho)?;
    let domination = verify_domination(&kernel, &env, config.trials, config.seed)?;
    let moment_identity = reproducing_moment_identity(&env).ok();
    let passed = axioms.all_ok() && domination.holds();
    let mut rows = String::new();
    for r in &axioms.reports {
        writeln!(rows, "{},{},{},{}", r.rho, r.sup_over_rho, r.l1, r.third_moment_scaled).unwrap();
    }
    out.write_table("envelope.csv", &meta, "rho,sup_over_rho,l1,third_moment_scaled", &rows)?;
    out.write_json(
        "report.json",
        &meta,
        &EnvelopeReport {
            kernel: config.kernel.clone(),
            envelope: config.envelope.clone(),
            domination: (&domination).into(),
            axioms,
            moment_identity,
            passed,
        },
    )?;
    Ok(passed)
}

#[derive(Serialize)]
struct PredictRecord {
    rho: f64,
    /// `E[Tr_rho f]` by quadrature.
    e: f64,
    var_quadrature: VarianceQuadrature,
    c3: CumulantEstimate,
}

#[derive(Serialize)]
struct PredictReport {
    kernel: String,
    test_function: String,
    mu_f: Option<f64>,
    sigma2_f: Option<f64>,
    records: Vec<PredictRecord>,
}

pub fn predict(config: &RunConfig, out: &OutputDir) -> Result<bool, CliError> {
    let meta = Meta::new("predict", config);
    let base = config.kernel()?;
    let f = config.test_function()?;
    let limits: Option<LimitPredictions> = if base.has_translation_invariant_modulus() && !matches!(base, Kernel::Zero) {
        Some(limit_predictions(&base, &f)?)
    } else {
        None
    };
    let mut records = Vec::new();
    for &rho in &config.rho {
        let k = base.dilate(rho)?;
        let rec = (|| -> planar_dpp::Result<PredictRecord> {
            Ok(PredictRecord {
                rho,
                e: expectation(&k, &f)?,
                var_quadrature: variance_quadrature(&k, &f)?,
                c3: cumulant_mc(&k, &f, 3, config.samples, derive_seed(config.seed, rho.to_bits()))?,
            })
        })()
        .map_err(|e| e.at_rho(rho))?;
        records.push(rec);
    }
    out.write_json(
        "report.json",
        &meta,
        &PredictReport {
            kernel: config.kernel.clone(),
            test_function: config.test_function.clone(),
            mu_f: limits.map(|l| l.mu_f),
            sigma2_f: limits.map(|l| l.sigma2_f),
            records,
        },
    )?;
    Ok(true)
}

#[derive(Serialize)]
struct SymmetrySummary {
    k: usize,
    points: usize,
    h: f64,
    bound: f64,
    /// Largest Richardson residual of each identity over the sampled points.
    max_residuals: [f64; 5],
    passed: bool,
    worst: Option<SymmetryReport>,
}

#[derive(Serialize)]
struct SymmetryOutput {
    test_function: String,
    sums: Vec<CompositionSums>,
    checks: Vec<SymmetrySummary>,
    passed: bool,
}

pub fn symmetry(config: &RunConfig, out: &OutputDir) -> Result<bool, CliError> {
    let meta = Meta::new("symmetry", config);
    let f = config.test_function()?;
    let sums: Vec<CompositionSums> = config
        .orders
        .iter()
        .filter(|&&k| k >= 3)
        .map(|&k| composition_sums(k))
        .collect::<Result<_, _>>()?;
    let mut checks = Vec::new();
    for &k in config.orders.iter().filter(|&&k| (2..=5).contains(&k)) {
        let k = k as usize;
        let mut rng = stream(derive_seed(config.seed, k as u64), 0);
        let reach = 0.9 * f.support_radius();
        let mut max_residuals = [0.0f64; 5];
        let mut worst: Option<(f64, SymmetryReport)> = None;
        let mut passed = true;
        for _ in 0..config.points {
            let r = reach * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            let rep = symmetry_checks(k, &f, PlanarPoint::new(r * t.cos(), r * t.sin()), config.h)?;
            let res = rep.residuals();
            for (m, v) in max_residuals.iter_mut().zip(res) {
                *m = m.max(v.abs());
            }
            passed &= rep.passes();
            let peak = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if worst.as_ref().is_none_or(|(p, _)| peak > *p) {
                worst = Some((peak, rep));
            }
        }
        checks.push(SymmetrySummary {
            k,
            points: config.points,
            h: config.h,
            bound: 10.0 * config.h * config.h,
            max_residuals,
            passed,
            worst: worst.map(|w| w.1),
        });
    }
    let passed = sums.iter().all(|s| s.both_zero) && checks.iter().all(|c| c.passed);
    let mut rows = String::new();
    for s in &sums {
        writeln!(rows, "{},{},{},{}", s.k, s.s, s.s_prime, s.both_zero).unwrap();
    }
    out.write_table("symmetry.csv", &meta, "k,s_k,s_prime_k,both_zero", &rows)?;
    out.write_json(
        "report.json",
        &meta,
        &SymmetryOutput {
            test_function: config.test_function.clone(),
            sums,
            checks,
            passed,
        },
    )?;
    Ok(passed)
}

#[derive(Serialize)]
struct SampleSidecar {
    kernel: String,
    rho: f64,
    window: Window,
    grid: GridSpec,
    seed: u64,
    replicas: usize,
    jitter: bool,
    expected_count: f64,
    count_variance: f64,
    trace: f64,
    clamp: ClampReport,
}

fn rho_tag(rho: f64) -> String {
    format!("{rho}")
}

pub fn sample(config: &RunConfig, out: &OutputDir) -> Result<bool, CliError> {
    let meta = Meta::new("sample", config);
    let base = config.kernel()?;
    let window = Window::centered(config.half_width)?;
    let grid = GridSpec::new(config.n)?;
    for &rho in &config.rho {
        let k = base.dilate(rho)?;
        let s = DppSampler::new(&k, &window, &grid)
            .map_err(|e| e.at_rho(rho))?
            .with_jitter(config.jitter);
        let seed = derive_seed(config.seed, rho.to_bits());
        let configs = planar_dpp::parallel::try_map_indexed(config.replicas, |r| s.sample(seed, r as u64))
            .map_err(|e| e.at_rho(rho))?;
        let mut rows = String::new();
        for c in &configs {
            for p in &c.points {
                writeln!(rows, "{},{},{}", c.replica, p.re, p.im).unwrap();
            }
        }
        let tag = rho_tag(rho);
        out.write_table(&format!("configurations_rho{tag}.csv"), &meta, "replica,re,im", &rows)?;
        let sp = s.spectrum();
        out.write_json(
            &format!("configurations_rho{tag}.json"),
            &meta,
            &SampleSidecar {
                kernel: k.id(),
                rho,
                window,
                grid,
                seed: config.seed,
                replicas: config.replicas,
                jitter: config.jitter,
                expected_count: sp.expected_count(),
                count_variance: sp.count_variance(),
                trace: sp.trace,
                clamp: sp.clamp,
            },
        )?;
    }
    Ok(true)
}

fn write_replicas(out: &OutputDir, meta: &Meta, records: &[RhoRecord], bins: usize) -> Result<(), CliError> {
    let mut rows = String::new();
    for rec in records {
        let z = rec.standardized();
        for (r, (t, s)) in rec.tr.iter().zip(&z).enumerate() {
            writeln!(rows, "{},{},{},{},{}", rec.rho, r, t, t - rec.expectation, s).unwrap();
        }
        if bins > 0 {
            if let Some(h) = &rec.histogram {
                let mut lines = String::new();
                let w = h.bin_width();
                let n: u64 = h.counts.iter().sum();
                for (i, c) in h.counts.iter().enumerate() {
                    let lo = h.lo + i as f64 * w;
                    writeln!(lines, "{} {} {} {}", lo, lo + w, c, *c as f64 / (n as f64 * w)).unwrap();
                }
                out.write_table(&format!("hist_rho{}.dat", rho_tag(rec.rho)), meta, "# bin_lo bin_hi count density", &lines)?;
            }
        }
    }
    out.write_table("replicas.csv", meta, "rho,replica,tr,tr_centered,tr_standardized", &rows)?;
    Ok(())
}

pub fn clt(config: &RunConfig, out: &OutputDir) -> Result<bool, CliError> {
    let meta = Meta::new("clt", config);
    let report: CltReport = run_study(&config.study()?)?;
    write_replicas(out, &meta, &report.records, config.histogram_bins)?;
    out.write_json("report.json", &meta, &report)?;
    Ok(true)
}

pub fn nonreproducing(config: &RunConfig, out: &OutputDir) -> Result<bool, CliError> {
    let meta = Meta::new("nonreproducing", config);
    let report: NonreproducingReport = nonreproducing_study(config.c, &config.study()?)?;
    write_replicas(out, &meta, &report.study.records, config.histogram_bins)?;
    out.write_json("report.json", &meta, &report)?;
    Ok(report.holds)
}
