//! Sectioned key-value run configuration.
//!
//! ```toml
//! [kernel]
//! spec = "ginibre"
//! [test_function]
//! spec = "radial:1"
//! [study]
//! rho = [4, 16, 64]
//! ```

use std::fmt;

use planar_dpp::{Kernel, TestFunction};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_RHO: [f64; 3] = [4.0, 16.0, 64.0];
pub const DEFAULT_N: usize = 96;
pub const DEFAULT_HALF_WIDTH: f64 = 2.0;
pub const DEFAULT_REPLICAS: usize = 2000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kernel: KernelSection,
    test_function: TestFunctionSection,
    #[serde(default)]
    study: StudySection,
    #[serde(default)]
    sampler: SamplerSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    spec: String,
    envelope: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestFunctionSection {
    spec: String,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudySection {
    rho: Option<OneOrMany>,
    replicas: Option<i64>,
    seed: Option<i64>,
    samples: Option<i64>,
    orders: Option<Vec<i64>>,
    h: Option<f64>,
    points: Option<i64>,
    c: Option<f64>,
    trials: Option<i64>,
    variance_quadrature: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplerSection {
    n: Option<i64>,
    half_width: Option<f64>,
    jitter: Option<bool>,
    restrict_to_support: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
    histogram_bins: Option<i64>,
}

/// A validated configuration with every default filled in. Serialises to the
/// config echo embedded in all outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub kernel: String,
    pub envelope: String,
    pub non_reproducing: bool,
    pub test_function: String,
    pub rho: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub samples: usize,
    pub orders: Vec<u32>,
    pub h: f64,
    pub points: usize,
    pub c: f64,
    pub trials: usize,
    pub variance_quadrature: bool,
    pub n: usize,
    pub half_width: f64,
    pub jitter: bool,
    pub restrict_to_support: bool,
    /// Where artifacts go; not part of the echo, so it does not change the hash.
    #[serde(skip)]
    pub out_dir: String,
    pub histogram_bins: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}, key `{}`: {}", self.key, self.message),
            None => write!(f, "key `{}`: {}", self.key, self.message),
        }
    }
}

/// 1-based line of `key = ...` inside `[section]`.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn from_toml_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let message = e.message().trim().to_string();
    let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    let key = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .or_else(|| {
            let l = text.lines().nth(line? - 1)?;
            let (k, _) = l.split_once('=')?;
            Some(k.trim().to_string())
        })
        .unwrap_or_default();
    ConfigError { line, key, message }
}

struct Validator<'a> {
    text: &'a str,
}

impl Validator<'_> {
    fn fail(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: locate(self.text, section, key),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn count(&self, section: &str, key: &str, v: Option<i64>, default: usize, min: usize) -> Result<usize, ConfigError> {
        match v {
            None => Ok(default),
            Some(x) if x >= min as i64 => Ok(x as usize),
            Some(x) => Err(self.fail(section, key, format!("{x} is below the minimum {min}"))),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| from_toml_error(text, &e))?;
    let v = Validator { text };

    let kernel: Kernel = raw
        .kernel
        .spec
        .parse()
        .map_err(|e| v.fail("kernel", "spec", format!("{e}")))?;
    let envelope = raw.kernel.envelope.unwrap_or_else(|| "auto".into());
    crate::commands::parse_envelope(&envelope, &kernel).map_err(|e| v.fail("kernel", "envelope", format!("{e}")))?;
    let f: TestFunction = raw
        .test_function
        .spec
        .parse()
        .map_err(|e| v.fail("test_function", "spec", format!("{e}")))?;

    let s = raw.study;
    let rho = match s.rho {
        None => DEFAULT_RHO.to_vec(),
        Some(OneOrMany::One(r)) => vec![r],
        Some(OneOrMany::Many(rs)) => rs,
    };
    validate_rho(&rho).map_err(|m| v.fail("study", "rho", m))?;
    let seed = match s.seed {
        None => 0,
        Some(x) if x >= 0 => x as u64,
        Some(x) => return Err(v.fail("study", "seed", format!("{x} must be nonnegative"))),
    };
    let orders = match s.orders {
        None => (3..=8).collect(),
        Some(os) => {
            if os.is_empty() || os.iter().any(|&k| !(2..=12).contains(&k)) {
                return Err(v.fail("study", "orders", "orders must be a nonempty list within 2..=12"));
            }
            os.into_iter().map(|k| k as u32).collect()
        }
    };
    let h = s.h.unwrap_or(1e-5);
    if !(h > 0.0 && h <= 1e-4) {
        return Err(v.fail("study", "h", format!("{h} must lie in (0, 1e-4]")));
    }
    let c = s.c.unwrap_or(0.5);
    if !(c > 0.0 && c <= 1.0) {
        return Err(v.fail("study", "c", format!("{c} must lie in (0, 1]")));
    }

    let sm = raw.sampler;
    let n = v.count("sampler", "n", sm.n, DEFAULT_N, planar_dpp::sampler::MIN_GRID)?;
    let half_width = sm.half_width.unwrap_or(DEFAULT_HALF_WIDTH);
    if !(half_width > f.support_radius() && half_width.is_finite()) {
        return Err(v.fail(
            "sampler",
            "half_width",
            format!("{half_width} must exceed the support radius {}", f.support_radius()),
        ));
    }

    Ok(RunConfig {
        non_reproducing: !kernel.is_reproducing(),
        kernel: kernel.id(),
        envelope,
        test_function: f.id(),
        rho,
        replicas: v.count("study", "replicas", s.replicas, DEFAULT_REPLICAS, planar_dpp::harness::MIN_REPLICAS)?,
        seed,
        samples: v.count("study", "samples", s.samples, 200_000, 10_000)?,
        orders,
        h,
        points: v.count("study", "points", s.points, 100, 1)?,
        c,
        trials: v.count("study", "trials", s.trials, 10_000, 1)?,
        variance_quadrature: s.variance_quadrature.unwrap_or(true),
        n,
        half_width,
        jitter: sm.jitter.unwrap_or(false),
        restrict_to_support: sm.restrict_to_support.unwrap_or(true),
        out_dir: raw.output.dir.unwrap_or_else(|| "out".into()),
        histogram_bins: v.count("output", "histogram_bins", raw.output.histogram_bins, 40, 0)?,
    })
}

pub fn validate_rho(rho: &[f64]) -> Result<(), String> {
    if rho.is_empty() {
        return Err("schedule is empty".into());
    }
    if let Some(r) = rho.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(format!("{r} must be positive"));
    }
    if rho.windows(2).any(|w| w[0] >= w[1]) {
        return Err("schedule must be strictly ascending".into());
    }
    Ok(())
}

impl RunConfig {
    pub fn kernel(&self) -> Result<Kernel, CliError> {
        Ok(self.kernel.parse()?)
    }

    pub fn test_function(&self) -> Result<TestFunction, CliError> {
        Ok(self.test_function.parse()?)
    }

    pub fn study(&self) -> Result<planar_dpp::harness::StudyConfig, CliError> {
        Ok(planar_dpp::harness::StudyConfig {
            kernel: self.kernel()?,
            f: self.test_function()?,
            schedule: self.rho.clone(),
            replicas: self.replicas,
            seed: self.seed,
            grid_n: self.n,
            half_width: self.half_width,
            jitter: self.jitter,
            restrict_to_support: self.restrict_to_support,
            variance_quadrature: self.variance_quadrature,
            histogram_bins: self.histogram_bins,
        })
    }
}
