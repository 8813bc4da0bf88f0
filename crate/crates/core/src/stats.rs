//! Statistics over chip fleets and repeated measurements.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::Exclusion;
use crate::measurement::MeasurementRecord;

/// Repeated measurements with a larger coefficient of variation are rejected.
pub const DEFAULT_MAX_CV: f64 = 0.02;
/// Distance from the mean, in standard deviations, beyond which a chip is an outlier.
pub const OUTLIER_SIGMAS: f64 = 2.0;

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn check_values(values: &[f64], min_len: usize) -> Result<()> {
    if values.len() < min_len {
        return Err(invalid(format!("need at least {min_len} values, got {}", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("non-finite value {v}")));
    }
    Ok(())
}

/// Sample standard deviation over mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64> {
    check_values(values, 2)?;
    let m = mean(values);
    if m == 0.0 {
        return Err(Error::Degenerate("coefficient of variation is undefined for zero mean".into()));
    }
    Ok(sample_std(values, m) / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub std: f64,
    /// All values equal: the distribution is a point mass.
    pub degenerate: bool,
}

/// Moment-based Gaussian with the sample standard deviation.
pub fn gaussian_fit(values: &[f64]) -> Result<GaussianFit> {
    check_values(values, 2)?;
    let m = mean(values);
    let std = sample_std(values, m);
    Ok(GaussianFit {
        mean: m,
        std,
        degenerate: std == 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bins {
    /// `ceil(sqrt(n))` bins.
    Auto,
    Count(usize),
}

impl std::str::FromStr for Bins {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bins::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(Bins::Count(k)),
            _ => Err(invalid(format!("bins must be `auto` or a positive count, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub probabilities: Vec<f64>,
}

/// Equal-width histogram over `[min, max]`; the maximum falls in the last
/// bin. Identical values give one bin with probability 1.
pub fn histogram(values: &[f64], bins: Bins) -> Result<Histogram> {
    check_values(values, 1)?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = values.len();
    let k = if lo == hi {
        1
    } else {
        match bins {
            Bins::Auto => (n as f64).sqrt().ceil() as usize,
            Bins::Count(k) if k > 0 => k,
            Bins::Count(_) => return Err(invalid("bin count must be positive")),
        }
    };
    let width = (hi - lo) / k as f64;
    let edges: Vec<f64> = (0..=k).map(|i| if i == k { hi } else { lo + i as f64 * width }).collect();
    let mut counts = vec![0usize; k];
    for &v in values {
        let i = if width == 0.0 { 0 } else { (((v - lo) / width) as usize).min(k - 1) };
        counts[i] += 1;
    }
    let probabilities = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(Histogram {
        edges,
        counts,
        probabilities,
    })
}

/// One parameter measured on many chips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSample {
    pub parameter: String,
    /// `(chip_id, value)`.
    pub values: Vec<(String, f64)>,
}

impl FleetSample {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid(format!("parameter `{}` has no values", self.parameter)));
        }
        let mut seen = BTreeSet::new();
        for (chip, v) in &self.values {
            if !seen.insert(chip.as_str()) {
                return Err(invalid(format!("parameter `{}`: duplicate chip `{chip}`", self.parameter)));
            }
            if !v.is_finite() {
                return Err(invalid(format!("parameter `{}`: non-finite value for `{chip}`", self.parameter)));
            }
        }
        Ok(())
    }

    fn sorted(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<(&str, f64)> = self.values.iter().map(|(c, x)| (c.as_str(), *x)).collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub parameter: String,
    pub chips: usize,
    pub mean: f64,
    pub std: f64,
    /// `None` when the mean is zero.
    pub cv: Option<f64>,
    /// Chips beyond `mean +- 2 std`, sorted.
    pub outliers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub a: String,
    pub b: String,
    /// Chips carrying both parameters.
    pub chips: usize,
    /// Pearson coefficient; `None` with fewer than 3 chips or zero variance.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSummary {
    pub parameters: Vec<ParameterSummary>,
    /// Parameters for which each chip is an outlier; chips without outliers are omitted.
    pub chip_outliers: BTreeMap<String, Vec<String>>,
    /// Pairwise value correlations across chips.
    pub correlations: Vec<Correlation>,
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 3 {
        return None;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Per-parameter mean, spread and outliers, plus per-chip outlier lists and
/// cross-parameter correlations. Independent of chip order.
pub fn fleet_summary(samples: &[FleetSample]) -> Result<FleetSummary> {
    let mut parameters = Vec::with_capacity(samples.len());
    let mut chip_outliers: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut names = BTreeSet::new();
    for s in samples {
        s.validate()?;
        if !names.insert(s.parameter.as_str()) {
            return Err(invalid(format!("duplicate parameter `{}`", s.parameter)));
        }
        let sorted = s.sorted();
        if sorted.len() < 2 {
            return Err(invalid(format!("parameter `{}` needs at least 2 chips", s.parameter)));
        }
        let values: Vec<f64> = sorted.iter().map(|p| p.1).collect();
        let g = gaussian_fit(&values)?;
        let outliers: Vec<String> = sorted
            .iter()
            .filter(|(_, v)| g.std > 0.0 && (v - g.mean).abs() > OUTLIER_SIGMAS * g.std)
            .map(|(c, _)| c.to_string())
            .collect();
        for chip in &outliers {
            chip_outliers.entry(chip.clone()).or_default().push(s.parameter.clone());
        }
        parameters.push(ParameterSummary {
            parameter: s.parameter.clone(),
            chips: values.len(),
            mean: g.mean,
            std: g.std,
            cv: (g.mean != 0.0).then(|| g.std / g.mean),
            outliers,
        });
    }
    for flagged in chip_outliers.values_mut() {
        flagged.sort();
    }

    let mut correlations = Vec::new();
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let bv: BTreeMap<&str, f64> = b.values.iter().map(|(c, v)| (c.as_str(), *v)).collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = a
                .sorted()
                .into_iter()
                .filter_map(|(c, x)| bv.get(c).map(|y| (x, *y)))
                .unzip();
            correlations.push(Correlation {
                a: a.parameter.clone(),
                b: b.parameter.clone(),
                chips: xs.len(),
                pearson: pearson(&xs, &ys),
            });
        }
    }
    Ok(FleetSummary {
        parameters,
        chip_outliers,
        correlations,
    })
}

/// Rejects groups of repeated rows (same chip, kernel, core count and clocks)
/// whose performance or power varies by more than `max_cv`. Returns the kept
/// records in input order and one exclusion per rejected row.
pub fn screen_repeatability(records: &[MeasurementRecord], max_cv: f64) -> (Vec<MeasurementRecord>, Vec<Exclusion>) {
    let repeat = |a: &MeasurementRecord, b: &MeasurementRecord| a.same_setting(b) && a.n == b.n;
    let mut kept = Vec::with_capacity(records.len());
    let mut excluded = Vec::new();
    for r in records {
        let group: Vec<&MeasurementRecord> = records.iter().filter(|o| repeat(o, r)).collect();
        let worst = if group.len() < 2 {
            None
        } else {
            let perf: Vec<f64> = group.iter().map(|o| o.performance).collect();
            let power: Vec<f64> = group.iter().map(|o| o.power).collect();
            let cv = |v: &[f64]| coefficient_of_variation(v).map_or(f64::INFINITY, f64::abs);
            Some(cv(&perf).max(cv(&power)))
        };
        match worst {
            Some(cv) if cv > max_cv => excluded.push(Exclusion {
                point: r.label(),
                reason: format!("repeated measurements vary by CV {cv:.4} > {max_cv}"),
            }),
            _ => kept.push(r.clone()),
        }
    }
    (kept, excluded)
}
