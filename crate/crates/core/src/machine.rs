//! Machine descriptions: core counts, clock ranges and the clock-domain layout.

use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthTable;
use crate::error::{invalid, Error, Result};

/// Slack applied to frequency comparisons so that grid values such as
/// `1.2 + 3 * 0.1` compare equal to their decimal spelling.
pub const FREQ_EPS: f64 = 1e-9;

/// Rounds a frequency to the nearest nano-GHz.
pub fn snap_ghz(f: f64) -> f64 {
    (f * 1e9).round() / 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqRange {
    pub min_ghz: f64,
    pub max_ghz: f64,
    pub step_ghz: f64,
}

impl FreqRange {
    pub fn new(min_ghz: f64, max_ghz: f64, step_ghz: f64) -> Self {
        Self {
            min_ghz,
            max_ghz,
            step_ghz,
        }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if !(self.min_ghz.is_finite() && self.max_ghz.is_finite() && self.min_ghz > 0.0) {
            return Err(invalid(format!("{what}: frequencies must be finite and > 0")));
        }
        if self.max_ghz < self.min_ghz {
            return Err(invalid(format!(
                "{what}: empty range [{}, {}]",
                self.min_ghz, self.max_ghz
            )));
        }
        if !(self.step_ghz.is_finite() && self.step_ghz > 0.0) {
            return Err(invalid(format!("{what}: step must be > 0")));
        }
        Ok(())
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.min_ghz - FREQ_EPS && f <= self.max_ghz + FREQ_EPS
    }

    pub fn check(&self, what: &'static str, f: f64) -> Result<()> {
        if self.contains(f) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what,
                value: f,
                min: self.min_ghz,
                max: self.max_ghz,
            })
        }
    }

    /// Grid `min, min + step, ...` up to and including `max` (within slack).
    pub fn grid(&self, step_ghz: f64) -> Vec<f64> {
        let span = self.max_ghz - self.min_ghz;
        let count = ((span + FREQ_EPS) / step_ghz).floor() as usize;
        (0..=count)
            .map(|k| snap_ghz(self.min_ghz + k as f64 * step_ghz))
            .collect()
    }
}

/// Whether the Uncore clock can be set independently of the core clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncoreMode {
    /// Separate clock domain (Haswell/Broadwell and later).
    Independent,
    /// Uncore runs at the core clock (Sandy/Ivy Bridge).
    Slaved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub name: String,
    pub n_cores: u32,
    pub core_freq: FreqRange,
    /// Absent (or equal to `core_freq`) on slaved machines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncore_freq: Option<FreqRange>,
    pub uncore_mode: UncoreMode,
    /// Peak work items per cycle and core (e.g. 8 flop/cy for AVX DP).
    pub peak_work_per_cycle: f64,
    pub bandwidth: BandwidthTable,
}

impl MachineSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_cores < 1 {
            return Err(invalid("machine: n_cores must be >= 1"));
        }
        self.core_freq.validate("core frequency range")?;
        match (self.uncore_mode, &self.uncore_freq) {
            (UncoreMode::Slaved, Some(r)) if *r != self.core_freq => {
                return Err(invalid(
                    "machine: slaved Uncore mode forbids a distinct Uncore frequency range",
                ))
            }
            (UncoreMode::Independent, None) => {
                return Err(invalid(
                    "machine: independent Uncore mode requires an uncore_freq range",
                ))
            }
            (_, Some(r)) => r.validate("Uncore frequency range")?,
            _ => {}
        }
        if !(self.peak_work_per_cycle.is_finite() && self.peak_work_per_cycle > 0.0) {
            return Err(invalid("machine: peak_work_per_cycle must be > 0"));
        }
        self.bandwidth.validate()?;
        Ok(())
    }

    pub fn uncore_range(&self) -> FreqRange {
        match self.uncore_mode {
            UncoreMode::Slaved => self.core_freq,
            UncoreMode::Independent => self.uncore_freq.unwrap_or(self.core_freq),
        }
    }

    pub fn is_slaved(&self) -> bool {
        self.uncore_mode == UncoreMode::Slaved
    }

    /// Resolves the Uncore clock for a core clock: slaved machines follow the
    /// core, independent machines default to their maximum Uncore clock.
    pub fn resolve_uncore(&self, f_core: f64, f_uncore: Option<f64>) -> Result<f64> {
        match (self.uncore_mode, f_uncore) {
            (UncoreMode::Slaved, None) => Ok(f_core),
            (UncoreMode::Slaved, Some(u)) if (u - f_core).abs() <= FREQ_EPS => Ok(f_core),
            (UncoreMode::Slaved, Some(u)) => Err(invalid(format!(
                "machine `{}` clocks the Uncore with the cores; f_uncore {u} != f_core {f_core}",
                self.name
            ))),
            (UncoreMode::Independent, Some(u)) => Ok(u),
            (UncoreMode::Independent, None) => Ok(self.uncore_range().max_ghz),
        }
    }

    pub fn check_point(&self, n: u32, f_core: f64, f_uncore: f64) -> Result<()> {
        if n < 1 || n > self.n_cores {
            return Err(invalid(format!(
                "core count {n} outside 1..={} for machine `{}`",
                self.n_cores, self.name
            )));
        }
        self.core_freq.check("f_core", f_core)?;
        self.uncore_range().check("f_uncore", f_uncore)?;
        if self.is_slaved() && (f_core - f_uncore).abs() > FREQ_EPS {
            return Err(invalid(format!(
                "f_uncore must equal f_core on slaved machine `{}`",
                self.name
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoints() {
        let r = FreqRange::new(1.2, 2.7, 0.1);
        let g = r.grid(0.1);
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], 1.2);
        assert_eq!(g[5], 1.7);
        assert_eq!(*g.last().unwrap(), 2.7);
    }

    #[test]
    fn range_check_reports_interval() {
        let r = FreqRange::new(1.2, 2.7, 0.1);
        let err = r.check("f_core", 3.0).unwrap_err().to_string();
        assert!(err.contains("[1.2, 2.7]"), "{err}");
        assert!(r.check("f_core", 1.2 + 3.0 * 0.1).is_ok());
    }
}
