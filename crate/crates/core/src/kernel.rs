//! Loop-kernel descriptions consumed by the predictors.

use serde::{Deserialize, Serialize};

use crate::ecm::EcmContributions;
use crate::error::{invalid, Result};
use crate::units::PerfUnit;

/// How a kernel's multicore performance is modeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind {
    /// Memory-bound loop modeled with refined ECM scaling. `t_l3_mem` is
    /// derived per operating point from `bytes_per_unit` and the measured
    /// saturated bandwidth.
    Saturating {
        t_comp: f64,
        t_reg_l1: f64,
        t_l1_l2: f64,
        t_l2_l3: f64,
        work_per_unit: f64,
        /// Memory traffic per work unit in bytes.
        bytes_per_unit: f64,
        /// Latency penalty in cycles; overwritten by fitting.
        #[serde(default)]
        p0: f64,
    },
    /// Runs at a fixed fraction of the chip's arithmetic peak.
    ScalableFractionOfPeak { peak_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDesc {
    pub name: String,
    /// Unit used when reporting performance, e.g. `GF/s`.
    pub perf_unit: String,
    #[serde(flatten)]
    pub kind: KernelKind,
}

impl KernelDesc {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(invalid("kernel name must not be empty"));
        }
        PerfUnit::parse(&self.perf_unit)?;
        match &self.kind {
            KernelKind::Saturating {
                bytes_per_unit, p0, ..
            } => {
                self.contributions_at(0.0).validate()?;
                if !(bytes_per_unit.is_finite() && *bytes_per_unit >= 0.0) {
                    return Err(invalid(format!(
                        "kernel `{}`: bytes_per_unit must be >= 0",
                        self.name
                    )));
                }
                if !(p0.is_finite() && *p0 >= 0.0) {
                    return Err(invalid(format!("kernel `{}`: p0 must be >= 0", self.name)));
                }
            }
            KernelKind::ScalableFractionOfPeak { peak_fraction } => {
                if !(*peak_fraction > 0.0 && *peak_fraction <= 1.0) {
                    return Err(invalid(format!(
                        "kernel `{}`: peak_fraction must lie in (0, 1]",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_saturating(&self) -> bool {
        matches!(self.kind, KernelKind::Saturating { .. })
    }

    pub fn p0(&self) -> f64 {
        match self.kind {
            KernelKind::Saturating { p0, .. } => p0,
            KernelKind::ScalableFractionOfPeak { .. } => 0.0,
        }
    }

    pub fn set_p0(&mut self, value: f64) {
        if let KernelKind::Saturating { p0, .. } = &mut self.kind {
            *p0 = value;
        }
    }

    /// Cycle contributions with the given memory term (zero for scalable kernels).
    pub fn contributions_at(&self, t_l3_mem: f64) -> EcmContributions {
        match self.kind {
            KernelKind::Saturating {
                t_comp,
                t_reg_l1,
                t_l1_l2,
                t_l2_l3,
                work_per_unit,
                ..
            } => EcmContributions {
                t_comp,
                t_reg_l1,
                t_l1_l2,
                t_l2_l3,
                t_l3_mem,
                work_per_unit,
            },
            KernelKind::ScalableFractionOfPeak { .. } => EcmContributions {
                t_comp: 0.0,
                t_reg_l1: 0.0,
                t_l1_l2: 0.0,
                t_l2_l3: 0.0,
                t_l3_mem: 0.0,
                work_per_unit: 1.0,
            },
        }
    }

    /// Memory cycles per work unit and bandwidth ceiling (work/s) for a
    /// saturating kernel at the given core clock and saturated bandwidth.
    ///
    /// `T_L3Mem = bytes * f_core / bw` and `pi_bw = bw * work / bytes`, so
    /// `u(1) pi_bw` reproduces the single-core ECM performance exactly.
    pub fn memory_terms(&self, f_core: f64, bandwidth_gbs: f64) -> Option<(f64, f64)> {
        match self.kind {
            KernelKind::Saturating {
                bytes_per_unit,
                work_per_unit,
                ..
            } if bytes_per_unit > 0.0 => Some((
                bytes_per_unit * f_core / bandwidth_gbs,
                bandwidth_gbs * 1e9 * work_per_unit / bytes_per_unit,
            )),
            _ => None,
        }
    }
}
