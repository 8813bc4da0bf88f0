//! Energy per unit of work from combined performance and power predictions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ecm::{self, ScalingParams};
use crate::error::{invalid, Error, Result};
use crate::kernel::{KernelDesc, KernelKind};
use crate::machine::{FreqRange, MachineSpec};
use crate::power::{self, BaselineSegment, CoreCoeffs, PowerParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub n: u32,
    pub f_core: f64,
    pub f_uncore: f64,
}

impl OperatingPoint {
    pub fn new(n: u32, f_core: f64, f_uncore: f64) -> Self {
        Self {
            n,
            f_core,
            f_uncore,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Warning {
    /// Total chip power below zero; the fit is being evaluated where it
    /// does not hold.
    NegativePower,
    NegativeCorePower,
}

impl Warning {
    pub fn as_str(self) -> &'static str {
        match self {
            Warning::NegativePower => "negative-power",
            Warning::NegativeCorePower => "negative-core-power",
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPoint {
    pub op: OperatingPoint,
    /// Work items per second.
    pub performance: f64,
    /// Parallel efficiency used for power damping.
    pub efficiency: f64,
    pub power: f64,
    /// J per work item, `power / performance`.
    pub energy_per_work: f64,
    /// `energy_per_work / performance`: slope of the constant-EDP line
    /// through this point in an energy-versus-performance plot.
    pub edp_density: f64,
    pub warnings: Vec<Warning>,
}

impl PredictionPoint {
    /// Energy-delay product for a fixed amount of work, `E_total * T`.
    pub fn edp(&self, work: f64) -> f64 {
        self.edp_density * work * work
    }
}

/// Everything needed to predict a kernel on a machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub machine: MachineSpec,
    pub kernels: BTreeMap<String, KernelDesc>,
    pub power: PowerParams,
}

impl Model {
    pub fn kernel(&self, name: &str) -> Result<&KernelDesc> {
        self.kernels
            .get(name)
            .ok_or_else(|| Error::UnknownKernel(name.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.machine.validate()?;
        self.power.baseline.validate()?;
        for (name, k) in &self.kernels {
            k.validate()?;
            if name != &k.name {
                return Err(invalid(format!("kernel key `{name}` != kernel name `{}`", k.name)));
            }
            self.power.core(name)?;
        }
        Ok(())
    }

    /// Performance (work/s) and parallel efficiency at an operating point.
    pub fn performance(&self, kernel: &KernelDesc, op: &OperatingPoint) -> Result<(f64, f64)> {
        match kernel.kind {
            KernelKind::ScalableFractionOfPeak { peak_fraction } => Ok((
                op.n as f64 * op.f_core * 1e9 * self.machine.peak_work_per_cycle * peak_fraction,
                1.0,
            )),
            KernelKind::Saturating { .. } => {
                let (contrib, pi_bw) = if kernel.memory_terms(op.f_core, 1.0).is_some() {
                    let bw = self.machine.bandwidth.lookup(op.f_core, op.f_uncore)?;
                    let (t_l3_mem, pi_bw) = kernel
                        .memory_terms(op.f_core, bw)
                        .expect("kernel has memory traffic");
                    (kernel.contributions_at(t_l3_mem), pi_bw)
                } else {
                    // no memory traffic: linear scaling, ceiling unused
                    (kernel.contributions_at(0.0), f64::MAX)
                };
                let s = ScalingParams {
                    p0: kernel.p0(),
                    n_cores: self.machine.n_cores,
                    pi_bw,
                    f_core: op.f_core,
                };
                let perf = ecm::predict_performance(op.n, &contrib, &s)?;
                let eps = ecm::parallel_efficiency(op.n, &contrib, &s)?;
                Ok((perf, eps))
            }
        }
    }

    /// Full prediction at one operating point.
    pub fn predict(&self, kernel: &str, op: OperatingPoint) -> Result<PredictionPoint> {
        self.machine.check_point(op.n, op.f_core, op.f_uncore)?;
        let k = self.kernel(kernel)?;
        let (performance, efficiency) = self.performance(k, &op)?;
        let core = self.power.core(kernel)?;
        let base = power::p_base(op.f_uncore, &self.power.baseline)?;
        let per_core = power::p_core(op.f_core, efficiency, core, &self.power.core_range)?;
        let power = base + op.n as f64 * per_core;

        let mut warnings = Vec::new();
        if power < 0.0 {
            warnings.push(Warning::NegativePower);
        }
        if per_core < 0.0 {
            warnings.push(Warning::NegativeCorePower);
        }
        let energy_per_work = power / performance;
        Ok(PredictionPoint {
            op,
            performance,
            efficiency,
            power,
            energy_per_work,
            edp_density: energy_per_work / performance,
            warnings,
        })
    }
}

/// Analytic energy-optimal clock for scalable code on a single clock domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FOpt {
    /// Unconstrained optimum.
    pub raw_ghz: f64,
    /// Optimum clamped to the supported range.
    pub clamped_ghz: f64,
}

impl FOpt {
    pub fn was_clamped(&self) -> bool {
        self.raw_ghz != self.clamped_ghz
    }
}

/// `sqrt((W0b + n W0c) / (W2b + n W2c))`.
///
/// Runtime is assumed proportional to `1 / f`, so energy per work behaves as
/// `(A + B f + C f^2) / f` with its minimum at `sqrt(A / C)`.
pub fn f_opt(
    n: u32,
    base: &BaselineSegment,
    core: &CoreCoeffs,
    range: Option<&FreqRange>,
) -> Result<FOpt> {
    let nf = n as f64;
    let num = base.w0 + nf * core.w0;
    let den = base.w2 + nf * core.w2;
    let radicand = num / den;
    if !(num > 0.0 && den > 0.0 && radicand.is_finite()) {
        return Err(Error::AnalyticFailure(format!(
            "radicand ({num}) / ({den}) is not positive; use the grid optimizer"
        )));
    }
    let raw_ghz = radicand.sqrt();
    let clamped_ghz = range.map_or(raw_ghz, |r| raw_ghz.clamp(r.min_ghz, r.max_ghz));
    Ok(FOpt {
        raw_ghz,
        clamped_ghz,
    })
}

/// Energy-optimal clock of a scalable kernel at `n` cores on a slaved
/// machine, honoring piecewise baselines by comparing per-segment optima.
pub fn f_opt_for(model: &Model, kernel: &str, n: u32) -> Result<FOpt> {
    if !model.machine.is_slaved() {
        return Err(Error::AnalyticFailure(
            "closed-form optimum needs a single clock domain; use the grid optimizer".into(),
        ));
    }
    let k = model.kernel(kernel)?;
    if k.is_saturating() {
        return Err(Error::AnalyticFailure(format!(
            "kernel `{kernel}` saturates; runtime is not proportional to 1/f"
        )));
    }
    let core = model.power.core(kernel)?;
    let range = model.machine.core_freq;
    let baseline = &model.power.baseline;
    let energy = |seg: &BaselineSegment, f: f64| (seg.eval(f) + n as f64 * core.eval(f, 1.0)) / f;

    let mut best: Option<(f64, FOpt)> = None;
    let mut last_err = None;
    let mut lower = baseline.lower_ghz;
    for seg in &baseline.segments {
        let seg_range = FreqRange::new(lower.max(range.min_ghz), seg.upper_ghz.min(range.max_ghz), range.step_ghz);
        lower = seg.upper_ghz;
        if seg_range.max_ghz < seg_range.min_ghz {
            continue;
        }
        match f_opt(n, seg, core, Some(&seg_range)) {
            Ok(fo) => {
                let e = energy(seg, fo.clamped_ghz);
                if best.as_ref().is_none_or(|(be, _)| e < *be) {
                    best = Some((e, fo));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, fo)) if baseline.segments.len() == 1 => {
            Ok(FOpt {
                raw_ghz: fo.raw_ghz,
                clamped_ghz: fo.raw_ghz.clamp(range.min_ghz, range.max_ghz),
            })
        }
        Some((_, fo)) => Ok(fo),
        None => Err(last_err.unwrap_or_else(|| {
            Error::AnalyticFailure("no baseline segment overlaps the core clock range".into())
        })),
    }
}
