//! Execution-Cache-Memory (ECM) composition and multicore scaling.
//!
//! The single-core model assumes full overlap of in-core execution and no
//! overlap among data transfers. The multicore extension tracks memory-bus
//! utilization `u(n)` with a recursive latency penalty: a core that finds the
//! bus busy waits on average `(n - 1) u(n - 1) p0` extra cycles, so
//!
//! ```text
//! u(1) = T_L3Mem / T_ECM
//! u(n) = min(1, n T_L3Mem / (T_ECM + (n - 1) u(n - 1) p0))
//! ```
//!
//! and performance at `n` cores is `u(n) * pi_bw`. With `p0 = 0` this is the
//! plain model, `min(1, n T_L3Mem / T_ECM) * pi_bw`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Cycle contributions of one work unit on one core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcmContributions {
    /// Overlapping in-core execution.
    pub t_comp: f64,
    pub t_reg_l1: f64,
    pub t_l1_l2: f64,
    pub t_l2_l3: f64,
    pub t_l3_mem: f64,
    /// Work items (flops, iterations, ...) in one work unit.
    pub work_per_unit: f64,
}

impl EcmContributions {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("t_comp", self.t_comp),
            ("t_reg_l1", self.t_reg_l1),
            ("t_l1_l2", self.t_l1_l2),
            ("t_l2_l3", self.t_l2_l3),
            ("t_l3_mem", self.t_l3_mem),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.work_per_unit.is_finite() && self.work_per_unit > 0.0) {
            return Err(invalid(format!(
                "work_per_unit must be > 0, got {}",
                self.work_per_unit
            )));
        }
        Ok(())
    }

    /// Sum of the non-overlapping transfer terms.
    pub fn transfers(&self) -> f64 {
        self.t_reg_l1 + self.t_l1_l2 + self.t_l2_l3 + self.t_l3_mem
    }

    pub fn t_ecm(&self) -> f64 {
        compose_single_core(self)
    }

    /// Data delay up to and including L3, `T_ECM - T_L3Mem`.
    pub fn t_chip(&self) -> f64 {
        self.t_ecm() - self.t_l3_mem
    }

    pub fn with_t_l3_mem(self, t_l3_mem: f64) -> Self {
        Self { t_l3_mem, ..self }
    }

    pub fn has_memory_traffic(&self) -> bool {
        self.t_l3_mem > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    /// Latency penalty coefficient in cycles.
    pub p0: f64,
    /// Cores sharing the memory interface (one ccNUMA domain).
    pub n_cores: u32,
    /// Bandwidth-bound performance ceiling in work items per second.
    pub pi_bw: f64,
    /// Core clock in GHz.
    pub f_core: f64,
}

impl ScalingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p0.is_finite() && self.p0 >= 0.0) {
            return Err(invalid(format!("p0 must be >= 0, got {}", self.p0)));
        }
        if self.n_cores < 1 {
            return Err(invalid("n_cores must be >= 1"));
        }
        if !(self.pi_bw.is_finite() && self.pi_bw > 0.0) {
            return Err(invalid(format!("pi_bw must be > 0, got {}", self.pi_bw)));
        }
        if !(self.f_core.is_finite() && self.f_core > 0.0) {
            return Err(invalid(format!("f_core must be > 0, got {}", self.f_core)));
        }
        Ok(())
    }
}

/// Single-core runtime per work unit: `max(t_comp, transfers)`.
pub fn compose_single_core(c: &EcmContributions) -> f64 {
    c.t_comp.max(c.transfers())
}

fn check_utilization_inputs(n: u32, t_ecm: f64, t_l3_mem: f64, p0: f64) -> Result<()> {
    if n < 1 {
        return Err(invalid("core count must be >= 1"));
    }
    if t_l3_mem == 0.0 {
        return Err(Error::NoMemoryTraffic);
    }
    if !(t_l3_mem > 0.0 && t_ecm >= t_l3_mem && t_ecm.is_finite()) {
        return Err(invalid(format!(
            "need T_ECM >= T_L3Mem > 0, got T_ECM = {t_ecm}, T_L3Mem = {t_l3_mem}"
        )));
    }
    if !(p0.is_finite() && p0 >= 0.0) {
        return Err(invalid(format!("p0 must be >= 0, got {p0}")));
    }
    Ok(())
}

/// Utilization for every core count `1..=n_max`, index `i` holding `u(i + 1)`.
pub fn utilization_curve(n_max: u32, t_ecm: f64, t_l3_mem: f64, p0: f64) -> Result<Vec<f64>> {
    check_utilization_inputs(n_max, t_ecm, t_l3_mem, p0)?;
    let mut curve = Vec::with_capacity(n_max as usize);
    let mut prev = t_l3_mem / t_ecm;
    curve.push(prev);
    for n in 2..=n_max {
        let nf = n as f64;
        let penalty = (nf - 1.0) * prev * p0;
        prev = (nf * t_l3_mem / (t_ecm + penalty)).min(1.0);
        curve.push(prev);
    }
    Ok(curve)
}

/// Memory-bus utilization at `n` cores under the refined model.
pub fn utilization(n: u32, t_ecm: f64, t_l3_mem: f64, p0: f64) -> Result<f64> {
    Ok(*utilization_curve(n, t_ecm, t_l3_mem, p0)?
        .last()
        .expect("n >= 1"))
}

/// Plain ECM utilization, `min(1, n T_L3Mem / T_ECM)`.
pub fn plain_utilization(n: u32, t_ecm: f64, t_l3_mem: f64) -> Result<f64> {
    check_utilization_inputs(n, t_ecm, t_l3_mem, 0.0)?;
    if n == 1 {
        return Ok(t_l3_mem / t_ecm);
    }
    Ok((n as f64 * t_l3_mem / t_ecm).min(1.0))
}

/// Single-core performance from the clock: `f_core * work_per_unit / T_ECM`,
/// in work items per second.
pub fn single_core_performance(c: &EcmContributions, f_core: f64) -> f64 {
    f_core * 1e9 * c.work_per_unit / c.t_ecm()
}

/// Refined multicore performance in work items per second.
///
/// For kernels with memory traffic this is `u(n) * pi_bw` at every `n`; at
/// `n = 1` that is the unchanged single-core ECM value, equal to
/// [`single_core_performance`] whenever `pi_bw` and `t_l3_mem` derive from
/// the same bandwidth. Kernels without memory traffic scale linearly with no
/// ceiling.
pub fn predict_performance(n: u32, c: &EcmContributions, s: &ScalingParams) -> Result<f64> {
    c.validate()?;
    s.validate()?;
    if !c.has_memory_traffic() {
        return Ok(n as f64 * single_core_performance(c, s.f_core));
    }
    Ok(utilization(n, c.t_ecm(), c.t_l3_mem, s.p0)? * s.pi_bw)
}

/// Performance of the original model (no latency penalty).
pub fn plain_performance(n: u32, c: &EcmContributions, s: &ScalingParams) -> Result<f64> {
    c.validate()?;
    s.validate()?;
    if !c.has_memory_traffic() {
        return Ok(n as f64 * single_core_performance(c, s.f_core));
    }
    Ok(plain_utilization(n, c.t_ecm(), c.t_l3_mem)? * s.pi_bw)
}

/// Core count at which the memory interface saturates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Saturation {
    At(u32),
    Never,
}

impl Saturation {
    pub fn core_count(self) -> Option<u32> {
        match self {
            Saturation::At(n) => Some(n),
            Saturation::Never => None,
        }
    }
}

fn first_saturated(curve: &[f64]) -> Saturation {
    curve
        .iter()
        .position(|&u| u >= 1.0)
        .map_or(Saturation::Never, |i| Saturation::At(i as u32 + 1))
}

/// Smallest `n <= n_cores` with `u(n) = 1` under the refined model.
pub fn saturation_core_count(c: &EcmContributions, s: &ScalingParams) -> Result<Saturation> {
    c.validate()?;
    s.validate()?;
    if !c.has_memory_traffic() {
        return Ok(Saturation::Never);
    }
    let curve = utilization_curve(s.n_cores, c.t_ecm(), c.t_l3_mem, s.p0)?;
    Ok(first_saturated(&curve))
}

/// Saturation point of the plain model.
pub fn plain_saturation_core_count(c: &EcmContributions, s: &ScalingParams) -> Result<Saturation> {
    c.validate()?;
    s.validate()?;
    if !c.has_memory_traffic() {
        return Ok(Saturation::Never);
    }
    let curve = (1..=s.n_cores)
        .map(|n| plain_utilization(n, c.t_ecm(), c.t_l3_mem))
        .collect::<Result<Vec<_>>>()?;
    Ok(first_saturated(&curve))
}

/// `pi(n) / (n pi(1))`.
pub fn parallel_efficiency(n: u32, c: &EcmContributions, s: &ScalingParams) -> Result<f64> {
    if n < 1 {
        return Err(invalid("core count must be >= 1"));
    }
    if n == 1 {
        return Ok(1.0);
    }
    let pn = predict_performance(n, c, s)?;
    let p1 = predict_performance(1, c, s)?;
    Ok(pn / (n as f64 * p1))
}
