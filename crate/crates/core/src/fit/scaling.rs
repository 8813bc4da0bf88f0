//! Latency penalty from measured multicore scaling curves.

use super::search::bracketed_minimum;
use super::FitReport;
use crate::ecm::{utilization_curve, EcmContributions};
use crate::error::{invalid, Error, Result};

const SCAN_STEPS: usize = 400;
const SEARCH_TOL: f64 = 1e-9;
/// Relative distance to the ceiling below which a point counts as unsaturated.
const SATURATION_MARGIN: f64 = 1e-6;

/// Measured performance over core count at one clock setting.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCurve {
    pub label: String,
    pub ecm: EcmContributions,
    /// Bandwidth ceiling in work items per second.
    pub pi_bw: f64,
    /// `(n, performance in work items per second)`.
    pub points: Vec<(u32, f64)>,
}

impl ScalingCurve {
    fn validate(&self) -> Result<()> {
        self.ecm.validate()?;
        if !self.ecm.has_memory_traffic() {
            return Err(Error::NoMemoryTraffic);
        }
        if !(self.pi_bw.is_finite() && self.pi_bw > 0.0) {
            return Err(invalid(format!("{}: pi_bw must be > 0", self.label)));
        }
        if self.points.is_empty() {
            return Err(invalid(format!("{}: empty scaling curve", self.label)));
        }
        if let Some((n, p)) = self.points.iter().find(|(n, p)| *n < 1 || !p.is_finite()) {
            return Err(invalid(format!("{}: bad point n={n} performance={p}", self.label)));
        }
        Ok(())
    }

    fn n_max(&self) -> u32 {
        self.points.iter().map(|p| p.0).max().unwrap_or(1)
    }

    fn residuals(&self, p0: f64) -> Vec<f64> {
        let u = utilization_curve(self.n_max(), self.ecm.t_ecm(), self.ecm.t_l3_mem, p0)
            .expect("validated curve");
        self.points
            .iter()
            .map(|&(n, perf)| perf - u[n as usize - 1] * self.pi_bw)
            .collect()
    }
}

/// Shared latency penalty minimizing the summed squared performance error
/// over all curves and all core counts. Searches `[0, 10 max T_ECM]`.
pub fn fit_p0_curves(curves: &[ScalingCurve]) -> Result<(f64, FitReport)> {
    if curves.is_empty() {
        return Err(invalid("no scaling curves"));
    }
    for c in curves {
        c.validate()?;
    }
    let informative = curves.iter().any(|c| {
        c.points
            .iter()
            .any(|&(n, perf)| n >= 2 && perf < c.pi_bw * (1.0 - SATURATION_MARGIN))
    });
    if !informative {
        return Err(Error::Degenerate(
            "p0 unidentifiable: every multicore point is saturated".into(),
        ));
    }
    let hi = 10.0 * curves.iter().map(|c| c.ecm.t_ecm()).fold(0.0, f64::max);
    let sse = |p0: f64| -> f64 {
        curves
            .iter()
            .flat_map(|c| c.residuals(p0))
            .map(|r| r * r)
            .sum()
    };
    let (p0, _) = bracketed_minimum(sse, 0.0, hi, SCAN_STEPS, SEARCH_TOL);
    let mut used = Vec::new();
    let mut residuals = Vec::new();
    for c in curves {
        used.extend(c.points.iter().map(|(n, _)| format!("{} n={n}", c.label)));
        residuals.extend(c.residuals(p0));
    }
    Ok((p0, FitReport::new(&[("p0", p0)], used, residuals)))
}

/// Latency penalty for a single scaling curve.
pub fn fit_p0(curve: &ScalingCurve) -> Result<(f64, FitReport)> {
    fit_p0_curves(std::slice::from_ref(curve))
}
