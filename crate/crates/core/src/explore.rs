//! Operating-point search and Z-plot series.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{Model, OperatingPoint, PredictionPoint};
use crate::error::{invalid, Error, Result};
use crate::machine::{snap_ghz, FREQ_EPS};

/// Default frequency step of the search grid in GHz.
pub const DEFAULT_GRID_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    MinEnergy,
    MaxPerformance,
    MinEdp,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::MinEnergy => "min-energy",
            Objective::MaxPerformance => "max-performance",
            Objective::MinEdp => "min-edp",
        }
    }

    /// `Less` when `a` is strictly better than `b`.
    fn compare(self, a: &PredictionPoint, b: &PredictionPoint) -> Ordering {
        match self {
            Objective::MinEnergy => a.energy_per_work.total_cmp(&b.energy_per_work),
            Objective::MaxPerformance => b.performance.total_cmp(&a.performance),
            Objective::MinEdp => a.edp_density.total_cmp(&b.edp_density),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-energy" => Ok(Objective::MinEnergy),
            "max-performance" => Ok(Objective::MaxPerformance),
            "min-edp" => Ok(Objective::MinEdp),
            other => Err(invalid(format!(
                "unknown objective `{other}` (expected min-energy, max-performance or min-edp)"
            ))),
        }
    }
}

/// Search grid over core counts and clocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub step_ghz: f64,
    /// Inclusive core-count bounds; `None` means `1..=n_cores`.
    pub cores: Option<(u32, u32)>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            step_ghz: DEFAULT_GRID_STEP,
            cores: None,
        }
    }
}

impl Grid {
    /// Operating points in `(n, f_core, f_uncore)` ascending order.
    pub fn points(&self, model: &Model) -> Result<Vec<OperatingPoint>> {
        if !(self.step_ghz.is_finite() && self.step_ghz > 0.0) {
            return Err(Error::Config(format!("grid step must be > 0, got {}", self.step_ghz)));
        }
        let m = &model.machine;
        let (lo, hi) = self.cores.unwrap_or((1, m.n_cores));
        let lo = lo.max(1);
        let hi = hi.min(m.n_cores);
        let core_f = m.core_freq.grid(self.step_ghz);
        let uncore_f = m.uncore_range().grid(self.step_ghz);
        let mut ops = Vec::new();
        for n in lo..=hi {
            for &fc in &core_f {
                if m.is_slaved() {
                    ops.push(OperatingPoint::new(n, fc, fc));
                } else {
                    ops.extend(uncore_f.iter().map(|&fu| OperatingPoint::new(n, fc, fu)));
                }
            }
        }
        if ops.is_empty() {
            return Err(Error::Config("the search grid is empty".into()));
        }
        Ok(ops)
    }
}

/// Predicts every grid point. Order matches [`Grid::points`].
pub fn evaluate_grid(model: &Model, kernel: &str, grid: &Grid) -> Result<Vec<PredictionPoint>> {
    model.kernel(kernel)?;
    let ops = grid.points(model)?;
    ops.par_iter()
        .map(|op| model.predict(kernel, *op))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Best point for the objective. Points must be in grid order, which makes
/// the first strictly-best point the one with lowest `n`, then lowest
/// `f_core`, then lowest `f_uncore`.
pub fn select(points: &[PredictionPoint], objective: Objective) -> Option<&PredictionPoint> {
    let mut best: Option<&PredictionPoint> = None;
    for p in points {
        match best {
            Some(b) if objective.compare(p, b) != Ordering::Less => {}
            _ => best = Some(p),
        }
    }
    best
}

/// Exhaustive grid search for the best operating point.
pub fn optimize(
    model: &Model,
    kernel: &str,
    grid: &Grid,
    objective: Objective,
) -> Result<PredictionPoint> {
    let points = evaluate_grid(model, kernel, grid)?;
    select(&points, objective)
        .cloned()
        .ok_or_else(|| Error::Config("no feasible operating point".into()))
}

/// Parameter path for a Z-plot. Exactly one of the three may carry more
/// than one value; `f_uncore = None` follows the machine default (the core
/// clock on slaved machines, the maximum Uncore clock otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub n: Vec<u32>,
    pub f_core: Vec<f64>,
    pub f_uncore: Option<Vec<f64>>,
}

impl Sweep {
    fn swept_count(&self) -> usize {
        [
            self.n.len() > 1,
            self.f_core.len() > 1,
            self.f_uncore.as_ref().is_some_and(|v| v.len() > 1),
        ]
        .iter()
        .filter(|&&b| b)
        .count()
    }
}

/// Inclusive frequency range with a step, snapped to the nano-GHz.
pub fn frequency_path(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && end >= start) {
        return Err(invalid(format!("bad frequency path {start}:{end}:{step}")));
    }
    let count = ((end - start + FREQ_EPS) / step).floor() as usize;
    Ok((0..=count).map(|k| snap_ghz(start + k as f64 * step)).collect())
}

/// Predictions along a one-parameter path, ordered by the swept parameter.
pub fn zplot_series(model: &Model, kernel: &str, sweep: &Sweep) -> Result<Vec<PredictionPoint>> {
    if sweep.swept_count() > 1 {
        return Err(invalid("Z-plot sweeps vary exactly one of n, f_core, f_uncore"));
    }
    if sweep.n.is_empty() || sweep.f_core.is_empty() || sweep.f_uncore.as_ref().is_some_and(Vec::is_empty) {
        return Err(invalid("Z-plot sweep has an empty parameter list"));
    }
    let mut n = sweep.n.clone();
    n.sort_unstable();
    let mut f_core = sweep.f_core.clone();
    f_core.sort_by(f64::total_cmp);
    let f_uncore = sweep.f_uncore.clone().map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    });
    if model.machine.is_slaved() && f_uncore.as_ref().is_some_and(|v| v.len() > 1) {
        return Err(invalid(format!(
            "machine `{}` clocks the Uncore with the cores; sweep f_core instead",
            model.machine.name
        )));
    }

    let mut ops = Vec::new();
    for &nn in &n {
        for &fc in &f_core {
            match &f_uncore {
                Some(us) => {
                    for &fu in us {
                        let fu = model.machine.resolve_uncore(fc, Some(fu))?;
                        ops.push(OperatingPoint::new(nn, fc, fu));
                    }
                }
                None => {
                    let fu = model.machine.resolve_uncore(fc, None)?;
                    ops.push(OperatingPoint::new(nn, fc, fu));
                }
            }
        }
    }
    ops.iter().map(|op| model.predict(kernel, *op)).collect()
}
