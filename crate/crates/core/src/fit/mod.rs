//! Parameter estimation from measurement records.
//!
//! Every fit returns a [`FitReport`] whose residuals and SSE are recomputed
//! from the returned parameters, so the report always describes exactly the
//! model it accompanies.

mod lsq;
mod pipeline;
mod power_fit;
mod regression;
mod scaling;
mod search;

use serde::{Deserialize, Serialize};

pub use pipeline::{fit_model, FitOptions, FitOutcome};
pub use power_fit::{
    extrapolate_baseline, fit_alpha, fit_core_params, measured_efficiency, BaselineExtrapolation,
    DEFAULT_EFFICIENCY_CUTOFF,
};
pub use regression::{
    fit_line, fit_piecewise_quadratic, fit_quadratic, Breakpoint, LineFit, PiecewiseFit,
    QuadraticFit, BREAKPOINT_SSE_RATIO,
};
pub use scaling::{fit_p0, fit_p0_curves, ScalingCurve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub point: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitReport {
    pub parameters: Vec<Parameter>,
    /// Labels of the points that entered the fit.
    pub used: Vec<String>,
    /// Measured minus modeled, aligned with `used`.
    pub residuals: Vec<f64>,
    pub sse: f64,
    pub excluded: Vec<Exclusion>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl FitReport {
    pub(crate) fn new(parameters: &[(&str, f64)], used: Vec<String>, residuals: Vec<f64>) -> Self {
        debug_assert_eq!(used.len(), residuals.len());
        let sse = residuals.iter().map(|r| r * r).sum();
        Self {
            parameters: parameters
                .iter()
                .map(|(name, value)| Parameter {
                    name: name.to_string(),
                    value: *value,
                })
                .collect(),
            used,
            residuals,
            sse,
            excluded: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub(crate) fn exclude(&mut self, point: impl Into<String>, reason: impl Into<String>) {
        self.excluded.push(Exclusion {
            point: point.into(),
            reason: reason.into(),
        });
    }
}

pub(crate) fn freq_label(f: f64) -> String {
    format!("f={f:.3}")
}
