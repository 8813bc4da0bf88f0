//! Fits of the power-model parameters.

use super::regression::{fit_line, fit_quadratic_labeled};
use super::FitReport;
use crate::error::{invalid, Error, Result};
use crate::measurement::MeasurementRecord;
use crate::power::{damping, p_base, BaselineCoeffs, CoreCoeffs};

/// Points with lower measured parallel efficiency are left out of the
/// zero-core extrapolation.
pub const DEFAULT_EFFICIENCY_CUTOFF: f64 = 0.90;

/// Damping exponent search interval and resolution (`k / ALPHA_STEPS_PER_UNIT`).
const ALPHA_MAX_STEPS: u32 = 200;
const ALPHA_STEPS_PER_UNIT: f64 = 100.0;

/// Measured parallel efficiency of each record relative to the smallest core
/// count measured at the same chip, kernel and clocks:
/// `eps(n) = perf(n) n_ref / (n perf(n_ref))`. Repeated reference rows are
/// averaged.
pub fn measured_efficiency(records: &[MeasurementRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| {
            let group: Vec<&MeasurementRecord> = records.iter().filter(|o| o.same_setting(r)).collect();
            let n_ref = group.iter().map(|o| o.n).min().expect("group contains r");
            let refs: Vec<f64> = group.iter().filter(|o| o.n == n_ref).map(|o| o.performance).collect();
            let perf_ref = refs.iter().sum::<f64>() / refs.len() as f64;
            r.performance * n_ref as f64 / (r.n as f64 * perf_ref)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineExtrapolation {
    pub f_core: f64,
    pub f_uncore: f64,
    /// Power extrapolated to zero active cores.
    pub intercept: f64,
    /// Power per additional core.
    pub slope: f64,
    pub report: FitReport,
}

/// Extrapolates chip power to zero active cores with a straight line over
/// the records whose measured parallel efficiency reaches `cutoff`.
pub fn extrapolate_baseline(records: &[MeasurementRecord], cutoff: f64) -> Result<BaselineExtrapolation> {
    let first = records.first().ok_or_else(|| invalid("no records to extrapolate"))?;
    if let Some(r) = records.iter().find(|r| !r.same_setting(first)) {
        return Err(invalid(format!(
            "baseline extrapolation needs one kernel at one clock setting; `{}` differs from `{}`",
            r.label(),
            first.label()
        )));
    }
    let eps = measured_efficiency(records);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut labels = Vec::new();
    let mut excluded = Vec::new();
    for (r, e) in records.iter().zip(&eps) {
        if *e < cutoff {
            excluded.push((r.label(), format!("parallel efficiency {e:.4} < cutoff {cutoff:.2}")));
        } else {
            xs.push(r.n as f64);
            ys.push(r.power);
            labels.push(r.label());
        }
    }
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InsufficientData {
            reason: format!(
                "{} at f_core={} f_uncore={} keeps {} distinct core count(s), need 2",
                first.kernel,
                first.f_core,
                first.f_uncore,
                distinct.len()
            ),
            excluded: excluded.iter().map(|(p, why)| format!("{p}: {why}")).collect(),
        });
    }
    let line = fit_line(&xs, &ys, labels)?;
    let mut report = line.report;
    for (p, why) in excluded {
        report.exclude(p, why);
    }
    Ok(BaselineExtrapolation {
        f_core: first.f_core,
        f_uncore: first.f_uncore,
        intercept: line.intercept,
        slope: line.slope,
        report,
    })
}

fn single_kernel(records: &[MeasurementRecord]) -> Result<&str> {
    let first = records.first().ok_or_else(|| invalid("no records"))?;
    if records.iter().any(|r| r.kernel != first.kernel) {
        return Err(invalid("core parameters are fitted per kernel; records mix kernels"));
    }
    Ok(&first.kernel)
}

/// Per-core coefficients from records where the damping is inactive:
/// `(P - P_base(f_uncore)) / n` is fitted as a quadratic in `f_core`.
/// The returned `alpha` is zero.
pub fn fit_core_params(records: &[MeasurementRecord], baseline: &BaselineCoeffs) -> Result<(CoreCoeffs, FitReport)> {
    single_kernel(records)?;
    let mut points = Vec::with_capacity(records.len());
    for r in records {
        let base = p_base(r.f_uncore, baseline)?;
        points.push((r.f_core, (r.power - base) / r.n as f64));
    }
    let q = fit_quadratic_labeled(&points, records.iter().map(MeasurementRecord::label).collect())?;
    let [w0, w1, w2] = q.coeffs;
    Ok((CoreCoeffs { w0, w1, w2, alpha: 0.0 }, q.report))
}

/// Damping exponent on a 0.01 grid over `[0, 2]` minimizing the SSE between
/// modeled and measured chip power, using the measured efficiencies `eps`.
/// Ties go to the smaller exponent.
pub fn fit_alpha(
    records: &[MeasurementRecord],
    baseline: &BaselineCoeffs,
    core: &CoreCoeffs,
    eps: &[f64],
) -> Result<(f64, FitReport)> {
    single_kernel(records)?;
    if eps.len() != records.len() {
        return Err(invalid("one efficiency value per record is required"));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(invalid(format!("efficiency must be > 0, got {e}")));
    }
    let damped = eps.iter().filter(|&&e| e < 1.0 - 1e-12).count();
    if damped < 2 {
        return Err(Error::AnalyticFailure(format!(
            "alpha unidentifiable: {damped} record(s) with efficiency below 1, need 2"
        )));
    }
    let mut bases = Vec::with_capacity(records.len());
    for (r, e) in records.iter().zip(eps) {
        if *e < 1.0 - 1e-12 && core.dynamic(r.f_core) <= 0.0 {
            return Err(Error::AnalyticFailure(format!(
                "alpha unidentifiable: dynamic core power {} W at {} is not positive",
                core.dynamic(r.f_core),
                r.label()
            )));
        }
        bases.push(p_base(r.f_uncore, baseline)?);
    }
    // eps may exceed 1 slightly in noisy data; damping is capped at 1
    let residuals_at = |alpha: f64| -> Vec<f64> {
        records
            .iter()
            .zip(eps)
            .zip(&bases)
            .map(|((r, e), base)| {
                let per_core = core.w0 + core.dynamic(r.f_core) * damping(e.min(1.0), alpha);
                r.power - (base + r.n as f64 * per_core)
            })
            .collect()
    };
    let sse = |alpha: f64| residuals_at(alpha).iter().map(|x| x * x).sum::<f64>();
    let mut best = (0.0, sse(0.0));
    for k in 1..=ALPHA_MAX_STEPS {
        let alpha = k as f64 / ALPHA_STEPS_PER_UNIT;
        let s = sse(alpha);
        if s < best.1 {
            best = (alpha, s);
        }
    }
    let alpha = best.0;
    let report = FitReport::new(
        &[("alpha", alpha)],
        records.iter().map(MeasurementRecord::label).collect(),
        residuals_at(alpha),
    );
    Ok((alpha, report))
}
