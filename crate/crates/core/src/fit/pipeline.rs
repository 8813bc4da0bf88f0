//! End-to-end parameter estimation for one chip.

use std::collections::{BTreeMap, BTreeSet};

use super::power_fit::{extrapolate_baseline, fit_alpha, fit_core_params, measured_efficiency};
use super::regression::{fit_piecewise_quadratic, Breakpoint};
use super::scaling::{fit_p0_curves, ScalingCurve};
use super::{FitReport, DEFAULT_EFFICIENCY_CUTOFF};
use crate::energy::Model;
use crate::error::{invalid, Error, Result};
use crate::kernel::KernelDesc;
use crate::machine::MachineSpec;
use crate::measurement::{MeasurementRecord, Measurements};
use crate::power::PowerParams;
use crate::stats::{screen_repeatability, DEFAULT_MAX_CV};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub efficiency_cutoff: f64,
    pub breakpoint: Breakpoint,
    /// Largest accepted coefficient of variation among repeated rows.
    pub max_cv: f64,
    /// Kernels used for the zero-core extrapolation; all scalable kernels when `None`.
    pub baseline_kernels: Option<Vec<String>>,
    /// Chip to fit when the records cover several.
    pub chip: Option<String>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            efficiency_cutoff: DEFAULT_EFFICIENCY_CUTOFF,
            breakpoint: Breakpoint::Auto,
            max_cv: DEFAULT_MAX_CV,
            baseline_kernels: None,
            chip: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub chip_id: String,
    pub model: Model,
    /// Keyed by fit stage, e.g. `baseline/quadratic`, `core/dgemm`, `p0/stream`.
    pub reports: BTreeMap<String, FitReport>,
}

fn select_chip(records: &[MeasurementRecord], chip: Option<&str>) -> Result<String> {
    let chips: BTreeSet<&str> = records.iter().map(|r| r.chip_id.as_str()).collect();
    match chip {
        Some(c) if chips.contains(c) => Ok(c.to_string()),
        Some(c) => Err(invalid(format!("no records for chip `{c}`"))),
        None if chips.len() == 1 => Ok(chips.into_iter().next().expect("one chip").to_string()),
        None if chips.is_empty() => Err(invalid("no measurement records")),
        None => Err(invalid(format!(
            "records cover {} chips ({}); select one",
            chips.len(),
            chips.into_iter().collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Records split into scaling curves, sorted by kernel and clocks.
fn settings(records: &[MeasurementRecord]) -> Vec<Vec<MeasurementRecord>> {
    let mut groups: Vec<Vec<MeasurementRecord>> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|g| g[0].same_setting(r)) {
            Some(g) => g.push(r.clone()),
            None => groups.push(vec![r.clone()]),
        }
    }
    groups.sort_by(|a, b| {
        a[0].kernel
            .cmp(&b[0].kernel)
            .then(a[0].f_core.total_cmp(&b[0].f_core))
            .then(a[0].f_uncore.total_cmp(&b[0].f_uncore))
    });
    for g in &mut groups {
        g.sort_by_key(|r| r.n);
    }
    groups
}

fn with_kernel_context(kernel: &str, e: Error) -> Error {
    match e {
        Error::Degenerate(m) => Error::Degenerate(format!("kernel `{kernel}`: {m}")),
        Error::AnalyticFailure(m) => Error::AnalyticFailure(format!("kernel `{kernel}`: {m}")),
        Error::Invalid(m) => Error::Invalid(format!("kernel `{kernel}`: {m}")),
        other => other,
    }
}

/// Fits the complete power and scaling model of one chip.
///
/// Stages: repeatability screening, zero-core baseline extrapolation per
/// clock setting, piecewise quadratic baseline over the Uncore clock,
/// per-kernel core coefficients (from single-core rows for saturating
/// kernels), damping exponent and latency penalty for saturating kernels.
pub fn fit_model(
    machine: &MachineSpec,
    kernels: &[KernelDesc],
    measurements: &Measurements,
    options: &FitOptions,
) -> Result<FitOutcome> {
    machine.validate()?;
    if !(options.efficiency_cutoff > 0.0 && options.efficiency_cutoff <= 1.0) {
        return Err(invalid("efficiency cutoff must lie in (0, 1]"));
    }
    let catalog: BTreeMap<&str, &KernelDesc> = kernels.iter().map(|k| (k.name.as_str(), k)).collect();
    for k in kernels {
        k.validate()?;
    }

    let chip_id = select_chip(&measurements.records, options.chip.as_deref())?;
    let chip_records: Vec<MeasurementRecord> = measurements
        .records
        .iter()
        .filter(|r| r.chip_id == chip_id)
        .cloned()
        .collect();
    for r in &chip_records {
        if !catalog.contains_key(r.kernel.as_str()) {
            return Err(Error::UnknownKernel(r.kernel.clone()));
        }
        machine.check_point(r.n, r.f_core, r.f_uncore)?;
    }

    let mut reports = BTreeMap::new();
    let (records, screened) = screen_repeatability(&chip_records, options.max_cv);
    if !screened.is_empty() {
        reports.insert(
            "screening".to_string(),
            FitReport {
                excluded: screened,
                ..FitReport::default()
            },
        );
    }
    let groups = settings(&records);
    let fitted: BTreeSet<&str> = records.iter().map(|r| r.kernel.as_str()).collect();

    // zero-core baseline
    let baseline_kernels: Vec<&str> = match &options.baseline_kernels {
        Some(names) => {
            for n in names {
                if !catalog.contains_key(n.as_str()) {
                    return Err(Error::UnknownKernel(n.clone()));
                }
            }
            names.iter().map(String::as_str).collect()
        }
        None => fitted
            .iter()
            .copied()
            .filter(|k| !catalog[k].is_saturating())
            .collect(),
    };
    if baseline_kernels.is_empty() {
        return Err(Error::InsufficientData {
            reason: "no kernel available for baseline extrapolation (none scalable; choose some explicitly)".into(),
            excluded: Vec::new(),
        });
    }
    let mut base_points = Vec::new();
    let mut skipped = Vec::new();
    for g in groups.iter().filter(|g| baseline_kernels.contains(&g[0].kernel.as_str())) {
        let key = format!("baseline/extrapolate/{}@{:.3}/{:.3}", g[0].kernel, g[0].f_core, g[0].f_uncore);
        match extrapolate_baseline(g, options.efficiency_cutoff) {
            Ok(b) => {
                base_points.push((b.f_uncore, b.intercept));
                reports.insert(key, b.report);
            }
            Err(Error::InsufficientData { reason, excluded }) => {
                skipped.push(format!("{key}: {reason}"));
                skipped.extend(excluded);
            }
            Err(e) => return Err(e),
        }
    }
    let piecewise = fit_piecewise_quadratic(&base_points, options.breakpoint).map_err(|e| match e {
        Error::Degenerate(m) => Error::InsufficientData {
            reason: format!("baseline quadratic: {m}"),
            excluded: skipped.clone(),
        },
        other => other,
    })?;
    let mut baseline = piecewise.baseline;
    let mut base_report = piecewise.report;
    for s in skipped {
        base_report.notes.push(format!("skipped {s}"));
    }
    let range = machine.uncore_range();
    if range.min_ghz < baseline.lower_ghz || range.max_ghz > baseline.upper_ghz() {
        base_report.notes.push(format!(
            "baseline fitted on [{:.3}, {:.3}] GHz, extended to the machine range [{:.3}, {:.3}] GHz",
            baseline.lower_ghz,
            baseline.upper_ghz(),
            range.min_ghz,
            range.max_ghz
        ));
        baseline.lower_ghz = baseline.lower_ghz.min(range.min_ghz);
        let last = baseline.segments.last_mut().expect("at least one segment");
        last.upper_ghz = last.upper_ghz.max(range.max_ghz);
    }
    reports.insert("baseline/quadratic".to_string(), base_report);

    // per-kernel parameters
    let mut per_kernel_core = BTreeMap::new();
    let mut model_kernels = BTreeMap::new();
    for &name in &fitted {
        let mut kernel = catalog[name].clone();
        let rows: Vec<MeasurementRecord> = records.iter().filter(|r| r.kernel == name).cloned().collect();
        let core_rows: Vec<MeasurementRecord> = if kernel.is_saturating() {
            rows.iter().filter(|r| r.n == 1).cloned().collect()
        } else {
            rows.clone()
        };
        let (mut core, core_report) =
            fit_core_params(&core_rows, &baseline).map_err(|e| with_kernel_context(name, e))?;
        reports.insert(format!("core/{name}"), core_report);

        if kernel.is_saturating() {
            let eps = measured_efficiency(&rows);
            match fit_alpha(&rows, &baseline, &core, &eps) {
                Ok((alpha, report)) => {
                    core.alpha = alpha;
                    reports.insert(format!("alpha/{name}"), report);
                }
                Err(Error::AnalyticFailure(m)) => {
                    let mut report = FitReport::new(&[("alpha", 0.0)], Vec::new(), Vec::new());
                    report.notes.push(format!("{m}; alpha set to 0"));
                    reports.insert(format!("alpha/{name}"), report);
                }
                Err(e) => return Err(with_kernel_context(name, e)),
            }

            let mut curves = Vec::new();
            let mut excluded = Vec::new();
            for g in groups.iter().filter(|g| g[0].kernel == name) {
                let label = format!("{name}@{:.3}/{:.3}", g[0].f_core, g[0].f_uncore);
                let bw = match machine.bandwidth.lookup(g[0].f_core, g[0].f_uncore) {
                    Ok(bw) => bw,
                    Err(e) => {
                        excluded.push((label, e.to_string()));
                        continue;
                    }
                };
                let Some((t_l3_mem, pi_bw)) = kernel.memory_terms(g[0].f_core, bw) else {
                    break;
                };
                curves.push(ScalingCurve {
                    label,
                    ecm: kernel.contributions_at(t_l3_mem),
                    pi_bw,
                    points: g.iter().map(|r| (r.n, r.performance)).collect(),
                });
            }
            if !curves.is_empty() {
                let (p0, mut report) = fit_p0_curves(&curves).map_err(|e| with_kernel_context(name, e))?;
                for (point, reason) in excluded {
                    report.exclude(point, reason);
                }
                kernel.set_p0(p0);
                reports.insert(format!("p0/{name}"), report);
            }
        }
        per_kernel_core.insert(name.to_string(), core);
        model_kernels.insert(name.to_string(), kernel);
    }

    let model = Model {
        machine: machine.clone(),
        kernels: model_kernels,
        power: PowerParams {
            baseline,
            core_range: machine.core_freq,
            per_kernel_core,
        },
    };
    model.validate()?;
    Ok(FitOutcome {
        chip_id,
        model,
        reports,
    })
}
