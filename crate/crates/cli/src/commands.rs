use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use ecm_energy::explore::{optimize, zplot_series};
use ecm_energy::files::{sha256_file, InputDigest, MachineFile, ModelFile, Provenance};
use ecm_energy::fit::fit_model;
use ecm_energy::measurement::ingest_measurements;
use ecm_energy::stats::{fleet_summary, histogram};
use ecm_energy::{
    f_opt_for, Error, FitOptions, FleetSample, Grid, Model, OperatingPoint, PerfUnit, Result, Sweep,
};

use crate::args::{FitArgs, FleetArgs, OptimizeArgs, PredictArgs, ValidateArgs, ZplotArgs};
use crate::output::{csv_document, emit, fixed, ghz, prediction_fields, sci, write_atomic, PREDICTION_COLUMNS};

fn file_label(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn digest(path: &Path) -> Result<InputDigest> {
    Ok(InputDigest {
        path: file_label(path),
        sha256: sha256_file(path)?,
    })
}

/// Explicit timestamp, else `SOURCE_DATE_EPOCH`, else the current time.
fn fit_timestamp(explicit: Option<&str>) -> Result<String> {
    let at: DateTime<Utc> = match explicit {
        Some(s) => DateTime::parse_from_rfc3339(s)
            .map_err(|e| Error::Config(format!("--timestamp `{s}`: {e} (use RFC 3339, e.g. 2020-01-01T00:00:00Z)")))?
            .with_timezone(&Utc),
        None => match std::env::var("SOURCE_DATE_EPOCH") {
            Ok(v) => {
                let secs: i64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("SOURCE_DATE_EPOCH `{v}` is not an integer")))?;
                DateTime::from_timestamp(secs, 0)
                    .ok_or_else(|| Error::Config(format!("SOURCE_DATE_EPOCH `{v}` is out of range")))?
            }
            Err(_) => Utc::now(),
        },
    };
    Ok(at.to_rfc3339_opts(SecondsFormat::Secs, true))
}

fn kernel_unit(model: &Model, kernel: &str) -> Result<PerfUnit> {
    PerfUnit::parse(&model.kernel(kernel)?.perf_unit)
}

pub fn fit(args: &FitArgs, stdout: &mut dyn Write) -> Result<()> {
    let machine_file: MachineFile = serde_json::from_str(&fs::read_to_string(&args.machine)?)
        .map_err(|e| Error::Config(format!("machine file {}: {e}", args.machine.display())))?;
    let base_dir = args.machine.parent().unwrap_or(Path::new("."));
    let table_path = base_dir.join(&machine_file.bandwidth_table);
    let machine = machine_file.into_spec(base_dir)?;
    let kernels = ecm_energy::files::load_kernels(&args.kernels)?;
    let measurements = ingest_measurements(&args.measurements, Some(&machine))?;

    let options = FitOptions {
        efficiency_cutoff: args.efficiency_cutoff,
        breakpoint: args.breakpoint,
        max_cv: args.max_cv,
        baseline_kernels: args.baseline_kernels.clone(),
        chip: args.chip.clone(),
    };
    let outcome = fit_model(&machine, &kernels, &measurements, &options)?;
    let provenance = Provenance {
        fitted_at: fit_timestamp(args.timestamp.as_deref())?,
        inputs: vec![
            digest(&args.machine)?,
            digest(&table_path)?,
            digest(&args.kernels)?,
            digest(&args.measurements)?,
        ],
    };
    let file = ModelFile::new(outcome.chip_id.clone(), outcome.model, outcome.reports, provenance)?;
    write_atomic(&args.out, file.to_json()?.as_bytes())?;

    let mut s = String::new();
    writeln!(s, "chip {}", file.payload.chip_id).expect("string write");
    let extrapolations: Vec<_> = file
        .payload
        .fits
        .iter()
        .filter(|(stage, _)| stage.starts_with("baseline/extrapolate/"))
        .map(|(_, r)| r)
        .collect();
    writeln!(
        s,
        "[baseline/extrapolate] settings={} points={} excluded={}",
        extrapolations.len(),
        extrapolations.iter().map(|r| r.used.len()).sum::<usize>(),
        extrapolations.iter().map(|r| r.excluded.len()).sum::<usize>()
    )
    .expect("string write");
    for (stage, report) in file.payload.fits.iter().filter(|(stage, _)| !stage.starts_with("baseline/extrapolate/")) {
        writeln!(
            s,
            "[{stage}] points={} excluded={} sse={}",
            report.used.len(),
            report.excluded.len(),
            sci(report.sse)
        )
        .expect("string write");
        for p in &report.parameters {
            writeln!(s, "  {} = {:.9}", p.name, p.value).expect("string write");
        }
        for note in &report.notes {
            writeln!(s, "  note: {note}").expect("string write");
        }
    }
    stdout.write_all(s.as_bytes())?;
    Ok(())
}

pub fn predict(args: &PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = ModelFile::load(&args.model)?.model();
    let f_uncore = model.machine.resolve_uncore(args.f_core, args.f_uncore)?;
    let p = model.predict(&args.kernel, OperatingPoint::new(args.n, args.f_core, f_uncore))?;
    let unit = kernel_unit(&model, &args.kernel)?;
    let doc = csv_document(&PREDICTION_COLUMNS, &[prediction_fields(&p, &unit)])?;
    emit(args.output.out.as_deref(), stdout, &doc)
}

pub fn optimize_cmd(args: &OptimizeArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = ModelFile::load(&args.model)?.model();
    let grid = Grid {
        step_ghz: args.grid_step,
        cores: args.cores,
    };
    let best = optimize(&model, &args.kernel, &grid, args.objective)?;
    let unit = kernel_unit(&model, &args.kernel)?;
    // closed-form optimum where it applies, for comparison
    let analytic = f_opt_for(&model, &args.kernel, best.op.n).ok();

    let mut header = vec!["objective", "kernel"];
    header.extend(PREDICTION_COLUMNS);
    header.extend(["f_opt_raw_ghz", "f_opt_clamped_ghz"]);
    let mut row = vec![args.objective.to_string(), args.kernel.clone()];
    row.extend(prediction_fields(&best, &unit));
    row.push(analytic.map_or_else(String::new, |a| ghz(a.raw_ghz)));
    row.push(analytic.map_or_else(String::new, |a| ghz(a.clamped_ghz)));
    emit(args.output.out.as_deref(), stdout, &csv_document(&header, &[row])?)
}

pub fn zplot(args: &ZplotArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = ModelFile::load(&args.model)?.model();
    let m = &model.machine;
    let sweep = Sweep {
        n: args.n.as_ref().map_or_else(|| vec![m.n_cores], |c| c.0.clone()),
        f_core: args.f_core.as_ref().map_or_else(|| vec![m.core_freq.max_ghz], |f| f.0.clone()),
        f_uncore: args.f_uncore.as_ref().map(|f| f.0.clone()),
    };
    let points = zplot_series(&model, &args.kernel, &sweep)?;
    let unit = kernel_unit(&model, &args.kernel)?;
    let rows: Vec<Vec<String>> = points.iter().map(|p| prediction_fields(p, &unit)).collect();
    emit(args.output.out.as_deref(), stdout, &csv_document(&PREDICTION_COLUMNS, &rows)?)
}

pub fn fleet(args: &FleetArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let mut files = Vec::with_capacity(args.models.len());
    for path in &args.models {
        files.push(ModelFile::load(path)?);
    }
    files.sort_by(|a, b| a.payload.chip_id.cmp(&b.payload.chip_id));
    if let Some(w) = files.windows(2).find(|w| w[0].payload.chip_id == w[1].payload.chip_id) {
        return Err(Error::Invalid(format!("chip `{}` appears in more than one model file", w[0].payload.chip_id)));
    }
    if files.len() < 2 {
        return Err(Error::Invalid("fleet statistics need at least 2 model files".into()));
    }

    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for f in &files {
        for (name, v) in f.fleet_parameters() {
            if !values.contains_key(&name) {
                order.push(name.clone());
            }
            values.entry(name).or_default().push((f.payload.chip_id.clone(), v));
        }
    }
    let mut samples = Vec::new();
    for name in order {
        let v = values.remove(&name).expect("collected");
        if v.len() < 2 {
            writeln!(stderr, "note: parameter `{name}` present on {} chip(s) only; skipped", v.len())?;
            continue;
        }
        samples.push(FleetSample { parameter: name, values: v });
    }
    let summary = fleet_summary(&samples)?;

    let rows: Vec<Vec<String>> = summary
        .parameters
        .iter()
        .map(|p| {
            vec![
                p.parameter.clone(),
                p.chips.to_string(),
                sci(p.mean),
                sci(p.std),
                p.cv.map_or_else(String::new, fixed),
                p.outliers.join(";"),
            ]
        })
        .collect();
    let header = ["parameter", "chips", "mean", "std", "cv", "outliers"];
    emit(args.output.out.as_deref(), stdout, &csv_document(&header, &rows)?)?;

    for (chip, params) in &summary.chip_outliers {
        writeln!(stderr, "outlier: chip {chip} in {}", params.join(", "))?;
    }
    if let Some(dir) = &args.histograms {
        fs::create_dir_all(dir)?;
        for s in &samples {
            let vals: Vec<f64> = s.values.iter().map(|v| v.1).collect();
            let h = histogram(&vals, args.bins)?;
            let rows: Vec<Vec<String>> = (0..h.counts.len())
                .map(|i| vec![sci(h.edges[i]), sci(h.edges[i + 1]), h.counts[i].to_string(), fixed(h.probabilities[i])])
                .collect();
            let doc = csv_document(&["bin_lower", "bin_upper", "count", "probability"], &rows)?;
            write_atomic(&dir.join(format!("{}.csv", s.parameter)), &doc)?;
        }
    }
    if let Some(path) = &args.correlations {
        let rows: Vec<Vec<String>> = summary
            .correlations
            .iter()
            .map(|c| vec![c.a.clone(), c.b.clone(), c.chips.to_string(), c.pearson.map_or_else(String::new, fixed)])
            .collect();
        write_atomic(path, &csv_document(&["a", "b", "chips", "pearson"], &rows)?)?;
    }
    Ok(())
}

fn rel_error(predicted: f64, measured: f64) -> f64 {
    (predicted - measured).abs() / measured.abs()
}

pub fn validate(args: &ValidateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let file = ModelFile::load(&args.model)?;
    let model = file.model();
    let measurements = ingest_measurements(&args.measurements, Some(&model.machine))?;
    let chip = args.chip.clone().unwrap_or_else(|| file.payload.chip_id.clone());
    let records: Vec<_> = measurements.records.iter().filter(|r| r.chip_id == chip).collect();
    if records.is_empty() {
        let chips: BTreeSet<&str> = measurements.records.iter().map(|r| r.chip_id.as_str()).collect();
        return Err(Error::Invalid(format!(
            "no records for chip `{chip}` (found: {}); select one with --chip",
            chips.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    let mut rows = Vec::with_capacity(records.len());
    let mut perf_err = Vec::with_capacity(records.len());
    let mut power_err = Vec::with_capacity(records.len());
    for r in records {
        let p = model.predict(&r.kernel, OperatingPoint::new(r.n, r.f_core, r.f_uncore))?;
        let unit = kernel_unit(&model, &r.kernel)?;
        let ep = rel_error(p.performance, r.performance);
        let ew = rel_error(p.power, r.power);
        perf_err.push(ep);
        power_err.push(ew);
        rows.push(vec![
            r.kernel.clone(),
            r.n.to_string(),
            ghz(r.f_core),
            ghz(r.f_uncore),
            fixed(unit.from_base(r.performance)),
            fixed(unit.from_base(p.performance)),
            fixed(ep),
            fixed(r.power),
            fixed(p.power),
            fixed(ew),
        ]);
    }
    let header = [
        "kernel",
        "n",
        "f_core_ghz",
        "f_uncore_ghz",
        "performance_measured",
        "performance_predicted",
        "performance_rel_error",
        "power_measured_w",
        "power_predicted_w",
        "power_rel_error",
    ];
    emit(args.output.out.as_deref(), stdout, &csv_document(&header, &rows)?)?;
    let stats = |v: &[f64]| (v.iter().copied().fold(0.0, f64::max), v.iter().sum::<f64>() / v.len() as f64);
    let (pmax, pmean) = stats(&perf_err);
    let (wmax, wmean) = stats(&power_err);
    writeln!(
        stderr,
        "{} points: performance error max {:.2}% mean {:.2}%; power error max {:.2}% mean {:.2}%",
        rows.len(),
        100.0 * pmax,
        100.0 * pmean,
        100.0 * wmax,
        100.0 * wmean
    )?;
    Ok(())
}

