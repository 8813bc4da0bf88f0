//! Benchmark measurement records and their CSV form.
//!
//! Schema (header required):
//! `chip_id,kernel,n,f_core_ghz,f_uncore_ghz,performance,perf_unit,power_w,reps`.
//! `f_uncore_ghz` may be omitted for machines whose Uncore follows the core
//! clock. All rows must share one `perf_unit`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::MachineSpec;
use crate::units::PerfUnit;

pub const MEASUREMENT_COLUMNS: [&str; 9] = [
    "chip_id",
    "kernel",
    "n",
    "f_core_ghz",
    "f_uncore_ghz",
    "performance",
    "perf_unit",
    "power_w",
    "reps",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub chip_id: String,
    pub kernel: String,
    pub n: u32,
    pub f_core: f64,
    pub f_uncore: f64,
    /// Work items per second.
    pub performance: f64,
    pub power: f64,
    pub repetitions: u32,
}

impl MeasurementRecord {
    pub fn label(&self) -> String {
        format!(
            "{} n={} f_core={:.3} f_uncore={:.3}",
            self.kernel, self.n, self.f_core, self.f_uncore
        )
    }

    /// Records sharing kernel, chip and clocks form one scaling curve.
    pub fn same_setting(&self, other: &Self) -> bool {
        self.chip_id == other.chip_id
            && self.kernel == other.kernel
            && self.f_core == other.f_core
            && self.f_uncore == other.f_uncore
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub unit: PerfUnit,
    pub records: Vec<MeasurementRecord>,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

/// Parses and validates measurement CSV. With a machine spec, clocks and core
/// counts are range-checked and a missing Uncore column is filled from the
/// core clock on slaved machines.
pub fn read_measurements<R: Read>(reader: R, machine: Option<&MachineSpec>) -> Result<Measurements> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    for h in headers.iter() {
        if !MEASUREMENT_COLUMNS.contains(&h) {
            return Err(Error::Schema(format!("unknown column `{h}`")));
        }
    }
    let mut idx = [0usize; 9];
    let mut uncore_col = None;
    for (i, name) in MEASUREMENT_COLUMNS.iter().enumerate() {
        match column_index(&headers, name) {
            Some(c) if *name == "f_uncore_ghz" => uncore_col = Some(c),
            Some(c) => idx[i] = c,
            None if *name == "f_uncore_ghz" => {}
            None => return Err(Error::Schema(format!("missing column `{name}`"))),
        }
    }
    if uncore_col.is_none() && !machine.is_some_and(MachineSpec::is_slaved) {
        return Err(Error::Schema(
            "column `f_uncore_ghz` may only be omitted for a machine whose Uncore follows the core clock".into(),
        ));
    }

    let mut unit: Option<PerfUnit> = None;
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(idx[i]).unwrap_or("");
        let mut errs = Vec::new();
        let num = |i: usize, errs: &mut Vec<String>| -> f64 {
            field(i).parse::<f64>().unwrap_or_else(|_| {
                errs.push(format!("{} `{}` is not a number", MEASUREMENT_COLUMNS[i], field(i)));
                f64::NAN
            })
        };
        let int = |i: usize, errs: &mut Vec<String>| -> u32 {
            field(i).parse::<u32>().unwrap_or_else(|_| {
                errs.push(format!("{} `{}` is not a count", MEASUREMENT_COLUMNS[i], field(i)));
                0
            })
        };

        let chip_id = field(0).to_string();
        let kernel = field(1).to_string();
        let n = int(2, &mut errs);
        let f_core = num(3, &mut errs);
        let performance = num(5, &mut errs);
        let power = num(7, &mut errs);
        let repetitions = int(8, &mut errs);
        let f_uncore = match uncore_col {
            Some(c) => {
                let s = row.get(c).unwrap_or("");
                s.parse::<f64>().unwrap_or_else(|_| {
                    errs.push(format!("f_uncore_ghz `{s}` is not a number"));
                    f64::NAN
                })
            }
            None => f_core,
        };

        if chip_id.is_empty() {
            errs.push("chip_id is empty".into());
        }
        if kernel.is_empty() {
            errs.push("kernel is empty".into());
        }
        if n < 1 && errs.is_empty() {
            errs.push("n must be >= 1".into());
        }
        if performance <= 0.0 {
            errs.push(format!("performance must be > 0, got {performance}"));
        }
        if power <= 0.0 {
            errs.push(format!("power must be > 0, got {power}"));
        }
        if repetitions < 1 && errs.is_empty() {
            errs.push("reps must be >= 1".into());
        }
        match PerfUnit::parse(field(6)) {
            Ok(u) => match &unit {
                None => unit = Some(u),
                Some(file_unit) if *file_unit != u => errs.push(format!(
                    "perf_unit `{}` differs from `{}` used earlier in the file",
                    u, file_unit
                )),
                Some(_) => {}
            },
            Err(e) => errs.push(e.to_string()),
        }
        if let Some(m) = machine {
            if errs.is_empty() {
                if let Err(e) = m.check_point(n, f_core, f_uncore) {
                    errs.push(e.to_string());
                }
            }
        }

        if errs.is_empty() {
            let scale = unit.as_ref().map_or(1.0, PerfUnit::scale);
            records.push(MeasurementRecord {
                chip_id,
                kernel,
                n,
                f_core,
                f_uncore,
                performance: performance * scale,
                power,
                repetitions,
            });
        } else {
            diagnostics.extend(errs.into_iter().map(|e| format!("line {line}: {e}")));
        }
    }
    if !diagnostics.is_empty() {
        return Err(Error::Validation { diagnostics });
    }
    let unit = unit.ok_or_else(|| Error::Schema("measurement file has no rows".into()))?;
    Ok(Measurements { unit, records })
}

pub fn ingest_measurements(path: &Path, machine: Option<&MachineSpec>) -> Result<Measurements> {
    read_measurements(File::open(path)?, machine)
}

/// Writes records in the measurement schema, performance in `unit`.
pub fn write_measurements<W: Write>(
    writer: W,
    unit: &PerfUnit,
    records: &[MeasurementRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(MEASUREMENT_COLUMNS)?;
    for r in records {
        w.write_record([
            r.chip_id.clone(),
            r.kernel.clone(),
            r.n.to_string(),
            format!("{}", r.f_core),
            format!("{}", r.f_uncore),
            format!("{}", unit.from_base(r.performance)),
            unit.label().to_string(),
            format!("{}", r.power),
            r.repetitions.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
