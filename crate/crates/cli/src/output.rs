//! Fixed-format CSV rendering and atomic file output.

use std::io::Write;
use std::path::Path;

use ecm_energy::{Error, PerfUnit, PredictionPoint, Result};

pub const PREDICTION_COLUMNS: [&str; 10] = [
    "n",
    "f_core_ghz",
    "f_uncore_ghz",
    "performance",
    "perf_unit",
    "efficiency",
    "power_w",
    "energy_per_work_j",
    "edp_density",
    "warnings",
];

pub fn ghz(f: f64) -> String {
    format!("{f:.3}")
}

pub fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

pub fn sci(v: f64) -> String {
    format!("{v:.9e}")
}

pub fn prediction_fields(p: &PredictionPoint, unit: &PerfUnit) -> Vec<String> {
    vec![
        p.op.n.to_string(),
        ghz(p.op.f_core),
        ghz(p.op.f_uncore),
        fixed(unit.from_base(p.performance)),
        unit.label().to_string(),
        fixed(p.efficiency),
        fixed(p.power),
        sci(p.energy_per_work),
        sci(p.edp_density),
        p.warnings.iter().map(|w| w.as_str()).collect::<Vec<_>>().join(";"),
    ]
}

/// CSV document from a header and rows.
pub fn csv_document<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(AsRef::as_ref))?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `bytes` to `path` via a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Sends output to a file when given, otherwise to `stdout`.
pub fn emit(out: Option<&Path>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => Ok(stdout.write_all(bytes)?),
    }
}
