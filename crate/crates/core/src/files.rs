//! On-disk documents: machine descriptions, kernel catalogs and fitted models.
//!
//! A model file is pretty-printed JSON:
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "payload": { "chip_id", "machine", "kernels", "power", "fits", "provenance" },
//!   "payload_sha256": "<hex digest of the compact JSON of payload>"
//! }
//! ```
//!
//! The digest is recomputed and compared on every load.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandwidth::{BandwidthAxis, BandwidthTable};
use crate::energy::Model;
use crate::error::{Error, Result};
use crate::fit::FitReport;
use crate::kernel::{KernelDesc, KernelKind};
use crate::machine::{FreqRange, MachineSpec, UncoreMode};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Machine description as stored on disk; the bandwidth table is a separate
/// CSV referenced relative to this file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineFile {
    pub name: String,
    pub n_cores: u32,
    pub core_freq: FreqRange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncore_freq: Option<FreqRange>,
    pub uncore_mode: UncoreMode,
    pub peak_work_per_cycle: f64,
    pub bandwidth_table: PathBuf,
    /// Defaults to `core` for slaved and `uncore` for independent machines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_axis: Option<BandwidthAxis>,
}

impl MachineFile {
    pub fn axis(&self) -> BandwidthAxis {
        self.bandwidth_axis.unwrap_or(match self.uncore_mode {
            UncoreMode::Slaved => BandwidthAxis::Core,
            UncoreMode::Independent => BandwidthAxis::Uncore,
        })
    }

    /// Resolves the bandwidth table relative to `base_dir`.
    pub fn into_spec(self, base_dir: &Path) -> Result<MachineSpec> {
        let table_path = base_dir.join(&self.bandwidth_table);
        let file = File::open(&table_path).map_err(|e| {
            Error::Config(format!("bandwidth table {}: {e}", table_path.display()))
        })?;
        let bandwidth = BandwidthTable::read_csv(file, self.axis())?;
        let spec = MachineSpec {
            name: self.name,
            n_cores: self.n_cores,
            core_freq: self.core_freq,
            uncore_freq: self.uncore_freq,
            uncore_mode: self.uncore_mode,
            peak_work_per_cycle: self.peak_work_per_cycle,
            bandwidth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &MachineSpec, bandwidth_table: impl Into<PathBuf>) -> Self {
        Self {
            name: spec.name.clone(),
            n_cores: spec.n_cores,
            core_freq: spec.core_freq,
            uncore_freq: spec.uncore_freq,
            uncore_mode: spec.uncore_mode,
            peak_work_per_cycle: spec.peak_work_per_cycle,
            bandwidth_table: bandwidth_table.into(),
            bandwidth_axis: Some(spec.bandwidth.axis),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{what} {}: {e}", path.display())))
}

pub fn load_machine(path: &Path) -> Result<MachineSpec> {
    let file: MachineFile = read_json(path, "machine file")?;
    file.into_spec(path.parent().unwrap_or(Path::new(".")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsFile {
    pub kernels: Vec<KernelDesc>,
}

pub fn load_kernels(path: &Path) -> Result<Vec<KernelDesc>> {
    let file: KernelsFile = read_json(path, "kernel file")?;
    let mut seen = std::collections::BTreeSet::new();
    for k in &file.kernels {
        k.validate()?;
        if !seen.insert(k.name.as_str()) {
            return Err(Error::Config(format!("kernel `{}` defined twice", k.name)));
        }
    }
    Ok(file.kernels)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// RFC 3339 timestamp of the fit.
    pub fitted_at: String,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPayload {
    pub chip_id: String,
    pub machine: MachineSpec,
    pub kernels: BTreeMap<String, KernelDesc>,
    pub power: crate::power::PowerParams,
    pub fits: BTreeMap<String, FitReport>,
    pub provenance: Provenance,
}

impl ModelPayload {
    pub fn model(&self) -> Model {
        Model {
            machine: self.machine.clone(),
            kernels: self.kernels.clone(),
            power: self.power.clone(),
        }
    }

    fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub payload: ModelPayload,
    pub payload_sha256: String,
}

impl ModelFile {
    pub fn new(
        chip_id: String,
        model: Model,
        fits: BTreeMap<String, FitReport>,
        provenance: Provenance,
    ) -> Result<Self> {
        model.validate()?;
        let payload = ModelPayload {
            chip_id,
            machine: model.machine,
            kernels: model.kernels,
            power: model.power,
            fits,
            provenance,
        };
        let payload_sha256 = payload.digest()?;
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            payload,
            payload_sha256,
        })
    }

    pub fn model(&self) -> Model {
        self.payload.model()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and verifies a model document.
    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        match probe.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Schema(format!(
                    "model format version {v} is not supported (expected {MODEL_FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Schema("model file lacks format_version".into())),
        }
        let file: ModelFile = serde_json::from_str(text)?;
        let actual = file.payload.digest()?;
        if actual != file.payload_sha256 {
            return Err(Error::Integrity(format!(
                "payload digest {actual} does not match recorded {}",
                file.payload_sha256
            )));
        }
        file.model().validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Schema(format!("{}: {j}", path.display())),
            other => other,
        })
    }

    /// Scalar parameters for fleet comparisons, in a stable order.
    pub fn fleet_parameters(&self) -> Vec<(String, f64)> {
        let p = &self.payload;
        let mut out = Vec::new();
        let single = p.power.baseline.segments.len() == 1;
        for (i, s) in p.power.baseline.segments.iter().enumerate() {
            let prefix = if single { "base".to_string() } else { format!("base.seg{i}") };
            out.push((format!("{prefix}.w0"), s.w0));
            out.push((format!("{prefix}.w1"), s.w1));
            out.push((format!("{prefix}.w2"), s.w2));
        }
        for (name, c) in &p.power.per_kernel_core {
            out.push((format!("core.{name}.w0"), c.w0));
            out.push((format!("core.{name}.w1"), c.w1));
            out.push((format!("core.{name}.w2"), c.w2));
            if p.kernels.get(name).is_some_and(KernelDesc::is_saturating) {
                out.push((format!("core.{name}.alpha"), c.alpha));
            }
        }
        for (name, k) in &p.kernels {
            if let KernelKind::Saturating { p0, .. } = k.kind {
                out.push((format!("p0.{name}"), p0));
            }
        }
        out
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn sample() -> ModelFile {
        let model = synthetic::snb_model();
        let provenance = Provenance {
            fitted_at: "2015-01-01T00:00:00Z".into(),
            inputs: vec![InputDigest {
                path: "m.csv".into(),
                sha256: "00".into(),
            }],
        };
        ModelFile::new("snb-00".into(), model, BTreeMap::new(), provenance).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let file = sample();
        let back = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn tampering_is_detected() {
        let text = sample().to_json().unwrap().replace("\"snb-00\"", "\"snb-01\"");
        assert!(matches!(ModelFile::from_json(&text), Err(Error::Integrity(_))));
    }

    #[test]
    fn version_is_checked() {
        let text = sample().to_json().unwrap().replacen("\"format_version\": 1", "\"format_version\": 9", 1);
        assert!(matches!(ModelFile::from_json(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn machine_file_resolves_table() {
        let dir = std::env::temp_dir().join(format!("ecm-energy-machine-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let spec = synthetic::bdw_machine();
        spec.bandwidth.write_csv(File::create(dir.join("bw.csv")).unwrap()).unwrap();
        let mut mf = MachineFile::from_spec(&spec, "bw.csv");
        mf.bandwidth_axis = None;
        fs::write(dir.join("m.json"), serde_json::to_string(&mf).unwrap()).unwrap();
        let loaded = load_machine(&dir.join("m.json")).unwrap();
        assert_eq!(loaded, spec);
        fs::remove_dir_all(&dir).unwrap();
    }
}
