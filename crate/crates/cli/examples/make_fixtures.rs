//! Regenerates the synthetic fixtures under `tests/fixtures/`.
//!
//! Every chip gets a machine file, a bandwidth table, a kernel catalog and
//! noiseless measurements. The SNB set also gets a noisy copy
//! (seed 2015, 0.5 % multiplicative Gaussian noise on performance and power).
//!
//! `cargo run -p ecm-energy-cli --example make_fixtures`

use std::fs::{self, File};
use std::path::Path;

use ecm_energy::files::{KernelsFile, MachineFile};
use ecm_energy::measurement::write_measurements;
use ecm_energy::synthetic::{self, Noise};
use ecm_energy::{KernelDesc, Model, OperatingPoint, PerfUnit};

fn write_set(
    dir: &Path,
    model: &Model,
    mut kernels: Vec<KernelDesc>,
    chip_id: &str,
    plan: &[(&str, OperatingPoint)],
    noise: Option<Noise>,
) -> ecm_energy::Result<()> {
    fs::create_dir_all(dir)?;
    // the latency penalty is left for `fit` to recover
    for k in &mut kernels {
        k.set_p0(0.0);
    }
    model.machine.bandwidth.write_csv(File::create(dir.join("bandwidth.csv"))?)?;
    let machine = MachineFile::from_spec(&model.machine, "bandwidth.csv");
    fs::write(dir.join("machine.json"), serde_json::to_string_pretty(&machine)? + "\n")?;
    fs::write(dir.join("kernels.json"), serde_json::to_string_pretty(&KernelsFile { kernels })? + "\n")?;
    let unit = PerfUnit::parse(synthetic::PERF_UNIT)?;
    let clean = synthetic::generate_records(model, chip_id, plan, None)?;
    write_measurements(File::create(dir.join("measurements.csv"))?, &unit, &clean)?;
    if let Some(noise) = noise {
        let noisy = synthetic::generate_records(model, chip_id, plan, Some(noise))?;
        write_measurements(File::create(dir.join("measurements_noisy.csv"))?, &unit, &noisy)?;
    }
    Ok(())
}

fn main() -> ecm_energy::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    write_set(
        &root.join("snb"),
        &synthetic::snb_model(),
        synthetic::snb_kernels(),
        "snb-00",
        &synthetic::snb_plan(),
        Some(Noise { seed: 2015, relative_sigma: 0.005 }),
    )?;
    write_set(
        &root.join("bdw"),
        &synthetic::bdw_model(),
        synthetic::bdw_kernels(),
        "bdw-00",
        &synthetic::bdw_plan(),
        None,
    )?;
    println!("fixtures written to {}", root.display());
    Ok(())
}
