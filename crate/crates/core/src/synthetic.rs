//! Reference machines, kernels and measurement generators for tests,
//! fixtures and benchmarks.
//!
//! Power coefficients and latency penalties are the reference values from
//! [`crate::power::reference`]; cycle contributions and bandwidth tables are
//! plausible stand-ins for streaming triad code.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bandwidth::{BandwidthAxis, BandwidthRow, BandwidthTable};
use crate::energy::{Model, OperatingPoint};
use crate::error::Result;
use crate::kernel::{KernelDesc, KernelKind};
use crate::machine::{snap_ghz, FreqRange, MachineSpec, UncoreMode};
use crate::measurement::MeasurementRecord;
use crate::power::reference::{bdw_params, snb_params};

pub const SNB_P0: f64 = 7.8;
pub const BDW_P0: f64 = 5.2;
pub const PERF_UNIT: &str = "GF/s";

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

pub fn snb_machine() -> MachineSpec {
    let core = FreqRange::new(1.2, 2.7, 0.1);
    let rows = core
        .grid(0.1)
        .into_iter()
        .map(|f| BandwidthRow {
            f_core_ghz: f,
            f_uncore_ghz: f,
            bandwidth_gbs: round1(24.5 + 6.0 * f),
        })
        .collect();
    MachineSpec {
        name: "SNB".into(),
        n_cores: 8,
        core_freq: core,
        uncore_freq: None,
        uncore_mode: UncoreMode::Slaved,
        peak_work_per_cycle: 8.0,
        bandwidth: BandwidthTable::new(BandwidthAxis::Core, rows).expect("valid table"),
    }
}

pub fn bdw_machine() -> MachineSpec {
    let core = FreqRange::new(1.2, 2.3, 0.1);
    let uncore = FreqRange::new(1.2, 2.8, 0.1);
    let rows = uncore
        .grid(0.1)
        .into_iter()
        .map(|fu| BandwidthRow {
            f_core_ghz: core.max_ghz,
            f_uncore_ghz: fu,
            bandwidth_gbs: round1(30.0 + 12.0 * fu),
        })
        .collect();
    MachineSpec {
        name: "BDW".into(),
        n_cores: 18,
        core_freq: core,
        uncore_freq: Some(uncore),
        uncore_mode: UncoreMode::Independent,
        peak_work_per_cycle: 16.0,
        bandwidth: BandwidthTable::new(BandwidthAxis::Uncore, rows).expect("valid table"),
    }
}

fn stream(t: [f64; 4], p0: f64) -> KernelDesc {
    KernelDesc {
        name: "stream".into(),
        perf_unit: PERF_UNIT.into(),
        kind: KernelKind::Saturating {
            t_comp: t[0],
            t_reg_l1: t[1],
            t_l1_l2: t[2],
            t_l2_l3: t[3],
            work_per_unit: 16.0,
            bytes_per_unit: 256.0,
            p0,
        },
    }
}

fn dgemm() -> KernelDesc {
    KernelDesc {
        name: "dgemm".into(),
        perf_unit: PERF_UNIT.into(),
        kind: KernelKind::ScalableFractionOfPeak { peak_fraction: 0.95 },
    }
}

pub fn snb_kernels() -> Vec<KernelDesc> {
    vec![dgemm(), stream([4.0, 6.0, 8.0, 8.0], SNB_P0)]
}

pub fn bdw_kernels() -> Vec<KernelDesc> {
    vec![dgemm(), stream([2.0, 4.0, 8.0, 10.0], BDW_P0)]
}

fn model(machine: MachineSpec, kernels: Vec<KernelDesc>, power: crate::power::PowerParams) -> Model {
    Model {
        machine,
        kernels: kernels.into_iter().map(|k| (k.name.clone(), k)).collect::<BTreeMap<_, _>>(),
        power,
    }
}

pub fn snb_model() -> Model {
    model(snb_machine(), snb_kernels(), snb_params())
}

pub fn bdw_model() -> Model {
    model(bdw_machine(), bdw_kernels(), bdw_params())
}

/// Seeded multiplicative Gaussian noise on performance and power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub seed: u64,
    pub relative_sigma: f64,
}

/// One record per `(kernel, point)` with model-predicted performance and
/// power, optionally perturbed.
pub fn generate_records(
    model: &Model,
    chip_id: &str,
    plan: &[(&str, OperatingPoint)],
    noise: Option<Noise>,
) -> Result<Vec<MeasurementRecord>> {
    let mut rng = noise.map(|n| (ChaCha8Rng::seed_from_u64(n.seed), n.relative_sigma));
    let mut out = Vec::with_capacity(plan.len());
    for &(kernel, op) in plan {
        let p = model.predict(kernel, op)?;
        let (perf_factor, power_factor) = match &mut rng {
            Some((rng, sigma)) => {
                let d = Normal::new(1.0, *sigma).expect("finite sigma");
                (d.sample(rng), d.sample(rng))
            }
            None => (1.0, 1.0),
        };
        out.push(MeasurementRecord {
            chip_id: chip_id.to_string(),
            kernel: kernel.to_string(),
            n: op.n,
            f_core: op.f_core,
            f_uncore: op.f_uncore,
            performance: p.performance * perf_factor,
            power: p.power * power_factor,
            repetitions: 1,
        });
    }
    Ok(out)
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    FreqRange::new(lo, hi, step).grid(step)
}

/// Measurement plan for the slaved machine: both kernels at every core
/// count and every 0.1 GHz clock.
pub fn snb_plan() -> Vec<(&'static str, OperatingPoint)> {
    let mut plan = Vec::new();
    for kernel in ["dgemm", "stream"] {
        for f in steps(1.2, 2.7, 0.1) {
            for n in 1..=8 {
                plan.push((kernel, OperatingPoint::new(n, f, f)));
            }
        }
    }
    plan
}

/// Measurement plan for the independent-Uncore machine: dgemm over the full
/// Uncore range at a few core clocks, stream at every core clock and
/// three Uncore clocks.
pub fn bdw_plan() -> Vec<(&'static str, OperatingPoint)> {
    let mut plan = Vec::new();
    for fc in [1.2, 1.5, 1.8, 2.1, 2.3] {
        for fu in steps(1.2, 2.8, 0.1) {
            for n in [1, 2, 4, 8, 12, 18] {
                plan.push(("dgemm", OperatingPoint::new(n, fc, fu)));
            }
        }
    }
    for fc in steps(1.2, 2.3, 0.1) {
        for fu in [1.2, 2.0, 2.8] {
            for n in 1..=18 {
                plan.push(("stream", OperatingPoint::new(n, fc, snap_ghz(fu))));
            }
        }
    }
    plan
}
