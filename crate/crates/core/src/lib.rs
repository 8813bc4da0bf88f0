//! Performance, power and energy models for multicore chips with core and
//! Uncore clock domains.
//!
//! * [`ecm`]: single-core ECM composition and refined multicore scaling with
//!   a memory-bus latency penalty.
//! * [`power`]: baseline and per-core chip power with efficiency damping.
//! * [`energy`] and [`explore`]: energy per work, analytic optimal clock and
//!   operating-point search.
//! * [`fit`]: parameter estimation from measurement records.
//! * [`stats`]: fleet statistics over many chips.
//! * [`files`], [`measurement`]: on-disk formats.

pub mod bandwidth;
pub mod ecm;
pub mod energy;
pub mod error;
pub mod explore;
pub mod files;
pub mod fit;
pub mod kernel;
pub mod machine;
pub mod measurement;
pub mod power;
pub mod stats;
pub mod synthetic;
pub mod units;

pub use bandwidth::{BandwidthAxis, BandwidthRow, BandwidthTable};
pub use ecm::{EcmContributions, Saturation, ScalingParams};
pub use energy::{f_opt, f_opt_for, FOpt, Model, OperatingPoint, PredictionPoint, Warning};
pub use error::{Error, Result};
pub use explore::{Grid, Objective, Sweep};
pub use files::{ModelFile, Provenance};
pub use fit::{Breakpoint, FitOptions, FitOutcome, FitReport};
pub use kernel::{KernelDesc, KernelKind};
pub use machine::{FreqRange, MachineSpec, UncoreMode};
pub use measurement::{MeasurementRecord, Measurements};
pub use power::{BaselineCoeffs, BaselineSegment, CoreCoeffs, PowerParams};
pub use stats::{Bins, FleetSample, FleetSummary, GaussianFit, Histogram};
pub use units::PerfUnit;
