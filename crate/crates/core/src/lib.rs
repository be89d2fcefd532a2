//! Discrete-event simulation of a silicon single-photon avalanche diode with
//! its quenching readout, plus the calibration pipeline that recovers
//! efficiency, dark count rate, afterpulse probability and timing jitter from
//! the simulated timestamp streams.
//!
//! The analytic parts (device laws, working point, estimators) are generic
//! over [`Scalar`]; the engine runs in `f64` with an integer femtosecond clock.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod characterize;
pub mod circuit;
pub mod detector;
pub mod engine;
pub mod keyfile;
pub mod scalar;
pub mod sweep;

pub use characterize::{AnalysisParams, CalibrationReport, CharacterizeError, Histogram, Measured};
pub use circuit::{solve_working_point, CircuitError, CircuitParams, Mode, TimingParams, WorkingPoint};
pub use detector::{DetectorParams, ModelError, OperatingPoint, SigmaCoreLaw};
pub use engine::{run, run_with, RecordKind, RunStats, SimConfig, SimError, TimestampRecord};
pub use scalar::Scalar;
pub use sweep::SweepSpec;

pub type DetectorParamsF64 = DetectorParams<f64>;
pub type DetectorParamsF32 = DetectorParams<f32>;
pub type OperatingPointF64 = OperatingPoint<f64>;
pub type OperatingPointF32 = OperatingPoint<f32>;
pub type CircuitParamsF64 = CircuitParams<f64>;
pub type CircuitParamsF32 = CircuitParams<f32>;
pub type WorkingPointF64 = WorkingPoint<f64>;
pub type MeasuredF64 = Measured<f64>;
