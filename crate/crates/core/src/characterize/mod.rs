//! Calibration pipeline: timestamp streams to efficiency, dark count rate,
//! afterpulse probability and timing jitter.

pub mod classify;
pub mod estimators;
pub mod histogram;
pub mod report;

use thiserror::Error;

pub use classify::{classify_events, Classification, PhaseFolder};
pub use estimators::{
    estimate_afterpulse, estimate_dcr, estimate_dcr_from_count, estimate_pde, pde_stderr,
    AfterpulseEstimate,
};
pub use histogram::{fwhm, Histogram};
pub use report::{report, report_from_folded, write_report_csv, CalibrationReport, DarkReference, REPORT_HEADER};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharacterizeError {
    #[error("photon rate {r_ph} reaches the repetition rate {f}; efficiency undefined")]
    Saturated { r_ph: f64, f: f64 },
    #[error("invalid {name} = {value}")]
    InvalidInput { name: &'static str, value: f64 },
    #[error("no sync records in stream")]
    NoSync,
    #[error("no photon counts; afterpulse probability undefined")]
    NoPhotons,
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("histogram is flat; no maximum")]
    FlatHistogram,
    #[error("peak does not fall below half maximum inside the histogram")]
    PeakAtEdge,
}

/// Photon window and histogram binning, both in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisParams {
    /// Full width of the photon window centred on the laser-response peak.
    pub window_ps: u64,
    pub bin_width_ps: u64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            window_ps: 2000,
            bin_width_ps: 10,
        }
    }
}

/// Value with one-sigma statistical uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measured<T> {
    pub value: T,
    pub stderr: T,
}

impl<T> Measured<T> {
    pub fn new(value: T, stderr: T) -> Self {
        Self { value, stderr }
    }
}
