//! Simulation configuration and its validation.

use std::io;

use thiserror::Error;

use crate::circuit::{CircuitError, CircuitParams, Mode, TimingParams};
use crate::detector::{DetectorParams, ModelError, OperatingPoint};

#[derive(Debug, Error)]
pub enum SimError {
    /// Configuration rejected before the run; `key` names the offending setting.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("malformed timestamp file, line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl SimError {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

/// Pulsed laser plus timing reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    pub rep_rate_hz: f64,
    /// Mean photons per pulse.
    pub mu: f64,
    pub laser_fwhm_ps: f64,
    /// Gaussian FWHM of the characterization electronics.
    pub system_jitter_ps: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            rep_rate_hz: 100.0e3,
            mu: 1.0,
            laser_fwhm_ps: 70.0,
            system_jitter_ps: 30.0,
        }
    }
}

/// Gate rises at `k * period_ns` and falls `width_ns` later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateSchedule {
    pub period_ns: f64,
    pub width_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mode: Mode,
    pub duration_s: f64,
    pub seed: u64,
    /// ChaCha stream selector; lets paired runs (light/dark) share a seed.
    pub rng_stream: u64,
    pub gate_schedule: Option<GateSchedule>,
    pub tdc_resolution_ps: u64,
    pub detector: DetectorParams<f64>,
    pub operating: OperatingPoint<f64>,
    pub circuit: CircuitParams<f64>,
    pub timing: TimingParams,
    pub source: SourceParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            mode: Mode::FreeRunning,
            duration_s: 10.0,
            seed: 1,
            rng_stream: 0,
            gate_schedule: None,
            tdc_resolution_ps: 10,
            detector: DetectorParams::default(),
            operating: OperatingPoint::reference(),
            circuit: CircuitParams::default(),
            timing: TimingParams::default(),
            source: SourceParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(SimError::config("duration", "must be positive and finite"));
        }
        // i64 femtoseconds cover ~2.5 hours.
        if self.duration_s > 9.0e3 {
            return Err(SimError::config("duration", "longer than 9000 s"));
        }
        if self.tdc_resolution_ps == 0 {
            return Err(SimError::config("tdc_resolution", "must be positive"));
        }
        match (self.mode, &self.gate_schedule) {
            (Mode::FreeRunning, Some(_)) => {
                return Err(SimError::config(
                    "gate_schedule",
                    "only allowed in gating or hybrid mode",
                ))
            }
            (Mode::Gating | Mode::Hybrid, None) => {
                return Err(SimError::config(
                    "gate_schedule",
                    format!("required in {} mode", self.mode.name()),
                ))
            }
            (_, Some(g)) => {
                if !(g.period_ns > 0.0 && g.width_ns > 0.0 && g.width_ns < g.period_ns) {
                    return Err(SimError::config(
                        "gate_schedule",
                        "need 0 < width < period",
                    ));
                }
            }
            (Mode::FreeRunning, None) => {}
        }
        let s = &self.source;
        if !(s.rep_rate_hz > 0.0 && s.rep_rate_hz.is_finite()) {
            return Err(SimError::config("source.rep_rate", "must be positive"));
        }
        if !(s.mu >= 0.0 && s.mu.is_finite()) {
            return Err(SimError::config("source.mu", "must be non-negative"));
        }
        if !(s.laser_fwhm_ps >= 0.0 && s.laser_fwhm_ps.is_finite()) {
            return Err(SimError::config("source.laser_fwhm", "must be non-negative"));
        }
        if !(s.system_jitter_ps >= 0.0 && s.system_jitter_ps.is_finite()) {
            return Err(SimError::config("source.system_jitter", "must be non-negative"));
        }
        self.operating.validate().map_err(|e| match e {
            ModelError::OutOfRange { quantity, .. } => {
                SimError::config(format!("operating.{quantity}"), e.to_string())
            }
            other => other.into(),
        })?;
        self.detector.validate().map_err(|e| match e {
            ModelError::InvalidParameter { name, .. } => {
                SimError::config(format!("detector.{name}"), e.to_string())
            }
            other => other.into(),
        })?;
        self.circuit.validate().map_err(|e| match e {
            CircuitError::InvalidParameter { name, .. } => {
                SimError::config(format!("circuit.{name}"), e.to_string())
            }
            other => other.into(),
        })?;
        self.timing
            .validate()
            .map_err(|e| SimError::config(format!("timing.{}", e.name), e.to_string()))?;
        Ok(())
    }

    pub fn duration_fs(&self) -> i64 {
        (self.duration_s * 1.0e15).round() as i64
    }

    pub fn pulse_period_fs(&self) -> i64 {
        (1.0e15 / self.source.rep_rate_hz).round() as i64
    }
}
