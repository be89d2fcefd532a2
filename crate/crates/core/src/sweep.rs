//! Parameter sweeps over excess bias and temperature.
//!
//! Each point runs a light acquisition and a separate dark acquisition on its
//! own engine, then calibrates the pair. Point `i` (in `(T, v_ex)` order) is
//! seeded with `base_seed ^ i`; the dark run uses the next rng stream.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::characterize::{
    estimate_dcr_from_count, report_from_folded, AnalysisParams, CalibrationReport, DarkReference,
    PhaseFolder, REPORT_HEADER,
};
use crate::detector::OperatingPoint;
use crate::engine::{run_with, RecordSink, SimConfig, SimError, TimestampRecord};
use crate::keyfile::{analysis_from_keys, sim_config_from_keys, KeyFile};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub v_ex: Vec<f64>,
    pub temperature: Vec<f64>,
    /// Per-point acquisition time (s); both runs use it.
    pub duration_s: f64,
    pub base: SimConfig,
    pub analysis: AnalysisParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub v_ex: f64,
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub result: Result<CalibrationReport, String>,
}

impl SweepSpec {
    /// Reads a sweep file: the usual run keys plus `sweep.v_ex`,
    /// `sweep.temperature` (comma lists) and optionally `sweep.duration`.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut kf = KeyFile::parse(text)?;
        let v_ex = kf.take_list("sweep.v_ex")?;
        let temperature = kf.take_list("sweep.temperature")?;
        let duration: Option<f64> = kf.take("sweep.duration")?;
        let base = sim_config_from_keys(&mut kf)?;
        let analysis = analysis_from_keys(&mut kf)?;
        kf.finish()?;
        let spec = SweepSpec {
            v_ex: v_ex.ok_or_else(|| SimError::config("sweep.v_ex", "missing"))?,
            temperature: temperature
                .ok_or_else(|| SimError::config("sweep.temperature", "missing"))?,
            duration_s: duration.unwrap_or(base.duration_s),
            base,
            analysis,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.v_ex.is_empty() {
            return Err(SimError::config("sweep.v_ex", "must list at least one value"));
        }
        if self.temperature.is_empty() {
            return Err(SimError::config("sweep.temperature", "must list at least one value"));
        }
        for &v in &self.v_ex {
            OperatingPoint::new(v, self.base.operating.temperature)
                .map_err(|e| SimError::config("sweep.v_ex", e.to_string()))?;
        }
        for &t in &self.temperature {
            OperatingPoint::new(self.base.operating.v_ex, t)
                .map_err(|e| SimError::config("sweep.temperature", e.to_string()))?;
        }
        let mut base = self.base.clone();
        base.duration_s = self.duration_s;
        base.validate().map_err(|e| match e {
            SimError::Config { key, reason } if key == "duration" => {
                SimError::config("sweep.duration", reason)
            }
            other => other,
        })
    }

    /// Grid points sorted by temperature, then excess bias.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut grid: Vec<(f64, f64)> = self
            .temperature
            .iter()
            .flat_map(|&t| self.v_ex.iter().map(move |&v| (t, v)))
            .collect();
        grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        grid.into_iter()
            .enumerate()
            .map(|(index, (temperature, v_ex))| SweepPoint {
                index,
                v_ex,
                temperature,
                seed: self.base.seed ^ index as u64,
            })
            .collect()
    }

    pub fn point_config(&self, p: &SweepPoint) -> SimConfig {
        let mut c = self.base.clone();
        c.operating.v_ex = p.v_ex;
        c.operating.temperature = p.temperature;
        c.duration_s = self.duration_s;
        c.seed = p.seed;
        c
    }
}

struct Discard;

impl RecordSink for Discard {
    fn record(&mut self, _rec: TimestampRecord) -> io::Result<()> {
        Ok(())
    }
}

/// Light run plus dark run for one configuration.
pub fn calibrate_point(
    config: &SimConfig,
    analysis: &AnalysisParams,
) -> Result<CalibrationReport, String> {
    let mut folder = PhaseFolder::for_rate(config.source.rep_rate_hz, analysis.bin_width_ps as i64)
        .map_err(|e| e.to_string())?;
    run_with(config, &mut folder, &mut ()).map_err(|e| e.to_string())?;

    let mut dark = config.clone();
    dark.source.mu = 0.0;
    dark.rng_stream = config.rng_stream.wrapping_add(1);
    let stats = run_with(&dark, &mut Discard, &mut ()).map_err(|e| e.to_string())?;
    let dcr = estimate_dcr_from_count(stats.detections, config.duration_s).map_err(|e| e.to_string())?;

    let c = folder.classify(analysis.window_ps).map_err(|e| e.to_string())?;
    report_from_folded(&c, config, DarkReference::Supplied(dcr)).map_err(|e| e.to_string())
}

/// Runs every point on at most `jobs` threads. Rows come back in point order.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SimError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SimError::config("jobs", e.to_string()))?;
    let points = spec.points();
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|p| SweepRow {
                point: *p,
                result: calibrate_point(&spec.point_config(p), &spec.analysis),
            })
            .collect()
    }))
}

/// Report CSV with a trailing `error` column; failed points keep their
/// coordinates and seed and leave the measurements empty.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{REPORT_HEADER},error")?;
    for row in rows {
        match &row.result {
            Ok(r) => writeln!(out, "{},", r.csv_row())?,
            Err(e) => writeln!(
                out,
                "{:.2},{:.4},,,,,,,,,{},{}",
                row.point.temperature,
                row.point.v_ex,
                row.point.seed,
                e.replace([',', '\n'], ";")
            )?,
        }
    }
    Ok(())
}
