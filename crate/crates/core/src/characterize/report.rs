//! Full calibration of one light run.

use std::io::{self, Write};

use crate::engine::{SimConfig, TimestampRecord};

use super::classify::{classify_events, Classification};
use super::estimators::{estimate_afterpulse, estimate_dcr_from_count, estimate_pde, pde_stderr};
use super::histogram::fwhm;
use super::{AnalysisParams, CharacterizeError, Measured};

pub const REPORT_HEADER: &str =
    "temperature_K,v_ex_V,pde,pde_err,dcr_cps,dcr_err,p_ap,p_ap_err,fwhm_ps,counts_total,seed";

/// Where the dark count rate comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DarkReference {
    /// Measured in a separate dark run.
    Supplied(Measured<f64>),
    /// Counted in the quiet part of each period, from 20% to 95% of the
    /// period after the peak, where afterpulses have died out.
    TailSegment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub pde: Measured<f64>,
    pub dcr: Measured<f64>,
    pub p_ap: Measured<f64>,
    pub fwhm_ps: f64,
    /// Dark-corrected photon rate (cps).
    pub r_ph: f64,
    pub r_ap: f64,
    pub counts_total: u64,
    pub photon_counts: u64,
    pub other_counts: u64,
    /// A dark-subtracted count went negative and was clamped to zero.
    pub clamped: bool,
    pub temperature: f64,
    pub v_ex: f64,
    pub seed: u64,
}

pub fn report(
    records: &[TimestampRecord],
    config: &SimConfig,
    analysis: &AnalysisParams,
    dark: DarkReference,
) -> Result<CalibrationReport, CharacterizeError> {
    let c = classify_events(records, config.source.rep_rate_hz, analysis)?;
    report_from_folded(&c, config, dark)
}

pub fn report_from_folded(
    c: &Classification,
    config: &SimConfig,
    dark: DarkReference,
) -> Result<CalibrationReport, CharacterizeError> {
    let t = config.duration_s;
    let f = config.source.rep_rate_hz;
    let mu = config.source.mu;
    let period = c.period_ps;
    let dcr = match dark {
        DarkReference::Supplied(m) => m,
        DarkReference::TailSegment => {
            let (a, b) = (period / 5, period * 19 / 20);
            let n = c.counts_after_peak(a, b);
            let m = estimate_dcr_from_count(n, t)?;
            let share = (b - a) as f64 / period as f64;
            Measured::new(m.value / share, m.stderr / share)
        }
    };

    let leak = dcr.value * t * c.window_fraction();
    let photon = c.photon_counts as f64 - leak;
    let mut clamped = photon < 0.0;
    let photon = photon.max(0.0);
    let r_ph = photon / t;
    let pde = estimate_pde(r_ph, mu, f)?;
    let pde_err = pde_stderr(r_ph, mu, f, f * t);

    let live = t * (1.0 - c.window_fraction());
    let ap = estimate_afterpulse(photon, c.other_counts as f64, dcr, live, t)?;
    clamped |= ap.clamped;

    Ok(CalibrationReport {
        pde: Measured::new(pde, pde_err),
        dcr,
        p_ap: ap.p_ap,
        fwhm_ps: fwhm(&c.histogram)?,
        r_ph,
        r_ap: ap.r_ap,
        counts_total: c.total(),
        photon_counts: c.photon_counts,
        other_counts: c.other_counts,
        clamped,
        temperature: config.operating.temperature,
        v_ex: config.operating.v_ex,
        seed: config.seed,
    })
}

impl CalibrationReport {
    /// One CSV row matching [`REPORT_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{:.2},{:.4},{:.6},{:.6},{:.3},{:.3},{:.6},{:.6},{:.2},{},{}",
            self.temperature,
            self.v_ex,
            self.pde.value,
            self.pde.stderr,
            self.dcr.value,
            self.dcr.stderr,
            self.p_ap.value,
            self.p_ap.stderr,
            self.fwhm_ps,
            self.counts_total,
            self.seed
        )
    }
}

pub fn write_report_csv<W: Write>(mut out: W, reports: &[CalibrationReport]) -> io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}
