//! Closed-loop calibration of the trap yield against the reference
//! afterpulse probability.

use crate::characterize::AnalysisParams;
use crate::engine::{SimConfig, SimError};
use crate::sweep::calibrate_point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapYieldFit {
    pub trap_yield: f64,
    pub p_ap: f64,
    pub iterations: usize,
}

/// Bisects `detector.trap_yield_ref` until the measured afterpulse
/// probability at `config` is within `tol` of `target`. The seed is held
/// fixed so the objective is a deterministic function of the yield.
pub fn calibrate_trap_yield(
    config: &SimConfig,
    analysis: &AnalysisParams,
    target: f64,
    tol: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<TrapYieldFit, SimError> {
    let measure = |n: f64| -> Result<f64, SimError> {
        let mut c = config.clone();
        c.detector.trap_yield_ref = n;
        calibrate_point(&c, analysis)
            .map(|r| r.p_ap.value)
            .map_err(|e| SimError::config("detector.n_ref", e))
    };
    let mut best = TrapYieldFit { trap_yield: lo, p_ap: f64::NAN, iterations: 0 };
    for i in 1..=40 {
        let mid = 0.5 * (lo + hi);
        let p = measure(mid)?;
        best = TrapYieldFit { trap_yield: mid, p_ap: p, iterations: i };
        if (p - target).abs() < tol {
            break;
        }
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}
