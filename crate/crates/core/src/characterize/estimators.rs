//! Closed-form estimators for efficiency, dark count rate and afterpulse
//! probability.

use crate::engine::{RecordKind, TimestampRecord};
use crate::scalar::Scalar;

use super::{CharacterizeError, Measured};

fn invalid<T: Scalar>(name: &'static str, value: T) -> CharacterizeError {
    CharacterizeError::InvalidInput {
        name,
        value: value.as_f64(),
    }
}

/// Efficiency from the photon detection rate under Poisson-distributed pulses:
/// `-ln(1 - r_ph/f) / mu`.
pub fn estimate_pde<T: Scalar>(r_ph: T, mu: T, f: T) -> Result<T, CharacterizeError> {
    if !(f > T::zero()) {
        return Err(invalid("f", f));
    }
    if !(mu > T::zero()) {
        return Err(invalid("mu", mu));
    }
    if !(r_ph >= T::zero()) {
        return Err(invalid("r_ph", r_ph));
    }
    if r_ph >= f {
        return Err(CharacterizeError::Saturated {
            r_ph: r_ph.as_f64(),
            f: f.as_f64(),
        });
    }
    Ok(-(-r_ph / f).ln_1p() / mu)
}

/// Standard error of [`estimate_pde`] from the binomial spread of the
/// per-pulse detection fraction over `pulses` pulses.
pub fn pde_stderr<T: Scalar>(r_ph: T, mu: T, f: T, pulses: T) -> T {
    let p = r_ph / f;
    if !(pulses > T::zero()) || p >= T::one() {
        return T::infinity();
    }
    (p / (pulses * (T::one() - p))).sqrt() / mu
}

/// Dark count rate with Poisson uncertainty.
pub fn estimate_dcr_from_count<T: Scalar>(count: u64, duration_s: T) -> Result<Measured<T>, CharacterizeError> {
    if !(duration_s > T::zero()) {
        return Err(invalid("duration", duration_s));
    }
    let n = T::lit(count as f64);
    Ok(Measured::new(n / duration_s, n.sqrt() / duration_s))
}

pub fn estimate_dcr<T: Scalar>(
    records: &[TimestampRecord],
    duration_s: T,
) -> Result<Measured<T>, CharacterizeError> {
    let n = records
        .iter()
        .filter(|r| r.kind == RecordKind::Detection)
        .count();
    estimate_dcr_from_count(n as u64, duration_s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfterpulseEstimate<T> {
    pub p_ap: Measured<T>,
    /// Afterpulse rate (cps).
    pub r_ap: T,
    /// Photon rate (cps).
    pub r_ph: T,
    /// The dark-subtracted afterpulse count was negative and clamped to zero.
    pub clamped: bool,
}

/// `R_ap / R_ph`, with `R_ap` the out-of-window counts in excess of the dark
/// expectation over `live_time_s` (the time outside the photon window).
pub fn estimate_afterpulse<T: Scalar>(
    photon_counts: T,
    other_counts: T,
    dcr: Measured<T>,
    live_time_s: T,
    duration_s: T,
) -> Result<AfterpulseEstimate<T>, CharacterizeError> {
    if !(duration_s > T::zero()) {
        return Err(invalid("duration", duration_s));
    }
    if !(photon_counts > T::zero()) {
        return Err(CharacterizeError::NoPhotons);
    }
    let dark = dcr.value * live_time_s;
    let excess = other_counts - dark;
    let clamped = excess < T::zero();
    let excess = excess.max(T::zero());
    let p = excess / photon_counts;
    let var_excess = other_counts + (dcr.stderr * live_time_s).powi(2);
    let stderr = if excess > T::zero() {
        p * (var_excess / (excess * excess) + photon_counts.recip()).sqrt()
    } else {
        var_excess.sqrt() / photon_counts
    };
    Ok(AfterpulseEstimate {
        p_ap: Measured::new(p, stderr),
        r_ap: excess / duration_s,
        r_ph: photon_counts / duration_s,
        clamped,
    })
}
