//! Photon and dark-carrier generation.
//!
//! Times are in picoseconds. The engine draws from the same routines pulse by
//! pulse so that memory stays bounded; the collecting helpers here exist for
//! analysis and tests.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use crate::scalar::fwhm_to_sigma;

use super::config::SourceParams;

/// Draws a Poisson count; a non-positive mean yields zero.
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    let n: f64 = d.sample(rng);
    n as u64
}

/// Photon arrival times (ps) of one laser pulse centred on `pulse_ps`,
/// sorted ascending.
pub fn draw_pulse<R: Rng + ?Sized>(s: &SourceParams, pulse_ps: f64, rng: &mut R) -> Vec<f64> {
    let n = poisson_count(s.mu, rng);
    let sigma = fwhm_to_sigma(s.laser_fwhm_ps);
    let mut times: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            pulse_ps + sigma * z
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times
}

/// Output of [`generate_photon_arrivals`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhotonArrivals {
    /// One entry per laser pulse, at the exact pulse time.
    pub sync_ps: Vec<f64>,
    /// All photon arrival times, sorted.
    pub photons_ps: Vec<f64>,
}

/// Pulses at `k / rep_rate` for every `k` with pulse time inside `duration_s`.
pub fn generate_photon_arrivals<R: Rng + ?Sized>(
    s: &SourceParams,
    duration_s: f64,
    rng: &mut R,
) -> PhotonArrivals {
    let period_ps = 1.0e12 / s.rep_rate_hz;
    let end_ps = duration_s * 1.0e12;
    let mut out = PhotonArrivals::default();
    let mut k = 0u64;
    loop {
        let t = k as f64 * period_ps;
        if t >= end_ps {
            break;
        }
        out.sync_ps.push(t);
        out.photons_ps.extend(draw_pulse(s, t, rng));
        k += 1;
    }
    out.photons_ps.sort_by(f64::total_cmp);
    out
}

/// Exponential waiting time (ps) to the next event of a Poisson process of
/// `rate_cps`; `None` for a zero rate.
pub fn next_interarrival_ps<R: Rng + ?Sized>(rate_cps: f64, rng: &mut R) -> Option<f64> {
    if !(rate_cps > 0.0) {
        return None;
    }
    let e: f64 = rng.sample(Exp1);
    Some(e / rate_cps * 1.0e12)
}

/// Homogeneous Poisson arrivals on `[0, duration_s)`, in picoseconds.
pub fn generate_dark_arrivals<R: Rng + ?Sized>(
    rate_cps: f64,
    duration_s: f64,
    rng: &mut R,
) -> Vec<f64> {
    let end_ps = duration_s * 1.0e12;
    let mut out = Vec::new();
    let mut t = 0.0;
    while let Some(dt) = next_interarrival_ps(rate_cps, rng) {
        t += dt;
        if t >= end_ps {
            break;
        }
        out.push(t);
    }
    out
}
