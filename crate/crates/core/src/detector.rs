//! Stochastic device model of the avalanche photodiode.
//!
//! Every law is a function of the operating point (excess bias and
//! temperature). Efficiency saturates with excess bias; dark counts and trap
//! yield grow exponentially with it. Dark counts rise with temperature while
//! trap yield falls. The parameter defaults are pinned to the measured
//! operating anchors listed in [`anchors`].

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use thiserror::Error;

use crate::scalar::{fwhm_to_sigma, Scalar};

/// Measured device anchors the default parameters are calibrated against.
pub mod anchors {
    pub const BREAKDOWN_VOLTAGE: f64 = 170.0;
    pub const REFERENCE_V_EX: f64 = 45.0;
    pub const REFERENCE_TEMPERATURE: f64 = 268.0;
    /// Efficiency at the reference bias.
    pub const PDE_REFERENCE: f64 = 0.844;
    /// Dark count rate (cps) at the reference point.
    pub const DCR_REFERENCE: f64 = 260.0;
    pub const DCR_COOLED_TEMPERATURE: f64 = 258.0;
    pub const DCR_COOLED: f64 = 80.0;
    pub const PAP_REFERENCE: f64 = 0.029;
    pub const PAP_WARM_TEMPERATURE: f64 = 288.0;
    pub const PAP_WARM: f64 = 0.012;
    /// Total timing FWHM (ps) at efficiencies of 75%, 81% and 84%, including
    /// source and system jitter.
    pub const JITTER_SETTINGS: [(f64, f64); 3] = [(0.75, 540.0), (0.81, 430.0), (0.844, 360.0)];
    pub const LASER_FWHM_PS: f64 = 70.0;
    pub const SYSTEM_JITTER_FWHM_PS: f64 = 30.0;
    /// Propagation delay shrinks by this much (ns) between the 75% and 84% settings.
    pub const DELAY_REDUCTION_NS: f64 = 5.0;
    /// Default excess-bias slope shared by the dark and afterpulse laws (1/V).
    pub const DEFAULT_BIAS_SLOPE: f64 = 0.05;
    pub const DEFAULT_V_SAT: f64 = 12.0;
    pub const DEFAULT_TAU_TRAP_NS: f64 = 100.0;
    pub const DEFAULT_TAU_TAIL_PS: f64 = 200.0;
    pub const DEFAULT_FRAC_TAIL: f64 = 0.05;
    pub const DEFAULT_DELAY0_NS: f64 = 20.0;
    /// Mean trapped carriers per avalanche at the reference point, obtained by
    /// bisecting the full simulator until the closed-loop afterpulse
    /// probability hits [`PAP_REFERENCE`] (see `calibration`).
    pub const DEFAULT_TRAP_YIELD: f64 = 0.06323;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{quantity} = {value} outside valid range [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid detector parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Excess bias (V) and temperature (K) at which the device is operated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<T> {
    pub v_ex: T,
    pub temperature: T,
}

impl<T: Scalar> OperatingPoint<T> {
    pub const V_EX_MAX: f64 = 50.0;
    pub const TEMPERATURE_MIN: f64 = 250.0;
    pub const TEMPERATURE_MAX: f64 = 300.0;

    pub fn new(v_ex: T, temperature: T) -> Result<Self, ModelError> {
        let op = Self { v_ex, temperature };
        op.validate()?;
        Ok(op)
    }

    pub fn reference() -> Self {
        Self {
            v_ex: T::lit(anchors::REFERENCE_V_EX),
            temperature: T::lit(anchors::REFERENCE_TEMPERATURE),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check_range("v_ex", self.v_ex.as_f64(), 0.0, Self::V_EX_MAX)?;
        check_range(
            "temperature",
            self.temperature.as_f64(),
            Self::TEMPERATURE_MIN,
            Self::TEMPERATURE_MAX,
        )
    }
}

fn check_range(quantity: &'static str, value: f64, min: f64, max: f64) -> Result<(), ModelError> {
    // NaN fails both comparisons and lands here too.
    if value >= min && value <= max {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            quantity,
            value,
            min,
            max,
        })
    }
}

/// Piecewise-linear Gaussian core width (ps, standard deviation) versus
/// excess bias, held flat outside the outermost knots.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaCoreLaw<T> {
    knots: Vec<(T, T)>,
}

impl<T: Scalar> SigmaCoreLaw<T> {
    /// Knots are `(v_ex, sigma_ps)` pairs; they are sorted by bias.
    pub fn new(mut knots: Vec<(T, T)>) -> Result<Self, ModelError> {
        if knots.is_empty() {
            return Err(ModelError::InvalidParameter {
                name: "sigma_core",
                value: 0.0,
                reason: "at least one knot required",
            });
        }
        for &(v, s) in &knots {
            if !v.is_finite() || !s.is_finite() || s < T::zero() {
                return Err(ModelError::InvalidParameter {
                    name: "sigma_core",
                    value: s.as_f64(),
                    reason: "knots must be finite with non-negative width",
                });
            }
        }
        knots.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite knots"));
        Ok(Self { knots })
    }

    pub fn constant(sigma_ps: T) -> Self {
        Self {
            knots: vec![(T::zero(), sigma_ps)],
        }
    }

    /// Builds the law from total measured FWHMs by removing the Gaussian
    /// source and system contributions in quadrature.
    pub fn from_total_fwhm(
        settings: &[(T, T)],
        laser_fwhm: T,
        system_fwhm: T,
    ) -> Result<Self, ModelError> {
        let knots = settings
            .iter()
            .map(|&(v_ex, total)| {
                let core2 = total * total - laser_fwhm * laser_fwhm - system_fwhm * system_fwhm;
                if core2 < T::zero() {
                    Err(ModelError::InvalidParameter {
                        name: "sigma_core",
                        value: total.as_f64(),
                        reason: "total width smaller than source plus system jitter",
                    })
                } else {
                    Ok((v_ex, fwhm_to_sigma(core2.sqrt())))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(knots)
    }

    pub fn knots(&self) -> &[(T, T)] {
        &self.knots
    }

    pub fn eval(&self, v_ex: T) -> T {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if v_ex <= first.0 {
            return first.1;
        }
        if v_ex >= last.0 {
            return last.1;
        }
        let i = self.knots.partition_point(|k| k.0 <= v_ex);
        let (x0, y0) = self.knots[i - 1];
        let (x1, y1) = self.knots[i];
        y0 + (y1 - y0) * (v_ex - x0) / (x1 - x0)
    }
}

/// Physical model parameters. Times carry their unit in the field name.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams<T> {
    pub v_br: T,
    pub eta_max: T,
    pub v_sat: T,
    /// Dark count rate (cps) at 45 V / 268 K.
    pub dcr_ref: T,
    pub alpha_dcr: T,
    pub beta_dcr: T,
    /// Closed-loop afterpulse probability targeted at the reference point.
    pub pap_ref: T,
    /// Mean trapped carriers per avalanche at the reference point.
    pub trap_yield_ref: T,
    pub gamma_ap: T,
    pub kappa_ap: T,
    pub tau_trap_ns: T,
    pub sigma_core: SigmaCoreLaw<T>,
    pub tau_tail_ps: T,
    pub frac_tail: T,
    pub delay0_ns: T,
    pub delay_slope_ns_per_v: T,
}

impl<T: Scalar> Default for DetectorParams<T> {
    fn default() -> Self {
        use anchors::*;
        let v_sat = T::lit(DEFAULT_V_SAT);
        let v_ref = T::lit(REFERENCE_V_EX);
        let eta_max = T::lit(PDE_REFERENCE) / (T::one() - (-v_ref / v_sat).exp());
        let bias_at = |pde: f64| -v_sat * (T::one() - T::lit(pde) / eta_max).ln();
        let settings: Vec<(T, T)> = JITTER_SETTINGS
            .iter()
            .map(|&(pde, total)| {
                let v = if pde == PDE_REFERENCE {
                    v_ref
                } else {
                    bias_at(pde)
                };
                (v, T::lit(total))
            })
            .collect();
        let sigma_core = SigmaCoreLaw::from_total_fwhm(
            &settings,
            T::lit(LASER_FWHM_PS),
            T::lit(SYSTEM_JITTER_FWHM_PS),
        )
        .expect("default jitter settings are consistent");
        let v_low = settings[0].0;

        Self {
            v_br: T::lit(BREAKDOWN_VOLTAGE),
            eta_max,
            v_sat,
            dcr_ref: T::lit(DCR_REFERENCE),
            alpha_dcr: T::lit(DEFAULT_BIAS_SLOPE),
            beta_dcr: T::lit((DCR_REFERENCE / DCR_COOLED).ln())
                / T::lit(REFERENCE_TEMPERATURE - DCR_COOLED_TEMPERATURE),
            pap_ref: T::lit(PAP_REFERENCE),
            trap_yield_ref: T::lit(DEFAULT_TRAP_YIELD),
            gamma_ap: T::lit((PAP_REFERENCE / PAP_WARM).ln())
                / T::lit(PAP_WARM_TEMPERATURE - REFERENCE_TEMPERATURE),
            kappa_ap: T::lit(DEFAULT_BIAS_SLOPE),
            tau_trap_ns: T::lit(DEFAULT_TAU_TRAP_NS),
            sigma_core,
            tau_tail_ps: T::lit(DEFAULT_TAU_TAIL_PS),
            frac_tail: T::lit(DEFAULT_FRAC_TAIL),
            delay0_ns: T::lit(DEFAULT_DELAY0_NS),
            delay_slope_ns_per_v: T::lit(DELAY_REDUCTION_NS) / (v_ref - v_low),
        }
    }
}

impl<T: Scalar> DetectorParams<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |name, value: T, reason| {
            Err(ModelError::InvalidParameter {
                name,
                value: value.as_f64(),
                reason,
            })
        };
        if !(self.eta_max > T::zero() && self.eta_max <= T::one()) {
            return bad("eta_max", self.eta_max, "must lie in (0, 1]");
        }
        if !(self.v_sat > T::zero()) {
            return bad("v_sat", self.v_sat, "must be positive");
        }
        if !(self.v_br > T::zero()) {
            return bad("v_br", self.v_br, "must be positive");
        }
        let non_negative = [
            ("dcr_ref", self.dcr_ref),
            ("pap_ref", self.pap_ref),
            ("trap_yield_ref", self.trap_yield_ref),
            ("tau_trap", self.tau_trap_ns),
            ("tau_tail", self.tau_tail_ps),
            ("frac_tail", self.frac_tail),
            ("delay0", self.delay0_ns),
        ];
        for (name, value) in non_negative {
            if !(value >= T::zero()) || !value.is_finite() {
                return bad(name, value, "must be finite and non-negative");
            }
        }
        let finite = [
            ("alpha_dcr", self.alpha_dcr),
            ("beta_dcr", self.beta_dcr),
            ("gamma_ap", self.gamma_ap),
            ("kappa_ap", self.kappa_ap),
            ("delay_slope", self.delay_slope_ns_per_v),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return bad(name, value, "must be finite");
            }
        }
        if !(self.frac_tail < T::one()) {
            return bad("frac_tail", self.frac_tail, "must be below 1");
        }
        Ok(())
    }

    /// Excess bias at which [`pde`] reaches `target`.
    pub fn bias_for_pde(&self, target: T) -> Result<T, ModelError> {
        if !(target >= T::zero() && target < self.eta_max) {
            return Err(ModelError::OutOfRange {
                quantity: "pde",
                value: target.as_f64(),
                min: 0.0,
                max: self.eta_max.as_f64(),
            });
        }
        Ok(-self.v_sat * (T::one() - target / self.eta_max).ln())
    }
}

/// Photon detection efficiency; independent of temperature.
pub fn pde<T: Scalar>(op: &OperatingPoint<T>, p: &DetectorParams<T>) -> Result<T, ModelError> {
    op.validate()?;
    Ok(p.eta_max * (T::one() - (-op.v_ex / p.v_sat).exp()))
}

/// Dark count rate (cps).
pub fn dark_rate<T: Scalar>(op: &OperatingPoint<T>, p: &DetectorParams<T>) -> Result<T, ModelError> {
    op.validate()?;
    let dv = op.v_ex - T::lit(anchors::REFERENCE_V_EX);
    let dt = op.temperature - T::lit(anchors::REFERENCE_TEMPERATURE);
    Ok(p.dcr_ref * (p.alpha_dcr * dv).exp() * (p.beta_dcr * dt).exp())
}

/// Trap population left behind by one avalanche.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapIntensity<T> {
    /// Poisson mean of trapped carriers.
    pub expected_traps: T,
    /// Exponential release time constant (ns).
    pub tau_ns: T,
}

pub fn afterpulse_intensity<T: Scalar>(
    op: &OperatingPoint<T>,
    p: &DetectorParams<T>,
) -> Result<TrapIntensity<T>, ModelError> {
    op.validate()?;
    let dv = op.v_ex - T::lit(anchors::REFERENCE_V_EX);
    let dt = op.temperature - T::lit(anchors::REFERENCE_TEMPERATURE);
    Ok(TrapIntensity {
        expected_traps: p.trap_yield_ref * (p.kappa_ap * dv).exp() * (-p.gamma_ap * dt).exp(),
        tau_ns: p.tau_trap_ns,
    })
}

/// Expected number of afterpulse avalanches (including cascades) that follow
/// one primary avalanche when the detector is dead for `dead_time_ns`.
///
/// Only the first surviving release can fire, so a single generation fires
/// with probability `q = 1 - exp(-n·exp(-dead/tau))` and the cascade sums to
/// `q / (1 - q)`.
pub fn afterpulse_cascade_yield<T: Scalar>(trap: &TrapIntensity<T>, dead_time_ns: T) -> T {
    if trap.expected_traps <= T::zero() {
        return T::zero();
    }
    let survive = if trap.tau_ns > T::zero() {
        (-dead_time_ns / trap.tau_ns).exp()
    } else {
        T::zero()
    };
    let q = T::one() - (-trap.expected_traps * survive).exp();
    q / (T::one() - q)
}

/// Mean propagation delay (ns) from avalanche onset to the timing edge.
pub fn propagation_delay_ns<T: Scalar>(v_ex: T, p: &DetectorParams<T>) -> T {
    p.delay0_ns - p.delay_slope_ns_per_v * v_ex
}

/// Draws one detector response delay in picoseconds: the propagation delay
/// plus either a Gaussian core or, with probability `frac_tail`, the same
/// Gaussian followed by a one-sided exponential diffusion tail.
///
/// The operating point is not re-validated here; callers check it once.
pub fn sample_response_delay<T: Scalar, R: Rng + ?Sized>(
    op: &OperatingPoint<T>,
    p: &DetectorParams<T>,
    rng: &mut R,
) -> T {
    let mean_ps = propagation_delay_ns(op.v_ex, p) * T::lit(1000.0);
    let sigma = p.sigma_core.eval(op.v_ex);
    let z: f64 = rng.sample(StandardNormal);
    let mut x = mean_ps + sigma * T::lit(z);
    if p.frac_tail > T::zero() && rng.random::<f64>() < p.frac_tail.as_f64() {
        let e: f64 = rng.sample(Exp1);
        x = x + p.tau_tail_ps * T::lit(e);
    }
    x
}
