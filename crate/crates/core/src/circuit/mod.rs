//! Quenching and avalanche-extraction circuit.
//!
//! [`solve_working_point`] finds the idle-state equilibrium of the M1 source
//! node: the intersection of the Zener branch `Vdd-R1-L1-D1-D2` with the
//! current balance at the SPAD anode. The timed behaviour of the readout
//! lives in [`machine`]; [`waveform`] renders anode traces from transition logs.

pub mod machine;
pub mod waveform;

use thiserror::Error;

use crate::scalar::Scalar;

pub use machine::{
    transition, CircuitEvent, CircuitState, Mode, Scheduled, StateKind, TimingParams, Transition,
};
pub use waveform::{anode_waveform, write_waveform, Scenario, TransitionLog, WaveformPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error(
        "no bracket for the working point: f(0) = {f_low:.6} V, f(v_zener) = {f_high:.6} V \
         (need f(0) > 0 > f(v_zener); check r_on/r_off ordering)"
    )]
    NoBracket { f_low: f64, f_high: f64 },
    #[error("invalid circuit parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("illegal transition: {event:?} in state {state:?} ({mode:?} mode)")]
    IllegalTransition {
        state: StateKind,
        event: CircuitEvent,
        mode: Mode,
    },
}

/// Component values of the readout. Voltages in V, resistances in Ω,
/// currents in A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams<T> {
    pub v_dd: T,
    pub v_cc: T,
    pub v_zener: T,
    /// M1 threshold.
    pub v_on: T,
    pub r1: T,
    /// Anode-to-ground load.
    pub r2: T,
    /// Sampling resistor in the extraction path.
    pub r3: T,
    /// M1 fully on.
    pub r_on: T,
    /// M1 fully off.
    pub r_off: T,
    /// Zener knee current scale.
    pub i0_zener: T,
    /// Zener exponential slope.
    pub v_slope: T,
    /// Width of the logistic M1 turn-on centred at `v_on`.
    pub m1_width: T,
}

impl<T: Scalar> Default for CircuitParams<T> {
    fn default() -> Self {
        Self {
            v_dd: T::lit(53.0),
            v_cc: T::lit(5.0),
            v_zener: T::lit(4.3),
            v_on: T::lit(2.5),
            r1: T::lit(1.0e3),
            r2: T::lit(20.0e3),
            r3: T::lit(1.0e3),
            r_on: T::lit(1.0),
            r_off: T::lit(1.0e9),
            i0_zener: T::lit(10.0e-6),
            v_slope: T::lit(0.1),
            m1_width: T::lit(0.02),
        }
    }
}

impl<T: Scalar> CircuitParams<T> {
    pub fn validate(&self) -> Result<(), CircuitError> {
        let bad = |name, value: T, reason| {
            Err(CircuitError::InvalidParameter {
                name,
                value: value.as_f64(),
                reason,
            })
        };
        if !(self.v_on < self.v_zener && self.v_zener < self.v_dd) {
            return bad("v_zener", self.v_zener, "need v_on < v_zener < v_dd");
        }
        for (name, r) in [
            ("r1", self.r1),
            ("r2", self.r2),
            ("r3", self.r3),
            ("r_on", self.r_on),
            ("r_off", self.r_off),
        ] {
            if !(r > T::zero()) {
                return bad(name, r, "resistance must be positive");
            }
        }
        if !(self.v_slope > T::zero()) {
            return bad("v_slope", self.v_slope, "must be positive");
        }
        if !(self.m1_width > T::zero()) {
            return bad("m1_width", self.m1_width, "must be positive");
        }
        if !(self.i0_zener >= T::zero()) {
            return bad("i0_zener", self.i0_zener, "must be non-negative");
        }
        Ok(())
    }

    /// Zener branch current `i1(v_gs)`.
    pub fn zener_current(&self, v_gs: T) -> T {
        self.i0_zener * ((v_gs - self.v_zener) / self.v_slope).exp()
    }

    /// M1 conductance: logistic interpolation from `1/r_off` to `1/r_on`.
    pub fn m1_conductance(&self, v_gs: T) -> T {
        let g_off = self.r_off.recip();
        let g_on = self.r_on.recip();
        let s = T::one() / (T::one() + (-(v_gs - self.v_on) / self.m1_width).exp());
        g_off + (g_on - g_off) * s
    }

    pub fn m1_resistance(&self, v_gs: T) -> T {
        self.m1_conductance(v_gs).recip()
    }
}

/// Idle-state equilibrium of M1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkingPoint<T> {
    pub v_gs: T,
    pub v_s: T,
    pub i1: T,
    /// `zener_branch_vs - balance_branch_vs` at the solution.
    pub residual: T,
}

/// `V_S = V_dd - i1·R1 - V_GS` along the Zener branch.
pub fn zener_branch_vs<T: Scalar>(v_gs: T, c: &CircuitParams<T>) -> T {
    c.v_dd - c.zener_current(v_gs) * c.r1 - v_gs
}

/// Solves `i1 + (V_dd - V_S)/R_M1 = V_S/R2` for `V_S`. `r_m1` may be infinite.
pub fn anode_balance<T: Scalar>(i1: T, r_m1: T, c: &CircuitParams<T>) -> T {
    let g = r_m1.recip();
    (i1 + c.v_dd * g) / (g + c.r2.recip())
}

/// `V_S` from the anode current balance with M1 biased at `v_gs`.
pub fn balance_branch_vs<T: Scalar>(v_gs: T, c: &CircuitParams<T>) -> T {
    let g = c.m1_conductance(v_gs);
    (c.zener_current(v_gs) + c.v_dd * g) / (g + c.r2.recip())
}

fn branch_gap<T: Scalar>(v_gs: T, c: &CircuitParams<T>) -> T {
    zener_branch_vs(v_gs, c) - balance_branch_vs(v_gs, c)
}

/// Bisection for a sign change of `f` on `[lo, hi]`; stops once `|f| < tol`
/// or the interval can no longer be split. Returns `None` without a bracket.
pub fn bisect<T: Scalar, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T, tol: T) -> Option<(T, T)> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == T::zero() {
        return Some((lo, f_lo));
    }
    if f_hi == T::zero() {
        return Some((hi, f_hi));
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return None;
    }
    let two = T::lit(2.0);
    loop {
        let mid = lo + (hi - lo) / two;
        let f_mid = f(mid);
        if f_mid.abs() < tol || mid <= lo || mid >= hi {
            return Some((mid, f_mid));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

/// Idle-state working point by bisection on `[0, v_zener]`.
pub fn solve_working_point<T: Scalar>(
    c: &CircuitParams<T>,
    tol: T,
) -> Result<WorkingPoint<T>, CircuitError> {
    c.validate()?;
    if !(tol > T::zero()) {
        return Err(CircuitError::InvalidParameter {
            name: "tol",
            value: tol.as_f64(),
            reason: "solver tolerance must be positive",
        });
    }
    let f = |v| branch_gap(v, c);
    let (f_low, f_high) = (f(T::zero()), f(c.v_zener));
    if !(f_low > T::zero() && f_high < T::zero()) {
        return Err(CircuitError::NoBracket {
            f_low: f_low.as_f64(),
            f_high: f_high.as_f64(),
        });
    }
    let (v_gs, residual) =
        bisect(f, T::zero(), c.v_zener, tol).expect("bracket verified above");
    Ok(WorkingPoint {
        v_gs,
        v_s: zener_branch_vs(v_gs, c),
        i1: c.zener_current(v_gs),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zener_branch_examples() {
        let c = CircuitParams::<f64>::default();
        assert!((zener_branch_vs(0.0, &c) - 53.0).abs() < 1e-9);
        // i1 at 2.5 V is 10 µA·exp(-18) ≈ 1.5e-13 A.
        let v = zener_branch_vs(2.5, &c);
        assert!((v - 50.5).abs() < 1e-9);
        let knee = CircuitParams { i0_zener: 1e-3, v_slope: 1e-6, ..c };
        assert!((zener_branch_vs(4.3, &knee) - 47.7).abs() < 1e-12);
    }

    #[test]
    fn balance_branch_examples() {
        let c = CircuitParams::<f64>::default();
        assert!(balance_branch_vs(0.0, &c).abs() < 2e-3);
        let on = balance_branch_vs(3.0, &c);
        assert!((on - 53.0 * 20000.0 / 20001.0).abs() < 1e-3, "{on}");
        assert!((on - 52.997).abs() < 1e-3);
        assert!((anode_balance(1e-3, f64::INFINITY, &c) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn working_point_defaults() {
        let c = CircuitParams::<f64>::default();
        let wp = solve_working_point(&c, 1e-9).unwrap();
        assert!(wp.v_gs > 2.3 && wp.v_gs < 2.5, "{wp:?}");
        assert!(wp.v_s > 49.0 && wp.v_s < 53.0);
        assert!(wp.residual.abs() < 1e-9);
        // Quenched device sits below breakdown.
        assert!(170.0 + 45.0 - wp.v_s < 170.0);
    }

    #[test]
    fn gap_changes_sign_once() {
        let c = CircuitParams::<f64>::default();
        let n = 100_000;
        let mut changes = 0;
        let mut prev = branch_gap(0.0, &c);
        for i in 1..=n {
            let v = 4.3 * i as f64 / n as f64;
            let g = branch_gap(v, &c);
            if g.signum() != prev.signum() {
                changes += 1;
            }
            prev = g;
        }
        assert_eq!(changes, 1);
    }

    #[test]
    fn swapped_resistances_have_no_bracket() {
        let c = CircuitParams { r_on: 1e9, r_off: 1.0, ..CircuitParams::<f64>::default() };
        assert!(matches!(solve_working_point(&c, 1e-6), Err(CircuitError::NoBracket { .. })));
    }

    #[test]
    fn solver_respects_tolerance_in_f32() {
        let c = CircuitParams::<f32>::default();
        let wp = solve_working_point(&c, 1e-3).unwrap();
        assert!(wp.residual.abs() < 1e-3);
        assert!(wp.v_gs < 2.5);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let c = CircuitParams { v_zener: 60.0, ..CircuitParams::<f64>::default() };
        assert!(solve_working_point(&c, 1e-6).is_err());
        let c = CircuitParams { r2: 0.0, ..CircuitParams::<f64>::default() };
        assert!(c.validate().is_err());
        assert!(solve_working_point(&CircuitParams::<f64>::default(), 0.0).is_err());
    }

    #[test]
    fn bisect_finds_simple_root() {
        let (x, fx) = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-11);
        assert!(fx.abs() < 1e-12);
        assert!(bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-9).is_none());
    }
}
