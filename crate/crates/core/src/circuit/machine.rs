//! Timed state machine of the readout.
//!
//! Free-running: an avalanche is quenched `detect_delay` after onset, held
//! off, then actively reset. Gating: the gate drives quenching directly and an
//! avalanche persists until the gate falls. Hybrid: quenching is the AND of
//! the inverted detection and the gate, so the device runs free inside gates
//! and is forced out of Geiger mode between them.

use thiserror::Error;

use super::CircuitError;

/// Femtoseconds per nanosecond.
pub const FS_PER_NS: f64 = 1.0e6;

#[inline]
pub fn ns_to_fs(ns: f64) -> i64 {
    (ns * FS_PER_NS).round() as i64
}

/// Readout transition times in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingParams {
    /// Avalanche onset to quench assertion.
    pub detect_delay: f64,
    pub holdoff: f64,
    pub reset_width: f64,
    pub gate_on_delay: f64,
    pub gate_on_fall: f64,
    pub gate_off_delay: f64,
    pub gate_off_rise: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            detect_delay: 20.0,
            holdoff: 50.0,
            reset_width: 10.0,
            gate_on_delay: 10.0,
            gate_on_fall: 5.0,
            gate_off_delay: 15.0,
            gate_off_rise: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("timing parameter {name} = {value} ns must be strictly positive")]
pub struct TimingError {
    pub name: &'static str,
    pub value: f64,
}

impl TimingParams {
    pub fn validate(&self) -> Result<(), TimingError> {
        for (name, value) in self.named() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(TimingError { name, value });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("detect_delay", self.detect_delay),
            ("holdoff", self.holdoff),
            ("reset_width", self.reset_width),
            ("gate_on_delay", self.gate_on_delay),
            ("gate_on_fall", self.gate_on_fall),
            ("gate_off_delay", self.gate_off_delay),
            ("gate_off_rise", self.gate_off_rise),
        ]
    }

    /// Free-running dead time: onset to re-armed.
    pub fn dead_time_ns(&self) -> f64 {
        self.detect_delay + self.holdoff + self.reset_width
    }

    pub fn gate_on_ns(&self) -> f64 {
        self.gate_on_delay + self.gate_on_fall
    }

    pub fn gate_off_ns(&self) -> f64 {
        self.gate_off_delay + self.gate_off_rise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    FreeRunning,
    Gating,
    Hybrid,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::FreeRunning => "free-running",
            Mode::Gating => "gating",
            Mode::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "free-running" => Some(Mode::FreeRunning),
            "gating" => Some(Mode::Gating),
            "hybrid" => Some(Mode::Hybrid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateKind {
    Armed,
    Avalanching,
    Quenched,
    Resetting,
    GateOff,
    GateTurningOn,
    GateTurningOff,
}

impl StateKind {
    /// Only an armed device can start an avalanche.
    pub fn can_detect(self) -> bool {
        self == StateKind::Armed
    }

    /// Anode held at the quench level, device below breakdown.
    pub fn anode_high(self) -> bool {
        matches!(self, StateKind::Quenched | StateKind::GateOff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CircuitEvent {
    AvalancheOnset,
    AvalancheDetected,
    HoldoffExpired,
    ResetDone,
    GateRise,
    GateFall,
    /// End of a gate-on or gate-off edge.
    GateSettled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircuitState {
    pub kind: StateKind,
    /// Time of the last change of `kind` (fs).
    pub since_fs: i64,
    /// Level of the external gate; always high in free-running mode.
    pub gate_high: bool,
}

impl CircuitState {
    pub fn initial(mode: Mode, at_fs: i64) -> Self {
        match mode {
            Mode::FreeRunning => Self {
                kind: StateKind::Armed,
                since_fs: at_fs,
                gate_high: true,
            },
            Mode::Gating | Mode::Hybrid => Self {
                kind: StateKind::GateOff,
                since_fs: at_fs,
                gate_high: false,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scheduled {
    pub at_fs: i64,
    pub event: CircuitEvent,
}

/// Successor state plus the circuit timer it arms. A new timer supersedes
/// any timer still pending from an earlier state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub next: CircuitState,
    pub scheduled: Option<Scheduled>,
}

pub fn transition(
    state: &CircuitState,
    event: CircuitEvent,
    now_fs: i64,
    t: &TimingParams,
    mode: Mode,
) -> Result<Transition, CircuitError> {
    use CircuitEvent as E;
    use Mode::*;
    use StateKind as S;

    let go = |kind: StateKind, gate_high: bool, timer: Option<(f64, CircuitEvent)>| Transition {
        next: CircuitState {
            kind,
            since_fs: if kind == state.kind { state.since_fs } else { now_fs },
            gate_high,
        },
        scheduled: timer.map(|(ns, event)| Scheduled {
            at_fs: now_fs + ns_to_fs(ns),
            event,
        }),
    };
    let gate = state.gate_high;

    let out = match (mode, state.kind, event) {
        (_, S::Armed, E::AvalancheOnset) => match mode {
            Gating => go(S::Avalanching, gate, None),
            FreeRunning | Hybrid => go(
                S::Avalanching,
                gate,
                Some((t.detect_delay, E::AvalancheDetected)),
            ),
        },
        (FreeRunning | Hybrid, S::Avalanching, E::AvalancheDetected) => {
            go(S::Quenched, gate, Some((t.holdoff, E::HoldoffExpired)))
        }
        (FreeRunning, S::Quenched, E::HoldoffExpired) => {
            go(S::Resetting, gate, Some((t.reset_width, E::ResetDone)))
        }
        (Hybrid, S::Quenched, E::HoldoffExpired) => {
            if gate {
                go(S::Resetting, gate, Some((t.reset_width, E::ResetDone)))
            } else {
                go(S::GateOff, gate, None)
            }
        }
        (FreeRunning | Hybrid, S::Resetting, E::ResetDone) => go(S::Armed, gate, None),

        (Gating | Hybrid, S::GateOff | S::GateTurningOff, E::GateRise) => go(
            S::GateTurningOn,
            true,
            Some((t.gate_on_ns(), E::GateSettled)),
        ),
        (Gating | Hybrid, S::GateTurningOn, E::GateSettled) => go(S::Armed, true, None),
        (Gating, S::Armed | S::Avalanching | S::GateTurningOn, E::GateFall)
        | (Hybrid, S::Armed | S::Avalanching | S::Resetting | S::GateTurningOn, E::GateFall) => go(
            S::GateTurningOff,
            false,
            Some((t.gate_off_ns(), E::GateSettled)),
        ),
        (Gating | Hybrid, S::GateTurningOff, E::GateSettled) => go(S::GateOff, false, None),
        // Anode already at the quench level; only the gate level changes.
        (Hybrid, S::Quenched, E::GateFall) => go(S::Quenched, false, None),
        (Hybrid, S::Quenched, E::GateRise) => go(S::Quenched, true, None),

        (mode, state, event) => {
            return Err(CircuitError::IllegalTransition { state, event, mode })
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: TimingParams = TimingParams {
        detect_delay: 20.0,
        holdoff: 50.0,
        reset_width: 10.0,
        gate_on_delay: 10.0,
        gate_on_fall: 5.0,
        gate_off_delay: 15.0,
        gate_off_rise: 10.0,
    };

    /// Feeds `event` at `now` and then follows scheduled timers until none remain.
    fn settle(mut s: CircuitState, event: CircuitEvent, now: i64, mode: Mode) -> (CircuitState, i64) {
        let mut tr = transition(&s, event, now, &T, mode).unwrap();
        let mut at = now;
        s = tr.next;
        while let Some(sch) = tr.scheduled {
            at = sch.at_fs;
            tr = transition(&s, sch.event, at, &T, mode).unwrap();
            s = tr.next;
        }
        (s, at)
    }

    #[test]
    fn free_running_rearms_after_holdoff_and_reset() {
        let s = CircuitState::initial(Mode::FreeRunning, 0);
        let tr = transition(&s, CircuitEvent::AvalancheOnset, 1_000, &T, Mode::FreeRunning).unwrap();
        assert_eq!(tr.next.kind, StateKind::Avalanching);
        let det = tr.scheduled.unwrap();
        assert_eq!(det.at_fs, 1_000 + ns_to_fs(20.0));
        let q = transition(&tr.next, det.event, det.at_fs, &T, Mode::FreeRunning).unwrap();
        assert_eq!(q.next.kind, StateKind::Quenched);
        let (end, at) = settle(q.next, q.scheduled.unwrap().event, q.scheduled.unwrap().at_fs, Mode::FreeRunning);
        assert_eq!(end.kind, StateKind::Armed);
        // Re-armed exactly holdoff + reset after quench.
        assert_eq!(at - det.at_fs, ns_to_fs(60.0));
        assert_eq!(at - 1_000, ns_to_fs(T.dead_time_ns()));
    }

    #[test]
    fn gating_edges() {
        let s = CircuitState::initial(Mode::Gating, 0);
        assert_eq!(s.kind, StateKind::GateOff);
        let (armed, at) = settle(s, CircuitEvent::GateRise, 0, Mode::Gating);
        assert_eq!(armed.kind, StateKind::Armed);
        assert_eq!(at, ns_to_fs(15.0));
        let (off, at2) = settle(armed, CircuitEvent::GateFall, 100, Mode::Gating);
        assert_eq!(off.kind, StateKind::GateOff);
        assert_eq!(at2 - 100, ns_to_fs(25.0));
    }

    #[test]
    fn gating_avalanche_persists_until_gate_falls() {
        let s = CircuitState { kind: StateKind::Armed, since_fs: 0, gate_high: true };
        let tr = transition(&s, CircuitEvent::AvalancheOnset, 10, &T, Mode::Gating).unwrap();
        assert_eq!(tr.next.kind, StateKind::Avalanching);
        assert!(tr.scheduled.is_none());
        assert!(transition(&tr.next, CircuitEvent::AvalancheDetected, 20, &T, Mode::Gating).is_err());
        let (off, _) = settle(tr.next, CircuitEvent::GateFall, 50, Mode::Gating);
        assert_eq!(off.kind, StateKind::GateOff);
    }

    #[test]
    fn hybrid_holdoff_with_gate_low_goes_to_gate_off() {
        let s = CircuitState { kind: StateKind::Quenched, since_fs: 0, gate_high: true };
        let low = transition(&s, CircuitEvent::GateFall, 5, &T, Mode::Hybrid).unwrap();
        assert_eq!(low.next.kind, StateKind::Quenched);
        assert!(!low.next.gate_high);
        assert!(low.scheduled.is_none());
        let h = transition(&low.next, CircuitEvent::HoldoffExpired, 10, &T, Mode::Hybrid).unwrap();
        assert_eq!(h.next.kind, StateKind::GateOff);
        // With the gate high it resets and re-arms instead.
        let h = transition(&s, CircuitEvent::HoldoffExpired, 10, &T, Mode::Hybrid).unwrap();
        assert_eq!(h.next.kind, StateKind::Resetting);
    }

    #[test]
    fn illegal_events_are_reported() {
        let s = CircuitState::initial(Mode::FreeRunning, 0);
        for e in [
            CircuitEvent::GateRise,
            CircuitEvent::GateFall,
            CircuitEvent::HoldoffExpired,
            CircuitEvent::ResetDone,
            CircuitEvent::AvalancheDetected,
        ] {
            assert!(matches!(
                transition(&s, e, 0, &T, Mode::FreeRunning),
                Err(CircuitError::IllegalTransition { .. })
            ));
        }
        let off = CircuitState::initial(Mode::Gating, 0);
        assert!(transition(&off, CircuitEvent::AvalancheOnset, 0, &T, Mode::Gating).is_err());
    }

    #[test]
    fn transitions_are_deterministic() {
        let modes = [Mode::FreeRunning, Mode::Gating, Mode::Hybrid];
        let kinds = [
            StateKind::Armed,
            StateKind::Avalanching,
            StateKind::Quenched,
            StateKind::Resetting,
            StateKind::GateOff,
            StateKind::GateTurningOn,
            StateKind::GateTurningOff,
        ];
        let events = [
            CircuitEvent::AvalancheOnset,
            CircuitEvent::AvalancheDetected,
            CircuitEvent::HoldoffExpired,
            CircuitEvent::ResetDone,
            CircuitEvent::GateRise,
            CircuitEvent::GateFall,
            CircuitEvent::GateSettled,
        ];
        for m in modes {
            for k in kinds {
                for g in [false, true] {
                    let s = CircuitState { kind: k, since_fs: 3, gate_high: g };
                    for e in events {
                        assert_eq!(transition(&s, e, 7, &T, m), transition(&s, e, 7, &T, m));
                    }
                }
            }
        }
    }

    #[test]
    fn timing_validation() {
        assert!(TimingParams::default().validate().is_ok());
        let t = TimingParams { holdoff: 0.0, ..TimingParams::default() };
        assert_eq!(t.validate().unwrap_err().name, "holdoff");
        assert_eq!(TimingParams::default().dead_time_ns(), 80.0);
    }
}
