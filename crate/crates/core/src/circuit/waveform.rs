//! Anode voltage traces synthesised from circuit transition logs.
//!
//! Rendering only: detection logic never reads these traces.

use std::io::{self, Write};

use super::machine::{ns_to_fs, transition, CircuitEvent, CircuitState, Mode, StateKind, TimingParams};
use super::{solve_working_point, CircuitError, CircuitParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogEntry {
    pub at_fs: i64,
    pub from: StateKind,
    pub to: StateKind,
}

/// Ordered record of state changes over `[start_fs, end_fs]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionLog {
    pub start_fs: i64,
    pub end_fs: i64,
    pub initial: StateKind,
    pub entries: Vec<LogEntry>,
}

impl TransitionLog {
    pub fn new(initial: StateKind, start_fs: i64) -> Self {
        Self {
            start_fs,
            end_fs: start_fs,
            initial,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, at_fs: i64, from: StateKind, to: StateKind) {
        self.entries.push(LogEntry { at_fs, from, to });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformPoint {
    pub time_ps: i64,
    pub voltage: f64,
}

/// Piecewise-linear breakpoints in femtoseconds.
struct Trace {
    points: Vec<(i64, f64)>,
}

impl Trace {
    fn value_at(&self, t: i64) -> f64 {
        let i = self.points.partition_point(|p| p.0 <= t);
        if i == 0 {
            return self.points[0].1;
        }
        if i == self.points.len() {
            return self.points[i - 1].1;
        }
        let (t0, v0) = self.points[i - 1];
        let (t1, v1) = self.points[i];
        v0 + (v1 - v0) * (t - t0) as f64 / (t1 - t0) as f64
    }

    /// Cuts the trace at `t`, keeping the interpolated value as a breakpoint.
    fn cut(&mut self, t: i64) {
        let v = self.value_at(t);
        self.points.retain(|p| p.0 < t);
        self.points.push((t, v));
    }

    fn ramp(&mut self, t0: i64, t1: i64, target: f64) {
        self.cut(t0);
        if t1 > t0 {
            self.points.push((t1, target));
        } else {
            self.points.last_mut().expect("cut leaves a point").1 = target;
        }
    }
}

/// Quench level used for rendering: the solved idle-state source voltage,
/// or `v_dd` if the solver has no bracket.
pub fn quench_level(c: &CircuitParams<f64>) -> f64 {
    solve_working_point(c, 1e-9).map(|wp| wp.v_s).unwrap_or(c.v_dd)
}

pub fn anode_waveform(
    log: &TransitionLog,
    t: &TimingParams,
    c: &CircuitParams<f64>,
) -> Vec<WaveformPoint> {
    let level = quench_level(c);
    let initial = if log.initial.anode_high() || log.initial == StateKind::GateTurningOn {
        level
    } else {
        0.0
    };
    let mut trace = Trace {
        points: vec![(log.start_fs, initial)],
    };
    for e in &log.entries {
        let at = e.at_fs;
        match e.to {
            StateKind::Quenched if e.from != StateKind::Quenched => {
                trace.ramp(at, at + ns_to_fs(t.gate_off_rise), level)
            }
            StateKind::Resetting => trace.ramp(at, at + ns_to_fs(t.reset_width), 0.0),
            StateKind::GateTurningOn => {
                let s = at + ns_to_fs(t.gate_on_delay);
                trace.ramp(s, s + ns_to_fs(t.gate_on_fall), 0.0)
            }
            StateKind::GateTurningOff => {
                let s = at + ns_to_fs(t.gate_off_delay);
                trace.ramp(s, s + ns_to_fs(t.gate_off_rise), level)
            }
            _ => {}
        }
    }
    let end = log.end_fs.max(log.start_fs);
    trace.cut(end);
    trace
        .points
        .into_iter()
        .map(|(fs, v)| WaveformPoint {
            time_ps: (fs as f64 / 1000.0).round() as i64,
            voltage: v,
        })
        .collect()
}

/// Two columns: integer picoseconds and volts with three decimals.
pub fn write_waveform<W: Write>(mut out: W, points: &[WaveformPoint]) -> io::Result<()> {
    writeln!(out, "# time_ps voltage_V")?;
    for p in points {
        writeln!(out, "{} {:.3}", p.time_ps, p.voltage)?;
    }
    Ok(())
}

/// Scripted excitation used to render characteristic anode waveforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// One avalanche at 100 ns in free-running mode, observed until 300 ns.
    FreeRunningPulse,
    /// Gate high from 100 ns to 300 ns, observed until 500 ns.
    GateCycle,
    /// Armed detector with no events for 200 ns.
    Idle,
}

impl Scenario {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "free-running-pulse" => Some(Scenario::FreeRunningPulse),
            "gate-cycle" => Some(Scenario::GateCycle),
            "idle" | "no-event" => Some(Scenario::Idle),
            _ => None,
        }
    }

    /// Drives the state machine through the scenario and returns its log.
    pub fn run(self, t: &TimingParams) -> Result<TransitionLog, CircuitError> {
        let (mode, external, end_ns): (Mode, &[(f64, CircuitEvent)], f64) = match self {
            Scenario::FreeRunningPulse => {
                (Mode::FreeRunning, &[(100.0, CircuitEvent::AvalancheOnset)], 300.0)
            }
            Scenario::GateCycle => (
                Mode::Gating,
                &[(100.0, CircuitEvent::GateRise), (300.0, CircuitEvent::GateFall)],
                500.0,
            ),
            Scenario::Idle => (Mode::FreeRunning, &[], 200.0),
        };
        let mut state = CircuitState::initial(mode, 0);
        let mut log = TransitionLog::new(state.kind, 0);
        log.end_fs = ns_to_fs(end_ns);
        let mut timer = None;
        let mut pending = external.iter().map(|&(ns, e)| (ns_to_fs(ns), e)).peekable();
        loop {
            // Timers win ties with external edges only when strictly earlier.
            let (at, event) = match (timer, pending.peek()) {
                (Some((ta, te)), Some(&(tx, _))) if ta < tx => {
                    timer = None;
                    (ta, te)
                }
                (_, Some(_)) => pending.next().expect("peeked"),
                (Some((ta, te)), None) => {
                    timer = None;
                    (ta, te)
                }
                (None, None) => break,
            };
            if at > log.end_fs {
                break;
            }
            let tr = transition(&state, event, at, t, mode)?;
            if tr.next.kind != state.kind {
                log.push(at, state.kind, tr.next.kind);
            }
            if let Some(s) = tr.scheduled {
                timer = Some((s.at_fs, s.event));
            }
            state = tr.next;
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(s: Scenario) -> Vec<WaveformPoint> {
        let t = TimingParams::default();
        let log = s.run(&t).unwrap();
        anode_waveform(&log, &t, &CircuitParams::default())
    }

    #[test]
    fn idle_is_flat_zero() {
        let w = render(Scenario::Idle);
        assert!(w.iter().all(|p| p.voltage == 0.0));
        assert_eq!(w.first().unwrap().time_ps, 0);
        assert_eq!(w.last().unwrap().time_ps, 200_000);
        let empty = TransitionLog { start_fs: 0, end_fs: 5_000_000, initial: StateKind::Armed, entries: vec![] };
        let w = anode_waveform(&empty, &TimingParams::default(), &CircuitParams::default());
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|p| p.voltage == 0.0));
    }

    #[test]
    fn free_running_pulse_holds_for_holdoff() {
        let w = render(Scenario::FreeRunningPulse);
        let level = quench_level(&CircuitParams::default());
        assert!((49.0..53.0).contains(&level));
        // Quench asserted 20 ns after onset at 100 ns.
        let rise_start = w.iter().find(|p| p.voltage == 0.0 && p.time_ps == 120_000);
        assert!(rise_start.is_some(), "{w:?}");
        let high: Vec<_> = w.iter().filter(|p| (p.voltage - level).abs() < 1e-9).collect();
        assert_eq!(high.len(), 2);
        // Anode held high until holdoff expires 50 ns after quench, then reset over 10 ns.
        assert_eq!(high[1].time_ps, 170_000);
        let last_ramp = w.iter().find(|p| p.time_ps == 180_000).unwrap();
        assert_eq!(last_ramp.voltage, 0.0);
        assert_eq!(w.last().unwrap().voltage, 0.0);
    }

    #[test]
    fn gate_cycle_is_a_trapezoid() {
        let w = render(Scenario::GateCycle);
        let level = quench_level(&CircuitParams::default());
        let times: Vec<i64> = w.iter().map(|p| p.time_ps).collect();
        // Fall: starts 10 ns after the rising gate edge and takes 5 ns.
        assert!(times.contains(&110_000) && times.contains(&115_000), "{w:?}");
        let at = |t| w.iter().find(|p| p.time_ps == t).unwrap().voltage;
        assert!((at(110_000) - level).abs() < 1e-9);
        assert_eq!(at(115_000), 0.0);
        // Rise: starts 15 ns after the falling edge and takes 10 ns.
        assert_eq!(at(315_000), 0.0);
        assert!((at(325_000) - level).abs() < 1e-9);
        assert!((w.last().unwrap().voltage - level).abs() < 1e-9);
    }

    #[test]
    fn waveform_export_format() {
        let pts = [WaveformPoint { time_ps: 0, voltage: 0.0 }, WaveformPoint { time_ps: 10_000, voltage: 50.63675 }];
        let mut buf = Vec::new();
        write_waveform(&mut buf, &pts).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# time_ps voltage_V\n0 0.000\n10000 50.637\n");
    }

    #[test]
    fn scenario_names() {
        assert_eq!(Scenario::parse("gate-cycle"), Some(Scenario::GateCycle));
        assert_eq!(Scenario::parse("no-event"), Some(Scenario::Idle));
        assert_eq!(Scenario::parse("x"), None);
    }
}
