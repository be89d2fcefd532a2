//! Discrete-event engine.
//!
//! Photon pulses, dark carriers, trap releases, gate edges and circuit timers
//! share one queue ordered by time, then by kind (gate edges, circuit timers,
//! carriers, record emission), then by insertion. The clock is integer
//! femtoseconds; all randomness comes from one ChaCha8 stream per run, so a
//! configuration reproduces its output bit for bit.

pub mod config;
pub mod queue;
pub mod sources;
pub mod tdc;
pub mod timestamps;

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::circuit::{
    machine::ns_to_fs, transition, CircuitEvent, CircuitState, StateKind, TransitionLog,
};
use crate::detector::{
    afterpulse_cascade_yield, afterpulse_intensity, dark_rate, pde, sample_response_delay,
};
use crate::scalar::fwhm_to_sigma;

pub use config::{GateSchedule, SimConfig, SimError, SourceParams};
pub use queue::EventQueue;
pub use sources::{generate_dark_arrivals, generate_photon_arrivals, PhotonArrivals};
pub use tdc::{apply_tdc, quantize_fs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Detection,
    SyncPulse,
}

impl RecordKind {
    pub fn code(self) -> char {
        match self {
            RecordKind::Detection => 'D',
            RecordKind::SyncPulse => 'S',
        }
    }
}

/// One TDC output word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimestampRecord {
    /// Picoseconds since run start, a multiple of the TDC resolution.
    pub time_ps: i64,
    pub kind: RecordKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CarrierKind {
    Photon,
    Dark,
    Trap,
}

/// Receives records in non-decreasing time order.
pub trait RecordSink {
    fn record(&mut self, rec: TimestampRecord) -> io::Result<()>;
}

impl RecordSink for Vec<TimestampRecord> {
    fn record(&mut self, rec: TimestampRecord) -> io::Result<()> {
        self.push(rec);
        Ok(())
    }
}

/// Diagnostic hooks into the run.
pub trait Observer {
    /// Every carrier reaching the junction, with the state it found.
    fn carrier(&mut self, _at_fs: i64, _kind: CarrierKind, _state: StateKind, _avalanche: bool) {}
    fn transition(&mut self, _at_fs: i64, _from: StateKind, _to: StateKind) {}
}

impl Observer for () {}

/// Observer that records circuit state changes for waveform rendering.
#[derive(Debug, Clone)]
pub struct TransitionRecorder {
    pub log: TransitionLog,
}

impl TransitionRecorder {
    pub fn new(config: &SimConfig) -> Self {
        let initial = CircuitState::initial(config.mode, 0).kind;
        let mut log = TransitionLog::new(initial, 0);
        log.end_fs = config.duration_fs();
        Self { log }
    }
}

impl Observer for TransitionRecorder {
    fn transition(&mut self, at_fs: i64, from: StateKind, to: StateKind) {
        self.log.push(at_fs, from, to);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub pulses: u64,
    pub photons: u64,
    pub dark_carriers: u64,
    pub trap_carriers: u64,
    pub avalanches: u64,
    /// Carriers that found the device outside `Armed`.
    pub discarded: u64,
    pub detections: u64,
    pub stale_timers: u64,
}

#[derive(Debug, Clone, Copy)]
enum Payload {
    Gate(CircuitEvent),
    Timer { event: CircuitEvent, epoch: u64 },
    Pulse { index: u64 },
    Carrier(CarrierKind),
    Emit(RecordKind),
}

impl Payload {
    fn priority(&self) -> u8 {
        match self {
            Payload::Gate(_) => 0,
            Payload::Timer { .. } => 1,
            Payload::Pulse { .. } | Payload::Carrier(_) => 2,
            Payload::Emit(_) => 3,
        }
    }
}

/// Laws evaluated once per run at the configured operating point.
#[derive(Debug, Clone, Copy)]
pub struct RunLaws {
    pub pde: f64,
    /// Measured dark count rate the configuration asks for.
    pub dark_count_rate: f64,
    /// Primary dark carrier rate after removing dark-induced afterpulses.
    pub dark_carrier_rate: f64,
    pub expected_traps: f64,
    pub tau_trap_ns: f64,
}

impl RunLaws {
    pub fn evaluate(config: &SimConfig) -> Result<Self, SimError> {
        let op = &config.operating;
        let det = &config.detector;
        let dark = dark_rate(op, det)?;
        let trap = afterpulse_intensity(op, det)?;
        let cascade = afterpulse_cascade_yield(&trap, config.timing.dead_time_ns());
        Ok(Self {
            pde: pde(op, det)?,
            dark_count_rate: dark,
            dark_carrier_rate: dark / (1.0 + cascade),
            expected_traps: trap.expected_traps,
            tau_trap_ns: trap.tau_ns,
        })
    }
}

fn fs_from_ps(ps: f64) -> i64 {
    (ps * 1000.0).round() as i64
}

/// Runs the configuration to completion, collecting all records.
pub fn run(config: &SimConfig) -> Result<(Vec<TimestampRecord>, RunStats), SimError> {
    let mut out = Vec::new();
    let stats = run_with(config, &mut out, &mut ())?;
    Ok((out, stats))
}

/// Streams records into `sink` while reporting carriers and transitions to
/// `observer`.
pub fn run_with<S, O>(config: &SimConfig, sink: &mut S, observer: &mut O) -> Result<RunStats, SimError>
where
    S: RecordSink + ?Sized,
    O: Observer + ?Sized,
{
    config.validate()?;
    Engine::new(config)?.run(sink, observer)
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    laws: RunLaws,
    rng: ChaCha8Rng,
    queue: EventQueue<Payload>,
    state: CircuitState,
    epoch: u64,
    end_fs: i64,
    period_fs: i64,
    stats: RunStats,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self, SimError> {
        let laws = RunLaws::evaluate(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(cfg.rng_stream);
        Ok(Self {
            cfg,
            laws,
            rng,
            queue: EventQueue::new(),
            state: CircuitState::initial(cfg.mode, 0),
            epoch: 0,
            end_fs: cfg.duration_fs(),
            period_fs: cfg.pulse_period_fs(),
            stats: RunStats::default(),
        })
    }

    /// Photons of a pulse are drawn this far ahead of the pulse centre so that
    /// they enter the queue before the clock reaches them.
    fn pulse_lead_fs(&self) -> i64 {
        let sigma = fwhm_to_sigma(self.cfg.source.laser_fwhm_ps);
        fs_from_ps(12.0 * sigma) + 1
    }

    fn run<S, O>(mut self, sink: &mut S, obs: &mut O) -> Result<RunStats, SimError>
    where
        S: RecordSink + ?Sized,
        O: Observer + ?Sized,
    {
        let lead = self.pulse_lead_fs();
        self.queue.push(-lead, 2, Payload::Pulse { index: 0 });
        self.schedule_dark(0);
        if self.cfg.gate_schedule.is_some() {
            self.push(0, Payload::Gate(CircuitEvent::GateRise));
        }

        while let Some((now, payload)) = self.queue.pop() {
            if now >= self.end_fs {
                break;
            }
            match payload {
                Payload::Pulse { index } => self.on_pulse(now, index, lead),
                Payload::Carrier(kind) => self.on_carrier(now, kind, obs)?,
                Payload::Gate(edge) => self.on_gate(now, edge, obs)?,
                Payload::Timer { event, epoch } => {
                    if epoch == self.epoch {
                        self.apply(now, event, obs)?;
                    } else {
                        self.stats.stale_timers += 1;
                    }
                }
                Payload::Emit(kind) => {
                    if kind == RecordKind::Detection {
                        self.stats.detections += 1;
                    }
                    sink.record(TimestampRecord {
                        time_ps: quantize_fs(now, self.cfg.tdc_resolution_ps),
                        kind,
                    })?;
                }
            }
        }
        Ok(self.stats)
    }

    fn push(&mut self, at_fs: i64, payload: Payload) {
        if at_fs < self.end_fs {
            self.queue.push(at_fs, payload.priority(), payload);
        }
    }

    fn schedule_dark(&mut self, from_fs: i64) {
        if let Some(dt) = sources::next_interarrival_ps(self.laws.dark_carrier_rate, &mut self.rng) {
            self.push(from_fs + fs_from_ps(dt).max(1), Payload::Carrier(CarrierKind::Dark));
        }
    }

    fn on_pulse(&mut self, now: i64, index: u64, lead: i64) {
        let centre_fs = index as i64 * self.period_fs;
        if centre_fs >= self.end_fs {
            return;
        }
        self.stats.pulses += 1;
        self.push(centre_fs, Payload::Emit(RecordKind::SyncPulse));
        let photons = sources::draw_pulse(&self.cfg.source, centre_fs as f64 / 1000.0, &mut self.rng);
        for t_ps in photons {
            self.stats.photons += 1;
            let at = fs_from_ps(t_ps).max(now);
            self.push(at, Payload::Carrier(CarrierKind::Photon));
        }
        let next = index + 1;
        self.queue.push(
            next as i64 * self.period_fs - lead,
            2,
            Payload::Pulse { index: next },
        );
    }

    fn on_carrier<O: Observer + ?Sized>(
        &mut self,
        now: i64,
        kind: CarrierKind,
        obs: &mut O,
    ) -> Result<(), SimError> {
        match kind {
            CarrierKind::Dark => {
                self.stats.dark_carriers += 1;
                self.schedule_dark(now);
            }
            CarrierKind::Trap => self.stats.trap_carriers += 1,
            CarrierKind::Photon => {}
        }
        let armed = self.state.kind.can_detect();
        // Photons need a successful absorption and avalanche; dark and trap
        // carriers are already expressed as avalanche rates.
        let fires = armed
            && match kind {
                CarrierKind::Photon => self.rng.random::<f64>() < self.laws.pde,
                CarrierKind::Dark | CarrierKind::Trap => true,
            };
        obs.carrier(now, kind, self.state.kind, fires);
        if !fires {
            if !armed {
                self.stats.discarded += 1;
            }
            return Ok(());
        }
        self.stats.avalanches += 1;
        self.apply(now, CircuitEvent::AvalancheOnset, obs)?;

        let traps = sources::poisson_count(self.laws.expected_traps, &mut self.rng);
        for _ in 0..traps {
            let e: f64 = self.rng.sample(Exp1);
            let at = now + ns_to_fs(e * self.laws.tau_trap_ns).max(1);
            self.push(at, Payload::Carrier(CarrierKind::Trap));
        }

        let cfg = self.cfg;
        let response_ps = sample_response_delay(&cfg.operating, &cfg.detector, &mut self.rng);
        let z: f64 = self.rng.sample(StandardNormal);
        let system_ps = fwhm_to_sigma(cfg.source.system_jitter_ps) * z;
        let at = (now + fs_from_ps(response_ps + system_ps)).max(now);
        self.push(at, Payload::Emit(RecordKind::Detection));
        Ok(())
    }

    fn on_gate<O: Observer + ?Sized>(
        &mut self,
        now: i64,
        edge: CircuitEvent,
        obs: &mut O,
    ) -> Result<(), SimError> {
        let g = self.cfg.gate_schedule.expect("gate edges only with a schedule");
        if edge == CircuitEvent::GateRise {
            self.push(now + ns_to_fs(g.width_ns), Payload::Gate(CircuitEvent::GateFall));
            self.push(now + ns_to_fs(g.period_ns), Payload::Gate(CircuitEvent::GateRise));
        }
        self.apply(now, edge, obs)
    }

    fn apply<O: Observer + ?Sized>(
        &mut self,
        now: i64,
        event: CircuitEvent,
        obs: &mut O,
    ) -> Result<(), SimError> {
        let tr = transition(&self.state, event, now, &self.cfg.timing, self.cfg.mode)?;
        if tr.next.kind != self.state.kind || tr.scheduled.is_some() {
            // Supersedes any timer still pending.
            self.epoch += 1;
        }
        if tr.next.kind != self.state.kind {
            obs.transition(now, self.state.kind, tr.next.kind);
        }
        self.state = tr.next;
        if let Some(s) = tr.scheduled {
            let epoch = self.epoch;
            self.push(s.at_fs, Payload::Timer { event: s.event, epoch });
        }
        Ok(())
    }
}
