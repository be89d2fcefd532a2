use proptest::prelude::*;
use spadsim::circuit::StateKind;
use spadsim::detector::propagation_delay_ns;
use spadsim::engine::timestamps::{read_timestamps, TimestampWriter};
use spadsim::engine::{CarrierKind, GateSchedule, Observer};
use spadsim::keyfile::{analysis_from_keys, sim_config_from_keys};
use spadsim::{run, run_with, AnalysisParams, Mode, RecordKind, SimConfig, TimestampRecord};

fn gated(mode: Mode) -> SimConfig {
    let mut c = SimConfig::default();
    c.mode = mode;
    c.gate_schedule = Some(GateSchedule { period_ns: 2000.0, width_ns: 500.0 });
    c.detector.dcr_ref = 2e6;
    c.source.rep_rate_hz = 1e6;
    c.duration_s = 0.02;
    c
}

#[test]
fn gated_detections_fall_inside_gate_windows() {
    for mode in [Mode::Gating, Mode::Hybrid] {
        let c = gated(mode);
        let (recs, stats) = run(&c).unwrap();
        assert!(stats.detections > 1000, "{mode:?}: {stats:?}");
        let delay_ps = propagation_delay_ns(c.operating.v_ex, &c.detector) * 1000.0;
        let t = &c.timing;
        let (period, width) = (2_000_000i64, 500_000i64);
        let lo = ((t.gate_on_delay + t.gate_on_fall) * 1000.0 + delay_ps - 3000.0) as i64;
        let hi = width + (t.gate_off_delay * 1000.0 + delay_ps + 3000.0) as i64;
        for r in recs.iter().filter(|r| r.kind == RecordKind::Detection) {
            let phase = r.time_ps.rem_euclid(period);
            assert!((lo..=hi).contains(&phase), "{mode:?}: detection at phase {phase} ps");
        }
    }
}

#[derive(Default)]
struct Spacing {
    last_onset: Option<i64>,
    min_gap: i64,
    onsets: u64,
    fired_outside_armed: u64,
}

impl Observer for Spacing {
    fn carrier(&mut self, _at: i64, _kind: CarrierKind, state: StateKind, avalanche: bool) {
        if avalanche && state != StateKind::Armed {
            self.fired_outside_armed += 1;
        }
    }

    fn transition(&mut self, at: i64, from: StateKind, to: StateKind) {
        if from == StateKind::Armed && to == StateKind::Avalanching {
            if let Some(prev) = self.last_onset {
                self.min_gap = self.min_gap.min(at - prev);
            }
            self.last_onset = Some(at);
            self.onsets += 1;
        }
    }
}

#[test]
fn free_running_onsets_are_a_dead_time_apart() {
    let mut c = SimConfig::default();
    c.detector.dcr_ref = 5e7;
    c.duration_s = 0.01;
    let mut obs = Spacing { min_gap: i64::MAX, ..Spacing::default() };
    run_with(&c, &mut Vec::new(), &mut obs).unwrap();
    assert!(obs.onsets > 10_000);
    assert!(obs.min_gap >= 80_000_000, "{} fs", obs.min_gap);
    assert_eq!(obs.fired_outside_armed, 0);
}

#[test]
fn dark_saturation_approaches_inverse_dead_time() {
    let mut c = SimConfig::default();
    c.source.mu = 0.0;
    c.detector.trap_yield_ref = 0.0;
    c.detector.dcr_ref = 1e9;
    c.duration_s = 0.005;
    let (_, stats) = run(&c).unwrap();
    let rate = stats.detections as f64 / c.duration_s;
    // Non-paralysable counter: R / (1 + R·τ).
    let expect = 1e9 / (1.0 + 1e9 * 80e-9);
    assert!((rate - expect).abs() / expect < 0.01, "{rate}");
}

#[test]
fn timestamp_header_reproduces_the_run() {
    let mut c = gated(Mode::Hybrid);
    c.duration_s = 0.001;
    c.seed = 77;
    let analysis = AnalysisParams { window_ps: 1500, bin_width_ps: 20 };
    let mut w = TimestampWriter::new(Vec::new(), &c, &analysis).unwrap();
    run_with(&c, &mut w, &mut ()).unwrap();
    let bytes = w.into_inner();

    let mut recs: Vec<TimestampRecord> = Vec::new();
    let mut kf = read_timestamps(&bytes[..], &mut recs).unwrap();
    let back = sim_config_from_keys(&mut kf).unwrap();
    assert_eq!(analysis_from_keys(&mut kf).unwrap(), analysis);
    kf.finish().unwrap();
    assert_eq!(back, c);
    assert_eq!(run(&back).unwrap().0, recs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_is_ordered_and_quantized(seed in any::<u64>(), mode in 0usize..3, res in 1u64..40) {
        let mut c = match mode {
            0 => SimConfig::default(),
            1 => gated(Mode::Gating),
            _ => gated(Mode::Hybrid),
        };
        c.seed = seed;
        c.tdc_resolution_ps = res;
        c.duration_s = 0.002;
        let (recs, stats) = run(&c).unwrap();
        prop_assert!(recs.windows(2).all(|w| w[0].time_ps <= w[1].time_ps));
        prop_assert!(recs.iter().all(|r| r.time_ps % res as i64 == 0 && r.time_ps >= 0));
        let d = recs.iter().filter(|r| r.kind == RecordKind::Detection).count() as u64;
        prop_assert_eq!(d, stats.detections);
        prop_assert_eq!(stats.detections, stats.avalanches);
        prop_assert_eq!(run(&c).unwrap().0, recs);
    }
}
