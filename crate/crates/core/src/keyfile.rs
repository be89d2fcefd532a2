//! Flat `key = value` configuration text.
//!
//! Keys carry dotted section prefixes (`detector.v_sat = 12.0`). Blank lines
//! and everything after `#` are ignored. Unknown or duplicate keys are errors
//! that name the key. Every setting has a default, so a file only lists what
//! it changes. [`sim_config_lines`] writes the full set back out; parsing that
//! output reproduces the configuration exactly.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::characterize::AnalysisParams;
use crate::circuit::Mode;
use crate::detector::SigmaCoreLaw;
use crate::engine::{GateSchedule, SimConfig, SimError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyFile {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyFile {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(SimError::config(
                    format!("line {line_no}"),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(SimError::config(
                    format!("line {line_no}"),
                    format!("malformed key `{key}`"),
                ));
            }
            if entries
                .insert(key.to_string(), (value.trim().to_string(), line_no))
                .is_some()
            {
                return Err(SimError::config(key, format!("duplicate key on line {line_no}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn take_str(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, SimError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, _)) => v
                .parse()
                .map(Some)
                .map_err(|_| SimError::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn take_into<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<(), SimError> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    pub fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, SimError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, _)) => parse_list(&v)
                .map(Some)
                .map_err(|_| SimError::config(key, format!("cannot parse list `{v}`"))),
        }
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(self) -> Result<(), SimError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (_, line))) => Err(SimError::config(key, format!("unknown key (line {line})"))),
        }
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, std::num::ParseFloatError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f64::from_str)
        .collect()
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Reads every simulation key, starting from defaults.
pub fn sim_config_from_keys(kf: &mut KeyFile) -> Result<SimConfig, SimError> {
    let mut c = SimConfig::default();
    if let Some(m) = kf.take_str("mode") {
        c.mode = Mode::parse(&m).ok_or_else(|| {
            SimError::config("mode", format!("`{m}` is not free-running, gating or hybrid"))
        })?;
    }
    kf.take_into("duration", &mut c.duration_s)?;
    kf.take_into("seed", &mut c.seed)?;
    kf.take_into("rng_stream", &mut c.rng_stream)?;
    kf.take_into("tdc_resolution", &mut c.tdc_resolution_ps)?;
    if let Some(g) = kf.take_str("gate_schedule") {
        c.gate_schedule = if g == "none" {
            None
        } else {
            match parse_list(&g).as_deref() {
                Ok([period, width]) => Some(GateSchedule {
                    period_ns: *period,
                    width_ns: *width,
                }),
                _ => {
                    return Err(SimError::config(
                        "gate_schedule",
                        format!("expected `period_ns, width_ns`, got `{g}`"),
                    ))
                }
            }
        };
    }

    kf.take_into("operating.v_ex", &mut c.operating.v_ex)?;
    kf.take_into("operating.temperature", &mut c.operating.temperature)?;

    let d = &mut c.detector;
    kf.take_into("detector.v_br", &mut d.v_br)?;
    kf.take_into("detector.eta_max", &mut d.eta_max)?;
    kf.take_into("detector.v_sat", &mut d.v_sat)?;
    kf.take_into("detector.dcr_ref", &mut d.dcr_ref)?;
    kf.take_into("detector.alpha_dcr", &mut d.alpha_dcr)?;
    kf.take_into("detector.beta_dcr", &mut d.beta_dcr)?;
    kf.take_into("detector.pap_ref", &mut d.pap_ref)?;
    kf.take_into("detector.n_ref", &mut d.trap_yield_ref)?;
    kf.take_into("detector.gamma_ap", &mut d.gamma_ap)?;
    kf.take_into("detector.kappa_ap", &mut d.kappa_ap)?;
    kf.take_into("detector.tau_trap", &mut d.tau_trap_ns)?;
    kf.take_into("detector.tau_tail", &mut d.tau_tail_ps)?;
    kf.take_into("detector.frac_tail", &mut d.frac_tail)?;
    kf.take_into("detector.delay0", &mut d.delay0_ns)?;
    kf.take_into("detector.delay_slope", &mut d.delay_slope_ns_per_v)?;
    if let Some(s) = kf.take_str("detector.sigma_core") {
        d.sigma_core = parse_sigma_law(&s)
            .ok_or_else(|| SimError::config("detector.sigma_core", format!("expected `v_ex:sigma_ps, ...`, got `{s}`")))?;
    }

    let k = &mut c.circuit;
    kf.take_into("circuit.v_dd", &mut k.v_dd)?;
    kf.take_into("circuit.v_cc", &mut k.v_cc)?;
    kf.take_into("circuit.v_zener", &mut k.v_zener)?;
    kf.take_into("circuit.v_on", &mut k.v_on)?;
    kf.take_into("circuit.r1", &mut k.r1)?;
    kf.take_into("circuit.r2", &mut k.r2)?;
    kf.take_into("circuit.r3", &mut k.r3)?;
    kf.take_into("circuit.r_on", &mut k.r_on)?;
    kf.take_into("circuit.r_off", &mut k.r_off)?;
    kf.take_into("circuit.i0_zener", &mut k.i0_zener)?;
    kf.take_into("circuit.v_slope", &mut k.v_slope)?;
    kf.take_into("circuit.m1_width", &mut k.m1_width)?;

    let t = &mut c.timing;
    kf.take_into("timing.detect_delay", &mut t.detect_delay)?;
    kf.take_into("timing.holdoff", &mut t.holdoff)?;
    kf.take_into("timing.reset_width", &mut t.reset_width)?;
    kf.take_into("timing.gate_on_delay", &mut t.gate_on_delay)?;
    kf.take_into("timing.gate_on_fall", &mut t.gate_on_fall)?;
    kf.take_into("timing.gate_off_delay", &mut t.gate_off_delay)?;
    kf.take_into("timing.gate_off_rise", &mut t.gate_off_rise)?;

    let s = &mut c.source;
    kf.take_into("source.rep_rate", &mut s.rep_rate_hz)?;
    kf.take_into("source.mu", &mut s.mu)?;
    kf.take_into("source.laser_fwhm", &mut s.laser_fwhm_ps)?;
    kf.take_into("source.system_jitter", &mut s.system_jitter_ps)?;
    Ok(c)
}

fn parse_sigma_law(s: &str) -> Option<SigmaCoreLaw<f64>> {
    let knots = s
        .split(',')
        .map(|pair| {
            let (v, sigma) = pair.split_once(':')?;
            Some((v.trim().parse().ok()?, sigma.trim().parse().ok()?))
        })
        .collect::<Option<Vec<(f64, f64)>>>()?;
    SigmaCoreLaw::new(knots).ok()
}

pub fn analysis_from_keys(kf: &mut KeyFile) -> Result<AnalysisParams, SimError> {
    let mut a = AnalysisParams::default();
    kf.take_into("analysis.window", &mut a.window_ps)?;
    kf.take_into("analysis.bin_width", &mut a.bin_width_ps)?;
    if a.window_ps == 0 {
        return Err(SimError::config("analysis.window", "must be positive"));
    }
    if a.bin_width_ps == 0 {
        return Err(SimError::config("analysis.bin_width", "must be positive"));
    }
    Ok(a)
}

/// Parses a complete run file: simulation plus analysis keys, validated.
pub fn parse_run_config(text: &str) -> Result<(SimConfig, AnalysisParams), SimError> {
    let mut kf = KeyFile::parse(text)?;
    let sim = sim_config_from_keys(&mut kf)?;
    let analysis = analysis_from_keys(&mut kf)?;
    kf.finish()?;
    sim.validate()?;
    Ok((sim, analysis))
}

/// Every simulation key with its current value, in a stable order.
pub fn sim_config_lines(c: &SimConfig) -> Vec<String> {
    let d = &c.detector;
    let k = &c.circuit;
    let t = &c.timing;
    let s = &c.source;
    let sigma = d
        .sigma_core
        .knots()
        .iter()
        .map(|(v, sg)| format!("{v}:{sg}"))
        .collect::<Vec<_>>()
        .join(", ");
    let gate = match c.gate_schedule {
        None => "none".to_string(),
        Some(g) => join(&[g.period_ns, g.width_ns]),
    };
    let pairs: Vec<(&str, String)> = vec![
        ("mode", c.mode.name().to_string()),
        ("duration", c.duration_s.to_string()),
        ("seed", c.seed.to_string()),
        ("rng_stream", c.rng_stream.to_string()),
        ("tdc_resolution", c.tdc_resolution_ps.to_string()),
        ("gate_schedule", gate),
        ("operating.v_ex", c.operating.v_ex.to_string()),
        ("operating.temperature", c.operating.temperature.to_string()),
        ("detector.v_br", d.v_br.to_string()),
        ("detector.eta_max", d.eta_max.to_string()),
        ("detector.v_sat", d.v_sat.to_string()),
        ("detector.dcr_ref", d.dcr_ref.to_string()),
        ("detector.alpha_dcr", d.alpha_dcr.to_string()),
        ("detector.beta_dcr", d.beta_dcr.to_string()),
        ("detector.pap_ref", d.pap_ref.to_string()),
        ("detector.n_ref", d.trap_yield_ref.to_string()),
        ("detector.gamma_ap", d.gamma_ap.to_string()),
        ("detector.kappa_ap", d.kappa_ap.to_string()),
        ("detector.tau_trap", d.tau_trap_ns.to_string()),
        ("detector.sigma_core", sigma),
        ("detector.tau_tail", d.tau_tail_ps.to_string()),
        ("detector.frac_tail", d.frac_tail.to_string()),
        ("detector.delay0", d.delay0_ns.to_string()),
        ("detector.delay_slope", d.delay_slope_ns_per_v.to_string()),
        ("circuit.v_dd", k.v_dd.to_string()),
        ("circuit.v_cc", k.v_cc.to_string()),
        ("circuit.v_zener", k.v_zener.to_string()),
        ("circuit.v_on", k.v_on.to_string()),
        ("circuit.r1", k.r1.to_string()),
        ("circuit.r2", k.r2.to_string()),
        ("circuit.r3", k.r3.to_string()),
        ("circuit.r_on", k.r_on.to_string()),
        ("circuit.r_off", k.r_off.to_string()),
        ("circuit.i0_zener", k.i0_zener.to_string()),
        ("circuit.v_slope", k.v_slope.to_string()),
        ("circuit.m1_width", k.m1_width.to_string()),
        ("timing.detect_delay", t.detect_delay.to_string()),
        ("timing.holdoff", t.holdoff.to_string()),
        ("timing.reset_width", t.reset_width.to_string()),
        ("timing.gate_on_delay", t.gate_on_delay.to_string()),
        ("timing.gate_on_fall", t.gate_on_fall.to_string()),
        ("timing.gate_off_delay", t.gate_off_delay.to_string()),
        ("timing.gate_off_rise", t.gate_off_rise.to_string()),
        ("source.rep_rate", s.rep_rate_hz.to_string()),
        ("source.mu", s.mu.to_string()),
        ("source.laser_fwhm", s.laser_fwhm_ps.to_string()),
        ("source.system_jitter", s.system_jitter_ps.to_string()),
    ];
    pairs.into_iter().map(|(k, v)| format!("{k} = {v}")).collect()
}

pub fn analysis_lines(a: &AnalysisParams) -> Vec<String> {
    vec![
        format!("analysis.window = {}", a.window_ps),
        format!("analysis.bin_width = {}", a.bin_width_ps),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key_of(e: SimError) -> String {
        match e {
            SimError::Config { key, .. } => key,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let (c, a) = parse_run_config("# nothing\n\n").unwrap();
        assert_eq!(c, SimConfig::default());
        assert_eq!(a, AnalysisParams::default());
    }

    #[test]
    fn dotted_keys_override_defaults() {
        let (c, _) = parse_run_config(
            "mode = hybrid\ngate_schedule = 1000, 400  # ns\ndetector.v_sat = 11.5\noperating.temperature=258\n",
        )
        .unwrap();
        assert_eq!(c.mode, Mode::Hybrid);
        assert_eq!(c.gate_schedule, Some(GateSchedule { period_ns: 1000.0, width_ns: 400.0 }));
        assert_eq!(c.detector.v_sat, 11.5);
        assert_eq!(c.operating.temperature, 258.0);
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(parse_run_config("duration = 0").unwrap_err()), "duration");
        assert_eq!(key_of(parse_run_config("mode = gating").unwrap_err()), "gate_schedule");
        assert_eq!(key_of(parse_run_config("detector.bogus = 1").unwrap_err()), "detector.bogus");
        assert_eq!(key_of(parse_run_config("seed = abc").unwrap_err()), "seed");
        assert_eq!(key_of(parse_run_config("seed = 1\nseed = 2").unwrap_err()), "seed");
        assert_eq!(key_of(parse_run_config("mode = sometimes").unwrap_err()), "mode");
        assert_eq!(key_of(parse_run_config("gate_schedule = 5").unwrap_err()), "gate_schedule");
        assert_eq!(key_of(parse_run_config("just words").unwrap_err()), "line 1");
        assert_eq!(key_of(parse_run_config("analysis.window = 0").unwrap_err()), "analysis.window");
    }

    #[test]
    fn echo_reparses_exactly() {
        let mut c = SimConfig::default();
        c.mode = Mode::Gating;
        c.gate_schedule = Some(GateSchedule { period_ns: 333.3, width_ns: 100.0 });
        c.seed = u64::MAX;
        let text = sim_config_lines(&c).join("\n");
        let (back, _) = parse_run_config(&text).unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #[test]
        fn numeric_settings_roundtrip(v in 0.0f64..50.0, t in 250.0f64..300.0, mu in 0.0f64..10.0, seed: u64) {
            let mut c = SimConfig::default();
            c.operating.v_ex = v;
            c.operating.temperature = t;
            c.source.mu = mu;
            c.seed = seed;
            let (back, _) = parse_run_config(&sim_config_lines(&c).join("\n")).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
