use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use spadsim::characterize::{
    estimate_dcr_from_count, report_from_folded, write_report_csv, DarkReference, PhaseFolder,
};
use spadsim::circuit::{anode_waveform, write_waveform, Scenario};
use spadsim::engine::timestamps::{read_timestamps, TimestampWriter};
use spadsim::engine::RecordSink;
use spadsim::keyfile::{analysis_from_keys, parse_run_config, sim_config_from_keys, KeyFile};
use spadsim::sweep::{run_sweep, write_sweep_csv};
use spadsim::{
    solve_working_point, AnalysisParams, Measured, RecordKind, SimConfig, SweepSpec,
    TimestampRecord,
};

#[derive(Parser)]
#[command(name = "spadsim", version, about = "Single-photon avalanche diode simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one acquisition and write its timestamp file.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Calibrate every (v_ex, temperature) point of a sweep file into a CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Calibration report from a timestamp file.
    Characterize {
        timestamps: PathBuf,
        /// Timestamp file of a dark acquisition.
        #[arg(long, conflicts_with = "dcr")]
        dark: Option<PathBuf>,
        /// Known dark count rate (cps).
        #[arg(long)]
        dcr: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the peak-centred timing histogram.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Solve the idle-state working point of the quenching circuit.
    WorkingPoint {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Render an anode voltage trace for a scripted scenario.
    Waveform {
        #[arg(long)]
        config: Option<PathBuf>,
        /// free-running-pulse, gate-cycle or idle
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<(SimConfig, AnalysisParams)> {
    let text = match path {
        Some(p) => read_text(p)?,
        None => String::new(),
    };
    parse_run_config(&text).with_context(|| match path {
        Some(p) => format!("in {}", p.display()),
        None => "in default configuration".to_string(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Configuration echoed in a timestamp file header.
fn read_header(path: &Path) -> Result<(SimConfig, AnalysisParams)> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut text = String::new();
    for line in io::BufRead::lines(BufReader::new(file)) {
        let line = line?;
        match line.strip_prefix('#') {
            Some(h) if h.contains('=') => {
                text.push_str(h);
                text.push('\n');
            }
            Some(_) => {}
            None => break,
        }
    }
    let mut kf = KeyFile::parse(&text)?;
    let config = sim_config_from_keys(&mut kf)?;
    let analysis = analysis_from_keys(&mut kf)?;
    kf.finish()?;
    config.validate()?;
    Ok((config, analysis))
}

struct Counter(u64);

impl RecordSink for Counter {
    fn record(&mut self, rec: TimestampRecord) -> io::Result<()> {
        self.0 += (rec.kind == RecordKind::Detection) as u64;
        Ok(())
    }
}

fn stream<S: RecordSink>(path: &Path, sink: &mut S) -> Result<()> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_timestamps(BufReader::new(file), sink).with_context(|| format!("in {}", path.display()))?;
    Ok(())
}

fn simulate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let (mut sim, analysis) = load_config(config)?;
    if let Some(s) = seed {
        sim.seed = s;
    }
    let start = Instant::now();
    let mut writer = TimestampWriter::new(create(out)?, &sim, &analysis)?;
    let stats = spadsim::run_with(&sim, &mut writer, &mut ())?;
    writer.into_inner().flush()?;
    eprintln!(
        "{} pulses, {} avalanches, {} detections in {:.2} s -> {}",
        stats.pulses,
        stats.avalanches,
        stats.detections,
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn sweep(config: &Path, out: &Path, jobs: usize, seed: Option<u64>) -> Result<()> {
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let mut spec = SweepSpec::parse(&read_text(config)?).with_context(|| format!("in {}", config.display()))?;
    if let Some(s) = seed {
        spec.base.seed = s;
    }
    let rows = run_sweep(&spec, jobs)?;
    let mut w = create(out)?;
    write_sweep_csv(&mut w, &rows)?;
    w.flush()?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    eprintln!("{} points ({failed} failed) -> {}", rows.len(), out.display());
    Ok(())
}

fn characterize(
    timestamps: &Path,
    dark: Option<&Path>,
    dcr: Option<f64>,
    out: Option<&Path>,
    histogram: Option<&Path>,
) -> Result<()> {
    let (config, analysis) = read_header(timestamps)?;
    let dark = match (dark, dcr) {
        (Some(path), _) => {
            let (dark_config, _) = read_header(path)?;
            let mut n = Counter(0);
            stream(path, &mut n)?;
            DarkReference::Supplied(estimate_dcr_from_count(n.0, dark_config.duration_s)?)
        }
        (None, Some(rate)) => {
            if !(rate >= 0.0 && rate.is_finite()) {
                bail!("--dcr must be a non-negative rate, got {rate}");
            }
            DarkReference::Supplied(Measured::new(rate, 0.0))
        }
        (None, None) => DarkReference::TailSegment,
    };
    let mut folder = PhaseFolder::for_rate(config.source.rep_rate_hz, analysis.bin_width_ps as i64)?;
    stream(timestamps, &mut folder)?;
    let classes = folder.classify(analysis.window_ps)?;
    let report = report_from_folded(&classes, &config, dark)?;
    if report.clamped {
        eprintln!("warning: dark subtraction went negative and was clamped to zero");
    }
    write_report_csv(output(out)?, &[report])?;
    if let Some(path) = histogram {
        let h = classes.peak_histogram(analysis.window_ps as i64);
        let mut w = create(path)?;
        w.write_all(h.to_csv().as_bytes())?;
        w.flush()?;
    }
    Ok(())
}

fn working_point(config: Option<&Path>, tol: f64) -> Result<()> {
    let (sim, _) = load_config(config)?;
    let wp = solve_working_point(&sim.circuit, tol)?;
    let mut out = io::stdout().lock();
    writeln!(out, "v_gs = {:.6} V", wp.v_gs)?;
    writeln!(out, "v_s = {:.6} V", wp.v_s)?;
    writeln!(out, "i1 = {:.6e} A", wp.i1)?;
    writeln!(out, "residual = {:.3e} V", wp.residual)?;
    Ok(())
}

fn waveform(config: Option<&Path>, scenario: &str, out: Option<&Path>) -> Result<()> {
    let Some(sc) = Scenario::parse(scenario) else {
        bail!("unknown scenario `{scenario}` (expected free-running-pulse, gate-cycle or idle)");
    };
    let (sim, _) = load_config(config)?;
    let log = sc.run(&sim.timing)?;
    let points = anode_waveform(&log, &sim.timing, &sim.circuit);
    let mut w = output(out)?;
    write_waveform(&mut w, &points)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out, seed } => simulate(config.as_deref(), out, *seed),
        Command::Sweep { config, out, jobs, seed } => sweep(config, out, *jobs, *seed),
        Command::Characterize { timestamps, dark, dcr, out, histogram } => {
            characterize(timestamps, dark.as_deref(), *dcr, out.as_deref(), histogram.as_deref())
        }
        Command::WorkingPoint { config, tol } => working_point(config.as_deref(), *tol),
        Command::Waveform { config, scenario, out } => waveform(config.as_deref(), scenario, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
