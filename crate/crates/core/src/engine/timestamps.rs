//! Timestamp file format.
//!
//! Header lines start with `#`: a title line, then the full configuration as
//! `# key = value`. Each record follows as `<time_ps> <D|S>`.

use std::io::{BufRead, Write};

use crate::characterize::AnalysisParams;
use crate::keyfile::{analysis_lines, sim_config_lines, KeyFile};

use super::{RecordKind, RecordSink, SimConfig, SimError, TimestampRecord};

pub const TITLE: &str = "# spadsim timestamps v1";

pub struct TimestampWriter<W: Write> {
    out: W,
}

impl<W: Write> TimestampWriter<W> {
    pub fn new(mut out: W, config: &SimConfig, analysis: &AnalysisParams) -> std::io::Result<Self> {
        writeln!(out, "{TITLE}")?;
        for line in sim_config_lines(config).iter().chain(&analysis_lines(analysis)) {
            writeln!(out, "# {line}")?;
        }
        Ok(Self { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RecordSink for TimestampWriter<W> {
    fn record(&mut self, rec: TimestampRecord) -> std::io::Result<()> {
        writeln!(self.out, "{} {}", rec.time_ps, rec.kind.code())
    }
}

/// Streams the records of a timestamp file into `sink` and returns the
/// configuration echoed in its header.
pub fn read_timestamps<R: BufRead, S: RecordSink + ?Sized>(
    input: R,
    sink: &mut S,
) -> Result<KeyFile, SimError> {
    let mut header = String::new();
    let mut last = i64::MIN;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if let Some(h) = line.strip_prefix('#') {
            if h.contains('=') {
                header.push_str(h.trim());
                header.push('\n');
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| SimError::Format {
            line: line_no,
            reason: reason.to_string(),
        };
        let mut parts = line.split(' ');
        let time_ps: i64 = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("time is not an integer"))?;
        let kind = match parts.next() {
            Some("D") => RecordKind::Detection,
            Some("S") => RecordKind::SyncPulse,
            _ => return Err(bad("kind must be D or S")),
        };
        if parts.next().is_some() {
            return Err(bad("trailing fields"));
        }
        if time_ps < last {
            return Err(bad("records out of time order"));
        }
        last = time_ps;
        sink.record(TimestampRecord { time_ps, kind })?;
    }
    KeyFile::parse(&header)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyfile::{analysis_from_keys, sim_config_from_keys};

    #[test]
    fn writes_header_and_records() {
        let c = SimConfig::default();
        let mut w = TimestampWriter::new(Vec::new(), &c, &AnalysisParams::default()).unwrap();
        w.record(TimestampRecord { time_ps: 0, kind: RecordKind::SyncPulse }).unwrap();
        w.record(TimestampRecord { time_ps: 9150, kind: RecordKind::Detection }).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert!(text.starts_with(TITLE));
        assert!(text.contains("# seed = 1\n"));
        assert!(text.ends_with("0 S\n9150 D\n"));

        let mut recs = Vec::new();
        let mut kf = read_timestamps(text.as_bytes(), &mut recs).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1], TimestampRecord { time_ps: 9150, kind: RecordKind::Detection });
        assert_eq!(sim_config_from_keys(&mut kf).unwrap(), c);
        assert_eq!(analysis_from_keys(&mut kf).unwrap(), AnalysisParams::default());
        kf.finish().unwrap();
    }

    #[test]
    fn malformed_lines_are_reported() {
        let mut recs = Vec::new();
        let err = read_timestamps("# t\n10 S\n5 D\n".as_bytes(), &mut recs).unwrap_err();
        assert!(matches!(err, SimError::Format { line: 3, .. }));
        let err = read_timestamps("10 X\n".as_bytes(), &mut recs).unwrap_err();
        assert!(matches!(err, SimError::Format { line: 1, .. }));
        let err = read_timestamps("1.5 D\n".as_bytes(), &mut recs).unwrap_err();
        assert!(matches!(err, SimError::Format { line: 1, .. }));
    }
}
