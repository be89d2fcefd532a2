//! Folding detections onto the laser period and splitting them into photon
//! counts and everything else.

use std::io;

use crate::engine::{RecordKind, RecordSink, TimestampRecord};

use super::{AnalysisParams, CharacterizeError, Histogram};

/// Streaming fold of detection times modulo the laser period. The phase
/// origin is the first sync record; detections seen before it are held back
/// until it arrives.
#[derive(Debug, Clone)]
pub struct PhaseFolder {
    period_ps: i64,
    bin_width_ps: i64,
    bins: Vec<u64>,
    origin: Option<i64>,
    pending: Vec<i64>,
    syncs: u64,
    detections: u64,
}

impl PhaseFolder {
    pub fn new(period_ps: i64, bin_width_ps: i64) -> Result<Self, CharacterizeError> {
        if bin_width_ps <= 0 {
            return Err(CharacterizeError::InvalidInput {
                name: "bin_width",
                value: bin_width_ps as f64,
            });
        }
        if period_ps < bin_width_ps {
            return Err(CharacterizeError::InvalidInput {
                name: "period",
                value: period_ps as f64,
            });
        }
        let n = (period_ps + bin_width_ps - 1) / bin_width_ps;
        Ok(Self {
            period_ps,
            bin_width_ps,
            bins: vec![0; n as usize],
            origin: None,
            pending: Vec::new(),
            syncs: 0,
            detections: 0,
        })
    }

    /// Period from a repetition rate in Hz, rounded to whole picoseconds.
    pub fn for_rate(rep_rate_hz: f64, bin_width_ps: i64) -> Result<Self, CharacterizeError> {
        if !(rep_rate_hz > 0.0) {
            return Err(CharacterizeError::InvalidInput {
                name: "rep_rate",
                value: rep_rate_hz,
            });
        }
        Self::new((1e12 / rep_rate_hz).round() as i64, bin_width_ps)
    }

    fn fold(&mut self, t: i64, origin: i64) {
        let phase = (t - origin).rem_euclid(self.period_ps);
        self.bins[(phase / self.bin_width_ps) as usize] += 1;
    }

    pub fn push(&mut self, rec: TimestampRecord) {
        match rec.kind {
            RecordKind::SyncPulse => {
                self.syncs += 1;
                if self.origin.is_none() {
                    self.origin = Some(rec.time_ps);
                    for t in std::mem::take(&mut self.pending) {
                        self.fold(t, rec.time_ps);
                    }
                }
            }
            RecordKind::Detection => {
                self.detections += 1;
                match self.origin {
                    Some(o) => self.fold(rec.time_ps, o),
                    None => self.pending.push(rec.time_ps),
                }
            }
        }
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn detections(&self) -> u64 {
        self.detections
    }

    /// Locates the peak and splits the counts with a photon window of
    /// `window_ps` centred on it.
    pub fn classify(&self, window_ps: u64) -> Result<Classification, CharacterizeError> {
        if self.origin.is_none() {
            return Err(CharacterizeError::NoSync);
        }
        if window_ps == 0 || window_ps as i64 >= self.period_ps {
            return Err(CharacterizeError::InvalidInput {
                name: "window",
                value: window_ps as f64,
            });
        }
        let n = self.bins.len();
        let bw = self.bin_width_ps;
        let max = self.bins.iter().copied().max().unwrap_or(0);
        let peak = self.bins.iter().position(|&c| c == max).unwrap_or(0);
        let half = ((window_ps as i64 / 2 + bw / 2) / bw).max(1) as usize;
        let half = half.min(n / 2);
        let photon_counts: u64 = (0..2 * half)
            .map(|j| self.bins[(peak + n - half + j) % n])
            .sum();
        // Bin 0 of the rotated histogram starts half a period before the peak
        // bin, whose start is at 0 ps.
        let lead = n / 2;
        let counts = (0..n).map(|j| self.bins[(peak + n - lead + j) % n]).collect();
        Ok(Classification {
            photon_counts,
            other_counts: self.detections - photon_counts,
            histogram: Histogram {
                bin_width_ps: bw,
                origin_ps: -(lead as i64) * bw,
                counts,
            },
            peak_phase_ps: peak as i64 * bw,
            period_ps: self.period_ps,
            window_bins: 2 * half,
            pulses: self.syncs,
        })
    }
}

impl RecordSink for PhaseFolder {
    fn record(&mut self, rec: TimestampRecord) -> io::Result<()> {
        self.push(rec);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub photon_counts: u64,
    pub other_counts: u64,
    /// Folded detections over one full period, in picoseconds relative to
    /// the start of the peak bin.
    pub histogram: Histogram,
    /// Start of the peak bin relative to the sync.
    pub peak_phase_ps: i64,
    pub period_ps: i64,
    /// Width of the photon window in bins.
    pub window_bins: usize,
    pub pulses: u64,
}

impl Classification {
    pub fn total(&self) -> u64 {
        self.photon_counts + self.other_counts
    }

    pub fn window_ps(&self) -> i64 {
        self.window_bins as i64 * self.histogram.bin_width_ps
    }

    /// Share of the period covered by the photon window.
    pub fn window_fraction(&self) -> f64 {
        self.window_ps() as f64 / self.period_ps as f64
    }

    /// Counts with phase in `[start, end)` picoseconds after the peak bin,
    /// with `0 <= start <= end <= period`.
    pub fn counts_after_peak(&self, start_ps: i64, end_ps: i64) -> u64 {
        let h = &self.histogram;
        (0..h.counts.len())
            .filter(|&i| (start_ps..end_ps).contains(&h.bin_start(i).rem_euclid(self.period_ps)))
            .map(|i| h.counts[i])
            .sum()
    }

    /// The histogram cropped to `±span_ps` around the peak.
    pub fn peak_histogram(&self, span_ps: i64) -> Histogram {
        self.histogram.crop(-span_ps, span_ps)
    }
}

pub fn classify_events(
    records: &[TimestampRecord],
    rep_rate_hz: f64,
    analysis: &AnalysisParams,
) -> Result<Classification, CharacterizeError> {
    let mut folder = PhaseFolder::for_rate(rep_rate_hz, analysis.bin_width_ps as i64)?;
    for &r in records {
        folder.push(r);
    }
    folder.classify(analysis.window_ps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sync(t: i64) -> TimestampRecord {
        TimestampRecord { time_ps: t, kind: RecordKind::SyncPulse }
    }

    fn det(t: i64) -> TimestampRecord {
        TimestampRecord { time_ps: t, kind: RecordKind::Detection }
    }

    #[test]
    fn single_detection_is_a_photon() {
        let recs = [sync(0), det(40_000)];
        let c = classify_events(&recs, 1e5, &AnalysisParams::default()).unwrap();
        assert_eq!((c.photon_counts, c.other_counts), (1, 0));
        assert_eq!(c.peak_phase_ps, 40_000);
        assert_eq!(c.window_ps(), 2000);
    }

    #[test]
    fn window_edges_are_half_open() {
        let mut recs = vec![sync(0)];
        for _ in 0..5 {
            recs.push(det(50_000));
        }
        // Window covers [49_000, 51_000).
        recs.extend([det(48_990), det(49_000), det(50_990), det(51_000)]);
        recs.sort_by_key(|r| r.time_ps);
        let c = classify_events(&recs, 1e5, &AnalysisParams::default()).unwrap();
        assert_eq!(c.photon_counts, 7);
        assert_eq!(c.other_counts, 2);
    }

    #[test]
    fn window_wraps_around_the_period() {
        let period = 10_000_000;
        let recs = [sync(0), det(100), det(100), det(period - 500), det(period + 700)];
        let c = classify_events(&recs, 1e5, &AnalysisParams::default()).unwrap();
        assert_eq!(c.photon_counts, 4);
        assert_eq!(c.histogram.counts.iter().sum::<u64>(), 4);
    }

    #[test]
    fn detections_before_first_sync_are_kept() {
        let recs = [det(5_000), sync(10_000), det(10_000_000 + 5_000)];
        let c = classify_events(&recs, 1e5, &AnalysisParams::default()).unwrap();
        assert_eq!(c.total(), 2);
        assert_eq!(c.photon_counts, 2);
    }

    #[test]
    fn errors() {
        assert_eq!(
            classify_events(&[det(1)], 1e5, &AnalysisParams::default()),
            Err(CharacterizeError::NoSync)
        );
        let wide = AnalysisParams { window_ps: 10_000_000, bin_width_ps: 10 };
        assert!(classify_events(&[sync(0)], 1e5, &wide).is_err());
        assert!(classify_events(&[sync(0)], 0.0, &AnalysisParams::default()).is_err());
    }

    #[test]
    fn uniform_leakage_into_window() {
        // Dark-only stream: DCR 260 over 10 s, uniform in time.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t_ps = 10_000_000_000_000i64;
        let mut recs: Vec<_> = (0..1_000_000i64).map(|k| sync(k * 10_000_000)).collect();
        recs.extend((0..2600).map(|_| det(rng.random_range(0..t_ps) / 10 * 10)));
        recs.sort_by_key(|r| r.time_ps);
        let c = classify_events(&recs, 1e5, &AnalysisParams::default()).unwrap();
        // The mode of a flat histogram is arbitrary; leakage expectation is
        // counts * window * f, plus the peak bin's own excess.
        let expect: f64 = 2600.0 * 2000e-12 * 1e5;
        let sd = expect.sqrt();
        assert!((c.photon_counts as f64) < expect + 3.0 * sd + 5.0, "{}", c.photon_counts);
        assert_eq!(c.total(), 2600);
        assert_eq!(c.pulses, 1_000_000);
    }
}
