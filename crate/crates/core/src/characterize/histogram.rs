use crate::scalar::Scalar;

use super::CharacterizeError;

/// Fixed-width histogram. Bin `i` covers
/// `[origin + i·bin_width, origin + (i+1)·bin_width)` picoseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub bin_width_ps: i64,
    pub origin_ps: i64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bin_width_ps: i64, origin_ps: i64, n_bins: usize) -> Self {
        assert!(bin_width_ps > 0, "bin width must be positive");
        Self {
            bin_width_ps,
            origin_ps,
            counts: vec![0; n_bins],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_start(&self, i: usize) -> i64 {
        self.origin_ps + i as i64 * self.bin_width_ps
    }

    pub fn bin_centre(&self, i: usize) -> f64 {
        self.bin_start(i) as f64 + 0.5 * self.bin_width_ps as f64
    }

    /// Adds one event; returns false when it falls outside the range.
    pub fn add(&mut self, time_ps: i64) -> bool {
        let i = (time_ps - self.origin_ps).div_euclid(self.bin_width_ps);
        match usize::try_from(i).ok().and_then(|i| self.counts.get_mut(i)) {
            Some(c) => {
                *c += 1;
                true
            }
            None => false,
        }
    }

    /// Sub-histogram of the bins whose start lies in `[start_ps, end_ps)`.
    pub fn crop(&self, start_ps: i64, end_ps: i64) -> Histogram {
        let idx: Vec<usize> = (0..self.counts.len())
            .filter(|&i| (start_ps..end_ps).contains(&self.bin_start(i)))
            .collect();
        let origin = idx.first().map_or(start_ps, |&i| self.bin_start(i));
        Histogram {
            bin_width_ps: self.bin_width_ps,
            origin_ps: origin,
            counts: idx.iter().map(|&i| self.counts[i]).collect(),
        }
    }

    /// `bin_start_ps,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_start_ps,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{}\n", self.bin_start(i), c));
        }
        s
    }
}

/// Full width at half maximum with linear interpolation between bin centres
/// at both half-maximum crossings.
pub fn fwhm<T: Scalar>(h: &Histogram) -> Result<T, CharacterizeError> {
    let c = &h.counts;
    let max = *c.iter().max().ok_or(CharacterizeError::EmptyHistogram)?;
    if max == 0 {
        return Err(CharacterizeError::EmptyHistogram);
    }
    if c.iter().all(|&x| x == max) {
        return Err(CharacterizeError::FlatHistogram);
    }
    let first = c.iter().position(|&x| x == max).expect("max exists");
    let last = c.iter().rposition(|&x| x == max).expect("max exists");
    let half = T::lit(max as f64) / T::lit(2.0);
    let count = |i: usize| T::lit(c[i] as f64);
    let centre = |i: usize| T::lit(h.bin_centre(i));
    let bw = T::lit(h.bin_width_ps as f64);

    let left = (0..first)
        .rev()
        .find(|&i| count(i) < half)
        .ok_or(CharacterizeError::PeakAtEdge)?;
    let x_left = centre(left) + bw * (half - count(left)) / (count(left + 1) - count(left));

    let right = (last + 1..c.len())
        .find(|&i| count(i) < half)
        .ok_or(CharacterizeError::PeakAtEdge)?;
    let x_right = centre(right - 1) + bw * (count(right - 1) - half) / (count(right - 1) - count(right));

    Ok(x_right - x_left)
}
