//! Time-to-digital conversion.

/// Rounds a time in picoseconds half-up to the nearest multiple of
/// `resolution_ps`.
pub fn apply_tdc(time_ps: f64, resolution_ps: u64) -> i64 {
    assert!(resolution_ps > 0, "TDC resolution must be positive");
    let r = resolution_ps as f64;
    ((time_ps / r + 0.5).floor() * r) as i64
}

/// Integer variant on the engine clock: femtoseconds in, picoseconds out.
pub fn quantize_fs(time_fs: i64, resolution_ps: u64) -> i64 {
    assert!(resolution_ps > 0, "TDC resolution must be positive");
    let r = resolution_ps as i64 * 1000;
    (time_fs + r / 2).div_euclid(r) * resolution_ps as i64
}
