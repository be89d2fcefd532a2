//! Bisects the reference trap yield until the simulated afterpulse
//! probability at 45 V / 268 K matches the anchor, then checks the warm point.
//!
//! cargo run --release -p spadsim --example calibrate_trap_yield

use spadsim::calibration::calibrate_trap_yield;
use spadsim::detector::anchors;
use spadsim::sweep::calibrate_point;
use spadsim::{AnalysisParams, SimConfig};

fn main() {
    let config = SimConfig::default();
    let analysis = AnalysisParams::default();
    let fit = calibrate_trap_yield(&config, &analysis, anchors::PAP_REFERENCE, 5e-5, 0.0, 0.5)
        .expect("calibration run");
    println!(
        "trap_yield_ref = {:.5}  p_ap = {:.5}  ({} iterations)",
        fit.trap_yield, fit.p_ap, fit.iterations
    );

    let mut warm = config.clone();
    warm.detector.trap_yield_ref = fit.trap_yield;
    warm.operating.temperature = anchors::PAP_WARM_TEMPERATURE;
    let r = calibrate_point(&warm, &analysis).expect("warm run");
    println!("p_ap at {} K = {:.5} ± {:.5}", anchors::PAP_WARM_TEMPERATURE, r.p_ap.value, r.p_ap.stderr);
}
