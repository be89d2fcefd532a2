use spadsim::detector::{afterpulse_intensity, anchors, dark_rate, pde};
use spadsim::{DetectorParamsF32, DetectorParamsF64, OperatingPoint, OperatingPointF32, OperatingPointF64};

fn grid() -> Vec<(f64, f64)> {
    (0..10)
        .flat_map(|i| (0..10).map(move |j| (1.0 + 5.35 * i as f64, 250.0 + 5.5 * j as f64)))
        .collect()
}

#[test]
fn laws_are_monotone_on_a_grid() {
    let p = DetectorParamsF64::default();
    let at = |v, t| OperatingPoint::new(v, t).unwrap();
    for (v, t) in grid() {
        let (here, up_v, up_t) = (at(v, t), at(v + 0.5, t), at(v, t + 0.5));
        assert!(pde(&up_v, &p).unwrap() >= pde(&here, &p).unwrap());
        assert!(dark_rate(&up_v, &p).unwrap() > dark_rate(&here, &p).unwrap());
        assert!(dark_rate(&up_t, &p).unwrap() > dark_rate(&here, &p).unwrap());
        let n = afterpulse_intensity(&here, &p).unwrap().expected_traps;
        assert!(afterpulse_intensity(&up_v, &p).unwrap().expected_traps > n);
        assert!(afterpulse_intensity(&up_t, &p).unwrap().expected_traps < n);
    }
}

#[test]
fn anchors_hold_at_reference_points() {
    let p = DetectorParamsF64::default();
    let reference = OperatingPointF64::reference();
    assert!((pde(&reference, &p).unwrap() - 0.844).abs() < 1e-15);
    assert!((dark_rate(&reference, &p).unwrap() - 260.0).abs() < 1e-12);
    let cooled = OperatingPoint::new(anchors::REFERENCE_V_EX, anchors::DCR_COOLED_TEMPERATURE).unwrap();
    assert!((dark_rate(&cooled, &p).unwrap() - 80.0).abs() < 1e-12);
}

#[test]
fn single_and_double_precision_agree() {
    let p64 = DetectorParamsF64::default();
    let p32 = DetectorParamsF32::default();
    for (v, t) in grid() {
        let o64 = OperatingPoint::new(v, t).unwrap();
        let o32: OperatingPointF32 = OperatingPoint::new(v as f32, t as f32).unwrap();
        let rel = |a: f32, b: f64| ((a as f64 - b) / b).abs();
        assert!(rel(pde(&o32, &p32).unwrap(), pde(&o64, &p64).unwrap()) < 1e-5);
        assert!(rel(dark_rate(&o32, &p32).unwrap(), dark_rate(&o64, &p64).unwrap()) < 1e-4);
    }
}
