use ecgbench::dsp::fir::*;

#[test]
fn length_rule_forces_odd() {
    assert_eq!(fir_length(500.0, 0.5), 3301);
    assert_eq!(fir_length(100.0, 3.3), 101);
    assert_eq!(fir_length(100.0, 2.0), 165);
    assert_eq!(fir_length(200.0, 3.3), 201);
}

#[test]
fn passband_unity_and_stopband() {
    let f = design_fir_bandpass(5.0, 40.0, 2.0, 250.0).unwrap();
    assert_eq!(f.taps.len() % 2, 1);
    assert!((f.magnitude(22.5, 250.0) - 1.0).abs() < 1e-12);
    assert!((f.magnitude(15.0, 250.0) - 1.0).abs() < 0.01);
    assert!(f.magnitude(0.0, 250.0) < 0.01);
    assert!(f.magnitude(80.0, 250.0) < 0.01);
    // linear phase: symmetric taps
    let n = f.taps.len();
    for i in 0..n / 2 {
        assert!((f.taps[i] - f.taps[n - 1 - i]).abs() < 1e-15);
    }
}
