use ecgbench::synth::*;

#[test]
fn subject_params_deterministic_and_distinct() {
    assert_eq!(make_subject_params(0), make_subject_params(0));
    for s in 0..100u64 {
        assert_ne!(make_subject_params(s), make_subject_params(s + 1000));
        assert!(make_subject_params(s).is_valid());
    }
    for s in 0..100u64 {
        let a = make_subject_params(s);
        assert!((0.8..1.4).contains(&a.r.amplitude));
        assert!((55.0..90.0).contains(&a.heart_rate_bpm));
    }
}

#[test]
fn beat_length_and_zero_amplitudes() {
    let theta = make_subject_params(3);
    assert_eq!(synthesize_beat(&theta, 360.0, 1.0).len(), 360);
    let mut flat = theta.clone();
    for w in [&mut flat.p, &mut flat.q, &mut flat.r, &mut flat.s, &mut flat.t] {
        w.amplitude = 0.0;
    }
    assert!(synthesize_beat(&flat, 360.0, 1.0).iter().all(|&v| v == 0.0));
}

#[test]
fn beat_maximum_sits_on_r() {
    for seed in 0..50 {
        let theta = make_subject_params(seed);
        let fs = 500.0;
        let beat = synthesize_beat(&theta, fs, 0.8);
        let arg = beat.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let t_r = r_index(beat.len()) as f64 / fs;
        assert!((arg as f64 / fs - t_r).abs() <= 0.010);
    }
}

#[test]
fn no_drift_sessions_are_identical() {
    let theta = make_subject_params(9);
    let a = synthesize_record("x", &theta, &SessionEffects::clean("s1", 0), 10.0, 360.0, 4);
    let b = synthesize_record("x", &theta, &SessionEffects::clean("s2", 0), 10.0, 360.0, 4);
    assert_eq!(a.recording.channels(), b.recording.channels());
}

#[test]
fn peak_count_at_60_bpm() {
    let mut theta = make_subject_params(1);
    theta.heart_rate_bpm = 60.0;
    let r = synthesize_record("x", &theta, &SessionEffects::clean("s1", 0), 10.0, 360.0, 2);
    assert!((9..=11).contains(&r.true_peaks.len()), "{}", r.true_peaks.len());
}

#[test]
fn noise_residual_matches_sigma() {
    let theta = make_subject_params(5);
    let eff = SessionEffects {
        noise_sigma: 0.05,
        ..SessionEffects::clean("s1", 0)
    };
    let noisy = synthesize_record("x", &theta, &eff, 30.0, 360.0, 8);
    let (clean, _) = render_clean(&theta, &eff, 30.0, 360.0, 8);
    let resid: Vec<f64> = noisy.recording.channels()[0]
        .iter()
        .zip(&clean)
        .map(|(a, b)| a - b)
        .collect();
    let n = resid.len() as f64;
    let m = resid.iter().sum::<f64>() / n;
    let sd = (resid.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    assert!((sd - 0.05).abs() <= 0.005, "sd {sd}");
}

#[test]
fn clean_signal_argmax_recovers_truth() {
    for seed in 0..10 {
        let theta = make_subject_params(seed);
        let fs = if seed % 2 == 0 { 360.0 } else { 500.0 };
        let (x, peaks) = render_clean(&theta, &SessionEffects::clean("s1", 0), 20.0, fs, seed);
        let half = (0.1 * fs) as usize;
        for &p in &peaks {
            let lo = p.saturating_sub(half);
            let hi = (p + half).min(x.len() - 1);
            let arg = (lo..=hi)
                .max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a)))
                .unwrap();
            assert_eq!(arg, p, "seed {seed}");
        }
    }
}

#[test]
fn single_subject_spec_rejected() {
    let mut spec = SynthSpec::preset("fallacy30").unwrap();
    spec.n_subjects = 1;
    assert!(matches!(generate_records(&spec, 0), Err(SynthError::InvalidSpec(_))));
}

#[test]
fn presets_have_documented_shape() {
    let f = SynthSpec::preset("fallacy30").unwrap();
    assert_eq!((f.n_subjects, f.sessions.len()), (30, 2));
    let a = SynthSpec::preset("aging4").unwrap();
    let days: Vec<u32> = a.sessions.iter().map(|s| s.day_index).collect();
    assert_eq!(days, [0, 10, 20, 40]);
    assert!(a.sessions.iter().all(|s| s.drift_rate > 0.0));
    let b = SynthSpec::preset("ablation").unwrap();
    let scales: Vec<f64> = b.sessions.iter().map(|s| s.amplitude_scale).collect();
    assert_eq!(scales, [0.8, 1.25]);
    assert!(b.sessions.iter().all(|s| s.noise_sigma == 0.08));
    assert!(SynthSpec::preset("nope").is_err());
}
