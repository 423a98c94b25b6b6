use ecgbench::ingest::wfdb::*;

const HEADER: &str = "# MIT-BIH style fixture\n\
    r1 2 360 650000\n\
    r1.dat 212 200 11 1024 995 -22131 0 MLII\n\
    r1.dat 212 200 11 1024 1011 20052 0 V5\n";

#[test]
fn parses_record_and_signal_lines() {
    let h = parse_wfdb_header(HEADER).unwrap();
    assert_eq!(h.record_name, "r1");
    assert_eq!(h.n_signals, 2);
    assert_eq!(h.fs, 360.0);
    assert_eq!(h.n_samples, Some(650000));
    assert_eq!(h.signals[0].format, WfdbFormat::F212);
    assert_eq!(h.signals[0].adc_gain, 200.0);
    // baseline defaults to adc zero
    assert_eq!(h.signals[0].baseline, 1024.0);
    assert_eq!(h.signals[1].description, "V5");
}

#[test]
fn gain_baseline_and_units_syntax() {
    let h = parse_wfdb_header("x 1 500\nx.dat 16 1000.0(-5)/uV 16 0 0 0 0 lead I\n").unwrap();
    let s = &h.signals[0];
    assert_eq!(s.adc_gain, 1000.0);
    assert_eq!(s.baseline, -5.0);
    assert_eq!(s.units, "uV");
    assert_eq!(s.description, "lead I");
}

#[test]
fn missing_fs_defaults_to_250() {
    let h = parse_wfdb_header("x 1\nx.dat 16\n").unwrap();
    assert_eq!(h.fs, DEFAULT_FS);
    assert_eq!(h.signals[0].adc_gain, DEFAULT_GAIN);
    assert_eq!(h.n_samples, None);
}

#[test]
fn rejects_unsupported_and_malformed() {
    assert_eq!(
        parse_wfdb_header("x 1 360\nx.dat 80 200\n"),
        Err(WfdbError::UnsupportedFormat(80))
    );
    assert!(matches!(
        parse_wfdb_header("x 1 360\nx.dat 212x2 200\n"),
        Err(WfdbError::MalformedHeaderLine { .. })
    ));
    assert!(matches!(
        parse_wfdb_header("x two 360\n"),
        Err(WfdbError::MalformedHeaderLine { .. })
    ));
    assert!(matches!(
        parse_wfdb_header("x 2 360\nx.dat 16\n"),
        Err(WfdbError::MalformedHeaderLine { .. })
    ));
}

#[test]
fn decode_212_examples() {
    assert_eq!(
        decode_wfdb_samples(&[0x01, 0x00, 0x02], WfdbFormat::F212, 1).unwrap(),
        vec![vec![1, 2]]
    );
    assert_eq!(
        decode_wfdb_samples(&[0xFF, 0x0F, 0x00], WfdbFormat::F212, 1).unwrap(),
        vec![vec![-1, 0]]
    );
    // two signals interleave per pair
    assert_eq!(
        decode_wfdb_samples(&[0x01, 0x00, 0x02], WfdbFormat::F212, 2).unwrap(),
        vec![vec![1], vec![2]]
    );
    assert!(decode_wfdb_samples(&[0x01], WfdbFormat::F212, 1).is_err());
}

#[test]
fn decode_16_examples() {
    assert_eq!(
        decode_wfdb_samples(&[0x34, 0x12], WfdbFormat::F16, 1).unwrap(),
        vec![vec![4660]]
    );
    assert_eq!(
        decode_wfdb_samples(&[0xFF, 0xFF, 0x00, 0x80], WfdbFormat::F16, 2).unwrap(),
        vec![vec![-1], vec![-32768]]
    );
    assert!(matches!(
        decode_wfdb_samples(&[0x34, 0x12, 0x00], WfdbFormat::F16, 1),
        Err(WfdbError::TruncatedData(_))
    ));
}

#[test]
fn physical_conversion() {
    assert_eq!(adc_to_physical(&[200, 100], 200.0, 0.0).unwrap(), vec![1.0, 0.5]);
    assert_eq!(adc_to_physical(&[1024], 200.0, 1024.0).unwrap(), vec![0.0]);
    assert_eq!(adc_to_physical(&[0], 0.0, 0.0), Err(WfdbError::ZeroGain));
}
