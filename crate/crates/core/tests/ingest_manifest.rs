use ecgbench::ingest::*;

fn entry(subject: &str, session: &str, day: u32, idx: u32, path: &str) -> String {
    format!(
        r#"{{"subject":"{subject}","session":"{session}","day":{day},"record_index":{idx},"path":"{path}","format":"f32le","fs":500}}"#
    )
}

#[test]
fn sorts_by_subject_day_record() {
    let text = format!(
        r#"{{"records":[{},{},{},{}]}}"#,
        entry("b", "s1", 1, 0, "b1"),
        entry("a", "s1", 0, 1, "a1"),
        entry("b", "s1", 0, 0, "b0"),
        entry("a", "s1", 0, 0, "a0"),
    );
    let idx = parse_manifest(&text).unwrap();
    let order: Vec<_> = idx.records.iter().map(|r| r.path.to_str().unwrap()).collect();
    assert_eq!(order, ["a0", "a1", "b0", "b1"]);
    assert_eq!(idx.subjects(), ["a", "b"]);
}

#[test]
fn duplicate_key_rejected() {
    let text = format!(
        r#"{{"records":[{},{}]}}"#,
        entry("a", "s1", 0, 0, "x"),
        entry("a", "s1", 0, 0, "y")
    );
    assert!(matches!(
        parse_manifest(&text),
        Err(IngestError::DuplicateRecordKey { .. })
    ));
}

#[test]
fn negative_fs_rejected() {
    let text = r#"{"records":[{"subject":"a","path":"x","format":"f32le","fs":-1}]}"#;
    assert!(matches!(parse_manifest(text), Err(IngestError::Schema(_))));
}

#[test]
fn unknown_entry_key_rejected() {
    let text = r#"{"records":[{"subject":"a","path":"x","format":"f32le","fs":1,"lead":"I"}]}"#;
    assert!(matches!(parse_manifest(text), Err(IngestError::Schema(_))));
}

#[test]
fn dates_become_day_offsets_and_indices_default_sequential() {
    let text = r#"{"records":[
        {"subject":"a","day":"2024-03-01","path":"x","format":"f32le","fs":1},
        {"subject":"a","day":"2024-03-01","path":"y","format":"f32le","fs":1},
        {"subject":"a","day":"2024-03-11","path":"z","format":"f32le","fs":1},
        {"subject":"b","path":"w","format":"f32le","fs":1}
    ]}"#;
    let idx = parse_manifest(text).unwrap();
    let got: Vec<_> = idx
        .records
        .iter()
        .map(|r| (r.subject_id.as_str(), r.day_index, r.record_index))
        .collect();
    assert_eq!(got, [("a", 0, 0), ("a", 0, 1), ("a", 10, 0), ("b", 0, 0)]);
}

#[test]
fn wfdb_entries_may_omit_fs_but_raw_formats_may_not() {
    let ok = r#"{"records":[{"subject":"a","path":"r.hea","format":"wfdb"}]}"#;
    assert!(parse_manifest(ok).is_ok());
    let bad = r#"{"records":[{"subject":"a","path":"r.f32","format":"f32le"}]}"#;
    assert!(matches!(parse_manifest(bad), Err(IngestError::Schema(_))));
}
