mod common;

use fedsim_core::{load_cleveland, parse_cleveland, Error};

#[test]
fn cleveland_file_counts() {
    let raw = load_cleveland(common::DATA_PATH).unwrap();
    assert_eq!(raw.raw_rows(), 303);
    assert_eq!(raw.records.len(), 297);
    assert_eq!(raw.dropped_count, 6);
    // 137 positives among the retained rows
    let positives = raw.records.iter().filter(|r| r.label == 1).count();
    assert_eq!(positives, 137);
}

#[test]
fn first_record_matches_file() {
    let raw = load_cleveland(common::DATA_PATH).unwrap();
    let r = &raw.records[0];
    assert_eq!(
        r.features(),
        [63.0, 1.0, 1.0, 145.0, 233.0, 1.0, 2.0, 150.0, 0.0, 2.3, 3.0, 0.0, 6.0]
    );
    assert_eq!(r.label, 0);
}

#[test]
fn csv_round_trip_is_lossless() {
    let raw = load_cleveland(common::DATA_PATH).unwrap();
    let text: String = raw.records.iter().map(|r| r.to_csv_row() + "\n").collect();
    let back = parse_cleveland(&text, "round-trip").unwrap();
    assert_eq!(back.records, raw.records);
    assert_eq!(back.dropped_count, 0);
}

#[test]
fn missing_file_is_io_error() {
    let err = load_cleveland("/definitely/not/here.data").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.kind(), "io");
}

#[test]
fn loads_from_temp_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mini.data");
    std::fs::write(
        &path,
        "63.0,1.0,1.0,145.0,233.0,1.0,2.0,150.0,0.0,2.3,3.0,0.0,6.0,0\n\
         67.0,1.0,4.0,160.0,286.0,0.0,2.0,108.0,1.0,1.5,2.0,3.0,3.0,2\n\
         67.0,1.0,4.0,120.0,229.0,0.0,2.0,129.0,1.0,2.6,2.0,?,7.0,1\n",
    )
    .unwrap();
    let raw = load_cleveland(&path).unwrap();
    assert_eq!(raw.records.len(), 2);
    assert_eq!(raw.dropped_count, 1);
    assert_eq!(raw.records[1].label, 1);
}
