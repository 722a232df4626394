use std::path::PathBuf;

use distillery::device::{load_calibration, save_calibration, DeviceCalibration};
use distillery::Error;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn z2b_fixture_values() {
    let c = load_calibration(fixture("kyiv_z2b.json")).unwrap();
    let q0 = c.qubit(0).unwrap();
    assert_eq!((q0.t1_us, q0.t2_us, q0.meas_error), (257.944, 323.573, 6.5e-3));
    let e = c.edge(1, 0).unwrap();
    assert_eq!((e.zz_rate_hz, e.gate_error), (-52860.4, 7.75153e-3));
    assert_eq!(c.meas_delay_us, 1.24);
    assert_eq!(c.cnot_duration_us, 0.0);
}

#[test]
fn three_pair_fixture_values() {
    let c = load_calibration(fixture("kyiv_3bell.json")).unwrap();
    let q = c.qubit(62).unwrap();
    assert_eq!((q.t2_us, q.meas_error), (25.5405, 23.6e-3));
    assert!(c.edge(8, 59).is_err());
}

#[test]
fn round_trip_through_disk() {
    for name in ["kyiv_z2b.json", "kyiv_x2b.json", "kyiv_3bell.json"] {
        let c = load_calibration(fixture(name)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        save_calibration(&c, &path).unwrap();
        assert_eq!(load_calibration(&path).unwrap(), c);
        assert_eq!(DeviceCalibration::from_json(&c.to_json()).unwrap(), c);
    }
}

#[test]
fn invalid_calibrations_name_the_field() {
    let base = std::fs::read_to_string(fixture("kyiv_z2b.json")).unwrap();
    let cases = [
        (base.replace("\"t2_us\": 123.047", "\"t2_us\": 600"), "qubits[2].t2_us"),
        (base.replace("\"meas_error\": 4.6e-3", "\"meas_error\": 1.5"), "qubits[3].meas_error"),
        (base.replace("\"gate_error\": 4.2953e-3", "\"gate_error\": -1"), "edges[2].gate_error"),
    ];
    for (text, field) in cases {
        match DeviceCalibration::from_json(&text) {
            Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
            other => panic!("expected config error for {field}, got {other:?}"),
        }
    }
    let unknown = base.replacen("\"meas_delay_us\"", "\"meas_delay\": 1, \"meas_delay_us\"", 1);
    assert!(DeviceCalibration::from_json(&unknown).is_err());
}

#[test]
fn ideal_coherence_removes_decay_only() {
    let c = load_calibration(fixture("kyiv_z2b.json")).unwrap();
    let ideal = c.with_ideal_coherence();
    for (a, b) in c.qubits.iter().zip(&ideal.qubits) {
        assert!(b.t1_us.is_infinite() && b.t2_us.is_infinite());
        assert_eq!(a.meas_error, b.meas_error);
    }
    assert_eq!(c.edges, ideal.edges);
}
