use ota_anomaly_demo::{parse_grid, Session};

#[test]
fn bundled_session_trains_a_two_sensor_model() {
    let s = Session::new("sec5a", None).unwrap();
    let m = s.model();
    assert_eq!(m.dim, 2);
    assert_eq!(m.samples.len(), 200);
    assert!(m.margin > 0.0);
    // every training sample is on its own side of the margin
    for [x, y, label] in &m.samples {
        assert!(label * (m.w[0] * x + m.w[1] * y + m.b) >= 1.0 - 1e-5);
    }
}

#[test]
fn map_and_curve_have_expected_shape() {
    let s = Session::new("sec5a", Some(3)).unwrap();
    let map = s.map(64, 10.0, 8, 40).unwrap();
    assert_eq!(map.reliability.len(), 64);
    assert!(map.reliability.iter().all(|r| (0.0..=1.0).contains(r)));
    let curve = s.curve("ei", 10.0, &[2, 32], 50).unwrap();
    assert_eq!(curve.len(), 2);
    assert!(s.curve("fdma", 10.0, &[2], 10).is_err());
}

#[test]
fn maps_need_two_sensors() {
    let toml = ota_anomaly::config::bundled::SEC5A
        .replace("sensors = 2", "sensors = 3")
        .replace("[20.0, 20.0]", "[20.0, 20.0, 20.0]")
        .replace("[10.0, 10.0]", "[10.0, 10.0, 10.0]")
        .replace("[[1.5, 0.0], [0.0, 1.5]]", "1.5");
    let s = Session::new(&toml, None).unwrap();
    assert!(s.map(16, 10.0, 4, 10).unwrap_err().contains("two-dimensional"));
}

#[test]
fn grid_parsing() {
    assert_eq!(parse_grid("2, 4,8,").unwrap(), vec![2, 4, 8]);
    assert!(parse_grid("2,x").is_err());
}
