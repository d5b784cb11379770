use aeromag_core::flight::{gyro_attitude_error, GyroErrorParams, InitialBias};

#[test]
fn arw_only_drift_follows_random_walk_law() {
    let p = GyroErrorParams {
        bias_sigma: 0.0,
        ..GyroErrorParams::tactical()
    };
    let f_s = 20.0;
    let n = (600.0 * f_s) as usize + 1;
    let finals: Vec<f64> = (0..1000)
        .flat_map(|seed| {
            let e = gyro_attitude_error(&p, n, f_s, seed).unwrap();
            let last = e[n - 1];
            [last.x, last.y, last.z]
        })
        .collect();
    let std = (finals.iter().map(|v| v * v).sum::<f64>() / finals.len() as f64).sqrt();
    let expected = p.arw * 600f64.sqrt();
    assert!((std / expected - 1.0).abs() < 0.1, "std {std} vs {expected}");
}

#[test]
fn tactical_drift_stays_within_a_third_of_a_degree() {
    let p = GyroErrorParams::tactical();
    let n = 660 * 20;
    let limit = 0.3f64.to_radians();
    let ok = (0..200)
        .filter(|&seed| {
            gyro_attitude_error(&p, n, 20.0, seed)
                .unwrap()
                .iter()
                .all(|d| d.amax() < limit)
        })
        .count();
    assert!(ok >= 190, "{ok}/200 within 0.3°");
}

#[test]
fn stationary_bias_start_drifts_further() {
    let zero = GyroErrorParams::tactical();
    let stationary = GyroErrorParams {
        initial_bias: InitialBias::Stationary,
        ..zero
    };
    let spread = |p: &GyroErrorParams| {
        (0..200)
            .map(|s| gyro_attitude_error(p, 3000, 20.0, s).unwrap()[2999].norm_squared())
            .sum::<f64>()
    };
    assert!(spread(&stationary) > spread(&zero));
}

#[test]
fn invalid_parameters_are_rejected() {
    let p = GyroErrorParams {
        arw: -1.0,
        ..GyroErrorParams::tactical()
    };
    assert!(gyro_attitude_error(&p, 10, 20.0, 0).is_err());
    assert!(gyro_attitude_error(&GyroErrorParams::tactical(), 0, 20.0, 0).is_err());
}
