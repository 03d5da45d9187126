use regfilt::bench::{run_benchmark, BenchSettings};
use regfilt::synth::NoiseProfile;
use regfilt::Method;

/// With per-point sigmas the robust filter is no worse on average than the
/// Kalman filter in the widest band.
#[test]
fn robust_not_worse_than_kalman_in_large_band() {
    let settings = BenchSettings {
        methods: vec![Method::Kf, Method::Rf],
        scenarios: vec![NoiseProfile::large()],
        n_points: 400,
        n_samples: 30,
        seed: 42,
        ..Default::default()
    };
    let report = run_benchmark(&settings).unwrap();
    let kf = report.row(Method::Kf, "large").unwrap();
    let rf = report.row(Method::Rf, "large").unwrap();
    assert_eq!((kf.failures, rf.failures), (0, 0));
    assert!(
        rf.rmse_mean_mm <= kf.rmse_mean_mm,
        "rf {} kf {}",
        rf.rmse_mean_mm,
        kf.rmse_mean_mm
    );
}

/// Without sigmas both filters see the same default measurement noise.
#[test]
fn sigmas_can_be_withheld() {
    let settings = BenchSettings {
        scenarios: vec![NoiseProfile::average()],
        n_points: 100,
        n_samples: 5,
        use_sigmas: false,
        ..Default::default()
    };
    let report = run_benchmark(&settings).unwrap();
    for m in Method::ALL {
        let row = report.row(m, "average").unwrap();
        assert_eq!(row.failures, 0);
        assert!(row.rmse_mean_mm.is_finite() && row.rmse_mean_mm > 0.0);
    }
}
