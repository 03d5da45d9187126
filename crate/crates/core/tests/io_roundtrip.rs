use proptest::prelude::*;

use regfilt::io::{
    format_correspondences, load_correspondences, parse_correspondences, read_report, write_correspondences,
    write_report, Report, ReportFormat, RunConfig,
};
use regfilt::synth::{make_synthetic_set, NoiseProfile};
use regfilt::{register, Method, MethodConfig, RegError};

#[test]
fn synthetic_set_survives_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for sample in make_synthetic_set(&NoiseProfile::large(), 50, 3, 12).unwrap() {
        let path = dir.path().join(format!("{}.csv", sample.seed));
        write_correspondences(&path, &sample.corrs).unwrap();
        let back = load_correspondences(&path).unwrap();
        assert_eq!(back.len(), sample.corrs.len());
        for (a, b) in back.iter().zip(&sample.corrs) {
            assert!((a.source - b.source).amax() <= 1e-15);
            assert!((a.target - b.target).amax() <= 1e-15);
            assert!((a.sigma.unwrap() - b.sigma.unwrap()).amax() <= 1e-15);
        }
    }
}

#[test]
fn csv_errors_carry_line_numbers() {
    let text = "sx,sy,sz,tx,ty,tz\n1,2,3,4,5,6\n1,2,3,4,5,nan\n";
    assert!(matches!(
        parse_correspondences(text.as_bytes()),
        Err(RegError::Parse { line: 3, .. })
    ));
    let text = "sx,sy,sz,tx,ty\n1,2,3,4,5\n";
    assert!(matches!(
        parse_correspondences(text.as_bytes()),
        Err(RegError::Schema(_))
    ));
    assert!(matches!(
        parse_correspondences("sx,sy,sz,tx,ty,tz\n".as_bytes()),
        Err(RegError::EmptyInput(_))
    ));
}

#[test]
fn reports_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let sample = &make_synthetic_set(&NoiseProfile::small(), 40, 1, 3).unwrap()[0];
    let res = register(Method::Rf, &sample.corrs, &MethodConfig::default()).unwrap();
    let report = Report::from_registration(Method::Rf, "sample", 40, &res, 1.25, 3);

    let json = dir.path().join("r.json");
    write_report(&report, &json, ReportFormat::for_path(&json)).unwrap();
    assert_eq!(read_report(&json).unwrap(), report);

    let table = dir.path().join("r.txt");
    write_report(&report, &table, ReportFormat::Table).unwrap();
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.contains("rf") && text.contains("sample"));
    assert!(read_report(&table).is_err());
}

#[test]
fn config_file_errors_name_the_line() {
    let mut cfg = RunConfig::default();
    let err = cfg.merge_str("method = kf\n\nthetaa = 1\n").unwrap_err();
    assert!(matches!(err, RegError::Parse { line: 3, .. }), "{err:?}");
    let err = cfg.merge_str("theta\n").unwrap_err();
    assert!(matches!(err, RegError::Parse { line: 1, .. }));
    cfg.merge_str("# robust run\nmethod = rf\ntheta = 0.002\nsigma_a = 1e-5\n")
        .unwrap();
    assert_eq!(cfg.method, Method::Rf);
    assert_eq!(cfg.methods_config.rf.theta, 0.002);
    assert_eq!(cfg.methods_config.uncertainty.sigma_a, [1e-5; 9]);
}

proptest! {
    #[test]
    fn csv_round_trip_is_within_float_noise(
        coords in proptest::collection::vec(proptest::array::uniform6(-5.0f64..5.0), 1..30),
    ) {
        let corrs: Vec<_> = coords
            .iter()
            .map(|c| regfilt::Correspondence::new(
                regfilt::Point3::new(c[0], c[1], c[2]),
                regfilt::Point3::new(c[3], c[4], c[5]),
            ))
            .collect();
        let mut buf = Vec::new();
        format_correspondences(&mut buf, &corrs).unwrap();
        let back = parse_correspondences(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), corrs.len());
        for (a, b) in back.iter().zip(&corrs) {
            // mm text, m in memory: one multiply and one divide of rounding
            prop_assert!((a.source - b.source).amax() <= 1e-15);
            prop_assert!((a.target - b.target).amax() <= 1e-15);
            prop_assert!(a.sigma.is_none());
        }
    }
}
