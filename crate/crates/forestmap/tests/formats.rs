use std::io::Cursor;

use forestmap::config::{ConfigError, InputSource, Mode, RunConfig};
use forestmap::ply::{read_ply, read_ply_from, write_ply, write_ply_to, PlyError, PlyFormat};
use forestmap::sensors::{read_gnss_from, read_imu_from, read_sensor_csv, write_gnss_csv, write_imu_csv, SensorCsvError};
use forestmap_core::penalties::{GnssFix, GnssStatus, ImuAttitude};
use forestmap_core::registration::PointCloud;
use forestmap_core::{SymMat3, Vec3};

fn three_points() -> PointCloud {
    PointCloud::new(vec![
        Vec3::new(0.1, -2.5, 3.0e-7),
        Vec3::new(1234.5678, 0.0, -1.0 / 3.0),
        Vec3::new(f64::MIN_POSITIVE, 1e300, -0.0),
    ])
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ply");
    let cloud = three_points();
    write_ply(&cloud, &path, false).unwrap();
    let back = read_ply(&path).unwrap();
    for (a, b) in cloud.points().iter().zip(back.points()) {
        assert_eq!([a.x.to_bits(), a.y.to_bits(), a.z.to_bits()], [b.x.to_bits(), b.y.to_bits(), b.z.to_bits()]);
    }
    assert_eq!(back.len(), 3);
}

#[test]
fn ascii_round_trip_keeps_nine_digits() {
    let cloud = three_points();
    let mut buf = Vec::new();
    write_ply_to(&cloud, PlyFormat::Ascii, &mut buf).unwrap();
    let back = read_ply_from(&mut Cursor::new(buf)).unwrap();
    for (a, b) in cloud.points().iter().zip(back.points()) {
        for (x, y) in [(a.x, b.x), (a.y, b.y), (a.z, b.z)] {
            assert!((x - y).abs() <= 5e-9 * x.abs(), "{x} vs {y}");
        }
    }
}

#[test]
fn truncated_body_is_reported() {
    let mut ply = String::from("ply\nformat ascii 1.0\nelement vertex 10\nproperty float x\nproperty float y\nproperty float z\nend_header\n");
    for i in 0..9 {
        ply.push_str(&format!("{i} 0 0\n"));
    }
    let err = read_ply_from(&mut Cursor::new(ply)).unwrap_err();
    assert!(matches!(err, PlyError::Truncated { expected: 10, found: 9 }), "{err}");

    let mut cloud = Vec::new();
    write_ply_to(&three_points(), PlyFormat::BinaryLittleEndian, &mut cloud).unwrap();
    cloud.truncate(cloud.len() - 4);
    let err = read_ply_from(&mut Cursor::new(cloud)).unwrap_err();
    assert!(matches!(err, PlyError::Truncated { expected: 3, found: 2 }), "{err}");
}

#[test]
fn normals_round_trip() {
    let normals = vec![Some(Vec3::new(0.0, 0.0, 1.0)), None, Some(Vec3::new(0.6, 0.8, 0.0))];
    let cloud = three_points().with_normals(normals.clone()).unwrap();
    for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
        let mut buf = Vec::new();
        write_ply_to(&cloud, format, &mut buf).unwrap();
        let back = read_ply_from(&mut Cursor::new(buf)).unwrap();
        assert_eq!(back.normals().unwrap(), normals.as_slice());
    }
}

#[test]
fn header_problems_have_distinct_errors() {
    let malformed = read_ply_from(&mut Cursor::new("ply\nformat ascii 1.0\nelement vertex two\nend_header\n"));
    assert!(matches!(malformed, Err(PlyError::MalformedHeader { line: 3, .. })));
    let unsupported = read_ply_from(&mut Cursor::new(
        "ply\nformat ascii 1.0\nelement vertex 1\nproperty int128 x\nend_header\n",
    ));
    assert!(matches!(unsupported, Err(PlyError::Unsupported { .. })));
}

const GNSS_HEADER: &str = "time,e,n,u,cov_ee,cov_nn,cov_uu,cov_en,cov_eu,cov_nu,status\n";

#[test]
fn minimal_gnss_file() {
    let text = format!("{GNSS_HEADER}0.0,1,2,3,0.01,0.01,0.04,0,0,0,rtk_fixed\n1.0,2,2,3,0.01,0.02,0.04,0.001,0,0,rtk_float\n");
    let out = read_gnss_from(text.as_bytes()).unwrap();
    assert_eq!(out.warnings, 0);
    assert_eq!(out.rows.len(), 2);
    assert_eq!(out.rows[1].position, Vec3::new(2.0, 2.0, 3.0));
    assert_eq!(out.rows[1].covariance, SymMat3::new(0.01, 0.02, 0.04, 0.001, 0.0, 0.0));
    assert_eq!(out.rows[1].status, GnssStatus::RtkFloat);
}

#[test]
fn non_spd_row_is_dropped_and_counted() {
    // cov_en larger than both variances makes the matrix indefinite
    let text = format!(
        "{GNSS_HEADER}0,0,0,0,0.01,0.01,0.04,0,0,0,rtk_fixed\n1,1,0,0,0.01,0.01,0.04,0.5,0,0,rtk_fixed\n2,2,0,0,0.01,0.01,0.04,0,0,0,rtk_fixed\n"
    );
    let out = read_gnss_from(text.as_bytes()).unwrap();
    assert_eq!(out.warnings, 1);
    assert_eq!(out.rows.iter().map(|f| f.time).collect::<Vec<_>>(), [0.0, 2.0]);
}

#[test]
fn shuffled_timestamps_are_an_error() {
    let text = format!("{GNSS_HEADER}1,0,0,0,1,1,1,0,0,0,rtk_fixed\n0,0,0,0,1,1,1,0,0,0,rtk_fixed\n");
    assert!(matches!(
        read_gnss_from(text.as_bytes()),
        Err(SensorCsvError::NonMonotoneTime { row: 2, .. })
    ));
    let imu = "time,qw,qx,qy,qz,mag_heading\n0.5,1,0,0,0,0\n0.5,1,0,0,0,0\n";
    assert!(matches!(read_imu_from(imu.as_bytes(), 1e-4), Err(SensorCsvError::NonMonotoneTime { .. })));
}

#[test]
fn missing_column_is_an_error() {
    let text = "time,e,n,u,cov_ee,cov_nn,cov_uu,cov_en,cov_eu,status\n";
    assert!(matches!(read_gnss_from(text.as_bytes()), Err(SensorCsvError::MissingColumn("cov_nu"))));
}

#[test]
fn sensor_files_round_trip() {
    let fixes = vec![
        GnssFix {
            time: 0.25,
            position: Vec3::new(10.0, -3.5, 0.125),
            covariance: SymMat3::new(0.01, 0.02, 0.09, 0.001, -0.002, 0.0),
            status: GnssStatus::Standalone,
        },
        GnssFix {
            time: 0.75,
            position: Vec3::new(11.0, -3.0, 0.25),
            covariance: SymMat3::diag(0.01, 0.01, 0.04),
            status: GnssStatus::RtkFixed,
        },
    ];
    let attitudes = vec![
        ImuAttitude::from_euler(0.25, 0.01, -0.02, 1.0, 1e-4),
        ImuAttitude::from_euler(0.75, 0.0, 0.03, -3.0, 1e-4),
    ];
    let dir = tempfile::tempdir().unwrap();
    let (g, i) = (dir.path().join("gnss.csv"), dir.path().join("imu.csv"));
    write_gnss_csv(&fixes, &g).unwrap();
    write_imu_csv(&attitudes, &i).unwrap();
    let streams = read_sensor_csv(&g, &i, 1e-4).unwrap();
    assert_eq!(streams.fixes, fixes);
    assert_eq!(streams.warnings, 0);
    for (a, b) in attitudes.iter().zip(&streams.attitudes) {
        assert_eq!(a.time, b.time);
        assert!(a.attitude.max_abs_diff(&b.attitude) < 1e-12);
        assert!((a.raw_magnetic_heading - b.raw_magnetic_heading).abs() < 1e-12);
    }
}

#[test]
fn config_errors_carry_line_numbers() {
    let base = std::path::Path::new(".");
    let err = RunConfig::parse("scenario = straight\n# note\nepsilon = -1\n", base).unwrap_err();
    assert!(matches!(err, ConfigError::InvalidValue { line: 3, .. }), "{err}");
    let err = RunConfig::parse("scenario = loop\nno equals sign\n", base).unwrap_err();
    assert!(matches!(err, ConfigError::Syntax { line: 2, .. }), "{err}");
    let err = RunConfig::parse("scenario = loop\nwidth = 3\n", base).unwrap_err();
    assert!(matches!(err, ConfigError::UnknownKey { line: 2, .. }), "{err}");
    let err = RunConfig::parse("gnss = nowhere.csv\n", base).unwrap_err();
    assert!(matches!(err, ConfigError::MissingFile { line: 1, .. }), "{err}");
    let err = RunConfig::parse("scenario = loop\nseed = 1\nseed = 2\n", base).unwrap_err();
    assert!(matches!(err, ConfigError::DuplicateKey { line: 3, first: 2, .. }), "{err}");
}

#[test]
fn config_reads_scenario_and_mapper_keys() {
    let text = "scenario = loop  # closed\nlength = 60\nseed = 4\nmode = baseline\nr_max = none\nepsilon = 0.1\n";
    let cfg = RunConfig::parse(text, std::path::Path::new(".")).unwrap();
    assert_eq!(cfg.mode, Mode::Baseline);
    assert_eq!(cfg.mapper.r_max, None);
    assert_eq!(cfg.mapper.epsilon, 0.1);
    let InputSource::Synthetic(sc) = &cfg.input else {
        panic!("expected a synthetic input");
    };
    assert_eq!(sc.trajectory.length, 60.0);
    assert_eq!(sc.seed, 4);
}

#[test]
fn long_run_preset_is_a_base_for_mapper_keys() {
    let base = std::path::Path::new(".");
    let cfg = RunConfig::parse("scenario = loop\nr_max = 50\npreset = long_run\n", base).unwrap();
    assert_eq!(cfg.mapper.epsilon, 0.1);
    assert_eq!(cfg.mapper.r_max, Some(50.0));
    let err = RunConfig::parse("scenario = loop\npreset = huge\n", base).unwrap_err();
    assert!(matches!(err, ConfigError::InvalidValue { line: 2, .. }), "{err}");
}
