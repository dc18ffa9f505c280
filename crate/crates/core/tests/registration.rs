use forestmap_core::penalties::{make_three_point_penalties, GnssFix, GnssStatus, ImuAttitude};
use forestmap_core::registration::{
    estimate_normals, icp, objective, IcpConfig, NormalOrientation, OutlierFilter, Penalty, PointCloud, RegistrationError,
};
use forestmap_core::synth::{gen_scan, gen_world_with, Extent, LidarModel, TreeShape, World};
use forestmap_core::{Mat3, RigidTransform, SymMat3, Vec3};

fn forest() -> World {
    gen_world_with(3, Extent::new(-30.0, -30.0, 30.0, 30.0), 0.05, &TreeShape::default())
        .unwrap()
        .clear_path(&[Vec3::ZERO], 1.5)
}

fn lidar() -> LidarModel {
    LidarModel {
        max_range: 25.0,
        azimuth_steps: 720,
        range_noise_sigma: 0.0,
        ..LidarModel::default()
    }
}

fn scan_at(world: &World, pose: &RigidTransform) -> PointCloud {
    gen_scan(world, pose, &lidar(), 1).unwrap()
}

fn map_from(world: &World, pose: &RigidTransform) -> PointCloud {
    let scan = scan_at(world, pose);
    estimate_normals(&scan.transformed(pose), 15, NormalOrientation::Viewpoint(pose.translation())).unwrap()
}

#[test]
fn recovers_a_known_motion() {
    let world = forest();
    let first = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 1.5));
    let second = RigidTransform::from_rotation_vector(Vec3::new(0.0, 0.01, 0.05), Vec3::new(0.5, 0.1, 1.5));
    let map = map_from(&world, &first);
    let scan = scan_at(&world, &second);
    let prior = RigidTransform::from_translation(Vec3::new(0.08, -0.05, 0.0)) * first;
    let (t, diag) = icp(&scan, &map, &prior, &[], &IcpConfig::default()).unwrap();
    // the two scans sample different surface points, and tangent planes between
    // sparse samples leave a bias of about a centimeter
    assert!(t.translation().distance(second.translation()) < 2e-2, "{:?}", t.translation());
    assert!((t.inverse() * second).rotation_angle() < 2e-3);
    assert!(diag.converged);
    assert!(diag.residual <= diag.objective_history[0]);
}

/// The objective recomputed from brute-force nearest neighbours among map
/// points that carry a normal.
fn objective_oracle(scan: &PointCloud, map: &PointCloud, t: &RigidTransform, penalties: &[Penalty], s: f64) -> f64 {
    let mut point_sum = 0.0;
    for p in scan.points() {
        let q = t.apply(*p);
        let (i, _) = map
            .points()
            .iter()
            .enumerate()
            .filter(|(i, _)| map.normal(*i).is_some())
            .map(|(i, m)| (i, m.distance_squared(q)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let e = map.points()[i] - q;
        point_sum += e.dot(map.normal(i).unwrap()).powi(2);
    }
    let mut penalty_sum = 0.0;
    for pen in penalties {
        let e = pen.map_point - t.apply(pen.scan_point);
        let inv = pen.covariance.inverse().unwrap();
        penalty_sum += e.dot(inv.mul_vec(e));
    }
    let k = penalties.len().max(1) as f64;
    s * point_sum / scan.len() as f64 + penalty_sum / k
}

#[test]
fn objective_matches_its_definition() {
    let world = forest();
    let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 1.5));
    let map = map_from(&world, &pose);
    let scan = scan_at(&world, &RigidTransform::from_translation(Vec3::new(0.3, 0.0, 1.5)));
    let penalties = [Penalty {
        map_point: Vec3::new(0.3, 0.0, 1.5),
        scan_point: Vec3::ZERO,
        covariance: SymMat3::new(0.04, 0.01, 0.09, 0.005, 0.0, -0.01),
    }];
    let config = IcpConfig {
        outlier_filter: OutlierFilter::None,
        ..IcpConfig::default()
    };
    let t = RigidTransform::from_rotation_vector(Vec3::new(0.0, 0.0, 0.02), Vec3::new(0.25, 0.05, 1.45));
    let got = objective(&scan, &map, &t, &penalties, &config).unwrap();
    let expected = objective_oracle(&scan, &map, &t, &penalties, config.scale_s);
    assert!((got - expected).abs() <= 1e-9 * expected, "{got} vs {expected}");
}

/// Points on the plane `z = 0` with upward normals.
fn floor(n: usize, spacing: f64) -> PointCloud {
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            pts.push(Vec3::new(i as f64 * spacing - 5.0, j as f64 * spacing - 5.0, 0.0));
        }
    }
    let normals = vec![Some(Vec3::Z); pts.len()];
    PointCloud::new(pts).with_normals(normals).unwrap()
}

#[test]
fn penalties_fill_the_unconstrained_directions() {
    let map = floor(21, 0.5);
    let scan = PointCloud::new(map.points().iter().map(|p| *p + Vec3::new(0.0, 0.0, -1.5)).collect());
    let start = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 1.5));
    let config = IcpConfig::default();
    assert!(matches!(
        icp(&scan, &map, &start, &[], &config),
        Err(RegistrationError::RankDeficient { .. })
    ));

    // sensors say the scan origin is at (0.4, -0.2, 1.5) with heading 0.1 rad
    let truth = RigidTransform::from_rotation_vector(Vec3::new(0.0, 0.0, 0.1), Vec3::new(0.4, -0.2, 1.5));
    let fix = GnssFix {
        time: 0.0,
        position: truth.translation(),
        covariance: SymMat3::isotropic(0.01),
        status: GnssStatus::RtkFixed,
    };
    let att = ImuAttitude {
        time: 0.0,
        attitude: Mat3::rot_z(0.1),
        roll_pitch_cov: 1e-6,
        raw_magnetic_heading: 0.1,
    };
    let set = make_three_point_penalties(&fix, &att, 0.1, 10.0, 1.0, Vec3::ZERO).unwrap();
    let (t, _) = icp(&scan, &map, &start, &set.penalties, &config).unwrap();
    assert!(t.translation().distance(truth.translation()) < 1e-6);
    assert!((t.inverse() * truth).rotation_angle() < 1e-6);
}

