use approx::assert_relative_eq;
use forestmap_core::mapper::{cut_map, insert_scan};
use forestmap_core::registration::kdtree::KdTree;
use forestmap_core::registration::{decompose_gaussian, PointCloud};
use forestmap_core::synth::{gen_world, Extent};
use forestmap_core::{wrap_angle, Mat3, RigidTransform, SymMat3, Vec3};
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (vec3(3.0), vec3(50.0)).prop_map(|(w, t)| RigidTransform::from_rotation_vector(w, t))
}

fn cloud(n: usize, range: f64) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(vec3(range), 1..n)
}

proptest! {
    #[test]
    fn inverse_undoes_composition(a in transform(), b in transform(), p in vec3(100.0)) {
        let ab = a * b;
        let back = (b.inverse() * a.inverse()).apply(ab.apply(p));
        prop_assert!(back.distance(p) < 1e-9);
        prop_assert!(ab.apply(p).distance(a.apply(b.apply(p))) < 1e-9);
    }

    #[test]
    fn quaternion_round_trip(t in transform()) {
        let q = t.quaternion();
        let back = RigidTransform::from_quaternion(q, t.translation()).unwrap();
        prop_assert!(back.rotation().max_abs_diff(t.rotation()) < 1e-12);
    }

    #[test]
    fn wrapped_angles_stay_in_range(a in -1e4f64..1e4) {
        let w = wrap_angle(a);
        prop_assert!(w > -std::f64::consts::PI - 1e-12 && w <= std::f64::consts::PI);
        prop_assert!((w - a).rem_euclid(std::f64::consts::TAU).min(
            std::f64::consts::TAU - (w - a).rem_euclid(std::f64::consts::TAU)) < 1e-9);
    }

    #[test]
    fn gaussian_decomposition_is_mahalanobis(
        w in vec3(3.0),
        logs in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
        e in vec3(5.0),
    ) {
        let r = Mat3::exp(w);
        let l = Vec3::new(10f64.powf(logs.0), 10f64.powf(logs.1), 10f64.powf(logs.2));
        let cov = SymMat3::from_mat3(&(r * Mat3::diag(l) * r.transpose()));
        let f = r.transpose() * e;
        let expected = f.x * f.x / l.x + f.y * f.y / l.y + f.z * f.z / l.z;
        let sum: f64 = decompose_gaussian(e, Vec3::ZERO, &cov).unwrap().iter().map(|c| c.cost()).sum();
        assert_relative_eq!(sum, expected, max_relative = 1e-9, epsilon = 1e-300);
    }

    #[test]
    fn nearest_neighbor_matches_brute_force(points in cloud(200, 10.0), queries in cloud(20, 12.0)) {
        let tree = KdTree::new(points.clone());
        for q in queries {
            let best = points.iter().map(|p| p.distance_squared(q)).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(tree.nearest(q).unwrap().distance_squared, best);
        }
    }

    #[test]
    fn cut_map_is_the_closed_ball(points in cloud(300, 20.0), center in vec3(10.0), r in 0.1f64..15.0) {
        let map = PointCloud::new(points.clone());
        let cut = cut_map(&map, center, r);
        let expected: Vec<Vec3> = points.into_iter().filter(|p| p.distance(center) <= r).collect();
        prop_assert_eq!(cut.points(), expected.as_slice());
    }

    #[test]
    fn insertion_respects_spacing(
        map_points in cloud(80, 1.0),
        scan_points in cloud(80, 1.0),
        t in transform(),
        eps in 0.01f64..0.3,
    ) {
        // spread the map so that normal estimation has enough neighbours
        let map = insert_scan(&PointCloud::default(), &PointCloud::new(map_points), &RigidTransform::IDENTITY, eps);
        let scan = PointCloud::new(scan_points).transformed(&t.inverse());
        let after = insert_scan(&map, &scan, &t, eps);
        prop_assert_eq!(&after.points()[..map.len()], map.points());
        let fresh = &after.points()[map.len()..];
        for (i, q) in fresh.iter().enumerate() {
            prop_assert!(map.points().iter().all(|p| p.distance(*q) > eps));
            prop_assert!(fresh[..i].iter().all(|p| p.distance(*q) > eps));
        }
        // every rejected point is explained by a point within eps
        for p in scan.points() {
            let q = t.apply(*p);
            prop_assert!(after.points().iter().any(|m| m.distance(q) <= eps + 1e-12));
        }
    }
}

#[test]
fn tree_counts_follow_poisson() {
    let extent = Extent::square(100.0);
    let density = 0.02;
    let mean = density * extent.area();
    let seeds = 300;
    let counts: Vec<f64> = (0..seeds)
        .map(|s| gen_world(s, extent, density).unwrap().trees().len() as f64)
        .collect();
    let within = counts.iter().filter(|c| (*c - mean).abs() <= 3.0 * mean.sqrt()).count();
    // 3 sigma covers 99.7%; allow a few stragglers
    assert!(within >= seeds as usize - 4, "{within}/{seeds}");
    let avg = counts.iter().sum::<f64>() / seeds as f64;
    assert!((avg - mean).abs() <= 3.0 * (mean / seeds as f64).sqrt(), "{avg} vs {mean}");
}
