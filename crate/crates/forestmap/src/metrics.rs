//! Per-scan metrics, run-level accuracy metrics and their files.

use std::io::{self, Write};

use forestmap_core::mapper::ScanDiagnostics;
use forestmap_core::registration::kdtree::KdTree;
use forestmap_core::synth::World;
use forestmap_core::{RigidTransform, Vec3};

pub const METRICS_COLUMNS: [&str; 8] = [
    "scan_id",
    "time_s",
    "cutmap_points",
    "map_points",
    "registration_ms",
    "insertion_ms",
    "icp_iterations",
    "residual",
];
pub const RUN_COLUMNS: [&str; 2] = ["loop_closure_error_m", "crispness_m"];

/// Timestamps closer than this are the same sample.
const TIME_MATCH: f64 = 1e-6;

/// Run-level metrics; present when ground truth exists.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub loop_closure_error_m: Option<f64>,
    pub crispness_m: Option<f64>,
}

fn pose_at(poses: &[(f64, RigidTransform)], t: f64) -> Option<RigidTransform> {
    let k = poses.partition_point(|(s, _)| *s < t - TIME_MATCH);
    poses.get(k).filter(|(s, _)| (s - t).abs() <= TIME_MATCH).map(|(_, p)| *p)
}

/// Translation error of the first-to-last relative pose against ground
/// truth, `|(G0^-1 Gn)^-1 (E0^-1 En)|`. Truth poses are matched by time.
pub fn loop_closure_error(estimate: &[(f64, RigidTransform)], truth: &[(f64, RigidTransform)]) -> Option<f64> {
    let (&(t0, e0), &(tn, en)) = (estimate.first()?, estimate.last()?);
    let (g0, gn) = (pose_at(truth, t0)?, pose_at(truth, tn)?);
    let estimated = e0.inverse() * en;
    let actual = g0.inverse() * gn;
    Some((actual.inverse() * estimated).translation().norm())
}

/// Mean distance from `points` to the nearest true surface.
pub fn crispness(points: &[Vec3], world: &World) -> Option<f64> {
    if points.is_empty() {
        return None;
    }
    let sum: f64 = points.iter().map(|p| world.distance_to_surface(*p)).sum();
    Some(sum / points.len() as f64)
}

/// Mean distance from each point to its nearest other point; a crispness
/// proxy when there is no ground truth.
pub fn nearest_neighbor_spacing(points: &[Vec3]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let tree = KdTree::new(points.to_vec());
    let sum: f64 = points
        .iter()
        .map(|p| tree.knn(*p, 2).get(1).map_or(0.0, |n| n.distance_squared.sqrt()))
        .sum();
    Some(sum / points.len() as f64)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Metrics CSV; `run` adds the run-level columns to every row.
pub fn write_metrics_to(stats: &[ScanDiagnostics], run: Option<&RunMetrics>, w: &mut dyn Write) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = METRICS_COLUMNS.to_vec();
    if run.is_some() {
        header.extend(RUN_COLUMNS);
    }
    out.write_record(&header)?;
    for d in stats {
        let mut row = vec![
            d.scan_id.to_string(),
            d.time.to_string(),
            d.cutmap_points.to_string(),
            d.map_points.to_string(),
            d.registration_ms.to_string(),
            d.insertion_ms.to_string(),
            d.icp_iterations.to_string(),
            d.residual.to_string(),
        ];
        if let Some(r) = run {
            row.push(opt(r.loop_closure_error_m));
            row.push(opt(r.crispness_m));
        }
        out.write_record(&row)?;
    }
    out.flush()
}

/// Whitespace-separated series of reference size and timing per scan.
pub fn write_plot_data_to(stats: &[ScanDiagnostics], w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "# scan_id cutmap_points map_points registration_ms insertion_ms")?;
    for d in stats {
        writeln!(
            w,
            "{} {} {} {} {}",
            d.scan_id, d.cutmap_points, d.map_points, d.registration_ms, d.insertion_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_error_ignores_common_frame() {
        let truth = vec![
            (0.0, RigidTransform::IDENTITY),
            (1.0, RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0))),
        ];
        // same relative motion seen from a rotated and shifted frame
        let frame = RigidTransform::from_rotation_vector(Vec3::new(0.0, 0.0, 1.0), Vec3::new(5.0, 5.0, 0.0));
        let est: Vec<_> = truth.iter().map(|(t, p)| (*t, frame * *p)).collect();
        assert!(loop_closure_error(&est, &truth).unwrap() < 1e-12);
        let drifted = vec![est[0], (1.0, est[1].1 * RigidTransform::from_translation(Vec3::new(0.0, 0.3, 0.4)))];
        assert!((loop_closure_error(&drifted, &truth).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(loop_closure_error(&est, &truth[..1]), None);
    }

    #[test]
    fn spacing_of_a_line() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64 * 0.5, 0.0, 0.0)).collect();
        assert!((nearest_neighbor_spacing(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(nearest_neighbor_spacing(&pts[..1]), None);
    }

    #[test]
    fn empty_run_is_header_only() {
        let mut buf = Vec::new();
        write_metrics_to(&[], None, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", METRICS_COLUMNS.join(",")));
    }
}
