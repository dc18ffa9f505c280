//! Point-to-plane ICP with Gaussian penalty terms.
//!
//! The minimized objective is
//!
//! ```text
//! J = (s/M) Σₘ wₘ (eₘᵀ nₘ)²  +  (1/K) Σₖ eₖᵀ Wₖ⁻¹ eₖ
//! ```
//!
//! where the first sum runs over the M matched scan points with a non-zero
//! outlier weight and the second over the K penalties. Every penalty is
//! expanded into three plane constraints by [`decompose_gaussian`], so both
//! sums feed the same point-to-plane solver.

use alloc::vec::Vec;

use super::{
    decompose_gaussian, match_points, solve_constraints, weight_outliers, Match, NeighborIndex,
    OutlierFilter, PlaneConstraint, PointCloud, RegistrationError,
};
use crate::geometry::{compose, RigidTransform, SymMat3, Vec3};

/// Default lidar noise used to derive the point-term scale `s = 1/σ²`.
pub const DEFAULT_SENSOR_SIGMA: f64 = 0.03;

/// A correspondence with known association: `map_point` in the map frame,
/// `scan_point` in the scan frame, `covariance` in the map frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalty {
    pub map_point: Vec3,
    pub scan_point: Vec3,
    pub covariance: SymMat3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Meters.
    pub translation_epsilon: f64,
    /// Radians.
    pub rotation_epsilon: f64,
    pub outlier_filter: OutlierFilter,
    /// Scale `s` converting projected point distances to Mahalanobis units.
    pub scale_s: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            max_iterations: 40,
            translation_epsilon: 1e-4,
            rotation_epsilon: 1e-5,
            outlier_filter: OutlierFilter::default(),
            scale_s: 1.0 / (DEFAULT_SENSOR_SIGMA * DEFAULT_SENSOR_SIGMA),
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        if !self.outlier_filter.is_valid() {
            return Err(RegistrationError::InvalidConfig("outlier filter parameter out of range"));
        }
        if !(self.scale_s >= 0.0) || !self.scale_s.is_finite() {
            return Err(RegistrationError::InvalidConfig("scale_s must be finite and non-negative"));
        }
        if !(self.translation_epsilon >= 0.0) || !(self.rotation_epsilon >= 0.0) {
            return Err(RegistrationError::InvalidConfig("convergence thresholds must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IcpDiagnostics {
    /// Number of solver steps taken.
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the returned transform.
    pub residual: f64,
    /// Matches with non-zero outlier weight at the returned transform.
    pub match_count: usize,
    /// Objective before each solver step, then at the returned transform.
    pub objective_history: Vec<f64>,
}

/// Point-term constraints: `(s/M) w (eᵀn)²` per surviving match.
pub fn point_constraints(
    scan: &PointCloud,
    map: &PointCloud,
    t: &RigidTransform,
    matches: &[Match],
    weights: &[f64],
    scale_s: f64,
) -> Vec<PlaneConstraint> {
    let m = weights.iter().filter(|&&w| w > 0.0).count();
    if m == 0 {
        return Vec::new();
    }
    let factor = scale_s / m as f64;
    matches
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(mt, &w)| PlaneConstraint {
            normal: map
                .normal(mt.map_index)
                .expect("matches only reference points with normals"),
            weight: factor * w,
            map_point: map.points()[mt.map_index],
            scan_point: t.apply(scan.points()[mt.scan_index]),
        })
        .collect()
}

/// Penalty-term constraints: three per penalty, weighted `1/(K λᵢ)`.
pub fn penalty_constraints(
    penalties: &[Penalty],
    t: &RigidTransform,
) -> Result<Vec<PlaneConstraint>, RegistrationError> {
    let mut out = Vec::with_capacity(3 * penalties.len());
    if penalties.is_empty() {
        return Ok(out);
    }
    let inv_k = 1.0 / penalties.len() as f64;
    for p in penalties {
        for mut c in decompose_gaussian(p.map_point, t.apply(p.scan_point), &p.covariance)? {
            c.weight *= inv_k;
            out.push(c);
        }
    }
    Ok(out)
}

/// Full constraint set of the objective at transform `t`.
pub fn build_constraints(
    scan: &PointCloud,
    map: &PointCloud,
    t: &RigidTransform,
    matches: &[Match],
    weights: &[f64],
    penalties: &[Penalty],
    config: &IcpConfig,
) -> Result<Vec<PlaneConstraint>, RegistrationError> {
    let mut cs = point_constraints(scan, map, t, matches, weights, config.scale_s);
    cs.extend(penalty_constraints(penalties, t)?);
    Ok(cs)
}

struct Evaluation {
    constraints: Vec<PlaneConstraint>,
    value: f64,
    match_count: usize,
}

fn evaluate(
    scan: &PointCloud,
    map: &PointCloud,
    index: &NeighborIndex,
    t: &RigidTransform,
    penalties: &[Penalty],
    config: &IcpConfig,
) -> Result<Evaluation, RegistrationError> {
    let matches = match_points(scan, index, t);
    let weights = weight_outliers(&matches, &config.outlier_filter);
    let match_count = weights.iter().filter(|&&w| w > 0.0).count();
    if match_count == 0 {
        return Err(RegistrationError::EmptyOverlap);
    }
    let constraints = build_constraints(scan, map, t, &matches, &weights, penalties, config)?;
    let value = constraints.iter().map(PlaneConstraint::cost).sum();
    Ok(Evaluation {
        constraints,
        value,
        match_count,
    })
}

fn check_inputs(scan: &PointCloud, map: &PointCloud, config: &IcpConfig) -> Result<NeighborIndex, RegistrationError> {
    config.validate()?;
    if scan.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    NeighborIndex::build_with_normals(map).map_err(|e| match e {
        RegistrationError::EmptyCloud => RegistrationError::EmptyOverlap,
        other => other,
    })
}

/// Value of the objective at `t`, after matching at `t`.
pub fn objective(
    scan: &PointCloud,
    map: &PointCloud,
    t: &RigidTransform,
    penalties: &[Penalty],
    config: &IcpConfig,
) -> Result<f64, RegistrationError> {
    let index = check_inputs(scan, map, config)?;
    Ok(evaluate(scan, map, &index, t, penalties, config)?.value)
}

/// Registers `scan` against `map` (which must carry normals) starting from
/// `prior`. Returns the scan-to-map transform.
pub fn icp(
    scan: &PointCloud,
    map: &PointCloud,
    prior: &RigidTransform,
    penalties: &[Penalty],
    config: &IcpConfig,
) -> Result<(RigidTransform, IcpDiagnostics), RegistrationError> {
    let index = check_inputs(scan, map, config)?;
    icp_with_index(scan, map, &index, prior, penalties, config)
}

/// [`icp`] with a prebuilt index over `map`'s points with normals.
pub fn icp_with_index(
    scan: &PointCloud,
    map: &PointCloud,
    index: &NeighborIndex,
    prior: &RigidTransform,
    penalties: &[Penalty],
    config: &IcpConfig,
) -> Result<(RigidTransform, IcpDiagnostics), RegistrationError> {
    config.validate()?;
    let mut t = *prior;
    let mut diag = IcpDiagnostics::default();
    for _ in 0..config.max_iterations {
        let eval = evaluate(scan, map, index, &t, penalties, config)?;
        diag.objective_history.push(eval.value);
        let delta = solve_constraints(&eval.constraints)?;
        t = compose(&delta, &t);
        diag.iterations += 1;
        if delta.translation().norm() < config.translation_epsilon
            && delta.rotation_angle() < config.rotation_epsilon
        {
            diag.converged = true;
            break;
        }
    }
    let last = evaluate(scan, map, index, &t, penalties, config)?;
    diag.residual = last.value;
    diag.match_count = last.match_count;
    diag.objective_history.push(last.value);
    Ok((t, diag))
}
