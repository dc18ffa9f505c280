//! Incremental mapping: predict the scan pose from GNSS and IMU increments,
//! register it against the nearby part of the map, then insert the points
//! that are farther than ε from everything already mapped.
//!
//! The map frame is ENU translated to the first GNSS fix. The first scan is
//! placed at the origin with the IMU attitude, its heading corrected by the
//! calibrated magnetometer offset.

mod grid;

use alloc::vec::Vec;
use core::fmt;

use grid::{ColumnGrid, RadiusHash};

use crate::geometry::{RigidTransform, Vec3};
use crate::penalties::{
    make_gnss_penalty, make_three_point_penalties, GnssFix, HeadingFilter, ImuAttitude, PenaltyError,
    DEFAULT_COURSE_BASELINE, DEFAULT_SPEED_THRESHOLD,
};
use crate::registration::kdtree::KdTree;
use crate::registration::{icp, normals_for, IcpConfig, NormalOrientation, PointCloud, RegistrationError, DEFAULT_NORMAL_K};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PenaltyMode {
    None,
    GnssOnly,
    ThreePoint,
}

impl PenaltyMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(PenaltyMode::None),
            "gnss_only" => Some(PenaltyMode::GnssOnly),
            "three_point" => Some(PenaltyMode::ThreePoint),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PenaltyMode::None => "none",
            PenaltyMode::GnssOnly => "gnss_only",
            PenaltyMode::ThreePoint => "three_point",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapperConfig {
    /// Minimum distance between a new point and the map, meters.
    pub epsilon: f64,
    /// Cut-map radius, meters; `None` registers against the whole map.
    pub r_max: Option<f64>,
    pub icp: IcpConfig,
    pub penalty_mode: PenaltyMode,
    /// When false, scans are inserted at the sensor prior without ICP.
    pub register: bool,
    /// Neighbors used for the normals of new points.
    pub normal_k: usize,
    /// Distance of the auxiliary penalty points from the GNSS point, meters.
    pub arm_length: f64,
    /// Auxiliary penalty covariance as a multiple of the GNSS covariance.
    pub aux_cov_scale: f64,
    /// Above this speed (m/s) GNSS course refines the magnetometer offset.
    pub course_speed_threshold: f64,
    /// Chord length used to measure the GNSS course, meters.
    pub course_baseline: f64,
}

/// Operating density and cut-map radius of the field runs.
pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_R_MAX: f64 = 100.0;
/// Coarser density for long runs, where map memory dominates.
pub const LONG_RUN_EPSILON: f64 = 0.10;

/// Default `arm_length`; long arms let the auxiliary points outweigh the
/// point-to-plane terms in roll, pitch and heading.
pub const DEFAULT_ARM_LENGTH: f64 = 10.0;

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            epsilon: DEFAULT_EPSILON,
            r_max: Some(DEFAULT_R_MAX),
            icp: IcpConfig::default(),
            penalty_mode: PenaltyMode::ThreePoint,
            register: true,
            normal_k: DEFAULT_NORMAL_K,
            arm_length: DEFAULT_ARM_LENGTH,
            aux_cov_scale: 1.0,
            course_speed_threshold: DEFAULT_SPEED_THRESHOLD,
            course_baseline: DEFAULT_COURSE_BASELINE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MapperError {
    #[error("invalid mapper configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
}

impl MapperConfig {
    /// Defaults with the long-run density.
    pub fn long_run() -> Self {
        MapperConfig {
            epsilon: LONG_RUN_EPSILON,
            ..MapperConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), MapperError> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(MapperError::InvalidConfig("epsilon must be positive"));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0) {
                return Err(MapperError::InvalidConfig("r_max must be positive"));
            }
        }
        if self.normal_k < 3 {
            return Err(MapperError::InvalidConfig("normal_k must be at least 3"));
        }
        if !(self.arm_length > 0.0) || !(self.aux_cov_scale > 0.0) {
            return Err(MapperError::InvalidConfig("arm_length and aux_cov_scale must be positive"));
        }
        if !(self.course_speed_threshold >= 0.0) || !(self.course_baseline > 0.0) {
            return Err(MapperError::InvalidConfig("course parameters out of range"));
        }
        self.icp.validate()?;
        Ok(())
    }
}

/// Millisecond time source for the per-scan timings.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// Reports zero for every reading, making diagnostics reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanStatus {
    /// First scan, placed from the sensors alone.
    Bootstrap,
    Registered,
    /// Inserted at the sensor prior (prior mode or nothing to register to).
    PriorOnly,
    /// Not inserted; the prior pose was recorded.
    Skipped,
}

impl ScanStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanStatus::Bootstrap => "bootstrap",
            ScanStatus::Registered => "registered",
            ScanStatus::PriorOnly => "prior_only",
            ScanStatus::Skipped => "skipped",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanDiagnostics {
    pub scan_id: usize,
    pub time: f64,
    pub status: ScanStatus,
    pub prior: RigidTransform,
    pub pose: RigidTransform,
    /// Reference points handed to the registration.
    pub cutmap_points: usize,
    /// Map size before this scan's insertion.
    pub map_points: usize,
    pub inserted_points: usize,
    pub match_count: usize,
    pub icp_iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub registration_ms: f64,
    pub insertion_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapperEventKind {
    EmptyScan,
    MissingGnss,
    MissingAttitude,
    EmptyCutMap,
    PenaltyFailed(PenaltyError),
    RegistrationFailed(RegistrationError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapperEvent {
    pub scan_id: usize,
    pub time: f64,
    pub kind: MapperEventKind,
}

impl fmt::Display for MapperEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapperEventKind::EmptyScan => f.write_str("empty scan, prior pose recorded"),
            MapperEventKind::MissingGnss => f.write_str("no valid GNSS fix, translation held"),
            MapperEventKind::MissingAttitude => f.write_str("no IMU attitude, orientation held"),
            MapperEventKind::EmptyCutMap => f.write_str("no map within range, inserted at prior"),
            MapperEventKind::PenaltyFailed(e) => write!(f, "penalties dropped: {e}"),
            MapperEventKind::RegistrationFailed(e) => write!(f, "registration failed, scan skipped: {e}"),
        }
    }
}

impl fmt::Display for MapperEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scan {} (t = {:.3} s): {}", self.scan_id, self.time, self.kind)
    }
}

/// Prior pose: previous pose moved by the GNSS displacement and rotated by
/// the IMU attitude change. The rotation increment is taken in the body
/// frame, `R = R_prev · (A_prevᵀ A)`, which is insensitive to a constant
/// heading offset of the IMU. Missing samples hold the corresponding part.
pub fn prior_from_sensors(
    prev_pose: &RigidTransform,
    last_fix: Option<&GnssFix>,
    last_attitude: Option<&ImuAttitude>,
    fix: Option<&GnssFix>,
    att: Option<&ImuAttitude>,
) -> RigidTransform {
    let rotation = match (last_attitude, att) {
        (Some(a0), Some(a1)) => (*prev_pose.rotation() * (a0.attitude.transpose() * a1.attitude)).orthonormalized(),
        _ => *prev_pose.rotation(),
    };
    let translation = match (last_fix, fix) {
        (Some(f0), Some(f1)) => prev_pose.translation() + (f1.position - f0.position),
        _ => prev_pose.translation(),
    };
    RigidTransform::new(rotation, translation).unwrap_or(*prev_pose)
}

/// Points of `map` within `r_max` (inclusive) of `center`, in map order,
/// normals preserved.
pub fn cut_map(map: &PointCloud, center: Vec3, r_max: f64) -> PointCloud {
    let r2 = r_max * r_max;
    map.filtered(|_, p| p.distance_squared(center) <= r2)
}

/// Appends the points of `scan` moved by `t` that lie farther than
/// `epsilon` from the map and from the scan points accepted before them.
/// New points get normals from their neighbors in the updated map, facing
/// the sensor origin.
pub fn insert_scan(map: &PointCloud, scan: &PointCloud, t: &RigidTransform, epsilon: f64) -> PointCloud {
    let mut hash = RadiusHash::new(epsilon);
    for &p in map.points() {
        hash.insert(p);
    }
    let fresh = thin(&mut hash, scan, t);
    let mut all = map.points().to_vec();
    all.extend_from_slice(&fresh);
    let normals = new_normals(&all, map.len(), DEFAULT_NORMAL_K, t.translation());
    let mut out = map.clone();
    if !out.has_normals() {
        out = out
            .with_normals(alloc::vec![None; map.len()])
            .expect("lengths match");
    }
    out.extend_with_normals(&fresh, &normals);
    out
}

/// Scan points moved by `t`, in scan order, that have nothing registered in
/// `hash` within its radius; each accepted point is registered at once.
fn thin(hash: &mut RadiusHash, scan: &PointCloud, t: &RigidTransform) -> Vec<Vec3> {
    let mut fresh = Vec::new();
    for &p in scan.points() {
        let q = t.apply(p);
        if q.is_finite() && !hash.any_within(q) {
            hash.insert(q);
            fresh.push(q);
        }
    }
    fresh
}

/// Normals for `points[first_new..]` from k-NN over all of `points`.
fn new_normals(points: &[Vec3], first_new: usize, k: usize, viewpoint: Vec3) -> Vec<Option<Vec3>> {
    if points.len() == first_new {
        return Vec::new();
    }
    let tree = KdTree::new(points.to_vec());
    let targets: Vec<usize> = (first_new..points.len()).collect();
    normals_for(&tree, points, &targets, k, NormalOrientation::Viewpoint(viewpoint))
}

/// Map points further than this beyond the farthest new point are not
/// considered as normal-estimation neighbors.
const NORMAL_SUPPORT_MARGIN: f64 = 2.0;

/// State of the mapping loop.
#[derive(Clone, Debug)]
pub struct MapperState {
    config: MapperConfig,
    map: PointCloud,
    pose: RigidTransform,
    anchor: Option<Vec3>,
    last_fix: Option<GnssFix>,
    last_attitude: Option<ImuAttitude>,
    heading: HeadingFilter,
    heading_offset: f64,
    trajectory: Vec<(f64, RigidTransform)>,
    stats: Vec<ScanDiagnostics>,
    events: Vec<MapperEvent>,
    epsilon_hash: RadiusHash,
    columns: ColumnGrid,
}

impl MapperState {
    /// `heading_offset` is the magnetometer bias (magnetic minus true
    /// heading), e.g. from [`crate::penalties::estimate_heading_offset`].
    pub fn new(config: MapperConfig, heading_offset: f64) -> Result<Self, MapperError> {
        config.validate()?;
        let mut heading = HeadingFilter::new(heading_offset);
        heading.speed_threshold = config.course_speed_threshold;
        heading.baseline = config.course_baseline;
        Ok(MapperState {
            config,
            map: PointCloud::new(Vec::new())
                .with_normals(Vec::new())
                .expect("empty cloud"),
            pose: RigidTransform::IDENTITY,
            anchor: None,
            last_fix: None,
            last_attitude: None,
            heading,
            heading_offset,
            trajectory: Vec::new(),
            stats: Vec::new(),
            events: Vec::new(),
            epsilon_hash: RadiusHash::new(config.epsilon),
            columns: ColumnGrid::new(),
        })
    }

    pub fn config(&self) -> &MapperConfig {
        &self.config
    }

    pub fn map(&self) -> &PointCloud {
        &self.map
    }

    pub fn into_map(self) -> PointCloud {
        self.map
    }

    pub fn pose(&self) -> &RigidTransform {
        &self.pose
    }

    /// ENU position of the map origin, once a fix has been seen.
    pub fn anchor(&self) -> Option<Vec3> {
        self.anchor
    }

    pub fn last_fix(&self) -> Option<&GnssFix> {
        self.last_fix.as_ref()
    }

    pub fn last_attitude(&self) -> Option<&ImuAttitude> {
        self.last_attitude.as_ref()
    }

    pub fn trajectory(&self) -> &[(f64, RigidTransform)] {
        &self.trajectory
    }

    pub fn stats(&self) -> &[ScanDiagnostics] {
        &self.stats
    }

    pub fn events(&self) -> &[MapperEvent] {
        &self.events
    }

    /// Magnetometer offset currently applied to the forward penalty point.
    pub fn heading_offset(&self) -> f64 {
        self.heading.offset()
    }

    /// Points within `r_max` of `center` (the whole map when unbounded).
    pub fn cut_map(&self, center: Vec3) -> PointCloud {
        match self.config.r_max {
            Some(r) => self.map.select(&self.columns.ball(self.map.points(), center, r)),
            None => self.map.clone(),
        }
    }

    /// [`process_scan_timed`](Self::process_scan_timed) with zero timings.
    pub fn process_scan(
        &mut self,
        time: f64,
        scan: &PointCloud,
        fix: Option<&GnssFix>,
        att: Option<&ImuAttitude>,
    ) -> ScanDiagnostics {
        self.process_scan_timed(time, scan, fix, att, &NullClock)
    }

    /// Runs one mapping step. Never fails: problems are recorded as events
    /// and the scan falls back to its prior pose.
    pub fn process_scan_timed<C: Clock>(
        &mut self,
        time: f64,
        scan: &PointCloud,
        fix: Option<&GnssFix>,
        att: Option<&ImuAttitude>,
        clock: &C,
    ) -> ScanDiagnostics {
        let scan_id = self.stats.len();
        let fix = fix.filter(|f| f.is_valid());
        if fix.is_none() {
            self.event(scan_id, time, MapperEventKind::MissingGnss);
        }
        if att.is_none() {
            self.event(scan_id, time, MapperEventKind::MissingAttitude);
        }
        let first = self.trajectory.is_empty();
        let prior = if first {
            let rotation = att.map_or(*self.pose.rotation(), |a| a.corrected(self.heading_offset).orthonormalized());
            RigidTransform::new(rotation, Vec3::ZERO).unwrap_or(RigidTransform::IDENTITY)
        } else {
            prior_from_sensors(&self.pose, self.last_fix.as_ref(), self.last_attitude.as_ref(), fix, att)
        };
        if let (None, Some(f)) = (self.anchor, fix) {
            self.anchor = Some(f.position - prior.translation());
        }
        let local_fix = fix.zip(self.anchor).map(|(f, a)| f.relative_to(a));
        let heading = match (&local_fix, att) {
            (Some(f), Some(a)) => Some(self.heading.update(f, a)),
            _ => None,
        };

        let mut diag = ScanDiagnostics {
            scan_id,
            time,
            status: ScanStatus::PriorOnly,
            prior,
            pose: prior,
            cutmap_points: 0,
            map_points: self.map.len(),
            inserted_points: 0,
            match_count: 0,
            icp_iterations: 0,
            converged: false,
            residual: 0.0,
            registration_ms: 0.0,
            insertion_ms: 0.0,
        };

        let mut insert = true;
        if scan.is_empty() {
            self.event(scan_id, time, MapperEventKind::EmptyScan);
            diag.status = ScanStatus::Skipped;
            insert = false;
        } else if first {
            diag.status = ScanStatus::Bootstrap;
        } else if self.config.register {
            let start = clock.now_ms();
            let reference = self.cut_map(prior.translation());
            diag.cutmap_points = reference.len();
            if reference.valid_normal_count() == 0 {
                self.event(scan_id, time, MapperEventKind::EmptyCutMap);
            } else {
                let penalties = self.penalties(scan_id, time, local_fix.as_ref(), att, heading);
                match icp(scan, &reference, &prior, &penalties, &self.config.icp) {
                    Ok((pose, d)) => {
                        diag.status = ScanStatus::Registered;
                        diag.pose = pose;
                        diag.match_count = d.match_count;
                        diag.icp_iterations = d.iterations;
                        diag.converged = d.converged;
                        diag.residual = d.residual;
                    }
                    Err(e) => {
                        self.event(scan_id, time, MapperEventKind::RegistrationFailed(e));
                        diag.status = ScanStatus::Skipped;
                        insert = false;
                    }
                }
            }
            diag.registration_ms = clock.now_ms() - start;
        } else {
            diag.cutmap_points = match self.config.r_max {
                Some(r) => self.columns.ball(self.map.points(), prior.translation(), r).len(),
                None => self.map.len(),
            };
        }

        if insert {
            let start = clock.now_ms();
            diag.inserted_points = self.insert(scan, &diag.pose);
            diag.insertion_ms = clock.now_ms() - start;
        }

        self.pose = diag.pose;
        if fix.is_some() {
            self.last_fix = fix.copied();
        }
        if att.is_some() {
            self.last_attitude = att.copied();
        }
        self.trajectory.push((time, diag.pose));
        self.stats.push(diag);
        diag
    }

    fn event(&mut self, scan_id: usize, time: f64, kind: MapperEventKind) {
        self.events.push(MapperEvent { scan_id, time, kind });
    }

    fn penalties(
        &mut self,
        scan_id: usize,
        time: f64,
        fix: Option<&GnssFix>,
        att: Option<&ImuAttitude>,
        heading: Option<f64>,
    ) -> Vec<crate::registration::Penalty> {
        let set = match (self.config.penalty_mode, fix, att, heading) {
            (PenaltyMode::None, ..) | (_, None, ..) => return Vec::new(),
            (PenaltyMode::GnssOnly, Some(f), ..) => Ok(make_gnss_penalty(f, Vec3::ZERO)),
            (PenaltyMode::ThreePoint, Some(f), Some(a), Some(h)) => make_three_point_penalties(
                f,
                a,
                h,
                self.config.arm_length,
                self.config.aux_cov_scale,
                Vec3::ZERO,
            ),
            // without an attitude only the position can be constrained
            (PenaltyMode::ThreePoint, Some(f), ..) => Ok(make_gnss_penalty(f, Vec3::ZERO)),
        };
        match set {
            Ok(s) => s.penalties,
            Err(e) => {
                self.event(scan_id, time, MapperEventKind::PenaltyFailed(e));
                Vec::new()
            }
        }
    }

    /// ε-filtered insertion at `pose`; returns the number of new points.
    fn insert(&mut self, scan: &PointCloud, pose: &RigidTransform) -> usize {
        debug_assert_eq!(self.epsilon_hash.len(), self.map.len());
        let fresh = thin(&mut self.epsilon_hash, scan, pose);
        if fresh.is_empty() {
            return 0;
        }
        let origin = pose.translation();
        let reach = fresh.iter().map(|q| q.distance(origin)).fold(0.0, f64::max) + NORMAL_SUPPORT_MARGIN;
        let support = self.columns.ball(self.map.points(), origin, reach);
        let mut local: Vec<Vec3> = support.iter().map(|&i| self.map.points()[i]).collect();
        let first_new = local.len();
        local.extend_from_slice(&fresh);
        let normals = new_normals(&local, first_new, self.config.normal_k, origin);
        let base = self.map.len();
        for (k, &q) in fresh.iter().enumerate() {
            self.columns.insert((base + k) as u32, q);
        }
        self.map.extend_with_normals(&fresh, &normals);
        fresh.len()
    }
}
