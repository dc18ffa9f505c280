//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p forestmap --test acceptance -- 4 7` runs a subset. The
//! process fails when a criterion fails that is not listed in
//! `KNOWN_FAILURES`; those are analysed in the README.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use forestmap::config::{InputSource, Mode, RunConfig};
use forestmap::inputs::{load_inputs, Inputs};
use forestmap::metrics::{crispness, loop_closure_error};
use forestmap::pipeline::{run_mapping_with, run_pipeline, MappingRun, WallClock, METRICS_FILE, TRAJECTORY_FILE};
use forestmap_core::mapper::{Clock, MapperConfig, NullClock, PenaltyMode};
use forestmap_core::penalties::{estimate_heading_offset, interpolate_fix};
use forestmap_core::registration::{decompose_gaussian, estimate_normals, icp, IcpConfig, NormalOrientation};
use forestmap_core::synth::{
    gen_gnss, gen_imu, gen_scan, gen_trajectory, gen_world_with, sub_seed, Extent, LidarModel, Scenario, SensorNoise,
    TrajectoryKind, TreeShape,
};
use forestmap_core::{wrap_angle, Mat3, RigidTransform, SymMat3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail with the current model; see the README.
const KNOWN_FAILURES: &[&str] = &["4b", "5b", "5c"];

const EPSILON: f64 = 0.05;
const R_MAX: f64 = 30.0;

struct Outcome {
    id: &'static str,
    pass: bool,
    line: String,
}

fn outcome(id: &'static str, pass: bool, line: String) -> Outcome {
    Outcome { id, pass, line }
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Mat3 {
    let angle = rng.random_range(0.0..=max_angle);
    Mat3::exp(unit_vector(rng) * angle)
}

fn spd(r: &Mat3, l: Vec3) -> SymMat3 {
    SymMat3::from_mat3(&(*r * Mat3::diag(l) * r.transpose()))
}

/// `eᵀ W⁻¹ e` for `W = R diag(l) Rᵀ`, from the construction.
fn mahalanobis_oracle(e: Vec3, r: &Mat3, l: Vec3) -> f64 {
    let f = r.transpose() * e;
    f.x * f.x / l.x + f.y * f.y / l.y + f.z * f.z / l.z
}

fn decomposed(e: Vec3, w: &SymMat3) -> f64 {
    let planes = decompose_gaussian(e, Vec3::ZERO, w).expect("SPD covariance");
    planes.iter().map(|p| p.cost()).sum()
}

fn decomposition_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let r = random_rotation(&mut rng, std::f64::consts::PI);
        let l = Vec3::new(
            10f64.powf(rng.random_range(-3.0..3.0)),
            10f64.powf(rng.random_range(-3.0..3.0)),
            10f64.powf(rng.random_range(-3.0..3.0)),
        );
        let w = spd(&r, l);
        let e = unit_vector(&mut rng) * rng.random_range(0.01..5.0);
        let expected = mahalanobis_oracle(e, &r, l);
        worst = worst.max((decomposed(e, &w) - expected).abs() / expected);
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-9 && elapsed < Duration::from_secs(1);
    outcome(
        "1",
        pass,
        format!("decomposition identity: max relative error {worst:.2e} over {n} pairs, eigenvalues 1e-3..1e3 ({})", secs(elapsed)),
    )
}

fn point_to_plane_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ratios = [1e-2, 1e-4, 1e-6];
    let trials = 1000;
    let (mut monotone, mut worst_last) = (0, 0.0f64);
    for _ in 0..trials {
        let r = random_rotation(&mut rng, std::f64::consts::PI);
        let n1 = r.col(0);
        let e = unit_vector(&mut rng) * rng.random_range(0.01..5.0);
        let target = e.dot(n1).powi(2);
        let dev: Vec<f64> = ratios
            .iter()
            .map(|&k| {
                let w = spd(&r, Vec3::new(k, 1.0, 1.0));
                // scaling by the smallest eigenvalue keeps the plane term at unit weight
                (k * decomposed(e, &w) - target).abs() / e.dot(e)
            })
            .collect();
        if dev[0] > dev[1] && dev[1] > dev[2] {
            monotone += 1;
        }
        worst_last = worst_last.max(dev[2]);
    }
    let pass = monotone == trials && worst_last < 1e-4;
    outcome(
        "2",
        pass,
        format!(
            "point-to-plane limit: monotone convergence in {monotone}/{trials} trials, deviation at 1e-6 {worst_last:.2e} of |e|^2"
        ),
    )
}

fn heading_calibration() -> Outcome {
    let start = Instant::now();
    let trials = 100;
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    let track = gen_trajectory(TrajectoryKind::Straight, 12.0, 0.5).expect("track");
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let bias = rng.random_range(15.0f64..=20.0).to_radians();
        let noise = SensorNoise {
            mag_heading_bias: bias,
            ..SensorNoise::default()
        };
        let frame = RigidTransform::rot_z(rng.random_range(-3.14..3.14));
        let mut fixes = Vec::new();
        let mut headings = Vec::new();
        for (k, (t, pose)) in track.iter().enumerate() {
            let pose = frame * *pose;
            let k = k as u64;
            fixes.push(gen_gnss(&pose, *t, &noise, true, sub_seed(seed, 2, k)).expect("fix"));
            let att = gen_imu(&pose, *t, &noise, sub_seed(seed, 3, k));
            headings.push((att.time, att.raw_magnetic_heading));
        }
        match estimate_heading_offset(&fixes, &headings, 10.0) {
            Ok(est) => {
                let err = wrap_angle(est - bias).abs().to_degrees();
                worst = worst.max(err);
                if err <= 3.0 {
                    ok += 1;
                }
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    let elapsed = start.elapsed();
    let pass = ok >= 95 && elapsed < Duration::from_secs(10);
    outcome(
        "3",
        pass,
        format!(
            "heading calibration: {ok}/{trials} biases in [15, 20] deg recovered within 3 deg (worst {worst:.2} deg) ({})",
            secs(elapsed)
        ),
    )
}

fn forest(kind: TrajectoryKind, length: f64, seed: u64) -> Scenario {
    let mut sc = Scenario::new(kind, length, 2.0);
    sc.seed = seed;
    sc.tree_density = 0.05;
    sc.lidar.max_range = 30.0;
    sc.lidar.azimuth_steps = 360;
    sc.canopy = (0.0, 1.0);
    sc.world_margin = 35.0;
    sc
}

fn config(sc: &Scenario, mode: Mode, penalty_mode: PenaltyMode, r_max: Option<f64>) -> RunConfig {
    RunConfig {
        input: InputSource::Synthetic(Box::new(sc.clone())),
        mapper: MapperConfig {
            epsilon: EPSILON,
            r_max,
            penalty_mode,
            ..MapperConfig::default()
        },
        mode,
        seed: sc.seed,
        ..RunConfig::default()
    }
}

/// Inserted points that violate the epsilon rule, checked against an
/// independent spatial hash replaying every insertion.
#[derive(Default)]
struct EpsilonAudit {
    runs: usize,
    inserted: usize,
    violations: usize,
    missed: usize,
}

struct Grid {
    cells: HashMap<(i64, i64, i64), Vec<Vec3>>,
    eps: f64,
}

impl Grid {
    fn key(&self, p: Vec3) -> (i64, i64, i64) {
        let c = |v: f64| (v / self.eps).floor() as i64;
        (c(p.x), c(p.y), c(p.z))
    }

    fn occupied(&self, p: Vec3) -> bool {
        let (x, y, z) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(pts) = self.cells.get(&(x + dx, y + dy, z + dz)) {
                        if pts.iter().any(|q| q.distance(p) <= self.eps) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn insert(&mut self, p: Vec3) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(p);
    }
}

impl EpsilonAudit {
    fn check(&mut self, inputs: &Inputs, run: &MappingRun) {
        let map = run.state.map().points();
        let mut grid = Grid {
            cells: HashMap::new(),
            eps: EPSILON,
        };
        let mut count = 0;
        for (d, (_, scan)) in run.state.stats().iter().zip(&inputs.scans) {
            if d.map_points != count {
                self.violations += 1;
            }
            let fresh = &map[d.map_points..d.map_points + d.inserted_points];
            let mut j = 0;
            for &p in scan.points() {
                let q = d.pose.apply(p);
                if j < fresh.len() && fresh[j] == q {
                    if grid.occupied(q) {
                        self.violations += 1;
                    }
                    grid.insert(q);
                    j += 1;
                } else if q.is_finite() && !grid.occupied(q) {
                    self.missed += 1;
                }
            }
            // inserted points that do not come from the scan at its pose
            self.violations += fresh.len() - j;
            for &q in &fresh[j..] {
                grid.insert(q);
            }
            count = d.map_points + d.inserted_points;
            self.inserted += d.inserted_points;
        }
        self.runs += 1;
    }
}

fn map_with<C: Clock>(cfg: &RunConfig, inputs: &Inputs, clock: &C, audit: &mut EpsilonAudit) -> MappingRun {
    let run = run_mapping_with(cfg, inputs, clock).expect("mapping run");
    audit.check(inputs, &run);
    run
}

fn pitch(p: &RigidTransform) -> f64 {
    p.rotation().to_euler_zyx().1
}

struct CorridorResult {
    terminal_pitch_deg: f64,
    /// Per-axis RMS of the ENU position minus the GNSS fix, in fix sigmas.
    track_sigma: Vec3,
}

fn corridor_run(inputs: &Inputs, cfg: &RunConfig, audit: &mut EpsilonAudit) -> CorridorResult {
    let run = map_with(cfg, inputs, &NullClock, audit);
    let trajectory = run.enu_trajectory();
    let truth = inputs.truth.as_ref().expect("synthetic truth");
    let terminal = pitch(&trajectory.last().unwrap().1) - pitch(&truth.last().unwrap().1);
    let mut sq = Vec3::ZERO;
    for (t, pose) in &trajectory {
        let fix = interpolate_fix(&inputs.fixes, *t).expect("fix");
        let d = pose.translation() - fix.position;
        let c = fix.covariance;
        sq += Vec3::new(d.x * d.x / c.xx, d.y * d.y / c.yy, d.z * d.z / c.zz);
    }
    let n = trajectory.len() as f64;
    CorridorResult {
        terminal_pitch_deg: terminal.to_degrees().abs(),
        track_sigma: Vec3::new((sq.x / n).sqrt(), (sq.y / n).sqrt(), (sq.z / n).sqrt()),
    }
}

fn max_axis(v: Vec3) -> f64 {
    v.x.max(v.y).max(v.z)
}

fn single_vs_three_point(audit: &mut EpsilonAudit) -> Vec<Outcome> {
    let start = Instant::now();
    let (mut pitch_ok, mut track_ok) = (true, true);
    let (mut pitch_parts, mut track_parts) = (Vec::new(), Vec::new());
    for seed in 1..=3 {
        let sc = forest(TrajectoryKind::Straight, 100.0, seed);
        let single_cfg = config(&sc, Mode::Penalty, PenaltyMode::GnssOnly, Some(R_MAX));
        let inputs = load_inputs(&single_cfg).expect("synthetic inputs");
        let single = corridor_run(&inputs, &single_cfg, audit);
        let three = corridor_run(&inputs, &config(&sc, Mode::Penalty, PenaltyMode::ThreePoint, Some(R_MAX)), audit);
        pitch_ok &= single.terminal_pitch_deg >= 3.0 * three.terminal_pitch_deg && three.terminal_pitch_deg <= 1.0;
        track_ok &= max_axis(single.track_sigma) <= 2.0 && max_axis(three.track_sigma) <= 2.0;
        pitch_parts.push(format!(
            "seed {seed} single {:.2} / three {:.3}",
            single.terminal_pitch_deg, three.terminal_pitch_deg
        ));
        track_parts.push(format!(
            "seed {seed} single {:.1} / three {:.1}",
            max_axis(single.track_sigma),
            max_axis(three.track_sigma)
        ));
    }
    let elapsed = start.elapsed();
    let in_time = elapsed < Duration::from_secs(120);
    vec![
        outcome(
            "4a",
            pitch_ok && in_time,
            format!(
                "100 m corridor, terminal pitch error single >= 3 x three-point and three-point <= 1 deg: {} deg ({})",
                pitch_parts.join("; "),
                secs(elapsed)
            ),
        ),
        outcome(
            "4b",
            track_ok && in_time,
            format!(
                "100 m corridor, both modes track GNSS within 2 sigma (worst axis RMS): {} sigma",
                track_parts.join("; ")
            ),
        ),
    ]
}

struct LoopMetrics {
    loop_error: f64,
    crispness: f64,
}

fn mode_ordering(audit: &mut EpsilonAudit) -> Vec<Outcome> {
    let start = Instant::now();
    let seeds = 1..=10u64;
    let mut rows: Vec<[LoopMetrics; 3]> = Vec::new();
    for seed in seeds.clone() {
        let sc = forest(TrajectoryKind::Loop, 300.0, seed);
        let base = config(&sc, Mode::Penalty, PenaltyMode::ThreePoint, Some(R_MAX));
        let inputs = load_inputs(&base).expect("synthetic inputs");
        let metrics = [Mode::Prior, Mode::Baseline, Mode::Penalty].map(|mode| {
            let cfg = RunConfig { mode, ..base.clone() };
            let run = map_with(&cfg, &inputs, &NullClock, audit);
            let truth = inputs.truth.as_deref().expect("truth");
            let world = inputs.world.as_ref().expect("world");
            LoopMetrics {
                loop_error: loop_closure_error(&run.enu_trajectory(), truth).expect("matched truth"),
                crispness: crispness(run.enu_map().points(), world).expect("non-empty map"),
            }
        });
        rows.push(metrics);
    }
    let elapsed = start.elapsed();
    let in_time = elapsed < Duration::from_secs(600);
    let count = |f: &dyn Fn(&[LoopMetrics; 3]) -> bool| rows.iter().filter(|r| f(r)).count();
    let n = rows.len();
    let series = |f: &dyn Fn(&[LoopMetrics; 3]) -> f64| {
        rows.iter().map(|r| format!("{:.3}", f(r))).collect::<Vec<_>>().join(" ")
    };
    let mean_of = |f: &dyn Fn(&[LoopMetrics; 3]) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;

    let loops = count(&|r| r[2].loop_error <= 0.8 * r[1].loop_error);
    let crisp_prior = count(&|r| r[2].crispness <= 0.8 * r[0].crispness);
    let crisp_base = count(&|r| r[1].crispness <= r[2].crispness);
    vec![
        outcome(
            "5a",
            loops == n && in_time,
            format!(
                "300 m loop, loop-closure error penalty < 0.8 x baseline in {loops}/{n} seeds; penalty [{}] baseline [{}] m ({})",
                series(&|r| r[2].loop_error),
                series(&|r| r[1].loop_error),
                secs(elapsed)
            ),
        ),
        outcome(
            "5b",
            crisp_prior == n && in_time,
            format!(
                "300 m loop, crispness penalty < 0.8 x prior in {crisp_prior}/{n} seeds (mean ratio {:.2}); penalty [{}] prior [{}] m",
                mean_of(&|r| r[2].crispness) / mean_of(&|r| r[0].crispness),
                series(&|r| r[2].crispness),
                series(&|r| r[0].crispness)
            ),
        ),
        outcome(
            "5c",
            crisp_base == n && in_time,
            format!(
                "300 m loop, crispness baseline <= penalty in {crisp_base}/{n} seeds; baseline [{}] penalty [{}] m",
                series(&|r| r[1].crispness),
                series(&|r| r[2].crispness)
            ),
        ),
    ]
}

fn quartile_mean(values: &[f64], q: usize) -> f64 {
    let n = values.len();
    let part = &values[q * n / 4..(q + 1) * n / 4];
    part.iter().sum::<f64>() / part.len() as f64
}

fn cutmap_complexity(audit: &mut EpsilonAudit) -> Outcome {
    let start = Instant::now();
    let sc = forest(TrajectoryKind::Straight, 400.0, 1);
    let bounded_cfg = config(&sc, Mode::Penalty, PenaltyMode::ThreePoint, Some(R_MAX));
    let inputs = load_inputs(&bounded_cfg).expect("synthetic inputs");
    let bounded = map_with(&bounded_cfg, &inputs, &WallClock::new(), audit);
    let unbounded_cfg = config(&sc, Mode::Penalty, PenaltyMode::ThreePoint, None);
    let unbounded = map_with(&unbounded_cfg, &inputs, &WallClock::new(), audit);

    let series = |run: &MappingRun, f: &dyn Fn(&forestmap_core::mapper::ScanDiagnostics) -> f64| {
        run.state.stats().iter().skip(1).map(f).collect::<Vec<f64>>()
    };
    let first_map = bounded.state.stats()[1].map_points as f64;
    let growth = bounded.state.map().len() as f64 / first_map;

    let reference = series(&bounded, &|d| d.cutmap_points as f64);
    let plateau = quartile_mean(&reference, 3) / quartile_mean(&reference, 1);
    let unbounded_reference = series(&unbounded, &|d| d.cutmap_points as f64);
    let monotone = unbounded_reference.windows(2).all(|w| w[1] >= w[0]);

    let map_ratio = {
        let m = series(&bounded, &|d| d.map_points as f64);
        quartile_mean(&m, 3) / quartile_mean(&m, 1)
    };
    let time_ratio = |run: &MappingRun| {
        let t = series(run, &|d| d.registration_ms);
        quartile_mean(&t, 3) / quartile_mean(&t, 1)
    };
    let (bounded_time, unbounded_time) = (time_ratio(&bounded), time_ratio(&unbounded));
    let elapsed = start.elapsed();

    let pass = growth >= 10.0
        && (plateau - 1.0).abs() <= 0.15
        && monotone
        && bounded_time < map_ratio
        && bounded_time < unbounded_time
        && elapsed < Duration::from_secs(600);
    outcome(
        "6",
        pass,
        format!(
            "cut-map complexity, 400 m corridor: map grew {growth:.1}x; reference Q4/Q2 {plateau:.3} with r_max, \
             unbounded reference monotone {monotone}; registration time Q4/Q2 {bounded_time:.2} with r_max vs \
             {unbounded_time:.2} unbounded (map Q4/Q2 {map_ratio:.2}) ({})",
            secs(elapsed)
        ),
    )
}

fn epsilon_rule(audit: &mut EpsilonAudit) -> Outcome {
    if audit.runs == 0 {
        let sc = forest(TrajectoryKind::Straight, 60.0, 7);
        let cfg = config(&sc, Mode::Penalty, PenaltyMode::ThreePoint, Some(R_MAX));
        let inputs = load_inputs(&cfg).expect("synthetic inputs");
        map_with(&cfg, &inputs, &NullClock, audit);
    }
    outcome(
        "7",
        audit.violations == 0 && audit.missed == 0,
        format!(
            "epsilon rule audit over {} runs, {} inserted points: {} violations, {} wrongly rejected",
            audit.runs, audit.inserted, audit.violations, audit.missed
        ),
    )
}

fn self_registration() -> Outcome {
    let start = Instant::now();
    let extent = Extent::new(-40.0, -40.0, 40.0, 40.0);
    let world = gen_world_with(8, extent, 0.05, &TreeShape::default())
        .expect("world")
        .clear_path(&[Vec3::ZERO], 1.5);
    let lidar = LidarModel {
        max_range: 30.0,
        azimuth_steps: 360,
        range_noise_sigma: 0.0,
        ..LidarModel::default()
    };
    let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 1.5));
    let scan = gen_scan(&world, &pose, &lidar, 9).expect("scan");
    let map = estimate_normals(&scan, 15, NormalOrientation::Viewpoint(Vec3::ZERO)).expect("normals");
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let trials = 100;
    let mut ok = 0;
    let (mut worst_t, mut worst_r): (f64, f64) = (0.0, 0.0);
    for _ in 0..trials {
        let rotation = random_rotation(&mut rng, 5f64.to_radians());
        let shift = unit_vector(&mut rng) * rng.random_range(0.0..=0.2);
        let prior = RigidTransform::new(rotation, shift).expect("rotation");
        let Ok((t, _)) = icp(&scan, &map, &prior, &[], &IcpConfig::default()) else {
            continue;
        };
        let (et, er) = (t.translation().norm(), t.rotation_angle());
        worst_t = worst_t.max(et);
        worst_r = worst_r.max(er);
        if et <= 1e-3 && er <= 1e-3 {
            ok += 1;
        }
    }
    outcome(
        "8",
        ok >= 99,
        format!(
            "self-registration from 0.2 m / 5 deg priors: {ok}/{trials} recovered identity (worst {worst_t:.1e} m, {worst_r:.1e} rad, {} points) ({})",
            scan.len(),
            secs(start.elapsed())
        ),
    )
}

fn determinism() -> Outcome {
    let mut differing = Vec::new();
    let sc = forest(TrajectoryKind::Straight, 60.0, 3);
    for mode in [Mode::Prior, Mode::Baseline, Mode::Penalty] {
        let outputs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().expect("temp dir");
                let cfg = RunConfig {
                    out: dir.path().to_path_buf(),
                    ..config(&sc, mode, PenaltyMode::ThreePoint, Some(R_MAX))
                };
                run_pipeline(&cfg).expect("pipeline");
                let read = |f: &str| std::fs::read(dir.path().join(f)).expect("output file");
                (read(METRICS_FILE), read(TRAJECTORY_FILE))
            })
            .collect();
        if outputs[0] != outputs[1] {
            differing.push(mode.as_str());
        }
    }
    outcome(
        "9",
        differing.is_empty(),
        format!(
            "determinism: metrics and trajectory CSVs byte-identical across two runs in prior, baseline and penalty modes{}",
            if differing.is_empty() { String::new() } else { format!(" (differ: {})", differing.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filter.is_empty() || filter.iter().any(|f| f == id);
    let mut audit = EpsilonAudit::default();
    let mut results = Vec::new();
    let mut report = |o: Outcome| {
        let known = KNOWN_FAILURES.contains(&o.id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} [{}] {}", o.id, o.line);
        results.push(o);
    };
    if wanted("1") {
        report(decomposition_identity());
    }
    if wanted("2") {
        report(point_to_plane_limit());
    }
    if wanted("3") {
        report(heading_calibration());
    }
    if wanted("4") {
        for o in single_vs_three_point(&mut audit) {
            report(o);
        }
    }
    if wanted("5") {
        for o in mode_ordering(&mut audit) {
            report(o);
        }
    }
    if wanted("6") {
        report(cutmap_complexity(&mut audit));
    }
    if wanted("7") {
        report(epsilon_rule(&mut audit));
    }
    if wanted("8") {
        report(self_registration());
    }
    if wanted("9") {
        report(determinism());
    }
    let unexpected = results.iter().filter(|o| !o.pass && !KNOWN_FAILURES.contains(&o.id)).count();
    let passed = results.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria passed, {unexpected} unexpected failures", results.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
