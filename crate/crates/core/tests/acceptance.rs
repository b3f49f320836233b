//! Acceptance run: one PASS/FAIL line per criterion, each with its runtime
//! budget. Exits non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use common::{chain, max_abs_diff, pose_matrix, random_pair, random_pose, rigid_inverse, rng, Mat4};
use televiz::calibration::{apply_calibration, calibrate, viewpoint_residual};
use televiz::geometry::{FrameId, Pose, Vec3};
use televiz::harness::{self, metrics, presets, Engine, MetricsRow, Mode, ScenarioConfig};
use televiz::statechain::{
    decoupled_view, hmd_in_tracking, virtual_graph, zed_in_robot, AnchorMode, MeasurementSet, VirtualAnchors,
    PATH_HMD_IN_WORLD, PATH_MESH_IN_HMD, PATH_ZED_IN_HMD, PATH_ZED_IN_WORLD,
};
use televiz::world::distortion::{billboard_distortion, monotone_offset_limit};
use televiz::world::classify_coverage;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn criterion(name: &str, budget_s: f64, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = body();
    let elapsed = start.elapsed().as_secs_f64();
    let in_time = elapsed < budget_s;
    let pass = out.pass && in_time;
    let late = if in_time { "" } else { " OVER BUDGET" };
    println!(
        "{} {name}: {} [{elapsed:.2} s / {budget_s} s{late}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    pass
}

/// Random operator, robot and odometry state plus pre-calibration anchors.
fn random_state(r: &mut impl Rng) -> (MeasurementSet, VirtualAnchors) {
    let cfg = presets::head_turn();
    let neck = cfg.neck_model();
    let base_in_tracking = random_pose(r, 3.0);
    let hmd_in_base = random_pose(r, 2.0);
    let head = neck.head_in_body(
        r.random_range(-neck.yaw_limit..neck.yaw_limit),
        r.random_range(-neck.pitch_limit..neck.pitch_limit),
    );
    let z_in_r = zed_in_robot(&head, &random_pose(r, 0.3));
    let body = random_pose(r, 5.0);
    let drift = random_pose(r, 0.05);
    let meas = MeasurementSet {
        hmd_in_tracking: hmd_in_tracking(&base_in_tracking, &hmd_in_base),
        zed_in_robot: z_in_r,
        zed_in_world: drift.compose(&body.compose(&z_in_r)),
        timestamp: r.random_range(0.0..100.0),
    };
    let mut anchors = VirtualAnchors {
        tracking_in_robot_virtual: random_pose(r, 3.0),
        robot_in_world_virtual: random_pose(r, 5.0),
        mesh_in_world_virtual: random_pose(r, 1.0),
        mode: if r.random_bool(0.5) {
            AnchorMode::MeshAnchored
        } else {
            AnchorMode::NoMesh
        },
    };
    anchors.follow_odometry(&meas);
    (meas, anchors)
}

fn calibration_correctness() -> Outcome {
    let mut r = rng(0xca1);
    let (mut worst_t, mut worst_a) = (0.0f64, 0.0f64);
    let mut constraint_kept = true;
    for tick in 0..1000 {
        let (meas, anchors) = random_state(&mut r);
        let before = virtual_graph(&meas, &anchors);
        let t_in_h_before = before.query(FrameId::VirtualTracking, FrameId::VirtualHmd).unwrap();

        let result = calibrate(&meas.zed_in_robot, &meas.hmd_in_tracking, tick);
        let calibrated = apply_calibration(&anchors, &result);
        let after = virtual_graph(&meas, &calibrated);
        let hmd_w = after.query_along(&PATH_HMD_IN_WORLD).unwrap();
        let zed_w = after.query_along(&PATH_ZED_IN_WORLD).unwrap();
        let d = viewpoint_residual(&hmd_w, &zed_w);
        worst_t = worst_t.max(d.translation);
        worst_a = worst_a.max(d.angle);

        let t_in_h_after = after.query(FrameId::VirtualTracking, FrameId::VirtualHmd).unwrap();
        let edge = after.edge(FrameId::VirtualHmd, FrameId::VirtualTracking).unwrap().pose;
        constraint_kept &= t_in_h_after == t_in_h_before && edge == meas.hmd_in_tracking;
    }
    outcome(
        worst_t < 1e-9 && worst_a < 1e-9 && constraint_kept,
        format!(
            "1000 states, max residual {worst_t:.1e} m / {worst_a:.1e} rad (< 1e-9), tracking-in-HMD bit-exact: {constraint_kept}"
        ),
    )
}

fn chain_oracle() -> Outcome {
    let mut r = rng(0x0_4ac1e);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (h_t, mh_t) = random_pair(&mut r, 3.0);
        let (z_r, mz_r) = random_pair(&mut r, 1.0);
        let (z_w, mz_w) = random_pair(&mut r, 5.0);
        let (t_r, mt_r) = random_pair(&mut r, 3.0);
        let (r_w, mr_w) = random_pair(&mut r, 5.0);
        let (s_w, ms_w) = random_pair(&mut r, 1.0);
        let meas = MeasurementSet {
            hmd_in_tracking: h_t,
            zed_in_robot: z_r,
            zed_in_world: z_w,
            timestamp: 0.0,
        };
        let anchors = VirtualAnchors {
            tracking_in_robot_virtual: t_r,
            robot_in_world_virtual: r_w,
            mesh_in_world_virtual: s_w,
            mode: AnchorMode::NoMesh,
        };
        let g = virtual_graph(&meas, &anchors);
        let view = decoupled_view(&meas, &anchors);

        let zed_in_hmd: Mat4 = chain(&[&rigid_inverse(&mh_t), &rigid_inverse(&mt_r), &mz_r]);
        let hmd_in_world = chain(&[&mr_w, &mt_r, &mh_t]);
        let zed_in_world = chain(&[&mr_w, &mz_r]);
        let mesh_in_hmd = chain(&[
            &rigid_inverse(&mh_t),
            &rigid_inverse(&mt_r),
            &mz_r,
            &rigid_inverse(&mz_w),
            &ms_w,
        ]);
        let checks = [
            (g.query_along(&PATH_ZED_IN_HMD).unwrap(), zed_in_hmd),
            (view.zed_in_hmd_virtual, zed_in_hmd),
            (g.query_along(&PATH_HMD_IN_WORLD).unwrap(), hmd_in_world),
            (view.hmd_in_world_virtual, hmd_in_world),
            (g.query_along(&PATH_ZED_IN_WORLD).unwrap(), zed_in_world),
            (g.query_along(&PATH_MESH_IN_HMD).unwrap(), mesh_in_hmd),
            (view.mesh_in_hmd_virtual, mesh_in_hmd),
        ];
        for (pose, oracle) in checks {
            worst = worst.max(max_abs_diff(&pose_matrix(&pose), &oracle));
        }
    }
    outcome(worst < 1e-12, format!("10^4 states, 4 chains, max element error {worst:.1e} (< 1e-12)"))
}

fn latency_reproduction() -> Outcome {
    let sweep = harness::run_scenario(&presets::latency_sweep()).unwrap().summary;
    let episode = harness::run_scenario(&presets::instability()).unwrap().summary;
    let (Some(lag), Some(ep)) = (sweep.head_lag_s, episode.episode_lag_s) else {
        return outcome(false, "lag could not be measured");
    };
    outcome(
        (lag - 0.5).abs() <= 0.1 && (ep - 2.0).abs() <= 0.2,
        format!("sweep lag {lag:.3} s (0.5 +- 0.1), instability episode lag {ep:.3} s (2.0 +- 0.2)"),
    )
}

fn filter_lag() -> Outcome {
    let rates = [1.0, 0.5, 0.2, 0.1, 0.05];
    let rows = harness::sweep_filter(&presets::latency_sweep(), &rates).unwrap();
    let ms: Vec<f64> = rows.iter().map(|r| r.lag_ms).collect();
    let increasing = ms.windows(2).all(|w| w[1] > w[0]);
    let at_one = ms[0].abs() < 1e-9;
    let at_fifth = (40.0..=80.0).contains(&ms[2]);
    let listed: Vec<String> = rates.iter().zip(&ms).map(|(r, m)| format!("{r}->{m:.1}ms")).collect();
    outcome(
        increasing && at_one && at_fifth,
        format!("{} (strictly increasing, 1.0 -> 0 ms, 0.2 -> 40..80 ms)", listed.join(" ")),
    )
}

fn mean_over(rows: &[MetricsRow], from_s: f64, to_s: f64, f: impl Fn(&MetricsRow) -> f64) -> f64 {
    let sel: Vec<f64> = rows.iter().filter(|r| r.time_s >= from_s && r.time_s < to_s).map(f).collect();
    sel.iter().sum::<f64>() / sel.len() as f64
}

fn range_of_motion() -> Outcome {
    let cfg = presets::range_of_motion();
    let mut no_mesh = cfg.clone();
    no_mesh.mode = Mode::Decoupled;
    let (with, without) = std::thread::scope(|s| {
        let a = s.spawn(|| harness::run_scenario(&cfg).unwrap());
        let b = harness::run_scenario(&no_mesh).unwrap();
        (a.join().unwrap(), b)
    });
    // the operator holds -75 deg over [28, 29) s and +75 deg for the final second
    let end = cfg.duration_s;
    let holds = [(28.0, 29.0), (end - 1.0, end)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, b) in holds {
        let gap = mean_over(&with.rows, a, b, |r| r.gap_deg);
        let blank_mesh = mean_over(&with.rows, a, b, |r| r.blank_fraction);
        let blank_plain = mean_over(&without.rows, a, b, |r| r.blank_fraction);
        pass &= (gap - 20.0).abs() <= 0.5 && blank_mesh == 0.0 && blank_plain > 0.1;
        parts.push(format!(
            "[{a:.0},{b:.0}) s gap {gap:.3} deg, blank with mesh {blank_mesh:.3}, without {blank_plain:.3}"
        ));
    }
    outcome(pass, format!("{} (gap 20 +- 0.5, 0 with mesh, > 0.1 without)", parts.join("; ")))
}

fn probe_poses(cfg: &ScenarioConfig) -> Vec<Pose> {
    let (lo, hi) = (cfg.scene.bounds_min, cfg.scene.bounds_max);
    let centre = Vec3::new((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, 1.5);
    (0..6)
        .map(|k| Pose::from_yaw_pitch(k as f64 * 60f64.to_radians(), 15f64.to_radians(), centre))
        .chain([Pose::from_yaw_pitch(2.5, 0.4, Vec3::new(1.5, 1.0, 1.65))])
        .collect()
}

fn mesh_fractions(engine: &Engine, probes: &[Pose]) -> Vec<f64> {
    let cfg = engine.config();
    probes
        .iter()
        .map(|p| classify_coverage(engine.scene(), Some(engine.mesh()), &cfg.hmd, p, None).report.mesh_fraction)
        .collect()
}

fn partition_and_monotonicity() -> Outcome {
    let mut worst = 0.0f64;
    let mut ticks = 0usize;
    let mut monotone = true;
    let mut probes_checked = 0usize;
    for (name, _) in presets::ALL {
        let cfg = presets::by_name(name).unwrap();
        let probes = probe_poses(&cfg);
        let mut engine = Engine::new(cfg).unwrap();
        let mut last: Option<Vec<f64>> = None;
        let mut last_cells = 0;
        while !engine.is_finished() {
            let row = engine.step();
            worst = worst.max((row.live_fraction + row.mesh_fraction + row.blank_fraction - 1.0).abs());
            ticks += 1;
            if !row.scanning {
                last = None;
                continue;
            }
            let cells = engine.mesh().len();
            monotone &= cells >= last_cells;
            if last.is_some() && cells == last_cells {
                continue;
            }
            last_cells = cells;
            let now = mesh_fractions(&engine, &probes);
            if let Some(prev) = &last {
                monotone &= now.iter().zip(prev).all(|(n, p)| n >= p);
            }
            probes_checked += 1;
            last = Some(now);
        }
    }
    outcome(
        worst <= 1e-9 && monotone,
        format!(
            "{ticks} ticks over all presets, max |sum - 1| {worst:.1e} (<= 1e-9); mesh fraction non-decreasing at fixed probes over {probes_checked} scan updates: {monotone}"
        ),
    )
}

fn mode_ordering() -> Outcome {
    let mut failures = Vec::new();
    let mut listed = Vec::new();
    for seed in 1..=10 {
        let mut cfg = presets::head_turn();
        cfg.seed = seed;
        let cmp = harness::compare_modes(&cfg).unwrap();
        let b = |m| cmp.get(m).unwrap().mean_blank_fraction;
        listed.push(format!(
            "{:.3}/{:.3}/{:.3}",
            b(Mode::FixedRgb),
            b(Mode::Decoupled),
            b(Mode::DecoupledWithMesh)
        ));
        if !cmp.blank_ordering_holds() {
            failures.push(seed);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "mean blank fixed_rgb/decoupled/with_mesh per seed: {}; seeds out of order: {failures:?}",
            listed.join(" ")
        ),
    )
}

fn csv_bytes(cfg: &ScenarioConfig) -> Vec<u8> {
    let out = harness::run_scenario(cfg).unwrap();
    let mut buf = Vec::new();
    metrics::write_csv(&out.rows, &mut buf).unwrap();
    buf.extend_from_slice(out.summary.to_toml_string().as_bytes());
    buf
}

fn determinism() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for cfg in [presets::head_turn(), presets::instability()] {
        let a = csv_bytes(&cfg);
        let b = csv_bytes(&cfg);
        pass &= a == b;
        details.push(format!("{} {} bytes identical: {}", cfg.name, a.len(), a == b));
    }
    outcome(pass, details.join("; "))
}

/// Distortion computed the long way: pinhole projection `K [R | t]` into
/// pixels, back-projection of the pixel at the billboard depth, then the
/// angle at the HMD between the two points.
fn projective_oracle(point: [f64; 3], cam: &Pose, hmd: [f64; 3], depth: f64, focal: f64, centre: (f64, f64)) -> f64 {
    // optical frame: z forward, x right, y down
    let body_to_optical: Mat4 = [
        [0.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    let extrinsic = common::mul(&body_to_optical, &rigid_inverse(&pose_matrix(cam)));
    let pc = common::apply(&extrinsic, point);
    let (u, v) = (focal * pc[0] / pc[2] + centre.0, focal * pc[1] / pc[2] + centre.1);
    let ray = [(u - centre.0) / focal, (v - centre.1) / focal, 1.0];
    let image = common::apply(&rigid_inverse(&extrinsic), ray.map(|c| c * depth));

    let a: [f64; 3] = std::array::from_fn(|i| image[i] - hmd[i]);
    let b: [f64; 3] = std::array::from_fn(|i| point[i] - hmd[i]);
    let na = a.iter().map(|c| c * c).sum::<f64>().sqrt();
    let nb = b.iter().map(|c| c * c).sum::<f64>().sqrt();
    let diff: f64 = (0..3).map(|i| (a[i] / na - b[i] / nb).powi(2)).sum::<f64>().sqrt();
    let sum: f64 = (0..3).map(|i| (a[i] / na + b[i] / nb).powi(2)).sum::<f64>().sqrt();
    2.0 * diff.atan2(sum)
}

fn billboard() -> Outcome {
    let mut r = rng(0xb111);
    let mut zero_worst = 0.0f64;
    let mut oracle_worst = 0.0f64;
    let mut monotone = true;
    for _ in 0..100 {
        let cam = random_pose(&mut r, 2.0);
        let x = r.random_range(0.5..6.0);
        let local = Vec3::new(x, r.random_range(-0.6..0.6) * x, r.random_range(-0.6..0.6) * x);
        let p = cam.apply(&local);
        let depth = r.random_range(0.5..5.0);
        let off = Vec3::from(common::random_vec(&mut r, 0.5));
        let hmd = Pose::new(cam.rotation, cam.translation + off);

        zero_worst = zero_worst.max(billboard_distortion(&p, &cam, &cam, depth).unwrap());

        let got = billboard_distortion(&p, &cam, &hmd, depth).unwrap();
        let focal = r.random_range(200.0..1200.0);
        let centre = (r.random_range(200.0..800.0), r.random_range(150.0..600.0));
        let h = hmd.translation;
        let want = projective_oracle([p.x, p.y, p.z], &cam, [h.x, h.y, h.z], depth, focal, centre);
        oracle_worst = oracle_worst.max((got - want).abs());

        let limit = monotone_offset_limit(&p, &cam, depth).unwrap();
        let dir = off.normalize();
        let mut prev = 0.0;
        for k in 0..=200 {
            let s = limit * k as f64 / 200.0;
            let at = Pose::new(cam.rotation, cam.translation + dir * s);
            let e = billboard_distortion(&p, &cam, &at, depth).unwrap();
            monotone &= e >= prev - 1e-12;
            prev = e;
        }
    }
    outcome(
        zero_worst <= 1e-12 && oracle_worst <= 1e-9 && monotone,
        format!(
            "zero offset max {zero_worst:.1e} rad (<= 1e-12); 100 configs vs K[R|t] oracle max {oracle_worst:.1e} rad (<= 1e-9); non-decreasing along offset rays: {monotone}"
        ),
    )
}

fn main() -> ExitCode {
    let results = [
        criterion("calibration_correctness", 5.0, calibration_correctness),
        criterion("transform_chain_oracle", 10.0, chain_oracle),
        criterion("latency_reproduction", 30.0, latency_reproduction),
        criterion("filter_lag", 10.0, filter_lag),
        criterion("range_of_motion_gap", 30.0, range_of_motion),
        criterion("coverage_partition_and_monotonicity", 20.0, partition_and_monotonicity),
        criterion("mode_ordering", 60.0, mode_ordering),
        criterion("determinism", 10.0, determinism),
        criterion("billboard_distortion", 5.0, billboard),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
