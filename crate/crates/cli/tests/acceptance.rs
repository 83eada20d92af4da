//! Acceptance gate: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use rand::Rng;
use rotip_cli::commands::{run, Command};
use rotip_cli::config::{load, ScenarioConfig};
use rotip_core::beam::{default_curve, default_locations, inertia_moment, location_report, BeamSpec, OrderingVerdict};
use rotip_core::bench::{plane_errors, run_count_trial, PlaneSweep};
use rotip_core::calibration::{calibrate, synthesize_set, CalibrationParams, CaptureParams};
use rotip_core::contact::{run_contact_trial, success_rates, ContactMethod, ContactSetup, ContactWorld, Misalignment};
use rotip_core::counting::{counting_accuracy, TrackParams};
use rotip_core::feed::{
    mean_std, ppm_metric, simulate_feed, sr_metric, FeedOutcome, FeedParams, FeedPolicy, FeedScenario, GraspResult, Material,
};
use rotip_core::oracle::MaskNoiseParams;
use rotip_core::plane::{force_plane_baseline, vision_plane_baseline, Plane, FORCE_NOISE_DEG, VISION_NOISE_DEG};
use rotip_core::rng::{derive, seeded};
use rotip_core::sensor::{pixel_to_ray, project_point, ray_surface_intersect, CameraIntrinsics, SensorGeometry, SurfaceGrid};
use rotip_core::geometry::angle_error;
use rotip_core::oracle::tilted_normal;

// Tolerances.
const REPROJECTION_PX: f64 = 1e-6;
const ROUND_TRIP_SECONDS: f64 = 5.0;
const NOISELESS_MAX_DEG: f64 = 0.1;
const NOISELESS_MEAN_DEG: f64 = 0.02;
const NOISY_BAND_DEG: (f64, f64) = (0.5, 3.0);
const BASELINE_TOL_DEG: f64 = 0.3;
const BASELINE_SAMPLES: usize = 10_000;
const FEED_STD_RATIO: f64 = 0.15;
const FEED_SLOWDOWN: f64 = 1.3;
const FEED_TIME_REL: f64 = 0.10;
const BENCH_SECONDS: f64 = 60.0;
const COUNT_FLOORS: [(Material, f64); 3] =
    [(Material::PrintPaper, 0.95), (Material::CoatedPaper, 0.90), (Material::PlasticSheet, 0.96)];
const FORCE_RATIO: f64 = 2.0;
const INERTIA_REL: f64 = 1e-12;
const CALIB_CLEAN_MM: f64 = 0.05;
const CALIB_NOISY_MM: f64 = 0.3;
const CALIB_SECONDS: f64 = 30.0;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn c1_round_trip() -> (bool, String) {
    let k = CameraIntrinsics::default();
    let g = SensorGeometry::default();
    let mut rng = seeded(1);
    let start = Instant::now();
    let (mut hits, mut misses, mut worst) = (0, 0, 0.0f64);
    while hits < 10_000 {
        let u = rng.random_range(0.0..=(k.width - 1) as f64);
        let v = rng.random_range(0.0..=(k.height - 1) as f64);
        let ray = pixel_to_ray(u, v, &k).expect("in bounds");
        let Ok(p) = ray_surface_intersect(&ray, &g) else {
            misses += 1;
            continue;
        };
        let (pu, pv) = project_point(&p.position, &k).expect("in front");
        worst = worst.max(((pu - u).powi(2) + (pv - v).powi(2)).sqrt());
        hits += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst < REPROJECTION_PX && secs < ROUND_TRIP_SECONDS,
        format!("10000 pixels ({misses} missed the surface), worst {worst:.2e} px, {secs:.3} s"),
    )
}

fn sweep_errors(sweep: &PlaneSweep, seeds: std::ops::Range<u64>) -> Vec<(u64, f64)> {
    let grid = SurfaceGrid::new(&CameraIntrinsics::default(), &SensorGeometry::default());
    let mut out = Vec::new();
    for seed in seeds {
        for (i, a) in (-45..=45).enumerate() {
            out.push((seed, plane_errors(&grid, sweep, a as f64, derive(seed, i as u64)).expect("sweep").tactile));
        }
    }
    out
}

fn c2_plane_recovery() -> (bool, String) {
    let clean = PlaneSweep { mask_noise: MaskNoiseParams::NONE, ..PlaneSweep::default() };
    let e: Vec<f64> = sweep_errors(&clean, 0..1).into_iter().map(|x| x.1).collect();
    let max = e.iter().copied().fold(0.0, f64::max);
    let mean = mean_std(&e).0;
    let noisy: Vec<f64> = sweep_errors(&PlaneSweep::default(), 0..10).into_iter().map(|x| x.1).collect();
    let nmean = mean_std(&noisy).0;
    (
        max < NOISELESS_MAX_DEG && mean < NOISELESS_MEAN_DEG && (NOISY_BAND_DEG.0..=NOISY_BAND_DEG.1).contains(&nmean),
        format!("noiseless max {max:.4} mean {mean:.4} deg; default noise mean {nmean:.3} deg"),
    )
}

fn c3_baselines() -> (bool, String) {
    let (mut v, mut f) = (Vec::new(), Vec::new());
    for i in 0..BASELINE_SAMPLES as u64 {
        let truth = tilted_normal(((i % 91) as f64 - 45.0).to_radians());
        let plane = Plane::new(truth, 0.0);
        v.push(angle_error(&vision_plane_baseline(&plane, VISION_NOISE_DEG, derive(i, 3)).normal, &truth));
        f.push(angle_error(&force_plane_baseline(&plane, FORCE_NOISE_DEG, derive(i, 4)).normal, &truth));
    }
    let (vm, fm) = (mean_std(&v).0, mean_std(&f).0);
    let sweep = PlaneSweep::default();
    let grid = SurfaceGrid::new(&CameraIntrinsics::default(), &SensorGeometry::default());
    let mut bad = Vec::new();
    for seed in 0..10u64 {
        let errs: Vec<_> =
            (-45..=45).enumerate().map(|(i, a)| plane_errors(&grid, &sweep, a as f64, derive(seed, i as u64)).unwrap()).collect();
        let m = |f: fn(&rotip_core::bench::PlaneErrors) -> f64| mean_std(&errs.iter().map(f).collect::<Vec<_>>()).0;
        let (t, vi, fo) = (m(|e| e.tactile), m(|e| e.vision), m(|e| e.force));
        if !(t < vi && vi < fo) {
            bad.push(seed);
        }
    }
    (
        (vm - VISION_NOISE_DEG).abs() <= BASELINE_TOL_DEG && (fm - FORCE_NOISE_DEG).abs() <= BASELINE_TOL_DEG && bad.is_empty(),
        format!("vision {vm:.3} deg, force {fm:.3} deg over {BASELINE_SAMPLES}; ordering violated for seeds {bad:?}"),
    )
}

fn c4_contact() -> (bool, String) {
    let clean = ContactSetup {
        mask_noise: MaskNoiseParams::NONE,
        misalignment: Misalignment::Uniform { max_deg: 20.0 },
        ..ContactSetup::default()
    };
    let world = ContactWorld::new(&clean);
    let tactile: Vec<_> =
        (0..100).map(|s| run_contact_trial(&clean, &world, ContactMethod::VisionForceTactile, s, false)).collect();
    let ok = tactile.iter().filter(|o| o.two_finger).count();
    let max_tilt = tactile.iter().map(|o| o.initial_misalignment_deg).fold(0.0, f64::max);

    let noisy = ContactSetup { mask_noise: MaskNoiseParams::default(), ..ContactSetup::default() };
    let mut batches = Vec::new();
    for b in 0..3u64 {
        let seeds = 100 * b..100 * (b + 1);
        let v: Vec<_> = seeds.clone().map(|s| run_contact_trial(&noisy, &world, ContactMethod::Vision, s, false)).collect();
        let t: Vec<_> =
            seeds.map(|s| run_contact_trial(&noisy, &world, ContactMethod::VisionForceTactile, s, false)).collect();
        batches.push((success_rates(&v).1, success_rates(&t).1));
    }
    (
        ok == 100 && batches.iter().all(|(v, t)| v < t),
        format!("noiseless tactile {ok}/100 (initial tilt up to {max_tilt:.1} deg); vision vs tactile two-finger SR per batch {batches:.2?}"),
    )
}

fn c5_feed() -> (bool, String) {
    let sc = FeedScenario::new(15, Material::PrintPaper);
    let mut fails = Vec::new();
    let mut ca_groups = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    let mut wo_groups = [Vec::new(), Vec::new()];
    for seed in 0..100u64 {
        let ca = simulate_feed(&sc, FeedPolicy::WithCA, seed).unwrap();
        let t = ca.sheet_times();
        let (m, s) = mean_std(&t);
        if ca.fed() != 15 || s > FEED_STD_RATIO * m {
            fails.push(format!("with_ca seed {seed}"));
        }
        for (g, chunk) in t.chunks(3).take(4).enumerate() {
            ca_groups[g].extend_from_slice(chunk);
        }
        let wo = simulate_feed(&sc, FeedPolicy::WithoutCA, seed).unwrap();
        let t = wo.sheet_times();
        if !matches!(wo.outcome, FeedOutcome::ContactLost { sheet: 6..=8 }) {
            fails.push(format!("without_ca seed {seed} lost at {:?}", wo.outcome));
        }
        wo_groups[0].extend_from_slice(&t[..3.min(t.len())]);
        wo_groups[1].extend_from_slice(&t[3.min(t.len())..6.min(t.len())]);
    }
    // Pooled over trials, as in the per-group feeding-time table.
    let slowdown = mean_std(&wo_groups[1]).0 / mean_std(&wo_groups[0]).0;
    if slowdown < FEED_SLOWDOWN {
        fails.push(format!("without_ca slowdown {slowdown:.3}"));
    }
    let reference = [(&ca_groups[0], 0.98), (&ca_groups[1], 0.83), (&ca_groups[2], 0.93), (&ca_groups[3], 0.84), (&wo_groups[0], 1.14), (&wo_groups[1], 1.78)];
    let mut detail = Vec::new();
    for (xs, r) in reference {
        let m = mean_std(xs).0;
        if (m - r).abs() > FEED_TIME_REL * r {
            fails.push(format!("group mean {m:.3} vs {r}"));
        }
        detail.push(format!("{m:.2}/{r}"));
    }
    (
        fails.is_empty(),
        format!("without_ca slowdown {slowdown:.2}; group means (sim/reference) {}; failures {fails:?}", detail.join(" ")),
    )
}

fn c6_metrics() -> (bool, String) {
    let exact = sr_metric(&GraspResult { grasped: 9, target: 10, elapsed: 60.0 }) == 0.9
        && sr_metric(&GraspResult { grasped: 25, target: 10, elapsed: 60.0 }) == 0.0
        && ppm_metric(&GraspResult { grasped: 10, target: 10, elapsed: 60.0 }) == 10.0
        && ppm_metric(&GraspResult { grasped: 5, target: 10, elapsed: 30.0 }) == 10.0;
    let both = Command::GraspBench { counting: vec![true, false] };
    let seeds: Vec<u64> = (0..10).collect();
    let clean = load(&repo().join("configs/noiseless.toml")).expect("noiseless config");
    let clean_out = run(&both, &clean, &seeds).expect("noiseless bench");
    let clean_ok = clean_out.checks.iter().find(|c| c.name == "noiseless SR = 1").is_some_and(|c| c.pass);
    let start = Instant::now();
    let noisy = run(&both, &ScenarioConfig::default(), &seeds).expect("bench");
    let secs = start.elapsed().as_secs_f64();
    let sign = noisy.checks.iter().find(|c| c.name == "counting raises SR and lowers PPM").expect("sign check");
    (
        exact && clean_ok && sign.pass && secs < BENCH_SECONDS,
        format!("metric examples exact {exact}; noiseless SR = 1 {clean_ok}; {}; bench {secs:.1} s", sign.detail),
    )
}

fn c7_counting() -> (bool, String) {
    let feed = FeedParams::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for (m, floor) in COUNT_FLOORS {
        let det = rotip_core::edges::DetectorParams::default().with_recall(m.preset().recall);
        let pairs: Vec<(u32, u32)> =
            (0..100).map(|s| run_count_trial(10, m, &feed, 0.75, &det, &TrackParams::default(), s).unwrap()).collect();
        let acc = counting_accuracy(&pairs);
        ok &= acc >= floor;
        detail.push(format!("{} {acc:.2} (>= {floor})", m.label()));
    }
    (ok, detail.join(", "))
}

fn c8_beam() -> (bool, String) {
    let m = Material::PrintPaper.preset();
    let specs = default_locations(&m, 20.0, 8.0);
    let report = location_report(&specs, &default_curve(20.0)).unwrap();
    let ratio = report.force("center").unwrap() / report.force("corner_case2").unwrap();
    let mut worst = 0.0f64;
    for (_, s) in &specs {
        let i0 = inertia_moment(s);
        for k in [0.5, 2.0, 3.0] {
            let h = inertia_moment(&BeamSpec { h: k * s.h, ..s.clone() });
            let w = inertia_moment(&BeamSpec { width: s.width.scaled(k), ..s.clone() });
            worst = worst.max(((h - k.powi(3) * i0) / (k.powi(3) * i0)).abs());
            worst = worst.max(((w - k * i0) / (k * i0)).abs());
        }
    }
    let forces: Vec<String> = specs.iter().map(|(l, _)| format!("{l} {:.3} N", report.force(l).unwrap())).collect();
    (
        report.verdict == OrderingVerdict::Strict && ratio >= FORCE_RATIO && worst <= INERTIA_REL,
        format!("{}; center/corner2 {ratio:.2}; I_z scaling error {worst:.1e}", forces.join(", ")),
    )
}

fn c9_calibration() -> (bool, String) {
    let k = CameraIntrinsics::default();
    let g0 = SensorGeometry::default();
    let mut summary = Vec::new();
    let mut ok = true;
    for (noise, bound) in [(MaskNoiseParams::NONE, CALIB_CLEAN_MM), (MaskNoiseParams::default(), CALIB_NOISY_MM)] {
        let start = Instant::now();
        let mut within = 0;
        let mut worst = 0.0f64;
        for draw in 0..20u64 {
            let mut rng = seeded(derive(draw, 0));
            let mut d = || rng.random_range(-2.0..=2.0);
            let truth = SensorGeometry { r: g0.r, ox: d(), oy: d(), oz: g0.oz + d() };
            let set = synthesize_set(&k, &truth, &CaptureParams::default(), &noise, derive(draw, 1));
            let params = CalibrationParams { seed: derive(draw, 2), ..CalibrationParams::default() };
            let err = calibrate(&set, &k, &g0, &params).ok().and_then(|r| r.max_error).unwrap_or(f64::INFINITY);
            worst = worst.max(err);
            within += usize::from(err <= bound);
        }
        let secs = start.elapsed().as_secs_f64();
        ok &= within == 20 && secs < CALIB_SECONDS;
        summary.push(format!("{within}/20 within {bound} mm (worst {worst:.4}, {secs:.1} s)"));
    }
    (ok, format!("noiseless {}; default noise {}", summary[0], summary[1]))
}

fn read_tree(dir: &Path, base: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            read_tree(&p, base, out);
        } else {
            out.insert(p.strip_prefix(base).unwrap().display().to_string(), std::fs::read(&p).unwrap());
        }
    }
}

fn c10_determinism() -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_rotip");
    let commands = ["estimate-plane", "contact-trials", "feed", "grasp-bench", "force-analysis", "calibrate", "count-bench"];
    let mut bad = Vec::new();
    let mut files = 0;
    for c in commands {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let mut trees = Vec::new();
        for (i, d) in dirs.iter().enumerate() {
            let mut cmd = Process::new(bin);
            cmd.args([c, "--seeds", "3", "--out"]).arg(d.path());
            if i == 1 {
                cmd.arg("--check");
            }
            let status = cmd.output().expect("run cli").status;
            if !status.success() {
                bad.push(format!("{c} exited {status}"));
            }
            let mut t = BTreeMap::new();
            read_tree(d.path(), d.path(), &mut t);
            trees.push(t);
        }
        files += trees[0].len();
        if trees[0] != trees[1] || trees[0].is_empty() {
            bad.push(format!("{c} outputs differ"));
        }
    }
    (bad.is_empty(), format!("7 commands, {files} files byte-identical and matching goldens; problems {bad:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> (bool, String)); 10] = [
        ("geometric round trip", c1_round_trip),
        ("noiseless plane recovery", c2_plane_recovery),
        ("baseline separation", c3_baselines),
        ("two-finger contact", c4_contact),
        ("continuous-adjustment ablation", c5_feed),
        ("SR/PPM metrics and grasp bench", c6_metrics),
        ("counting accuracy", c7_counting),
        ("beam-force ordering", c8_beam),
        ("calibration round trip", c9_calibration),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = f();
        failed += usize::from(!pass);
        println!("{} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
