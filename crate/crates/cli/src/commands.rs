//! The seven experiment commands. Each is a pure function of the resolved
//! configuration and the seed list; work fans out over rayon and rows are
//! emitted in (seed, index) order.

use rayon::prelude::*;
use rotip_core::beam::{default_locations, inertia_moment, location_report, DeflectionCurve, OrderingVerdict};
use rotip_core::bench::{plane_errors, plane_mask, run_count_trial, run_grasp_trial, GraspBench, GraspTrial};
use rotip_core::calibration::{calibrate, synthesize_set, CalibrationReport};
use rotip_core::contact::{run_contact_trial, success_rates, ContactMethod, ContactOutcome, ContactWorld};
use rotip_core::counting::counting_accuracy;
use rotip_core::feed::{mean_std, ppm_metric, simulate_feed, sr_metric, FeedLog, FeedOutcome, FeedPolicy, FeedScenario, GraspResult, Material};
use rotip_core::oracle::MaskNoiseParams;
use rotip_core::rng::{derive, seeded};
use rotip_core::sensor::{SensorGeometry, SurfaceGrid};
use rand::Rng;
use serde_json::json;

use crate::config::ScenarioConfig;
use crate::output::{csv_bytes, jsonl, num, opt_num, Check, RunOutput};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    EstimatePlane { masks: bool },
    ContactTrials { methods: Option<Vec<String>>, trace: bool },
    Feed { policies: Vec<FeedPolicy> },
    GraspBench { counting: Vec<bool> },
    ForceAnalysis { material: Option<String> },
    Calibrate { noisy: Option<bool> },
    CountBench,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::EstimatePlane { .. } => "estimate-plane",
            Command::ContactTrials { .. } => "contact-trials",
            Command::Feed { .. } => "feed",
            Command::GraspBench { .. } => "grasp-bench",
            Command::ForceAnalysis { .. } => "force-analysis",
            Command::Calibrate { .. } => "calibrate",
            Command::CountBench => "count-bench",
        }
    }

    /// Canonical argument string recorded with goldens.
    pub fn args(&self) -> String {
        match self {
            Command::EstimatePlane { masks } => format!("masks={masks}"),
            Command::ContactTrials { methods, trace } => {
                format!("methods={} trace={trace}", methods.as_ref().map_or("config".into(), |m| m.join(",")))
            }
            Command::Feed { policies } => {
                format!("policies={}", policies.iter().map(|p| p.label()).collect::<Vec<_>>().join(","))
            }
            Command::GraspBench { counting } => {
                format!("counting={}", counting.iter().map(|c| if *c { "on" } else { "off" }).collect::<Vec<_>>().join(","))
            }
            Command::ForceAnalysis { material } => format!("material={}", material.as_deref().unwrap_or("config")),
            Command::Calibrate { noisy } => format!("noisy={}", noisy.map_or("config".into(), |n| n.to_string())),
            Command::CountBench => String::new(),
        }
    }
}

pub fn run(cmd: &Command, cfg: &ScenarioConfig, seeds: &[u64]) -> Result<RunOutput, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Config("seeds: seed list is empty".into()));
    }
    let ctx = Ctx { cfg, seeds, hash: cfg.hash() };
    match cmd {
        Command::EstimatePlane { masks } => estimate_plane(&ctx, *masks),
        Command::ContactTrials { methods, trace } => contact_trials(&ctx, methods.as_deref(), *trace),
        Command::Feed { policies } => feed(&ctx, policies),
        Command::GraspBench { counting } => grasp_bench(&ctx, counting),
        Command::ForceAnalysis { material } => force_analysis(&ctx, material.as_deref()),
        Command::Calibrate { noisy } => calibrate_cmd(&ctx, noisy.unwrap_or(cfg.calibration.noisy)),
        Command::CountBench => count_bench(&ctx),
    }
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    seeds: &'a [u64],
    hash: String,
}

impl Ctx<'_> {
    fn csv(&self, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
        csv_bytes(&self.hash, self.seeds, header, rows)
    }
}

fn mean(xs: &[f64]) -> f64 {
    mean_std(xs).0
}

fn estimate_plane(ctx: &Ctx, masks: bool) -> Result<RunOutput, CliError> {
    let cfg = ctx.cfg;
    let grid = SurfaceGrid::new(&cfg.intrinsics, &cfg.geometry);
    let sweep = cfg.plane_sweep();
    let angles = cfg.sweep.angles();
    let jobs: Vec<(u64, usize)> = ctx.seeds.iter().flat_map(|&s| (0..angles.len()).map(move |i| (s, i))).collect();
    let results = jobs
        .par_iter()
        .map(|&(seed, i)| plane_errors(&grid, &sweep, angles[i], derive(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Runtime)?;

    let mut rows = Vec::new();
    for (&(seed, i), e) in jobs.iter().zip(&results) {
        for (method, err) in [("tactile", e.tactile), ("vision", e.vision), ("force", e.force)] {
            rows.push(vec![num(angles[i]), method.into(), seed.to_string(), num(err)]);
        }
    }
    let mut out = RunOutput::default();
    out.add("estimate_plane.csv", ctx.csv(&["angle_deg", "method", "seed", "error_deg"], &rows)?);

    let tactile: Vec<f64> = results.iter().map(|e| e.tactile).collect();
    let vision: Vec<f64> = results.iter().map(|e| e.vision).collect();
    let force: Vec<f64> = results.iter().map(|e| e.force).collect();
    let mut summary = Vec::new();
    for (name, xs) in [("tactile", &tactile), ("vision", &vision), ("force", &force)] {
        let (m, s) = mean_std(xs);
        let max = xs.iter().copied().fold(0.0, f64::max);
        summary.push(vec![name.into(), xs.len().to_string(), num(m), num(s), num(max)]);
        out.line(format!("{name:8} n={} mean={m:.4} std={s:.4} max={max:.4} deg", xs.len()));
    }
    out.add(
        "estimate_plane_summary.csv",
        ctx.csv(&["method", "samples", "mean_error_deg", "std_error_deg", "max_error_deg"], &summary)?,
    );

    if masks {
        let seed = ctx.seeds[0];
        let zero = (0..angles.len()).min_by(|&a, &b| angles[a].abs().total_cmp(&angles[b].abs())).unwrap_or(0);
        let mut picks = vec![0, zero, angles.len() - 1];
        picks.dedup();
        for i in picks {
            let m = plane_mask(&grid, &sweep, angles[i], derive(seed, i as u64)).map_err(CliError::Runtime)?;
            out.add(format!("masks/seed{seed}_angle{:+.0}.pgm", angles[i]), m.to_pgm());
        }
    }

    let t_max = tactile.iter().copied().fold(0.0, f64::max);
    let t_mean = mean(&tactile);
    if sweep.mask_noise.is_noiseless() {
        out.checks.push(Check::new(
            "noiseless tactile bound",
            t_max < 0.1 && t_mean < 0.02,
            format!("max {t_max:.4} < 0.1, mean {t_mean:.4} < 0.02"),
        ));
    } else {
        out.checks.push(Check::new(
            "noisy tactile band",
            (0.5..=3.0).contains(&t_mean),
            format!("mean {t_mean:.4} in [0.5, 3]"),
        ));
    }
    let mut bad = Vec::new();
    for &seed in ctx.seeds {
        let sel = |f: fn(&rotip_core::bench::PlaneErrors) -> f64| {
            let xs: Vec<f64> = jobs.iter().zip(&results).filter(|(j, _)| j.0 == seed).map(|(_, e)| f(e)).collect();
            mean(&xs)
        };
        let (t, v, f) = (sel(|e| e.tactile), sel(|e| e.vision), sel(|e| e.force));
        if !(t < v && v < f) {
            bad.push(format!("seed {seed}: {t:.3}/{v:.3}/{f:.3}"));
        }
    }
    out.checks.push(Check::new(
        "tactile < vision < force per seed",
        bad.is_empty(),
        if bad.is_empty() { format!("{} seeds", ctx.seeds.len()) } else { bad.join("; ") },
    ));
    Ok(out)
}

fn contact_trials(ctx: &Ctx, methods: Option<&[String]>, trace: bool) -> Result<RunOutput, CliError> {
    let cfg = ctx.cfg;
    let methods: Vec<ContactMethod> = match methods {
        None => cfg.methods(),
        Some(names) => names
            .iter()
            .map(|n| ContactMethod::from_label(n).ok_or_else(|| CliError::Config(format!("methods: unknown method `{n}`"))))
            .collect::<Result<_, _>>()?,
    };
    if methods.is_empty() {
        return Err(CliError::Config("methods: no contact method selected".into()));
    }
    let setup = cfg.contact_setup();
    let world = ContactWorld::new(&setup);
    let jobs: Vec<(u64, ContactMethod)> = ctx.seeds.iter().flat_map(|&s| methods.iter().map(move |&m| (s, m))).collect();
    let outcomes: Vec<ContactOutcome> =
        jobs.par_iter().map(|&(seed, m)| run_contact_trial(&setup, &world, m, seed, trace)).collect();

    let mut out = RunOutput::default();
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            vec![
                o.seed.to_string(),
                o.method.label().into(),
                o.one_finger.to_string(),
                o.two_finger.to_string(),
                o.rounds.to_string(),
                o.ticks.to_string(),
                o.estop.to_string(),
                num(o.initial_misalignment_deg),
                o.failure.clone().unwrap_or_default(),
            ]
        })
        .collect();
    out.add(
        "contact_trials.csv",
        ctx.csv(
            &["seed", "method", "one_finger", "two_finger", "rounds", "ticks", "estop", "initial_misalignment_deg", "failure"],
            &rows,
        )?,
    );
    let mut summary = Vec::new();
    let mut rates = Vec::new();
    for &m in &methods {
        let batch: Vec<ContactOutcome> = outcomes.iter().filter(|o| o.method == m).cloned().collect();
        let (one, two) = success_rates(&batch);
        let rounds: Vec<f64> = batch.iter().map(|o| o.rounds as f64).collect();
        summary.push(vec![m.label().into(), batch.len().to_string(), num(one), num(two), num(mean(&rounds))]);
        out.line(format!("{:22} trials={} one_finger={one:.3} two_finger={two:.3}", m.label(), batch.len()));
        rates.push((m, two));
    }
    out.add(
        "contact_summary.csv",
        ctx.csv(&["method", "trials", "one_finger_sr", "two_finger_sr", "mean_rounds"], &summary)?,
    );
    if trace {
        for o in &outcomes {
            out.add(format!("traces/{}_{}.jsonl", o.method.label(), o.seed), jsonl(&o.trace));
        }
    }

    let rate = |m: ContactMethod| rates.iter().find(|r| r.0 == m).map(|r| r.1);
    if let Some(t) = rate(ContactMethod::VisionForceTactile) {
        if setup.mask_noise.is_noiseless() {
            out.checks.push(Check::new("noiseless tactile two-finger", t == 1.0, format!("SR {t:.3} == 1")));
        }
        if let Some(v) = rate(ContactMethod::Vision) {
            out.checks.push(Check::new("vision below tactile", v < t, format!("vision {v:.3} < tactile {t:.3}")));
        }
    }
    Ok(out)
}

fn feed_summary(log: &FeedLog) -> (GraspResult, f64, f64) {
    let elapsed = log.ticks.last().map_or(0.0, |t| t.time);
    let (m, s) = mean_std(&log.sheet_times());
    (GraspResult { grasped: log.fed(), target: log.total_sheets, elapsed }, m, s)
}

fn feed(ctx: &Ctx, policies: &[FeedPolicy]) -> Result<RunOutput, CliError> {
    let cfg = ctx.cfg;
    let mut scenario = FeedScenario::new(cfg.scenario.sheets, cfg.material()?);
    scenario.params = cfg.feed_params();
    scenario.tilt_deg = cfg.scenario.tilt_deg;
    scenario.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let jobs: Vec<(u64, FeedPolicy)> = ctx.seeds.iter().flat_map(|&s| policies.iter().map(move |&p| (s, p))).collect();
    let logs = jobs
        .par_iter()
        .map(|&(seed, p)| simulate_feed(&scenario, p, seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut out = RunOutput::default();
    let mut rows = Vec::new();
    let mut sheets = Vec::new();
    for log in &logs {
        let (g, m, s) = feed_summary(log);
        let (sr, ppm) = (sr_metric(&g), if g.elapsed > 0.0 { ppm_metric(&g) } else { 0.0 });
        rows.push(vec![
            cfg.scenario.name.clone(),
            log.seed.to_string(),
            log.policy.label().into(),
            log.fed().to_string(),
            num(sr),
            num(ppm),
            num(m),
            num(s),
        ]);
        for ev in &log.sheets {
            sheets.push(vec![log.seed.to_string(), log.policy.label().into(), ev.sheet.to_string(), num(ev.duration)]);
        }
        out.add(format!("feed_logs/{}_{}.jsonl", log.policy.label(), log.seed), log.to_jsonl().into_bytes());
    }
    out.add(
        "feed.csv",
        ctx.csv(&["scenario", "seed", "policy", "sheets_fed", "sr", "ppm", "mean_feed_s", "std_feed_s"], &rows)?,
    );
    out.add("feed_sheets.csv", ctx.csv(&["seed", "policy", "sheet", "time_s"], &sheets)?);

    for &p in policies {
        let batch: Vec<&FeedLog> = logs.iter().filter(|l| l.policy == p).collect();
        let fed: Vec<f64> = batch.iter().map(|l| l.fed() as f64).collect();
        let times: Vec<f64> = batch.iter().flat_map(|l| l.sheet_times()).collect();
        let (m, s) = mean_std(&times);
        out.line(format!("{:10} runs={} mean_fed={:.2} sheet_time={m:.3}+-{s:.3} s", p.label(), batch.len(), mean(&fed)));
    }

    let n = scenario.sheets;
    if policies.contains(&FeedPolicy::WithCA) {
        let mut bad = Vec::new();
        for l in logs.iter().filter(|l| l.policy == FeedPolicy::WithCA) {
            let (m, s) = mean_std(&l.sheet_times());
            if l.fed() != n || s > 0.15 * m {
                bad.push(format!("seed {}: fed {} std/mean {:.3}", l.seed, l.fed(), s / m));
            }
        }
        out.checks.push(Check::new(
            "with_ca feeds all, std <= 0.15 mean",
            bad.is_empty(),
            if bad.is_empty() { format!("{n}/{n} sheets") } else { bad.join("; ") },
        ));
    }
    if policies.contains(&FeedPolicy::WithoutCA) && n >= 8 {
        let mut bad = Vec::new();
        let (mut early, mut late) = (Vec::new(), Vec::new());
        for l in logs.iter().filter(|l| l.policy == FeedPolicy::WithoutCA) {
            let t = l.sheet_times();
            early.extend_from_slice(&t[..3.min(t.len())]);
            late.extend_from_slice(&t[3.min(t.len())..6.min(t.len())]);
            if !matches!(l.outcome, FeedOutcome::ContactLost { sheet: 6..=8 }) {
                bad.push(format!("seed {}: {:?}", l.seed, l.outcome));
            }
        }
        out.checks.push(Check::new(
            "without_ca loses contact at sheet 7 +- 1",
            bad.is_empty(),
            if bad.is_empty() { "all seeds".into() } else { bad.join("; ") },
        ));
        let ratio = mean(&late) / mean(&early);
        out.checks.push(Check::new(
            "without_ca sheets 4-6 slower than 1-3 by >= 30%",
            ratio >= 1.3,
            format!("pooled ratio {ratio:.3}"),
        ));
    }
    if policies.len() == 2 {
        let worse = ctx.seeds.iter().filter(|&&s| {
            let fed = |p| logs.iter().find(|l| l.seed == s && l.policy == p).map_or(0, |l| l.fed());
            fed(FeedPolicy::WithCA) < fed(FeedPolicy::WithoutCA)
        });
        let worse: Vec<String> = worse.map(u64::to_string).collect();
        let detail = if worse.is_empty() { "all seeds".to_string() } else { format!("seeds {}", worse.join(",")) };
        out.checks.push(Check::new("with_ca feeds at least as many", worse.is_empty(), detail));
    }
    Ok(out)
}

fn grasp_bench(ctx: &Ctx, counting: &[bool]) -> Result<RunOutput, CliError> {
    let cfg = ctx.cfg;
    let materials = cfg.materials();
    let tilts = &cfg.scenario.tilts;
    let mut benches = Vec::new();
    for &m in &materials {
        for &t in tilts {
            let mut contact = cfg.contact_setup();
            contact.object_tilt_deg = t;
            benches.push(GraspBench {
                contact,
                material: m,
                feed: cfg.feed_params(),
                detector: cfg.detector_for(m),
                tracking: cfg.tracking,
                bench: cfg.bench,
                tilt_deg: t,
            });
        }
    }
    let world = ContactWorld::new(&cfg.contact_setup());
    let jobs: Vec<(u64, usize, bool)> = ctx
        .seeds
        .iter()
        .flat_map(|&s| (0..benches.len()).flat_map(move |b| counting.iter().map(move |&c| (s, b, c))))
        .collect();
    let trials: Vec<GraspTrial> = jobs
        .par_iter()
        .map(|&(seed, b, c)| run_grasp_trial(&benches[b], &world, c, seed))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let label = |c: bool| if c { "on" } else { "off" };
    let mut out = RunOutput::default();
    let rows: Vec<Vec<String>> = jobs
        .iter()
        .zip(&trials)
        .map(|(&(seed, b, c), t)| {
            vec![
                seed.to_string(),
                benches[b].material.label().into(),
                num(benches[b].tilt_deg),
                label(c).into(),
                t.two_finger.to_string(),
                t.result.grasped.to_string(),
                t.result.target.to_string(),
                num(t.result.elapsed),
                num(t.sr),
                num(t.ppm),
            ]
        })
        .collect();
    out.add(
        "grasp_bench.csv",
        ctx.csv(
            &["seed", "material", "tilt_deg", "counting", "two_finger", "grasped", "target", "elapsed_s", "sr", "ppm"],
            &rows,
        )?,
    );

    let mut summary = Vec::new();
    let select = |pred: &dyn Fn(usize, bool) -> bool| -> (Vec<f64>, Vec<f64>) {
        jobs.iter().zip(&trials).filter(|(j, _)| pred(j.1, j.2)).map(|(_, t)| (t.sr, t.ppm)).unzip()
    };
    for (b, bench) in benches.iter().enumerate() {
        for &c in counting {
            let (sr, ppm) = select(&|jb, jc| jb == b && jc == c);
            let ((sm, ss), (pm, ps)) = (mean_std(&sr), mean_std(&ppm));
            summary.push(vec![
                bench.material.label().into(),
                num(bench.tilt_deg),
                label(c).into(),
                sr.len().to_string(),
                num(sm),
                num(ss),
                num(pm),
                num(ps),
            ]);
        }
    }
    let mut overall = Vec::new();
    for &c in counting {
        let (sr, ppm) = select(&|_, jc| jc == c);
        let ((sm, ss), (pm, ps)) = (mean_std(&sr), mean_std(&ppm));
        summary.push(vec!["all".into(), "all".into(), label(c).into(), sr.len().to_string(), num(sm), num(ss), num(pm), num(ps)]);
        out.line(format!("counting {:3} trials={} SR={sm:.4} PPM={pm:.3}", label(c), sr.len()));
        overall.push((c, sm, pm, sr));
    }
    out.add(
        "grasp_summary.csv",
        ctx.csv(&["material", "tilt_deg", "counting", "trials", "sr_mean", "sr_std", "ppm_mean", "ppm_std"], &summary)?,
    );
    out.add("external_reference.csv", ctx.csv(&["approach", "tilt_deg", "material", "sr", "ppm", "source"], &external_reference())?);

    let noiseless = is_noiseless(cfg);
    if let (Some(on), Some(off), false) = (overall.iter().find(|o| o.0), overall.iter().find(|o| !o.0), noiseless) {
        out.checks.push(Check::new(
            "counting raises SR and lowers PPM",
            on.1 > off.1 && on.2 < off.2,
            format!("SR {:.4} > {:.4}, PPM {:.3} < {:.3}", on.1, off.1, on.2, off.2),
        ));
    }
    if noiseless {
        let all_exact = trials.iter().all(|t| t.sr == 1.0);
        out.checks.push(Check::new("noiseless SR = 1", all_exact, format!("{} trials", trials.len())));
    }
    Ok(out)
}

/// No segmentation, feed or detector noise anywhere.
fn is_noiseless(cfg: &ScenarioConfig) -> bool {
    let r = cfg.noise.recalls;
    cfg.noise.mask.is_noiseless()
        && cfg.noise.feed_noiseless
        && [r.print_paper, r.coated_paper, r.plastic_sheet].iter().all(|&x| x == 1.0)
        && cfg.detector.false_positive_rate == 0.0
}

/// Published results of the two single-page baselines, copied verbatim for
/// side-by-side tables. They are not simulated.
fn external_reference() -> Vec<Vec<String>> {
    const ROWS: [(&str, f64, [(f64, f64); 3]); 6] = [
        ("Flex&Flip", 60.0, [(0.60, 3.10), (0.57, 2.95), (0.43, 2.59)]),
        ("FlipBot", 60.0, [(0.83, 4.28), (0.81, 4.18), (0.68, 3.52)]),
        ("Flex&Flip", 30.0, [(0.69, 3.57), (0.73, 3.77), (0.43, 2.22)]),
        ("FlipBot", 30.0, [(0.91, 4.68), (0.91, 4.70), (0.67, 3.46)]),
        ("Flex&Flip", 0.0, [(0.71, 3.65), (0.80, 4.11), (0.51, 2.61)]),
        ("FlipBot", 0.0, [(0.92, 4.75), (0.95, 4.91), (0.75, 3.88)]),
    ];
    let mut rows = Vec::new();
    for (name, tilt, vals) in ROWS {
        for (m, (sr, ppm)) in Material::ALL.iter().zip(vals) {
            rows.push(vec![name.into(), num(tilt), m.label().into(), num(sr), num(ppm), "external reference value".into()]);
        }
    }
    rows
}

fn force_analysis(ctx: &Ctx, material: Option<&str>) -> Result<RunOutput, CliError> {
    let cfg = ctx.cfg;
    let material = match material {
        None => cfg.material()?,
        Some(m) => Material::from_label(m).ok_or_else(|| CliError::Config(format!("material: unknown preset `{m}`")))?,
    };
    let mut preset = material.preset();
    preset.mu_s1 = cfg.beam.mu_s1.unwrap_or(preset.mu_s1);
    preset.mu_k2 = cfg.beam.mu_k2.unwrap_or(preset.mu_k2);
    let l = cfg.beam.span;
    let specs = default_locations(&preset, l, cfg.geometry.r);
    let curve = DeflectionCurve::raised_cosine(l, l * cfg.beam.delta_ratio);
    let report = location_report(&specs, &curve).map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut out = RunOutput::default();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| match &r.result {
            Ok(f) => vec![r.label.clone(), format!("{:.9}", f.f_min), format!("{:.9}", f.i_z), format!("{:.9}", f.m1), "true".into()],
            Err(_) => vec![r.label.clone(), String::new(), String::new(), String::new(), "false".into()],
        })
        .collect();
    out.add("force_analysis.csv", ctx.csv(&["location", "F_min_N", "I_z", "M1", "feasible"], &rows)?);
    let ratio = report.rows.last().and_then(|r| r.ratio);
    out.add(
        "force_summary.csv",
        ctx.csv(
            &["material", "curve", "verdict", "ratio_first_last"],
            &[vec![material.label().into(), curve.family().into(), report.verdict.label().into(), opt_num(ratio)]],
        )?,
    );
    for r in &report.rows {
        match &r.result {
            Ok(f) => out.line(format!("{:13} F_min={:.4} N", r.label, f.f_min)),
            Err(e) => out.line(format!("{:13} {e}", r.label)),
        }
    }
    out.line(format!("ordering {}", report.verdict.label()));
    if report.verdict == OrderingVerdict::Infeasible {
        out.failure = Some("force analysis infeasible: static friction does not exceed kinetic friction".into());
    }

    out.checks.push(Check::new(
        "strict ordering center > edge > corner1 > corner2",
        report.verdict == OrderingVerdict::Strict,
        report.verdict.label(),
    ));
    out.checks.push(Check::new(
        "center / corner2 >= 2",
        ratio.is_some_and(|r| r >= 2.0),
        format!("ratio {}", opt_num(ratio)),
    ));
    let base = &specs[0].1;
    let i0 = inertia_moment(base);
    let thick = inertia_moment(&rotip_core::beam::BeamSpec { h: 2.0 * base.h, ..base.clone() });
    let wide = inertia_moment(&rotip_core::beam::BeamSpec { width: base.width.scaled(3.0), ..base.clone() });
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let (e_h, e_w) = (rel(thick, 8.0 * i0), rel(wide, 3.0 * i0));
    out.checks.push(Check::new(
        "I_z scales with h^3 and width",
        e_h <= 1e-12 && e_w <= 1e-12,
        format!("relative errors {e_h:.1e}, {e_w:.1e}"),
    ));
    Ok(out)
}

fn calibrate_cmd(ctx: &Ctx, noisy: bool) -> Result<RunOutput, CliError> {
    let cfg = ctx.cfg;
    let c = &cfg.calibration;
    let g0 = cfg.geometry;
    let noise = if noisy { cfg.noise.mask } else { MaskNoiseParams::NONE };
    let runs: Vec<(SensorGeometry, Result<CalibrationReport, String>)> = ctx
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = seeded(derive(seed, 0));
            let mut draw = || rng.random_range(-c.max_offset..=c.max_offset);
            let truth = SensorGeometry { r: g0.r, ox: g0.ox + draw(), oy: g0.oy + draw(), oz: g0.oz + draw() };
            let set = synthesize_set(&cfg.intrinsics, &truth, &c.capture, &noise, derive(seed, 1));
            let params = rotip_core::calibration::CalibrationParams { seed: derive(seed, 2), ..c.solver };
            (truth, calibrate(&set, &cfg.intrinsics, &g0, &params).map_err(|e| e.to_string()))
        })
        .collect();

    let mut out = RunOutput::default();
    let mut rows = Vec::new();
    let mut report = Vec::new();
    let mut errors = Vec::new();
    let mut failed = Vec::new();
    for (&seed, (t, r)) in ctx.seeds.iter().zip(&runs) {
        let mut row = vec![seed.to_string(), num(t.ox), num(t.oy), num(t.oz)];
        match r {
            Ok(rep) => {
                row.extend([
                    num(rep.ox),
                    num(rep.oy),
                    num(rep.oz),
                    opt_num(rep.max_error),
                    num(rep.xy_residual),
                    num(rep.z_residual_deg),
                    rep.passes.to_string(),
                    rep.evaluations.to_string(),
                    String::new(),
                ]);
                errors.push(rep.max_error.unwrap_or(f64::INFINITY));
                report.push(json!({"seed": seed, "truth": t, "report": rep}));
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 8).chain([e.clone()]));
                failed.push(format!("seed {seed}: {e}"));
                report.push(json!({"seed": seed, "truth": t, "error": e}));
            }
        }
        rows.push(row);
    }
    out.add(
        "calibration.csv",
        ctx.csv(
            &[
                "seed", "true_ox", "true_oy", "true_oz", "ox", "oy", "oz", "max_error_mm", "xy_residual", "z_residual_deg",
                "passes", "evaluations", "error",
            ],
            &rows,
        )?,
    );
    out.add("calibration_report.jsonl", jsonl(&report));
    let worst = errors.iter().copied().fold(0.0, f64::max);
    out.line(format!("calibrated {}/{} draws, worst offset error {worst:.4} mm", errors.len(), runs.len()));
    if !failed.is_empty() {
        out.failure = Some(format!("calibration failed: {}", failed.join("; ")));
    }
    let bound = if noisy { 0.3 } else { 0.05 };
    out.checks.push(Check::new(
        "offsets recovered",
        failed.is_empty() && worst <= bound,
        format!("{}/{} within {bound} mm (worst {worst:.4})", errors.iter().filter(|&&e| e <= bound).count(), runs.len()),
    ));
    Ok(out)
}

fn count_bench(ctx: &Ctx) -> Result<RunOutput, CliError> {
    let cfg = ctx.cfg;
    let materials = cfg.materials();
    let feed = cfg.feed_params();
    let sheets = cfg.bench.target;
    let jobs: Vec<(u64, Material)> = ctx.seeds.iter().flat_map(|&s| materials.iter().map(move |&m| (s, m))).collect();
    let counts = jobs
        .par_iter()
        .map(|&(seed, m)| {
            run_count_trial(sheets, m, &feed, cfg.bench.counting_speed, &cfg.detector_for(m), &cfg.tracking, seed)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut out = RunOutput::default();
    let rows: Vec<Vec<String>> = jobs
        .iter()
        .zip(&counts)
        .map(|(&(seed, m), &(c, fed))| {
            vec![seed.to_string(), m.label().into(), c.to_string(), fed.to_string(), (c == fed).to_string()]
        })
        .collect();
    out.add("count_bench.csv", ctx.csv(&["seed", "material", "count", "true_count", "exact"], &rows)?);
    let mut summary = Vec::new();
    for &m in &materials {
        let pairs: Vec<(u32, u32)> = jobs.iter().zip(&counts).filter(|(j, _)| j.1 == m).map(|(_, &p)| p).collect();
        let acc = counting_accuracy(&pairs);
        let recall = cfg.noise.recalls.get(m);
        summary.push(vec![m.label().into(), num(recall), pairs.len().to_string(), num(acc)]);
        out.line(format!("{:14} recall={recall:.3} trials={} accuracy={acc:.3}", m.label(), pairs.len()));
        let floor = match m {
            Material::PrintPaper => 0.95,
            Material::CoatedPaper => 0.90,
            Material::PlasticSheet => 0.96,
        };
        if recall == m.preset().recall {
            out.checks.push(Check::new(
                &format!("{} counting accuracy", m.label()),
                acc >= floor,
                format!("{acc:.3} >= {floor}"),
            ));
        }
    }
    out.add("count_summary.csv", ctx.csv(&["material", "recall", "trials", "accuracy"], &summary)?);
    Ok(out)
}
