//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reconopt::camselect::solve_p2;
use reconopt::pointcloud::{merge_clouds, project, split_points, Projection};
use reconopt::quality::{count_within, fscore};
use reconopt::sim::{
    calibrate_model, critical_path, reduction, simulate_stream, LatencySample, Scenario, ScenarioModel,
    ScenarioParams, SimOutput, Stages, TaskStream,
};
use reconopt::{CameraModel, CloudLabel, ForegroundMask, Point3, PointCloud, VisibilityMatrix};

const DEADLINES: [f64; 3] = [5.0, 7.5, 10.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dance1() -> Scenario {
    Scenario::from_params(ScenarioParams::dance1()).unwrap()
}

fn stream(model: &ScenarioModel, s: &Scenario, tasks: usize, deadline: f64, seed: u64) -> SimOutput {
    simulate_stream(model, &s.camera_map, &TaskStream { tasks, deadline, seed }).unwrap()
}

// 1 -------------------------------------------------------------------------

fn brute_objective(rows: &[u64], n: usize, n_prime: usize) -> usize {
    (0u64..1 << n)
        .filter(|m| m.count_ones() as usize == n_prime)
        .map(|m| rows.iter().filter(|&&r| (r & m).count_ones() >= 2).count())
        .max()
        .unwrap()
}

fn camera_selection_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(3..=8);
        let points = rng.random_range(1..=500);
        let density = rng.random_range(0.1..0.7);
        let rows: Vec<u64> =
            (0..points).map(|_| (0..n).fold(0u64, |acc, c| acc | u64::from(rng.random_bool(density)) << c)).collect();
        let n_prime = rng.random_range(3..=n);
        let m = VisibilityMatrix::from_bits((0..n).collect(), rows.clone(), Vec::new()).unwrap();
        if solve_p2(&m, n_prime).unwrap().objective != brute_objective(&rows, n, n_prime) {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(mismatches == 0 && secs < 30.0, format!("100 instances, {mismatches} mismatches, {secs:.2} s"))
}

// 2 -------------------------------------------------------------------------

fn brute_count(query: &PointCloud, reference: &PointCloud, d: f64) -> usize {
    query
        .points
        .iter()
        .filter(|q| {
            reference.points.iter().any(|r| {
                let (dx, dy, dz) = (q.x - r.x, q.y - r.y, q.z - r.z);
                dx * dx + dy * dy + dz * dz <= d * d
            })
        })
        .count()
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> PointCloud {
    let pts = (0..n)
        .map(|_| Point3::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent), rng.random_range(0.0..extent)))
        .collect();
    PointCloud::new(pts, CloudLabel::Foreground)
}

fn fscore_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for i in 0..200 {
        let (na, nb) = (rng.random_range(1..=2000), rng.random_range(1..=2000));
        let a = random_cloud(&mut rng, na, 0.3);
        let mut b = random_cloud(&mut rng, nb, 0.3);
        if i % 4 == 0 {
            // near-copies exercise the threshold boundary
            b = a.clone();
            for p in &mut b.points {
                p.x += rng.random_range(-0.015..0.015);
            }
        }
        let d = [0.01, 0.02][i % 2];
        if count_within(&a, &b, d) != brute_count(&a, &b, d) || count_within(&b, &a, d) != brute_count(&b, &a, d) {
            mismatches += 1;
        }
    }
    let c = random_cloud(&mut rng, 1000, 1.0);
    let identity = [0.01, 0.02].iter().all(|&d| fscore(&c, &c, d).unwrap().fscore == 1.0);
    outcome(mismatches == 0 && identity, format!("200 pairs, {mismatches} mismatches; identity F = 1: {identity}"))
}

// 3 -------------------------------------------------------------------------

fn latency_calibration() -> Outcome {
    let samples = [(1.0, 26.17), (0.8, 16.07), (0.6, 9.1)].map(|(r, t)| LatencySample { r, n_prime: 7, t });
    let fit = calibrate_model(&samples, 7).unwrap();
    outcome(
        fit.max_rel_residual < 0.05,
        format!("t0 = {:.3}, alpha = {:.4}, max relative residual {:.2}%", fit.t0, fit.alpha, 100.0 * fit.max_rel_residual),
    )
}

// 4 -------------------------------------------------------------------------

/// Step-by-step transcription of the search loop, written against the
/// pseudocode rather than the crate's controller.
fn scripted_search(model: &ScenarioModel, deadline: f64, tasks: usize) -> Vec<(f64, usize)> {
    let n = model.n_cameras;
    let tau = 0.01;
    let step = 0.02;
    let (mut n_prime, mut r_min, mut r_max, mut r_star) = (n, 0.3, 1.0, 1.0);
    let mut solutions: Vec<(f64, usize, f64)> = Vec::new();
    let mut optimization = true;
    let mut r = r_star;
    let mut first = true;
    let mut probe = false;
    let (mut sum, mut count) = (0.0, 0usize);
    let mut emitted = Vec::new();

    let argmax = |sol: &[(f64, usize, f64)]| {
        let mut best = sol[0];
        for &s in &sol[1..] {
            if (s.2, s.1, s.0) > (best.2, best.1, best.0) {
                best = s;
            }
        }
        best
    };

    for _ in 0..tasks {
        emitted.push((r, n_prime));
        let t = model.latency(r, n_prime);
        let q = model.quality(r, n_prime);
        if !optimization {
            sum += t;
            count += 1;
            let avg = sum / count as f64;
            if avg < deadline && t < deadline {
                r_star += step;
            } else if avg > deadline && t > deadline {
                r_star -= step;
            }
            r_star = f64::clamp(r_star, 0.3, 1.0);
            r = r_star;
            continue;
        }
        let mut stop = false;
        let mut next_level = false;
        if first {
            first = false;
            if t <= deadline {
                solutions.push((r, n_prime, q));
                stop = true;
            } else {
                r = r_min;
                probe = true;
                continue;
            }
        } else if t <= deadline {
            r_min = r;
            r_star = r;
            solutions.push((r, n_prime, q));
        } else {
            r_max = r;
            let above = solutions.iter().filter(|s| s.1 > n_prime).map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
            let any = solutions.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
            if probe {
                next_level = true;
            } else if q <= above {
                stop = true;
            } else if q <= any {
                next_level = true;
            }
        }
        probe = false;
        if !stop {
            if next_level || r_max - r_min <= tau + 1e-9 {
                r_min = if solutions.is_empty() { 0.3 } else { r_star };
                r_max = 1.0;
                r = r_min;
                n_prime -= 1;
                probe = true;
                if n_prime < 3 {
                    stop = true;
                }
            } else {
                r = (r_max + r_min) / 2.0;
            }
        }
        if stop {
            if solutions.is_empty() {
                break;
            }
            let best = argmax(&solutions);
            r_star = best.0;
            n_prime = best.1;
            r = r_star;
            optimization = false;
        }
    }
    emitted
}

fn algorithm_trace_equivalence() -> Outcome {
    let s = dance1();
    let model = s.model.noise_free();
    let mut details = Vec::new();
    let mut pass = true;
    for dl in DEADLINES {
        let out = stream(&model, &s, 80, dl, 0);
        let ours: Vec<(f64, usize)> = out.trace.iter().map(|r| (r.r, r.n_prime)).collect();
        let script = scripted_search(&model, dl, 80);
        let first_diff = ours.iter().zip(&script).position(|(a, b)| a.1 != b.1 || (a.0 - b.0).abs() > 1e-12);
        let ok = ours.len() == script.len() && first_diff.is_none();
        pass &= ok;
        details.push(match first_diff {
            None => format!("dt={dl}: {} configs equal", ours.len()),
            Some(i) => format!("dt={dl}: differs at task {i}"),
        });
    }
    outcome(pass, details.join("; "))
}

// 5 -------------------------------------------------------------------------

fn convergence() -> Outcome {
    let s = dance1();
    let mut pass = true;
    let mut details = Vec::new();
    for dl in DEADLINES {
        let out = stream(&s.model, &s, 200, dl, 42);
        let adjusting: Vec<f64> = out.trace[out.search_steps..].iter().map(|r| r.t).collect();
        let mut sum = 0.0;
        let running: Vec<f64> = adjusting
            .iter()
            .enumerate()
            .map(|(i, t)| {
                sum += t;
                sum / (i + 1) as f64
            })
            .collect();
        // first task after which the running average never leaves the band
        let settled = running.iter().rposition(|a| (a - dl).abs() > 1.0).map_or(0, |i| i + 1);
        let ok = out.search_done && settled <= 50 && settled < running.len();
        pass &= ok;
        details.push(format!("dt={dl}: within 1 s from adjusting task {settled}, final avg {:.2}", running.last().unwrap()));
    }
    outcome(pass, details.join("; "))
}

// 6 -------------------------------------------------------------------------

fn search_effort_ordering() -> Outcome {
    let s = dance1();
    let model = s.model.noise_free();
    let steps: Vec<usize> = DEADLINES.iter().map(|&dl| stream(&model, &s, 100, dl, 0).search_steps).collect();
    outcome(steps[2] < steps[1] && steps[1] < steps[0], format!("steps at dt=5/7.5/10: {steps:?}"))
}

// 7 -------------------------------------------------------------------------

fn background_monotonicity() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for t_bg in [20.0, 22.5, 25.0] {
        let mut p = ScenarioParams::dance1();
        p.back_end.t_bg = t_bg;
        let s = Scenario::from_params(p).unwrap();
        let counts: Vec<usize> = DEADLINES.iter().map(|&dl| stream(&s.model, &s, 60, dl, 42).stats.bg_completed).collect();
        pass &= counts[0] < counts[1] && counts[1] < counts[2];
        details.push(format!("T_BG={t_bg}: {counts:?}"));
    }
    outcome(pass, details.join("; "))
}

// 8 -------------------------------------------------------------------------

fn critical_path_accounting() -> Outcome {
    let stages = Stages { sfm: 2.94, split: 0.0, mvs_fg: 8.78, merge: 0.26 };
    let total = critical_path(&stages);
    let pct = 100.0 * reduction(total, 26.17);
    let ok = (total - 11.98).abs() < 1e-9 && format!("{pct:.2}") == "54.22";
    outcome(ok, format!("total {total:.2} s, reduction {pct:.2}%"))
}

// 9 -------------------------------------------------------------------------

fn fg_views_oracle(p: &Point3, masks: &[ForegroundMask], cams: &[CameraModel]) -> usize {
    cams.iter()
        .zip(masks)
        .filter(|(c, m)| match project(p, c) {
            Projection::Pixel { u, v } if u >= 0.0 && v >= 0.0 => {
                let (x, y) = (u.floor() as usize, v.floor() as usize);
                x < m.width && y < m.height && m.data[y * m.width + x]
            }
            _ => false,
        })
        .count()
}

fn split_merge_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    for _ in 0..100 {
        let n_cams = rng.random_range(3..=6);
        let cams: Vec<CameraModel> = (0..n_cams)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n_cams as f64 + rng.random_range(0.0..0.3);
                CameraModel::look_at(i, [4.0 * a.cos(), 4.0 * a.sin(), 1.0], [0.0, 0.0, 0.0], 200.0, 80, 60).unwrap()
            })
            .collect();
        let masks: Vec<ForegroundMask> = cams
            .iter()
            .map(|c| {
                let mut m = ForegroundMask::empty(c.id, c.width, c.height);
                let (x0, y0) = (rng.random_range(0..60), rng.random_range(0..45));
                for y in y0..(y0 + rng.random_range(1..30)).min(60) {
                    for x in x0..(x0 + rng.random_range(1..40)).min(80) {
                        m.set(x, y, true);
                    }
                }
                m
            })
            .collect();
        let mut pts: Vec<Point3> = (0..rng.random_range(0..300))
            .map(|_| {
                Point3::with_color(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-0.5..1.5),
                    [rng.random(), rng.random(), rng.random()],
                )
            })
            .collect();
        if pts.len() > 2 {
            let dup = pts[0];
            pts.push(dup);
        }
        let cloud = PointCloud::new(pts, CloudLabel::Full);
        let min_views = rng.random_range(1..=2);
        let (fg, bg) = split_points(&cloud, &masks, &cams, min_views).unwrap();
        let merged = merge_clouds(&fg, &bg);
        let partition = fg.points.iter().all(|p| fg_views_oracle(p, &masks, &cams) >= min_views)
            && bg.points.iter().all(|p| fg_views_oracle(p, &masks, &cams) < min_views)
            && fg.len() + bg.len() == cloud.len();
        if !(merged.same_multiset(&cloud) && partition) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("100 scenes, {failures} failures"))
}

// 10 ------------------------------------------------------------------------

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Run a subcommand into a fresh output directory; return stdout, exit code
/// and every output file's bytes in name order.
fn snapshot(args: &[String], out: &Path) -> (Vec<u8>, Option<i32>, Vec<(String, Vec<u8>)>) {
    let o = Command::new(env!("CARGO_BIN_EXE_reconopt"))
        .args(args)
        .env("RECONOPT_OUT_DIR", out)
        .output()
        .expect("spawn reconopt");
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .map(|rd| {
            rd.map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect()
        })
        .unwrap_or_default();
    files.sort();
    (o.stdout, o.status.code(), files)
}

fn determinism() -> Outcome {
    let fx = manifest_dir().join("tests/fixtures/rig");
    let scenario = manifest_dir().join("../../scenarios/dance1.json");
    let frames = tempfile::tempdir().unwrap();
    for i in 0..6 {
        let mut f = vec![40u8; 48 * 32];
        if i >= 2 {
            for y in 8..16 {
                for x in 4 * i..4 * i + 8 {
                    f[y * 48 + x] = 220;
                }
            }
        }
        reconopt::pgm::write(frames.path().join(format!("f{i}.pgm")), 48, 32, &f).unwrap();
    }
    let p = |x: &Path| x.to_string_lossy().into_owned();
    let cmds: Vec<(&str, Vec<String>)> = vec![
        ("eval", vec!["eval".into(), p(&fx.join("cloud.ply")), p(&fx.join("cloud.ply"))]),
        (
            "select-cameras",
            vec!["select-cameras".into(), p(&fx.join("cloud.ply")), p(&fx.join("cameras.json")), "--map".into()],
        ),
        ("simulate", vec!["simulate".into(), p(&scenario), "--deadline".into(), "7.5".into()]),
        ("segment", vec!["segment".into(), p(frames.path())]),
        (
            "pipeline",
            vec!["pipeline".into(), p(&fx.join("cloud.ply")), p(&fx.join("masks")), p(&fx.join("cameras.json"))],
        ),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (name, args) in cmds {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = snapshot(&args, a.path());
        let second = snapshot(&args, b.path());
        let ok = first.1 == Some(0) && first == second;
        pass &= ok;
        details.push(format!("{name} {}", if ok { "identical" } else { "differs" }));
    }
    outcome(pass, details.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("camera-selection exactness", camera_selection_exactness),
        ("F-score oracle equivalence", fscore_oracle_equivalence),
        ("latency-law calibration", latency_calibration),
        ("search trace equivalence", algorithm_trace_equivalence),
        ("convergence within 1 s", convergence),
        ("search-effort ordering", search_effort_ordering),
        ("background-update monotonicity", background_monotonicity),
        ("critical-path accounting", critical_path_accounting),
        ("split/merge round trip", split_merge_round_trip),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {:<34} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
