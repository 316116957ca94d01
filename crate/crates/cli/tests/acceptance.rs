//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::fs;
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use markerloc::estimator::{ctrv_delta, estimate_pose, MarkerObservation, OMEGA_MIN};
use markerloc::exec::Execution;
use markerloc::geometry::{wrap_pi, yaw_matrix, Mat3, Vec2, Vec3};
use markerloc::horizontation::{ImuSample, OrientationTracker};
use markerloc::io;
use markerloc::marker_map::{Marker, MarkerLibrary, RoughPose};
use markerloc::pipeline::{run_pipeline, PipelineParams};
use markerloc::pointcloud::{min_marker_separation, PipelineConfig};
use markerloc::simulator::{evaluate, simulate, NoiseConfig, ScenarioConfig, Segment};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bundled(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"));
    ScenarioConfig::from_toml_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn markerloc(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_markerloc"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "markerloc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// simulate + estimate through the command line, evaluated from the files.
fn cli_round(cfg: &ScenarioConfig, dir: &Path) -> markerloc::simulator::ErrorReport {
    let scenario = dir.join("scenario.toml");
    fs::write(&scenario, cfg.to_toml_string()).unwrap();
    markerloc(&["simulate", "--config", path(&scenario), "--out", path(dir)]);
    markerloc(&["estimate", "--config", path(&dir.join("run.toml"))]);
    let est = io::read_trajectory(fs::File::open(dir.join("trajectory.csv")).unwrap()).unwrap();
    let truth = io::read_truth(fs::File::open(dir.join("truth.csv")).unwrap()).unwrap();
    evaluate(&est, &truth).unwrap()
}

fn noiseless_oracle() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for name in ["driveby_10kmh", "arc", "slalom"] {
        let mut cfg = bundled(name);
        cfg.noise = NoiseConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let t = Instant::now();
        let r = cli_round(&cfg, dir.path());
        let secs = t.elapsed().as_secs_f64();
        let (p, y, v) = (
            r.position.unwrap().mean,
            r.yaw_deg.unwrap().mean,
            r.velocity.unwrap().mean,
        );
        pass &= p < 1e-4 && y < 1e-4 && v < 1e-4 && secs < 30.0;
        lines.push(format!(
            "{name}: pos {p:.2e} m, yaw {y:.2e} deg, vel {v:.2e} m/s, {secs:.1} s"
        ));
    }
    outcome(pass, lines.join("; "))
}

fn driveby(kmh: f64) -> ScenarioConfig {
    let mut cfg = bundled("driveby_40kmh");
    let v = kmh / 3.6;
    let length = 100.0;
    let duration = (length / v * 20.0).round() / 20.0;
    cfg.segments.truncate(1);
    if v > 5.0 {
        cfg.segments.push(Segment::Straight {
            v: v / 2.0,
            duration: 1.0,
        });
    }
    cfg.segments.push(Segment::Straight { v, duration });
    cfg.noise = NoiseConfig {
        accel: 0.0,
        gyro: 0.002,
        range: 0.02,
        azimuth: 0.1f64.to_radians(),
        survey: 0.02,
    };
    cfg
}

fn noisy_plausibility() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for kmh in [10.0, 20.0, 30.0, 40.0] {
        let cfg = driveby(kmh);
        let sim = simulate(&cfg, Execution::Parallel).unwrap();
        let lib = MarkerLibrary::new(sim.surveyed.clone(), 0.5789).unwrap();
        let params = PipelineParams::new(RoughPose {
            p: Vec2::new(cfg.start.x, cfg.start.y),
            psi: cfg.start.yaw_deg.to_radians(),
        });
        let out = run_pipeline(&sim.imu, &sim.lidar, &lib, &params).unwrap();
        let r = evaluate(&out.estimates, &sim.truth).unwrap();
        let (p, y, v) = (
            r.position.unwrap().mean,
            r.yaw_deg.unwrap().mean,
            r.velocity.unwrap().mean,
        );
        pass &= p <= 0.15 && v <= 0.3 && y <= 1.5;
        lines.push(format!(
            "{kmh} km/h: pos {p:.3} m, vel {v:.3} m/s, yaw {y:.3} deg"
        ));
    }
    outcome(pass, lines.join("; "))
}

fn orthonormality_endurance() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tracker = OrientationTracker::from_parts(Mat3::IDENTITY, 0.0, 0.0, 9.81);
    let mut worst: f64 = 0.0;
    for i in 1..=1_000_000u64 {
        let gyro = Vec3::new(
            rng.random_range(-2.0..=2.0),
            rng.random_range(-2.0..=2.0),
            rng.random_range(-2.0..=2.0),
        );
        let s = ImuSample {
            t: i as f64 / 100.0,
            accel: Vec3::new(0.0, 0.0, 9.81),
            gyro,
        };
        tracker.gyro_update(&s).unwrap();
        worst = worst.max(tracker.rotation().orthonormality_error());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst < 1e-9 && secs < 10.0,
        format!("max |R^T R - I| = {worst:.2e}, {secs:.2} s"),
    )
}

fn gyro_accuracy() -> Outcome {
    let mut tracker = OrientationTracker::from_parts(Mat3::IDENTITY, 0.0, 0.0, 9.81);
    for i in 1..=2000u32 {
        let s = ImuSample {
            t: i as f64 / 1000.0,
            accel: Vec3::new(0.0, 0.0, 9.81),
            gyro: Vec3::new(0.0, 0.0, 0.5),
        };
        tracker.gyro_update(&s).unwrap();
    }
    // R maps LTP to vehicle coordinates, the inverse of the 1 rad vehicle turn
    let err = (*tracker.rotation() - yaw_matrix(-1.0)).frobenius_norm();
    outcome(err < 1e-5, format!("Frobenius error {err:.2e}"))
}

fn swap_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut reversed = 0;
    let mut n = 0;
    while n < 10_000 {
        let v = rng.random_range(0.0..15.0);
        let w = rng.random_range(-0.8..0.8);
        let dt = rng.random_range(0.01..0.2);
        let yaw0 = rng.random_range(-3.1..3.1);
        let p0 = Vec2::new(
            rng.random_range(-100.0..100.0),
            rng.random_range(-100.0..100.0),
        );
        let mut marker = |id| {
            let p = p0 + Vec2::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0));
            Marker {
                id,
                p_ltp: Vec3::new(p.x, p.y, 1.0),
            }
        };
        let (n1, n2) = (marker(1), marker(2));
        if (n1.xy() - n2.xy()).norm() < 0.6 {
            continue;
        }
        let step = ctrv_delta(v, w, dt);
        let p1 = p0 + step.d.rotated(yaw0);
        let o1 = MarkerObservation::new(0.0, 1, (n1.xy() - p0).rotated(-yaw0));
        let o2 = MarkerObservation::new(dt, 2, (n2.xy() - p1).rotated(-(yaw0 + step.dyaw)));
        let (a1, a2) = estimate_pose(&o1, &o2, &n1, &n2, v, w).unwrap();
        let (b1, b2) = estimate_pose(&o2, &o1, &n2, &n1, v, w).unwrap();
        for (a, b) in [(a1, b1), (a2, b2)] {
            worst = worst
                .max((a.position - b.position).norm())
                .max(wrap_pi(a.yaw - b.yaw).abs());
        }
        reversed += usize::from(n1.p_ltp.x > n2.p_ltp.x);
        n += 1;
    }
    outcome(
        worst <= 1e-12 && reversed > 0,
        format!("{n} pairs ({reversed} with x_1 > x_2), max difference {worst:.2e}"),
    )
}

fn ctrv_continuity() -> Outcome {
    let mut worst: f64 = 0.0;
    for v in [0.1, 1.0, 10.0] {
        for dt in [0.001, 0.01, 0.05, 0.1, 1.0] {
            for sign in [1.0, -1.0] {
                let at = ctrv_delta(v, sign * OMEGA_MIN, dt);
                for w in [OMEGA_MIN * (1.0 - 1e-12), OMEGA_MIN * (1.0 - 1e-6)] {
                    let below = ctrv_delta(v, sign * w, dt);
                    worst = worst
                        .max((at.d - below.d).norm())
                        .max((at.dyaw - below.dyaw).abs());
                }
            }
        }
    }
    outcome(
        worst < 1e-9,
        format!("max jump across the switch {worst:.2e}"),
    )
}

fn clustering_constants() -> Outcome {
    let cfg = PipelineConfig::default();
    let sep = min_marker_separation(&cfg);
    let expected = 16.0 * (1200.0f64 * 6.0 * 0.5e-3).to_radians().sin();
    let pass = cfg.reflectivity_threshold == 200
        && cfg.cluster_max_dist == 0.5789
        && sep.configured == 0.5789
        && (sep.formula - expected).abs() < 1e-12;
    outcome(
        pass,
        format!(
            "threshold {}, d_c_max {} m; formula evaluates to {:.6} m, {:+.4} m from the configured value",
            cfg.reflectivity_threshold,
            cfg.cluster_max_dist,
            sep.formula,
            sep.formula - sep.configured
        ),
    )
}

fn runtime_budget() -> Outcome {
    let report = markerloc(&["bench", "--iterations", "141600"]);
    let median = report
        .lines()
        .find(|l| l.starts_with("combined"))
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|m| m.parse::<f64>().ok())
        .expect("combined median in bench output");
    outcome(
        median < 1000.0,
        format!("combined median {median:.3} us over 141600 runs"),
    )
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/driveby_10kmh.toml");
    for d in &dirs {
        markerloc(&[
            "simulate",
            "--config",
            path(&scenario),
            "--out",
            path(d.path()),
            "--seed",
            "7",
        ]);
        markerloc(&["estimate", "--config", path(&d.path().join("run.toml"))]);
    }
    let files = [
        "markers.csv",
        "imu.csv",
        "lidar.csv",
        "truth.csv",
        "trajectory.csv",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| {
            fs::read(dirs[0].path().join(f)).unwrap() != fs::read(dirs[1].path().join(f)).unwrap()
        })
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} files byte-identical", files.len())
        } else {
            format!("differ: {differing:?}")
        },
    )
}

fn main() {
    let criteria: [(u32, &str, Check); 9] = [
        (1, "noiseless oracle equivalence", noiseless_oracle),
        (2, "noisy plausibility", noisy_plausibility),
        (3, "orthonormality endurance", orthonormality_endurance),
        (4, "gyro integration accuracy", gyro_accuracy),
        (5, "swap invariance", swap_invariance),
        (6, "CTRV branch continuity", ctrv_continuity),
        (7, "clustering constants", clustering_constants),
        (8, "runtime budget", runtime_budget),
        (9, "determinism", determinism),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let o = panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} ({name}): {verdict} - {}", o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
