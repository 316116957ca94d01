use markerloc::estimator::Quality;
use markerloc::exec::Execution;
use markerloc::geometry::Vec2;
use markerloc::io;
use markerloc::marker_map::{MarkerLibrary, RoughPose};
use markerloc::pipeline::{run_pipeline, PipelineOutput, PipelineParams};
use markerloc::pointcloud::PipelineConfig;
use markerloc::simulator::{evaluate, simulate, ErrorReport, ScenarioConfig, Simulation, Stats};

const ROWS: &str = r#"
[[marker_grid]]
first_id = 1
x0 = -10.0
y0 = -3.0
nx = 60
ny = 2
dx = 2.0
dy = 6.0
z = 1.0
"#;

const AREA: &str = r#"
[[marker_grid]]
first_id = 1
x0 = -40.0
y0 = -40.0
nx = 21
ny = 21
dx = 4.0
dy = 4.0
z = 1.0
"#;

fn scenario(segments: &[&str], layout: &str) -> ScenarioConfig {
    let mut text = String::from("imu_rate = 100.0\nlidar_rate = 20.0\n");
    text.push_str("[[segment]]\nkind = \"standstill\"\nduration = 2.0\n");
    for s in segments {
        text.push_str("[[segment]]\n");
        text.push_str(s);
        text.push('\n');
    }
    text.push_str(layout);
    ScenarioConfig::from_toml_str(&text).unwrap()
}

fn params(cfg: &ScenarioConfig) -> PipelineParams {
    PipelineParams::new(RoughPose {
        p: Vec2::new(cfg.start.x, cfg.start.y),
        psi: cfg.start.yaw_deg.to_radians(),
    })
}

fn library(sim: &Simulation) -> MarkerLibrary {
    MarkerLibrary::new(
        sim.surveyed.clone(),
        PipelineConfig::default().cluster_max_dist,
    )
    .unwrap()
}

fn run(cfg: &ScenarioConfig) -> (PipelineOutput, ErrorReport) {
    let sim = simulate(cfg, Execution::Parallel).unwrap();
    let out = run_pipeline(&sim.imu, &sim.lidar, &library(&sim), &params(cfg)).unwrap();
    let report = evaluate(&out.estimates, &sim.truth).unwrap();
    (out, report)
}

fn means(r: &ErrorReport) -> (f64, f64, f64) {
    (
        r.position.unwrap().mean,
        r.yaw_deg.unwrap().mean,
        r.velocity.unwrap().mean,
    )
}

#[test]
fn noiseless_driveby_is_exact() {
    let cfg = scenario(
        &["kind = \"straight\"\nv = 2.7777777777777777\nduration = 20.0"],
        ROWS,
    );
    let (out, r) = run(&cfg);
    let (p, y, v) = means(&r);
    assert!(p < 1e-6 && y < 1e-6 && v < 1e-6, "{r}");
    assert_eq!(out.stats.unmatched, 0);
    assert!(out.warnings.is_empty(), "{:?}", out.warnings);
}

#[test]
fn noiseless_gentle_arc_is_exact() {
    // the chord-based speed is low by v (w dt)^2 / 24, 5e-7 m/s here
    let cfg = scenario(
        &["kind = \"arc\"\nv = 2.0\nyaw_rate = 0.05\nduration = 20.0"],
        AREA,
    );
    let (_, r) = run(&cfg);
    let (p, y, v) = means(&r);
    assert!(p < 1e-6 && y < 1e-6 && v < 1e-6, "{r}");
}

#[test]
fn noiseless_tight_arc_within_chord_error() {
    let (v, w, dt) = (5.0, 0.3, 0.05);
    let cfg = scenario(
        &["kind = \"arc\"\nv = 5.0\nyaw_rate = 0.3\nduration = 20.0"],
        AREA,
    );
    let (_, r) = run(&cfg);
    let bound = v * (w * dt) * (w * dt) / 24.0;
    assert!(r.velocity.unwrap().max <= bound * 1.01, "{r}");
    assert!(
        r.position.unwrap().mean < 1e-5 && r.yaw_deg.unwrap().mean < 1e-5,
        "{r}"
    );
}

#[test]
fn noiseless_through_csv_files() {
    let cfg = scenario(
        &[
            "kind = \"straight\"\nv = 3.0\nduration = 5.0",
            "kind = \"slalom\"\nv = 3.0\namplitude = 1.0\nwavelength = 20.0\nduration = 15.0",
        ],
        AREA,
    );
    let sim = simulate(&cfg, Execution::Parallel).unwrap();
    let (mut imu, mut lidar, mut markers) = (Vec::new(), Vec::new(), Vec::new());
    io::write_imu(&mut imu, &sim.imu).unwrap();
    io::write_lidar(&mut lidar, &sim.lidar).unwrap();
    io::write_markers(&mut markers, &sim.surveyed).unwrap();
    let lib = io::load_library(markers.as_slice(), 0.5789).unwrap();
    let out = run_pipeline(
        &io::read_imu(imu.as_slice()).unwrap(),
        &io::read_lidar(lidar.as_slice()).unwrap(),
        &lib,
        &params(&cfg),
    )
    .unwrap();
    let r = evaluate(&out.estimates, &sim.truth).unwrap();
    let (p, y, v) = means(&r);
    assert!(p < 1e-4 && y < 1e-4 && v < 1e-4, "{r}");
}

#[test]
fn noisy_driveby_is_plausible() {
    let mut cfg = scenario(
        &[
            "kind = \"straight\"\nv = 2.7777777777777777\nduration = 1.0",
            "kind = \"straight\"\nv = 5.555555555555555\nduration = 8.0",
        ],
        ROWS,
    );
    cfg.noise.range = 0.02;
    cfg.noise.azimuth = 0.1f64.to_radians();
    cfg.noise.survey = 0.02;
    cfg.noise.gyro = 0.002;
    cfg.seed = 3;
    let (_, r) = run(&cfg);
    let (p, y, v) = means(&r);
    assert!(p < 0.15 && y < 1.5 && v < 0.3, "{r}");
}

#[test]
fn no_marker_returns_gives_heading_only() {
    let cfg = scenario(
        &["kind = \"arc\"\nv = 2.0\nyaw_rate = 0.1\nduration = 4.0"],
        ROWS,
    );
    let sim = simulate(&cfg, Execution::Parallel).unwrap();
    let lib = library(&sim);
    let dim: Vec<_> = sim
        .lidar
        .iter()
        .map(|r| markerloc::pointcloud::LidarReturn {
            reflectivity: 150,
            ..*r
        })
        .collect();
    for lidar in [&[][..], &dim[..]] {
        let out = run_pipeline(&sim.imu, lidar, &lib, &params(&cfg)).unwrap();
        assert!(!out.warnings.is_empty());
        assert!(out.estimates.len() > 10);
        assert!(out
            .estimates
            .iter()
            .all(|e| e.quality == Quality::DeadReckoning));
        let last = out.estimates.last().unwrap();
        let truth = sim.truth.interpolate(last.t).unwrap();
        assert!((last.yaw - truth.yaw).abs() < 1e-9);
    }
}

#[test]
fn moving_at_start_is_rejected() {
    let cfg = scenario(&["kind = \"straight\"\nv = 2.0\nduration = 2.0"], ROWS);
    let sim = simulate(&cfg, Execution::Parallel).unwrap();
    let mut imu = sim.imu.clone();
    for (i, s) in imu.iter_mut().enumerate() {
        s.gyro.z = if i % 2 == 0 { 0.3 } else { -0.3 };
    }
    let err = run_pipeline(&imu, &sim.lidar, &library(&sim), &params(&cfg)).unwrap_err();
    assert!(err.to_string().contains("standstill"), "{err}");
}

#[test]
fn pipeline_is_deterministic() {
    let mut cfg = scenario(&["kind = \"straight\"\nv = 4.0\nduration = 4.0"], ROWS);
    cfg.noise.range = 0.02;
    cfg.noise.gyro = 0.002;
    cfg.lidar.clutter_per_sweep = 20;
    let a = run(&cfg).0;
    let b = run(&cfg).0;
    assert_eq!(a, b);
}

/// Population statistics by Welford's streaming recurrence.
fn welford(xs: &[f64]) -> (f64, f64, f64) {
    let (mut n, mut mean, mut m2, mut max) = (0.0, 0.0, 0.0, f64::NEG_INFINITY);
    for &x in xs {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
        max = if x > max { x } else { max };
    }
    (mean, (m2 / n).sqrt(), max)
}

#[test]
fn report_statistics_match_second_implementation() {
    let mut cfg = scenario(&["kind = \"straight\"\nv = 4.0\nduration = 6.0"], ROWS);
    cfg.noise.range = 0.02;
    cfg.noise.azimuth = 0.1f64.to_radians();
    cfg.noise.survey = 0.02;
    let (_, r) = run(&cfg);
    let pairs: [(Option<Stats>, &Vec<f64>); 3] = [
        (r.velocity, &r.velocity_errors),
        (r.position, &r.position_errors),
        (r.yaw_deg, &r.yaw_errors_deg),
    ];
    for (st, xs) in pairs {
        let st = st.unwrap();
        let (mean, std, max) = welford(xs);
        assert_eq!(st.n, xs.len());
        assert!((st.mean - mean).abs() < 1e-12);
        assert!((st.std - std).abs() < 1e-12);
        assert_eq!(st.max, max);
    }
}
