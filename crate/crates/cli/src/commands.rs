use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use markerloc::bench::{generate_cases, run_bench};
use markerloc::exec::Execution;
use markerloc::geometry::Vec2;
use markerloc::io;
use markerloc::marker_map::RoughPose;
use markerloc::pipeline::{run_pipeline, PipelineParams};
use markerloc::pointcloud::PipelineConfig;
use markerloc::simulator::{evaluate, simulate, ScenarioConfig};
use thiserror::Error;

use crate::run_config::{RunConfig, Start};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 2.
    #[error("{0}")]
    Config(String),
    /// Failure while processing valid input; exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    let ctx = |e: std::io::Error| runtime_err(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(ctx)?);
    f(&mut w).map_err(ctx)?;
    w.flush().map_err(ctx)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| config_err(format!("{}: {e}", dir.display())))
}

pub fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<String, CliError> {
    let mut cfg = ScenarioConfig::from_toml_str(&read_text(config)?).map_err(config_err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sim = simulate(&cfg, Execution::Parallel).map_err(config_err)?;
    create_dir(out)?;
    write_file(&out.join("markers.csv"), |w| {
        io::write_markers(w, &sim.surveyed)
    })?;
    write_file(&out.join("imu.csv"), |w| io::write_imu(w, &sim.imu))?;
    write_file(&out.join("lidar.csv"), |w| io::write_lidar(w, &sim.lidar))?;
    write_file(&out.join("truth.csv"), |w| io::write_truth(w, &sim.truth))?;
    let run = RunConfig {
        markers: "markers.csv".into(),
        imu: "imu.csv".into(),
        lidar: "lidar.csv".into(),
        output: "trajectory.csv".into(),
        start: Start {
            x: cfg.start.x,
            y: cfg.start.y,
            yaw_deg: cfg.start.yaw_deg,
        },
        pipeline: Default::default(),
    };
    write_file(&out.join("run.toml"), |w| {
        w.write_all(run.to_toml_string().as_bytes())
    })?;
    Ok(format!(
        "{}: seed {}, {:.2} s, {} IMU samples, {} LiDAR returns, {} markers -> {}",
        cfg.name,
        cfg.seed,
        cfg.total_duration(),
        sim.imu.len(),
        sim.lidar.len(),
        sim.surveyed.len(),
        out.display()
    ))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EstimateOverrides {
    pub yaw0_deg: Option<f64>,
    pub reflectivity_threshold: Option<u8>,
    pub cluster_ms: Option<f64>,
}

pub fn cmd_estimate(
    config: &Path,
    out: Option<&Path>,
    overrides: EstimateOverrides,
) -> Result<(String, Vec<String>), CliError> {
    let base = config.parent().unwrap_or(Path::new("."));
    let run = RunConfig::parse(&read_text(config)?)
        .map_err(|e| config_err(format!("{}: {e}", config.display())))?
        .resolve(base);

    let mut pipeline = PipelineConfig::default();
    if let Some(r) = overrides
        .reflectivity_threshold
        .or(run.pipeline.reflectivity_threshold)
    {
        pipeline.reflectivity_threshold = r;
    }
    if let Some(ms) = overrides.cluster_ms.or(run.pipeline.cluster_ms) {
        pipeline.cluster_time = ms * 1e-3;
    }
    pipeline.validate().map_err(config_err)?;
    let yaw0 = overrides.yaw0_deg.unwrap_or(run.start.yaw_deg).to_radians();
    let params = PipelineParams::with_pipeline(
        RoughPose {
            p: Vec2::new(run.start.x, run.start.y),
            psi: yaw0,
        },
        pipeline,
    );

    let named = |p: &Path, e: io::IoError| config_err(format!("{}: {e}", p.display()));
    let library = io::load_library(open(&run.markers)?, pipeline.cluster_max_dist)
        .map_err(|e| config_err(format!("{}: {e}", run.markers.display())))?;
    let imu = io::read_imu(open(&run.imu)?).map_err(|e| named(&run.imu, e))?;
    let lidar = io::read_lidar(open(&run.lidar)?).map_err(|e| named(&run.lidar, e))?;

    let output = run_pipeline(&imu, &lidar, &library, &params).map_err(runtime_err)?;
    let path = match out {
        Some(dir) => {
            create_dir(dir)?;
            dir.join("trajectory.csv")
        }
        None => run.output.clone(),
    };
    write_file(&path, |w| io::write_trajectory(w, &output.estimates))?;
    let s = &output.stats;
    Ok((
        format!(
            "{} rows ({} pose fixes, {} velocity fixes, {}/{} clusters identified) -> {}",
            output.estimates.len(),
            s.pose_fixes,
            s.velocity_fixes,
            s.identified,
            s.clusters,
            path.display()
        ),
        output.warnings,
    ))
}

pub fn cmd_evaluate(
    estimates: &Path,
    truth: &Path,
    out: Option<&Path>,
) -> Result<String, CliError> {
    let est = io::read_trajectory(open(estimates)?)
        .map_err(|e| config_err(format!("{}: {e}", estimates.display())))?;
    let truth_data = io::read_truth(open(truth)?)
        .map_err(|e| config_err(format!("{}: {e}", truth.display())))?;
    let report = evaluate(&est, &truth_data).map_err(runtime_err)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("report.csv"), |w| {
            w.write_all(report.to_csv().as_bytes())
        })?;
        write_file(&dir.join("report.txt"), |w| write!(w, "{report}"))?;
    }
    Ok(report.to_string())
}

pub const MIN_BENCH_ITERATIONS: usize = 1000;

pub fn cmd_bench(iterations: usize, seed: u64, out: Option<&Path>) -> Result<String, CliError> {
    if iterations < MIN_BENCH_ITERATIONS {
        return Err(config_err(format!(
            "--iterations must be at least {MIN_BENCH_ITERATIONS}"
        )));
    }
    let cases = generate_cases(iterations, seed, Execution::Parallel);
    let report = run_bench(&cases);
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("bench.txt"), |w| write!(w, "{report}"))?;
    }
    Ok(report.to_string())
}
