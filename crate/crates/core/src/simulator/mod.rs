//! Ground-truth trajectories and synthetic IMU/LiDAR data.

mod config;
mod evaluate;
mod trajectory;

pub use config::{
    LidarModel, MarkerGrid, MarkerSpec, NoiseConfig, ScenarioConfig, Segment, SimError, StartPose,
};
pub use evaluate::{evaluate, ErrorReport, EvaluateError, Stats};
pub use trajectory::{build_trajectory, GroundTruth, TruthSample};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::exec::{map_range, Execution};
use crate::geometry::{Vec2, Vec3};
use crate::horizontation::ImuSample;
use crate::marker_map::Marker;
use crate::pointcloud::LidarReturn;
use config::NS;

/// Reflectivity of a return from a retro-reflective marker.
pub const MARKER_REFLECTIVITY: u8 = 255;
/// Clutter returns stay strictly below this reflectivity.
pub const CLUTTER_REFLECTIVITY_LIMIT: u8 = 200;

const STREAM_SURVEY: u64 = 0;
const STREAM_IMU: u64 = 1;
const STREAM_FIRST_SWEEP: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub truth: GroundTruth,
    pub imu: Vec<ImuSample>,
    /// Sorted by time.
    pub lidar: Vec<LidarReturn>,
    /// True marker positions.
    pub markers: Vec<Marker>,
    /// Marker library as surveyed, perturbed by the survey noise.
    pub surveyed: Vec<Marker>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        sigma * rng.sample::<f64, _>(StandardNormal)
    }
}

/// Runs a scenario. The result depends only on `cfg` (including its seed),
/// not on `exec`.
pub fn simulate(cfg: &ScenarioConfig, exec: Execution) -> Result<Simulation, SimError> {
    cfg.validate()?;
    let truth = build_trajectory(cfg);
    let markers = cfg.marker_layout();

    let mut rng = rng_for(cfg.seed, STREAM_SURVEY);
    let surveyed = markers
        .iter()
        .map(|m| {
            let s = cfg.noise.survey;
            let e = Vec3::new(gauss(&mut rng, s), gauss(&mut rng, s), gauss(&mut rng, s));
            Marker {
                id: m.id,
                p_ltp: m.p_ltp + e,
            }
        })
        .collect();

    let imu = imu_samples(cfg, &truth);

    let stride = (cfg.lidar_period_ns() / cfg.imu_period_ns()) as usize;
    let sweeps = (truth.samples.len() - 1) / stride + 1;
    let lidar = map_range(sweeps, exec, |k| {
        sweep(cfg, &truth.samples[k * stride], &markers, k)
    })
    .into_iter()
    .flatten()
    .collect();

    Ok(Simulation {
        truth,
        imu,
        lidar,
        markers,
        surveyed,
    })
}

/// Body-frame specific force and angular rate of a level vehicle.
fn imu_samples(cfg: &ScenarioConfig, truth: &GroundTruth) -> Vec<ImuSample> {
    let mut rng = rng_for(cfg.seed, STREAM_IMU);
    let (sa, sg) = (cfg.noise.accel, cfg.noise.gyro);
    truth
        .samples
        .iter()
        .map(|s| {
            let accel = Vec3::new(
                gauss(&mut rng, sa),
                s.v * s.yaw_rate + gauss(&mut rng, sa),
                cfg.gravity + gauss(&mut rng, sa),
            );
            let gyro = Vec3::new(
                gauss(&mut rng, sg),
                gauss(&mut rng, sg),
                s.yaw_rate + gauss(&mut rng, sg),
            );
            ImuSample {
                t: s.t,
                accel,
                gyro,
            }
        })
        .collect()
}

/// All returns of one sweep. Every visible marker is hit at the sweep
/// instant; its returns are spread symmetrically in time around it.
fn sweep(
    cfg: &ScenarioConfig,
    pose: &TruthSample,
    markers: &[Marker],
    k: usize,
) -> Vec<LidarReturn> {
    let mut rng = rng_for(cfg.seed, STREAM_FIRST_SWEEP + k as u64);
    let model = &cfg.lidar;
    let n = model.returns_per_marker;
    let t = pose.t;
    let frac = |j: usize| {
        if n > 1 {
            j as f64 / (n - 1) as f64
        } else {
            0.5
        }
    };
    let mut out = Vec::new();

    for m in markers {
        let rel = (Vec2::from(m.p_ltp) - pose.p).rotated(-pose.yaw);
        let range = rel.norm();
        if range > model.max_range {
            continue;
        }
        for j in 0..n {
            let f = frac(j);
            let xy = if cfg.noise.range == 0.0 && cfg.noise.azimuth == 0.0 {
                rel
            } else {
                let r = range + gauss(&mut rng, cfg.noise.range);
                let az = rel.angle() + gauss(&mut rng, cfg.noise.azimuth);
                Vec2::from_polar(r, az)
            };
            let z = m.p_ltp.z - model.mount_height + model.tape_height * (f - 0.5);
            out.push(LidarReturn {
                t: t + model.jitter * (2.0 * f - 1.0),
                p: Vec3::new(xy.x, xy.y, z),
                reflectivity: MARKER_REFLECTIVITY,
            });
        }
    }

    for _ in 0..model.clutter_per_sweep {
        let r = rng.random_range(1.0..model.max_range);
        let az = rng.random_range(0.0..std::f64::consts::TAU);
        let xy = Vec2::from_polar(r, az);
        out.push(LidarReturn {
            t: t + model.jitter * rng.random_range(-1.0..=1.0),
            p: Vec3::new(xy.x, xy.y, rng.random_range(-1.0..1.0)),
            reflectivity: rng.random_range(0..CLUTTER_REFLECTIVITY_LIMIT),
        });
    }

    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

/// Sweep instants of a scenario, seconds.
pub fn sweep_times(cfg: &ScenarioConfig) -> Vec<f64> {
    let total: u64 = cfg.segment_ns().iter().sum();
    let step = cfg.lidar_period_ns();
    (0..=total / step)
        .map(|k| (k * step) as f64 / NS as f64)
        .collect()
}
