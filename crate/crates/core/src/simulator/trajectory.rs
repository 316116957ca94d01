use std::f64::consts::TAU;

use crate::estimator::ctrv_delta;
use crate::geometry::{wrap_pi, Vec2};

use super::config::{ScenarioConfig, Segment, NS};

/// Reference state at one IMU instant. `v` and `yaw_rate` hold over the
/// interval ending at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub p: Vec2,
    /// Yaw in (-pi, pi].
    pub yaw: f64,
    pub v: f64,
    pub yaw_rate: f64,
    /// Horizontal acceleration in the LTP (centripetal part), m/s^2.
    pub accel: Vec2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub samples: Vec<TruthSample>,
}

impl GroundTruth {
    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    /// Linear interpolation, wrap-aware for yaw. `None` outside the time range.
    pub fn interpolate(&self, t: f64) -> Option<TruthSample> {
        let s = &self.samples;
        let (t0, t1) = self.time_range()?;
        if !(t >= t0 && t <= t1) {
            return None;
        }
        let i = s.partition_point(|x| x.t < t);
        if s[i].t == t || i == 0 {
            return Some(s[i]);
        }
        let (a, b) = (&s[i - 1], &s[i]);
        let f = (t - a.t) / (b.t - a.t);
        let lerp = |x: f64, y: f64| x + f * (y - x);
        Some(TruthSample {
            t,
            p: a.p + (b.p - a.p).scale(f),
            yaw: wrap_pi(a.yaw + f * wrap_pi(b.yaw - a.yaw)),
            v: b.v,
            yaw_rate: b.yaw_rate,
            accel: Vec2::new(lerp(a.accel.x, b.accel.x), lerp(a.accel.y, b.accel.y)),
        })
    }
}

/// Samples the piecewise constant-speed, constant-yaw-rate reference
/// trajectory at every IMU instant.
///
/// Straight, arc and standstill segments are evaluated in closed form from
/// the segment start. Slalom segments hold the yaw rate constant over each
/// IMU interval, so they are exact arcs between samples.
pub fn build_trajectory(cfg: &ScenarioConfig) -> GroundTruth {
    let step_ns = cfg.imu_period_ns();
    let dt = step_ns as f64 / NS as f64;
    let mut p = Vec2::new(cfg.start.x, cfg.start.y);
    let mut yaw = cfg.start.yaw_deg.to_radians();
    let mut samples = vec![TruthSample {
        t: 0.0,
        p,
        yaw: wrap_pi(yaw),
        v: 0.0,
        yaw_rate: 0.0,
        accel: Vec2::ZERO,
    }];
    let mut t0_ns = 0u64;

    for (seg, seg_ns) in cfg.segments.iter().zip(cfg.segment_ns()) {
        let (p0, yaw0) = (p, yaw);
        let n = seg_ns / step_ns;
        let mut psi_prev = 0.0;
        for i in 1..=n {
            let local = (i * step_ns) as f64 / NS as f64;
            let (v, w) = match *seg {
                Segment::Standstill { .. } => (0.0, 0.0),
                Segment::Straight { v, .. } => {
                    p = p0 + Vec2::from_polar(v * local, yaw0);
                    (v, 0.0)
                }
                Segment::Arc { v, yaw_rate, .. } => {
                    let d = ctrv_delta(v, yaw_rate, local);
                    p = p0 + d.d.rotated(yaw0);
                    yaw = yaw0 + d.dyaw;
                    (v, yaw_rate)
                }
                Segment::Slalom {
                    v,
                    amplitude,
                    wavelength,
                    ..
                } => {
                    let psi_max = TAU * amplitude / wavelength;
                    let psi = psi_max * (TAU * v * local / wavelength).sin();
                    let w = (psi - psi_prev) / dt;
                    p = p + ctrv_delta(v, w, dt).d.rotated(yaw);
                    yaw = yaw0 + psi;
                    psi_prev = psi;
                    (v, w)
                }
            };
            let lateral = v * w;
            samples.push(TruthSample {
                t: (t0_ns + i * step_ns) as f64 / NS as f64,
                p,
                yaw: wrap_pi(yaw),
                v,
                yaw_rate: w,
                accel: Vec2::from_polar(lateral, yaw + std::f64::consts::FRAC_PI_2),
            });
        }
        t0_ns += seg_ns;
    }
    GroundTruth { samples }
}
