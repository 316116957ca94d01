//! IMU horizontation: tracks the LTP axes as seen from the vehicle frame and
//! projects body-frame accelerations and rotation rates onto the horizontal
//! plane.
//!
//! The tracked matrix `R` maps LTP coordinates to LCP coordinates, so its
//! columns are the LTP unit axes expressed in the vehicle frame and
//! `R^T * v_lcp` expresses a body measurement in the LTP.

use crate::geometry::{
    axis_angle_matrix, orthonormalize, skew, wrap_pi, yaw_matrix, GeometryError, Mat3, Vec3,
};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Seconds, strictly increasing within a stream.
    pub t: f64,
    /// Specific force in the vehicle frame, m/s^2 (includes gravity).
    pub accel: Vec3,
    /// Rotation rate in the vehicle frame, rad/s. The rate is taken as
    /// constant over the interval that ends at `t`.
    pub gyro: Vec3,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HorizontationError {
    #[error("standstill window too short: {span:.3} s of samples, {required:.3} s required")]
    WindowTooShort { span: f64, required: f64 },
    #[error(
        "vehicle not at standstill: gyro rms {gyro_rms:.5} rad/s, accel std {accel_std:.5} m/s^2"
    )]
    NotAtStandstill { gyro_rms: f64, accel_std: f64 },
    #[error("gravity magnitude {g:.4} m/s^2 outside [{min}, {max}]")]
    BadGravity { g: f64, min: f64, max: f64 },
    #[error("sample time {t} does not advance past {t_last}")]
    NonMonotonicTime { t: f64, t_last: f64 },
    #[error("gap of {dt:.4} s before sample at {t} exceeds {max} s")]
    StaleSample { t: f64, dt: f64, max: f64 },
    #[error("non-finite IMU sample at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Thresholds for the standstill initialization and the update step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontationConfig {
    /// Length of the standstill window, seconds.
    pub init_window: f64,
    /// Per-axis RMS rotation rate accepted as standstill, rad/s.
    pub max_gyro_rms: f64,
    /// Per-axis accelerometer standard deviation accepted as standstill, m/s^2.
    pub max_accel_std: f64,
    pub gravity_min: f64,
    pub gravity_max: f64,
    /// Longest gap integrated by a single gyro update, seconds.
    pub max_dt: f64,
}

impl Default for HorizontationConfig {
    fn default() -> Self {
        Self {
            init_window: 1.0,
            max_gyro_rms: 0.005,
            max_accel_std: 0.05,
            gravity_min: 9.5,
            gravity_max: 10.1,
            max_dt: 0.1,
        }
    }
}

/// Orientation of the LTP axes relative to the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationTracker {
    r: Mat3,
    t_last: f64,
    yaw: f64,
    gravity: f64,
    max_dt: f64,
    degraded: bool,
}

/// Horizontal-plane view of one IMU sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontalMotion {
    pub t: f64,
    /// Longitudinal acceleration along the vehicle heading, m/s^2.
    pub a_long: f64,
    /// Lateral acceleration, m/s^2.
    pub a_lat: f64,
    /// Rates about the horizontal heading and its normal, rad/s.
    pub roll_rate: f64,
    pub pitch_rate: f64,
    /// Rotation rate about the LTP vertical, rad/s.
    pub yaw_rate_ltp: f64,
    /// Vertical acceleration with static gravity removed, m/s^2.
    pub a_up: f64,
    /// Magnitude of the horizontal acceleration.
    pub a_over_ground: f64,
    /// Magnitude of the horizontal rotation rate.
    pub rate_over_ground: f64,
}

fn mean_and_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl OrientationTracker {
    /// Builds a tracker directly from its parts; `r` must be a rotation.
    pub fn from_parts(r: Mat3, t: f64, yaw: f64, gravity: f64) -> Self {
        Self {
            r,
            t_last: t,
            yaw: wrap_pi(yaw),
            gravity,
            max_dt: HorizontationConfig::default().max_dt,
            degraded: false,
        }
    }

    /// Initializes from a standstill window: gravity gives the tilt and
    /// `yaw0` (supplied by the caller, within +-45 deg of the truth) the
    /// heading.
    pub fn init_standstill(
        samples: &[ImuSample],
        yaw0: f64,
        cfg: &HorizontationConfig,
    ) -> Result<Self, HorizontationError> {
        let (first, last) = match (samples.first(), samples.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => {
                return Err(HorizontationError::WindowTooShort {
                    span: 0.0,
                    required: cfg.init_window,
                })
            }
        };
        for w in samples.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(HorizontationError::NonMonotonicTime {
                    t: w[1].t,
                    t_last: w[0].t,
                });
            }
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !s.accel.is_finite() || !s.gyro.is_finite())
        {
            return Err(HorizontationError::NonFinite { t: s.t });
        }
        let span = last.t - first.t;
        if span < cfg.init_window * (1.0 - 1e-9) {
            return Err(HorizontationError::WindowTooShort {
                span,
                required: cfg.init_window,
            });
        }

        let n = samples.len() as f64;
        let gyro_rms = [
            |s: &ImuSample| s.gyro.x,
            |s: &ImuSample| s.gyro.y,
            |s: &ImuSample| s.gyro.z,
        ]
        .iter()
        .map(|f| (samples.iter().map(|s| f(s) * f(s)).sum::<f64>() / n).sqrt())
        .fold(0.0, f64::max);
        let ax = mean_and_std(samples.iter().map(|s| s.accel.x));
        let ay = mean_and_std(samples.iter().map(|s| s.accel.y));
        let az = mean_and_std(samples.iter().map(|s| s.accel.z));
        let accel_std = ax.1.max(ay.1).max(az.1);
        if gyro_rms > cfg.max_gyro_rms || accel_std > cfg.max_accel_std {
            return Err(HorizontationError::NotAtStandstill {
                gyro_rms,
                accel_std,
            });
        }

        let mean = Vec3::new(ax.0, ay.0, az.0);
        let gravity = mean.norm();
        if !(cfg.gravity_min..=cfg.gravity_max).contains(&gravity) {
            return Err(HorizontationError::BadGravity {
                g: gravity,
                min: cfg.gravity_min,
                max: cfg.gravity_max,
            });
        }
        let inclination = (mean.z / gravity).clamp(-1.0, 1.0).acos();
        let axis = mean.cross(Vec3::Z);
        let level = axis_angle_matrix(axis, inclination)?;
        let r = (yaw_matrix(yaw0) * level).transpose();
        debug_assert!((r.tr_mul_vec(mean.scale(1.0 / gravity)) - Vec3::Z).max_abs() < 1e-9);

        Ok(Self {
            r,
            t_last: last.t,
            yaw: wrap_pi(yaw0),
            gravity,
            max_dt: cfg.max_dt,
            degraded: false,
        })
    }

    /// First-order gyro propagation `R <- (I + dt * S(w)^T) R` followed by
    /// re-orthonormalization. The heading is advanced by the LTP-vertical
    /// component of the rotation rate. On error the tracker is unchanged.
    pub fn gyro_update(&mut self, sample: &ImuSample) -> Result<(), HorizontationError> {
        let dt = sample.t - self.t_last;
        if !(dt > 0.0) {
            return Err(HorizontationError::NonMonotonicTime {
                t: sample.t,
                t_last: self.t_last,
            });
        }
        if dt > self.max_dt {
            return Err(HorizontationError::StaleSample {
                t: sample.t,
                dt,
                max: self.max_dt,
            });
        }
        if !sample.gyro.is_finite() {
            return Err(HorizontationError::NonFinite { t: sample.t });
        }
        let step = Mat3::IDENTITY + skew(sample.gyro).transpose().scale(dt);
        let r = orthonormalize(&(step * self.r))?;
        self.r = r;
        self.t_last = sample.t;
        let yaw_rate = self.r.tr_mul_vec(sample.gyro).z;
        self.yaw = wrap_pi(self.yaw + dt * yaw_rate);
        Ok(())
    }

    /// Skips over a data gap without integrating it. The tracker is flagged
    /// degraded until the next heading overwrite.
    pub fn resync(&mut self, t: f64) {
        if t > self.t_last {
            self.t_last = t;
            self.degraded = true;
        }
    }

    /// Projects a sample onto the horizontal plane and the current heading.
    ///
    /// The rotation rate is projected with the current matrix, i.e. the rate
    /// of the sample that produced it.
    pub fn project_motion(&self, sample: &ImuSample) -> HorizontalMotion {
        let a = self.r.tr_mul_vec(sample.accel) - Vec3::new(0.0, 0.0, self.gravity);
        let w = self.r.tr_mul_vec(sample.gyro);
        let (a_og, a_dir) = polar(a.x, a.y);
        let (w_og, w_dir) = polar(w.x, w.y);
        let da = wrap_pi(a_dir - self.yaw);
        let dw = wrap_pi(w_dir - self.yaw);
        HorizontalMotion {
            t: sample.t,
            a_long: a_og * da.cos(),
            a_lat: a_og * da.sin(),
            roll_rate: w_og * dw.cos(),
            pitch_rate: w_og * dw.sin(),
            yaw_rate_ltp: w.z,
            a_up: a.z,
            a_over_ground: a_og,
            rate_over_ground: w_og,
        }
    }

    /// Overwrites the heading with an external fix.
    pub fn set_yaw(&mut self, yaw: f64) {
        self.yaw = wrap_pi(yaw);
        self.degraded = false;
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.r
    }

    pub fn x_ltp(&self) -> Vec3 {
        self.r.col(0)
    }

    pub fn y_ltp(&self) -> Vec3 {
        self.r.col(1)
    }

    pub fn z_ltp(&self) -> Vec3 {
        self.r.col(2)
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn t_last(&self) -> f64 {
        self.t_last
    }

    pub fn is_degraded(&self) -> bool {
        self.degraded
    }

    pub fn set_max_dt(&mut self, max_dt: f64) {
        self.max_dt = max_dt;
    }
}

/// Magnitude and direction; direction is 0 for a zero vector.
fn polar(x: f64, y: f64) -> (f64, f64) {
    let m = x.hypot(y);
    if m == 0.0 {
        (0.0, 0.0)
    } else {
        (m, y.atan2(x))
    }
}
