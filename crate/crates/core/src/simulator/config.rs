use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::marker_map::{Marker, MarkerId};
use crate::pointcloud::PipelineConfig;

/// Nanoseconds per second; the simulation clock runs on an integer ns grid.
pub(crate) const NS: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {field}: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("scenario parse error: {0}")]
    Parse(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::InvalidConfig {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Hz. The IMU period must be a whole number of nanoseconds.
    pub imu_rate: f64,
    /// Hz. The sweep period must be a whole number of IMU periods.
    pub lidar_rate: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    #[serde(default)]
    pub start: StartPose,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub lidar: LidarModel,
    #[serde(default, rename = "segment")]
    pub segments: Vec<Segment>,
    #[serde(default, rename = "marker")]
    pub markers: Vec<MarkerSpec>,
    #[serde(default, rename = "marker_grid")]
    pub grids: Vec<MarkerGrid>,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_gravity() -> f64 {
    9.81
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub yaw_deg: f64,
}

/// Standard deviations of the additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// m/s^2, per axis.
    pub accel: f64,
    /// rad/s, per axis.
    pub gyro: f64,
    /// m, on the horizontal range of each return.
    pub range: f64,
    /// rad, on the azimuth of each return.
    pub azimuth: f64,
    /// m, on each coordinate of the emitted marker library.
    pub survey: f64,
}

impl NoiseConfig {
    pub fn is_zero(&self) -> bool {
        [self.accel, self.gyro, self.range, self.azimuth, self.survey]
            .iter()
            .all(|&s| s == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarModel {
    /// Markers farther than this (horizontally) produce no returns, meters.
    pub max_range: f64,
    pub returns_per_marker: usize,
    /// Half-width of the symmetric timestamp spread of one marker's returns, s.
    pub jitter: f64,
    /// Vertical extent of a marker's returns, meters.
    pub tape_height: f64,
    /// Sensor height above the LTP plane, meters.
    pub mount_height: f64,
    /// Low-reflectivity points per sweep.
    pub clutter_per_sweep: usize,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            max_range: PipelineConfig::default().max_range,
            returns_per_marker: 8,
            jitter: 1e-4,
            tape_height: 0.1,
            mount_height: 1.0,
            clutter_per_sweep: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Segment {
    Standstill {
        duration: f64,
    },
    Straight {
        v: f64,
        duration: f64,
    },
    Arc {
        v: f64,
        yaw_rate: f64,
        duration: f64,
    },
    /// Heading oscillates as `psi_max * sin(2 pi s / wavelength)` along the
    /// path length `s`, with `psi_max = 2 pi amplitude / wavelength`.
    Slalom {
        v: f64,
        amplitude: f64,
        wavelength: f64,
        duration: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Standstill { duration }
            | Segment::Straight { duration, .. }
            | Segment::Arc { duration, .. }
            | Segment::Slalom { duration, .. } => duration,
        }
    }

    pub fn speed(&self) -> f64 {
        match *self {
            Segment::Standstill { .. } => 0.0,
            Segment::Straight { v, .. } | Segment::Arc { v, .. } | Segment::Slalom { v, .. } => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerSpec {
    pub id: MarkerId,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

/// `nx * ny` markers at `(x0 + i dx, y0 + j dy)`, ids counting up from
/// `first_id` row by row along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerGrid {
    pub first_id: MarkerId,
    pub x0: f64,
    pub y0: f64,
    pub nx: u32,
    pub ny: u32,
    pub dx: f64,
    #[serde(default)]
    pub dy: f64,
    #[serde(default)]
    pub z: f64,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = toml::from_str(s).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub(crate) fn imu_period_ns(&self) -> u64 {
        period_ns(self.imu_rate)
    }

    pub(crate) fn lidar_period_ns(&self) -> u64 {
        period_ns(self.lidar_rate)
    }

    pub(crate) fn segment_ns(&self) -> Vec<u64> {
        self.segments
            .iter()
            .map(|s| (s.duration() * NS as f64).round() as u64)
            .collect()
    }

    pub fn total_duration(&self) -> f64 {
        self.segment_ns().iter().sum::<u64>() as f64 / NS as f64
    }

    /// True marker positions.
    pub fn marker_layout(&self) -> Vec<Marker> {
        let mut out: Vec<Marker> = self
            .markers
            .iter()
            .map(|m| Marker {
                id: m.id,
                p_ltp: Vec3::new(m.x, m.y, m.z),
            })
            .collect();
        for g in &self.grids {
            let mut id = g.first_id;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    out.push(Marker {
                        id,
                        p_ltp: Vec3::new(g.x0 + i as f64 * g.dx, g.y0 + j as f64 * g.dy, g.z),
                    });
                    id += 1;
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), SimError> {
        positive("imu_rate", self.imu_rate)?;
        positive("lidar_rate", self.lidar_rate)?;
        positive("gravity", self.gravity)?;
        whole_ns("imu_rate", self.imu_rate)?;
        whole_ns("lidar_rate", self.lidar_rate)?;
        if !self.lidar_period_ns().is_multiple_of(self.imu_period_ns()) {
            return Err(invalid(
                "lidar_rate",
                "sweep period must be a whole number of IMU periods",
            ));
        }
        for (name, s) in [
            ("noise.accel", self.noise.accel),
            ("noise.gyro", self.noise.gyro),
            ("noise.range", self.noise.range),
            ("noise.azimuth", self.noise.azimuth),
            ("noise.survey", self.noise.survey),
            ("lidar.jitter", self.lidar.jitter),
            ("lidar.tape_height", self.lidar.tape_height),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {s}")));
            }
        }
        positive("lidar.max_range", self.lidar.max_range)?;
        if self.lidar.returns_per_marker == 0 {
            return Err(invalid("lidar.returns_per_marker", "must be at least 1"));
        }
        for (name, v) in [
            ("start.x", self.start.x),
            ("start.y", self.start.y),
            ("start.yaw_deg", self.start.yaw_deg),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }

        match self.segments.first() {
            None => return Err(invalid("segment", "at least one segment is required")),
            Some(Segment::Standstill { .. }) => {}
            Some(_) => return Err(invalid("segment[0]", "first segment must be a standstill")),
        }
        let sweep = self.lidar_period_ns();
        for (i, s) in self.segments.iter().enumerate() {
            let field = |f: &str| format!("segment[{i}].{f}");
            positive(&field("duration"), s.duration())?;
            let ns = s.duration() * NS as f64;
            if (ns - ns.round()).abs() > 1e-3 || !(ns.round() as u64).is_multiple_of(sweep) {
                return Err(invalid(
                    field("duration"),
                    format!(
                        "must be a whole number of sweep periods ({} s)",
                        sweep as f64 / NS as f64
                    ),
                ));
            }
            match *s {
                Segment::Standstill { .. } => {}
                Segment::Straight { v, .. } => non_negative(&field("v"), v)?,
                Segment::Arc { v, yaw_rate, .. } => {
                    non_negative(&field("v"), v)?;
                    if !yaw_rate.is_finite() {
                        return Err(invalid(field("yaw_rate"), "must be finite"));
                    }
                }
                Segment::Slalom {
                    v,
                    amplitude,
                    wavelength,
                    ..
                } => {
                    non_negative(&field("v"), v)?;
                    non_negative(&field("amplitude"), amplitude)?;
                    positive(&field("wavelength"), wavelength)?;
                }
            }
        }

        for (i, g) in self.grids.iter().enumerate() {
            let field = |f: &str| format!("marker_grid[{i}].{f}");
            if g.nx == 0 || g.ny == 0 {
                return Err(invalid(field("nx"), "grid must have at least one marker"));
            }
            if g.nx > 1 {
                positive(&field("dx"), g.dx)?;
            }
            if g.ny > 1 {
                positive(&field("dy"), g.dy)?;
            }
        }
        if self.markers.is_empty() && self.grids.is_empty() {
            return Err(invalid("marker", "no markers defined"));
        }
        let min = PipelineConfig::default().cluster_max_dist;
        crate::marker_map::MarkerLibrary::new(self.marker_layout(), min)
            .map_err(|e| invalid("marker", e.to_string()))?;
        Ok(())
    }
}

fn period_ns(rate: f64) -> u64 {
    (NS as f64 / rate).round() as u64
}

fn positive(field: &str, v: f64) -> Result<(), SimError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), SimError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be >= 0, got {v}")))
    }
}

fn whole_ns(field: &str, rate: f64) -> Result<(), SimError> {
    let ns = NS as f64 / rate;
    if (ns - ns.round()).abs() > 1e-3 || ns.round() < 1.0 {
        return Err(invalid(
            field,
            "period must be a whole number of nanoseconds",
        ));
    }
    Ok(())
}
