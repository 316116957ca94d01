use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Inputs of an `estimate` run. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub markers: PathBuf,
    pub imu: PathBuf,
    pub lidar: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub start: Start,
    #[serde(default)]
    pub pipeline: PipelineOverrides,
}

fn default_output() -> PathBuf {
    "trajectory.csv".into()
}

/// Rough pose of the vehicle during the initial standstill.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Start {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reflectivity_threshold: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_ms: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Rewrites relative paths as paths under `base`.
    pub fn resolve(mut self, base: &Path) -> Self {
        for p in [
            &mut self.markers,
            &mut self.imu,
            &mut self.lidar,
            &mut self.output,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        self
    }
}
