//! Marker-based LiDAR/IMU vehicle localization.
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod estimator;
pub mod exec;
pub mod geometry;
pub mod horizontation;
pub mod io;
pub mod marker_map;
pub mod pipeline;
pub mod pointcloud;
pub mod simulator;
