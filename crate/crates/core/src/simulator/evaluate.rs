use std::fmt;

use thiserror::Error;

use crate::estimator::{Quality, VehicleStateEstimate};
use crate::geometry::wrap_pi;

use super::trajectory::GroundTruth;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluateError {
    #[error("no estimates to evaluate")]
    EmptyEstimates,
    #[error("estimate at t = {t} lies outside the reference range [{start}, {end}]")]
    TimeRangeMismatch { t: f64, start: f64, end: f64 },
}

/// Mean, population standard deviation and maximum of absolute errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

impl Stats {
    pub fn from_samples(xs: &[f64]) -> Option<Stats> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Some(Stats {
            n: xs.len(),
            mean,
            std: var.sqrt(),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Error statistics against the reference trajectory. Position and yaw use
/// full pose fixes only; velocity uses every row carrying a velocity fix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub velocity: Option<Stats>,
    pub position: Option<Stats>,
    pub yaw_deg: Option<Stats>,
    /// Raw absolute errors, in estimate order.
    pub velocity_errors: Vec<f64>,
    pub position_errors: Vec<f64>,
    pub yaw_errors_deg: Vec<f64>,
}

pub fn evaluate(
    estimates: &[VehicleStateEstimate],
    truth: &GroundTruth,
) -> Result<ErrorReport, EvaluateError> {
    if estimates.is_empty() {
        return Err(EvaluateError::EmptyEstimates);
    }
    let (start, end) = truth.time_range().unwrap_or((f64::NAN, f64::NAN));
    let mut r = ErrorReport::default();
    for e in estimates {
        let ref_state = truth
            .interpolate(e.t)
            .ok_or(EvaluateError::TimeRangeMismatch { t: e.t, start, end })?;
        if matches!(e.quality, Quality::VelocityOnly | Quality::FullPose) {
            r.velocity_errors.push((e.v_og - ref_state.v).abs());
        }
        if e.quality == Quality::FullPose {
            r.position_errors.push((e.position - ref_state.p).norm());
            r.yaw_errors_deg
                .push(wrap_pi(e.yaw - ref_state.yaw).abs().to_degrees());
        }
    }
    r.velocity = Stats::from_samples(&r.velocity_errors);
    r.position = Stats::from_samples(&r.position_errors);
    r.yaw_deg = Stats::from_samples(&r.yaw_errors_deg);
    Ok(r)
}

impl ErrorReport {
    fn rows(&self) -> [(&'static str, &'static str, Option<Stats>); 3] {
        [
            ("velocity", "m/s", self.velocity),
            ("position", "m", self.position),
            ("yaw", "deg", self.yaw_deg),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,unit,n,mean,std,max\n");
        for (name, unit, st) in self.rows() {
            match st {
                Some(st) => s.push_str(&format!(
                    "{name},{unit},{},{:.6},{:.6},{:.6}\n",
                    st.n, st.mean, st.std, st.max
                )),
                None => s.push_str(&format!("{name},{unit},0,,,\n")),
            }
        }
        s
    }
}

impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>5} {:>7} {:>12} {:>12} {:>12}",
            "quantity", "unit", "n", "mean", "std", "max"
        )?;
        for (name, unit, st) in self.rows() {
            match st {
                Some(st) => writeln!(
                    f,
                    "{name:<10} {unit:>5} {:>7} {:>12.6} {:>12.6} {:>12.6}",
                    st.n, st.mean, st.std, st.max
                )?,
                None => writeln!(
                    f,
                    "{name:<10} {unit:>5} {:>7} {:>12} {:>12} {:>12}",
                    0, "-", "-", "-"
                )?,
            }
        }
        Ok(())
    }
}
