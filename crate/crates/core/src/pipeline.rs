//! End-to-end estimation over recorded IMU and LiDAR logs.
//!
//! Clusters are grouped into scans (clusters closer in time than the cluster
//! time window). Each scan is identified against the library using a rough
//! pose dead-reckoned from the previous scan, then:
//!
//! * markers seen in both the previous and the current scan give velocity
//!   fixes, which are averaged;
//! * every pair of distinct markers, one from each scan, gives a pose fix;
//!   fixes are averaged with weights proportional to marker separation.
//!
//! A pose fix overwrites the heading tracked from the gyro.

use std::collections::HashMap;

use thiserror::Error;

use crate::estimator::{
    ctrv_delta, estimate_pose_with_delta, estimate_velocity, MarkerObservation, MotionDelta,
    Quality, VehicleStateEstimate,
};
use crate::geometry::{wrap_pi, Vec2};
use crate::horizontation::{
    HorizontationConfig, HorizontationError, ImuSample, OrientationTracker,
};
use crate::marker_map::{IdentifyConfig, IdentifyError, MarkerLibrary, RoughPose};
use crate::pointcloud::{
    cluster_by_time, filter_reflectivity, Cluster, ClusterError, ConfigError, LidarReturn,
    PipelineConfig,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub pipeline: PipelineConfig,
    pub identify: IdentifyConfig,
    pub horizontation: HorizontationConfig,
    /// Pose at the end of the standstill window.
    pub start: RoughPose,
    /// Row spacing when no LiDAR fixes are available, seconds.
    pub dead_reckoning_interval: f64,
}

impl PipelineParams {
    pub fn new(start: RoughPose) -> Self {
        Self::with_pipeline(start, PipelineConfig::default())
    }

    /// Identification radius follows the configured marker spacing.
    pub fn with_pipeline(start: RoughPose, pipeline: PipelineConfig) -> Self {
        Self {
            pipeline,
            identify: IdentifyConfig::from_spacing(pipeline.cluster_max_dist),
            horizontation: HorizontationConfig::default(),
            start,
            dead_reckoning_interval: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PipelineStats {
    pub returns_kept: usize,
    pub clusters: usize,
    pub scans: usize,
    pub identified: usize,
    pub unmatched: usize,
    pub ambiguous: usize,
    pub duplicate_ids: usize,
    pub velocity_fixes: usize,
    pub pose_fixes: usize,
    pub rejected_pairs: usize,
    pub imu_gaps: usize,
    pub imu_skipped: usize,
    /// Scans where fewer than half of the clusters were identified.
    pub poorly_identified_scans: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub estimates: Vec<VehicleStateEstimate>,
    pub warnings: Vec<String>,
    pub stats: PipelineStats,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Horizontation(#[from] HorizontationError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Yaw rate over `(start, end]`, piecewise constant.
#[derive(Debug, Clone, Copy)]
struct RateInterval {
    start: f64,
    end: f64,
    rate: f64,
}

#[derive(Debug, Default)]
struct RateLog {
    intervals: Vec<RateInterval>,
}

impl RateLog {
    fn overlapping(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let first = self.intervals.partition_point(|iv| iv.end <= a);
        self.intervals[first..]
            .iter()
            .take_while(move |iv| iv.start < b)
            .filter_map(move |iv| {
                let dt = iv.end.min(b) - iv.start.max(a);
                (dt > 0.0).then_some((dt, iv.rate))
            })
    }

    fn yaw_change(&self, a: f64, b: f64) -> f64 {
        self.overlapping(a, b).map(|(dt, w)| dt * w).sum()
    }

    /// CTRV motion over `(a, b]` at speed `v`, one arc per rate interval.
    fn motion(&self, a: f64, b: f64, v: f64) -> MotionDelta {
        self.overlapping(a, b)
            .fold(MotionDelta::ZERO, |acc, (dt, w)| {
                acc.then(ctrv_delta(v, w, dt))
            })
    }
}

struct Imu<'a> {
    samples: &'a [ImuSample],
    next: usize,
    tracker: OrientationTracker,
    rates: RateLog,
}

impl Imu<'_> {
    /// Integrates samples until the tracker has reached `t` (or the log ends).
    fn advance_to(&mut self, t: f64, stats: &mut PipelineStats) -> Result<(), PipelineError> {
        while self.next < self.samples.len() && self.tracker.t_last() < t {
            self.step(stats)?;
        }
        Ok(())
    }

    fn step(&mut self, stats: &mut PipelineStats) -> Result<(), PipelineError> {
        let s = &self.samples[self.next];
        self.next += 1;
        let (t0, yaw0) = (self.tracker.t_last(), self.tracker.yaw());
        match self.tracker.gyro_update(s) {
            Ok(()) => self.rates.intervals.push(RateInterval {
                start: t0,
                end: s.t,
                rate: wrap_pi(self.tracker.yaw() - yaw0) / (s.t - t0),
            }),
            Err(HorizontationError::StaleSample { .. }) => {
                self.tracker.resync(s.t);
                stats.imu_gaps += 1;
            }
            Err(
                HorizontationError::NonMonotonicTime { .. } | HorizontationError::NonFinite { .. },
            ) => {
                stats.imu_skipped += 1;
            }
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    fn yaw_at(&self, t: f64) -> f64 {
        wrap_pi(self.tracker.yaw() - self.rates.yaw_change(t, self.tracker.t_last()))
    }

    fn overwrite_yaw(&mut self, t: f64, yaw: f64) {
        let ahead = self.rates.yaw_change(t, self.tracker.t_last());
        self.tracker.set_yaw(wrap_pi(yaw + ahead));
    }
}

/// Splits time-sorted clusters into scans.
fn group_scans(clusters: &[Cluster], window: f64) -> Vec<&[Cluster]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=clusters.len() {
        if i == clusters.len() || clusters[i].t - clusters[start].t > window {
            out.push(&clusters[start..i]);
            start = i;
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct State {
    t: f64,
    p: Vec2,
    yaw: f64,
    v: f64,
}

pub fn run_pipeline(
    imu: &[ImuSample],
    lidar: &[LidarReturn],
    library: &MarkerLibrary,
    params: &PipelineParams,
) -> Result<PipelineOutput, PipelineError> {
    let cfg = &params.pipeline;
    cfg.validate()?;
    let mut stats = PipelineStats::default();
    let mut warnings = Vec::new();

    let t_first = imu.first().map_or(0.0, |s| s.t);
    let window_end = t_first + params.horizontation.init_window;
    let n_init = imu.partition_point(|s| s.t <= window_end + 1e-9);
    let tracker = OrientationTracker::init_standstill(
        &imu[..n_init],
        params.start.psi,
        &params.horizontation,
    )?;
    let mut imu = Imu {
        samples: imu,
        next: n_init,
        tracker,
        rates: RateLog::default(),
    };

    let returns = filter_reflectivity(lidar, cfg);
    stats.returns_kept = returns.len();
    let mut clusters = cluster_by_time(&returns, cfg)?;
    clusters.sort_by(|a, b| a.t.total_cmp(&b.t));
    stats.clusters = clusters.len();
    let scans = group_scans(&clusters, cfg.cluster_time);
    stats.scans = scans.len();

    let mut state = State {
        t: imu.tracker.t_last(),
        p: params.start.p,
        yaw: imu.tracker.yaw(),
        v: 0.0,
    };
    let mut estimates = Vec::with_capacity(scans.len());

    if scans.is_empty() {
        warnings.push(format!(
            "no marker returns at reflectivity >= {}; trajectory holds dead-reckoned heading only",
            cfg.reflectivity_threshold
        ));
        let mut next_row = state.t;
        loop {
            if imu.tracker.t_last() >= next_row - 1e-9 {
                estimates.push(VehicleStateEstimate {
                    t: imu.tracker.t_last(),
                    position: state.p,
                    yaw: imu.tracker.yaw(),
                    v_og: 0.0,
                    quality: Quality::DeadReckoning,
                    offset_disagreement: 0.0,
                });
                next_row += params.dead_reckoning_interval;
            }
            if imu.next >= imu.samples.len() {
                break;
            }
            imu.step(&mut stats)?;
        }
        return Ok(PipelineOutput {
            estimates,
            warnings,
            stats,
        });
    }

    let mut prev: Vec<MarkerObservation> = Vec::new();
    for scan in scans {
        let (lo, hi) = scan
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c.t), hi.max(c.t))
            });
        let t_scan = 0.5 * (lo + hi);
        imu.advance_to(t_scan, &mut stats)?;

        let rough_delta = imu.rates.motion(state.t, t_scan, state.v);
        let yaw_scan = imu.yaw_at(t_scan);
        let rough = RoughPose {
            p: state.p + rough_delta.d.rotated(state.yaw),
            psi: yaw_scan,
        };

        let obs = identify_scan(scan, library, &rough, params, &mut stats);
        if 2 * obs.len() < scan.len() {
            stats.poorly_identified_scans += 1;
        }

        let speeds: Vec<f64> = obs
            .iter()
            .filter_map(|o| {
                let p = prev.iter().find(|p| p.marker_id == o.marker_id)?;
                let dt = o.t - p.t;
                if !(dt > 0.0) {
                    return None;
                }
                let rate = imu.rates.yaw_change(p.t, o.t) / dt;
                estimate_velocity(p, o, rate).ok()
            })
            .collect();
        stats.velocity_fixes += speeds.len();
        let has_velocity = !speeds.is_empty();
        let v = if has_velocity {
            speeds.iter().sum::<f64>() / speeds.len() as f64
        } else {
            state.v
        };

        let pose = pose_fix(&prev, &obs, library, &imu.rates, v, &mut stats);

        let row = match pose {
            Some((p, yaw, disagreement)) => {
                imu.overwrite_yaw(t_scan, yaw);
                state = State {
                    t: t_scan,
                    p,
                    yaw,
                    v,
                };
                VehicleStateEstimate {
                    t: t_scan,
                    position: p,
                    yaw,
                    v_og: v,
                    quality: Quality::FullPose,
                    offset_disagreement: disagreement,
                }
            }
            None => {
                let delta = imu.rates.motion(state.t, t_scan, v);
                state = State {
                    t: t_scan,
                    p: state.p + delta.d.rotated(state.yaw),
                    yaw: yaw_scan,
                    v,
                };
                VehicleStateEstimate {
                    t: t_scan,
                    position: state.p,
                    yaw: yaw_scan,
                    v_og: v,
                    quality: if has_velocity {
                        Quality::VelocityOnly
                    } else {
                        Quality::DeadReckoning
                    },
                    offset_disagreement: 0.0,
                }
            }
        };
        estimates.push(row);
        prev = obs;
    }

    if stats.imu_gaps > 0 {
        warnings.push(format!(
            "{} IMU gaps skipped without integration",
            stats.imu_gaps
        ));
    }
    if stats.poorly_identified_scans > 0 {
        warnings.push(format!(
            "{} scans had fewer than half of their clusters identified; the rough pose may be off",
            stats.poorly_identified_scans
        ));
    }
    if stats.pose_fixes == 0 {
        warnings.push("no pose fixes".into());
    }
    Ok(PipelineOutput {
        estimates,
        warnings,
        stats,
    })
}

/// Identifies each cluster of a scan. When two clusters resolve to the same
/// marker the closer match is kept.
fn identify_scan(
    scan: &[Cluster],
    library: &MarkerLibrary,
    rough: &RoughPose,
    params: &PipelineParams,
    stats: &mut PipelineStats,
) -> Vec<MarkerObservation> {
    let mut best: HashMap<u32, (f64, MarkerObservation)> = HashMap::new();
    let mut order = Vec::new();
    for c in scan {
        match library.identify(rough, Vec2::from(c.p), &params.identify) {
            Ok(id) => {
                stats.identified += 1;
                let obs = MarkerObservation::from_cluster(id.marker.id, c);
                match best.get_mut(&id.marker.id) {
                    Some(slot) => {
                        stats.duplicate_ids += 1;
                        if id.distance < slot.0 {
                            *slot = (id.distance, obs);
                        }
                    }
                    None => {
                        order.push(id.marker.id);
                        best.insert(id.marker.id, (id.distance, obs));
                    }
                }
            }
            Err(IdentifyError::NoMarkerInRange { .. }) => stats.unmatched += 1,
            Err(IdentifyError::AmbiguousMatch { .. }) => stats.ambiguous += 1,
        }
    }
    order.iter().map(|id| best[id].1).collect()
}

/// Separation-weighted mean of all pair fixes between two scans, as
/// `(position, yaw, mean offset disagreement)` at the later scan.
fn pose_fix(
    prev: &[MarkerObservation],
    cur: &[MarkerObservation],
    library: &MarkerLibrary,
    rates: &RateLog,
    v: f64,
    stats: &mut PipelineStats,
) -> Option<(Vec2, f64, f64)> {
    let mut wsum = 0.0;
    let mut p = Vec2::ZERO;
    let (mut s, mut c) = (0.0, 0.0);
    let mut disagreement = 0.0;
    let mut n = 0usize;
    for a in prev {
        for b in cur.iter().filter(|b| b.marker_id != a.marker_id) {
            let (Some(na), Some(nb)) = (library.get(a.marker_id), library.get(b.marker_id)) else {
                continue;
            };
            let delta = rates.motion(a.t, b.t, v);
            match estimate_pose_with_delta(a, b, na, nb, delta, v) {
                Ok((_, e)) => {
                    let w = (na.xy() - nb.xy()).norm();
                    wsum += w;
                    p = p + e.position.scale(w);
                    s += w * e.yaw.sin();
                    c += w * e.yaw.cos();
                    disagreement += e.offset_disagreement;
                    n += 1;
                }
                Err(_) => stats.rejected_pairs += 1,
            }
        }
    }
    if n == 0 {
        return None;
    }
    stats.pose_fixes += 1;
    Some((p.scale(1.0 / wsum), s.atan2(c), disagreement / n as f64))
}
