//! Velocity and pose fixes from pairs of marker observations, assuming
//! constant speed and constant yaw rate between the two observations.
//!
//! Angles follow the right-hand rule about the up axis: azimuths and yaw
//! rates are positive counter-clockwise.

use std::f64::consts::PI;

use crate::geometry::{wrap_2pi, wrap_pi, Framed, Vec2};
use crate::marker_map::{Marker, MarkerId};
use crate::pointcloud::Cluster;
use thiserror::Error;

/// Below this yaw-rate magnitude the CTRV displacement uses its series form.
pub const OMEGA_MIN: f64 = 1e-6;
/// Smallest usable separation of the two markers of a pose pair, meters.
pub const EPS_PAIR: f64 = 1e-3;
/// Cosine-law radicands down to this value are treated as rounding noise.
pub const RADICAND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("observations share timestamp {t}")]
    SameTimestamp { t: f64 },
    #[error("second observation at {t2} precedes first at {t1}")]
    TimeOrder { t1: f64, t2: f64 },
    #[error("cosine-law radicand {radicand} is negative")]
    NegativeDiscriminant { radicand: f64 },
    #[error("velocity needs one marker seen twice, got {a} and {b}")]
    MarkerMismatch { a: MarkerId, b: MarkerId },
    #[error("pose needs two distinct markers, both observations are of {id}")]
    SameMarker { id: MarkerId },
    #[error("observation of marker {observed} paired with library marker {given}")]
    WrongLibraryMarker { observed: MarkerId, given: MarkerId },
    #[error("marker pair separation {separation:.2e} m is too small")]
    DegeneratePair { separation: f64 },
}

/// A marker sighting: a cluster resolved to a library id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerObservation {
    pub t: f64,
    pub marker_id: MarkerId,
    /// Horizontal range, meters.
    pub d: f64,
    /// Azimuth in [0, 2pi).
    pub theta: f64,
    /// Horizontal position in the vehicle frame at `t`.
    pub p_m: Vec2,
}

impl MarkerObservation {
    pub fn new(t: f64, marker_id: MarkerId, p_m: Vec2) -> Self {
        Self {
            t,
            marker_id,
            d: p_m.norm(),
            theta: wrap_2pi(p_m.angle()),
            p_m,
        }
    }

    pub fn from_cluster(marker_id: MarkerId, c: &Cluster) -> Self {
        Self::new(c.t, marker_id, Vec2::from(c.p))
    }

    pub fn position(&self) -> Framed<Vec2> {
        Framed::lcp(self.t, self.p_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quality {
    VelocityOnly,
    FullPose,
    /// No LiDAR fix; position and yaw are propagated from the IMU only.
    DeadReckoning,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::VelocityOnly => "VelocityOnly",
            Quality::FullPose => "FullPose",
            Quality::DeadReckoning => "DeadReckoning",
        }
    }
}

impl std::str::FromStr for Quality {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "VelocityOnly" => Ok(Quality::VelocityOnly),
            "FullPose" => Ok(Quality::FullPose),
            "DeadReckoning" => Ok(Quality::DeadReckoning),
            other => Err(format!("unknown quality `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleStateEstimate {
    pub t: f64,
    /// Vehicle origin in the LTP, meters.
    pub position: Vec2,
    /// Yaw in (-pi, pi].
    pub yaw: f64,
    /// Speed over ground, m/s.
    pub v_og: f64,
    pub quality: Quality,
    /// Distance between the two per-marker position offsets of a pose fix.
    /// Zero for noiseless input; zero for other qualities.
    pub offset_disagreement: f64,
}

/// Planar displacement and heading change between two instants, expressed in
/// the vehicle frame at the first instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionDelta {
    pub d: Vec2,
    pub dyaw: f64,
}

impl MotionDelta {
    pub const ZERO: MotionDelta = MotionDelta {
        d: Vec2::ZERO,
        dyaw: 0.0,
    };

    /// This motion followed by `next` (given in the frame reached by `self`).
    pub fn then(self, next: MotionDelta) -> MotionDelta {
        MotionDelta {
            d: self.d + next.d.rotated(self.dyaw),
            dyaw: self.dyaw + next.dyaw,
        }
    }
}

/// Interior angles at the vehicle positions of the triangle spanned by one
/// marker and the two vehicle positions.
pub fn cone_angles(
    obs1: &MarkerObservation,
    obs2: &MarkerObservation,
    dt: f64,
    yaw_rate: f64,
) -> (f64, f64) {
    let turn = dt * yaw_rate;
    let v1 = if obs1.theta <= PI {
        obs1.theta
    } else {
        2.0 * PI - obs1.theta
    };
    let v2 = if obs2.theta <= PI {
        PI - obs2.theta - turn
    } else {
        obs2.theta + turn - PI
    };
    (v1, v2)
}

/// Angle at the marker between the two lines of sight.
fn apex_angle(obs1: &MarkerObservation, obs2: &MarkerObservation, dt: f64, yaw_rate: f64) -> f64 {
    let same_side = (obs1.theta <= PI) == (obs2.theta <= PI);
    if same_side {
        let (v1, v2) = cone_angles(obs1, obs2, dt, yaw_rate);
        PI - v1 - v2
    } else {
        // sightings on opposite sides: the two interior angles do not share
        // an orientation, use the signed bearing change instead
        wrap_pi(obs2.theta + dt * yaw_rate - obs1.theta)
    }
}

/// Chord length travelled between two sightings of the same marker.
pub fn chord_length(
    obs1: &MarkerObservation,
    obs2: &MarkerObservation,
    yaw_rate: f64,
) -> Result<f64, EstimatorError> {
    if obs1.marker_id != obs2.marker_id {
        return Err(EstimatorError::MarkerMismatch {
            a: obs1.marker_id,
            b: obs2.marker_id,
        });
    }
    let dt = interval(obs1.t, obs2.t)?;
    let cos = apex_angle(obs1, obs2, dt, yaw_rate).cos().clamp(-1.0, 1.0);
    let radicand = obs1.d * obs1.d + obs2.d * obs2.d - 2.0 * obs1.d * obs2.d * cos;
    if radicand < -RADICAND_TOLERANCE || radicand.is_nan() {
        return Err(EstimatorError::NegativeDiscriminant { radicand });
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Speed over ground from two sightings of one marker: chord over elapsed time.
pub fn estimate_velocity(
    obs1: &MarkerObservation,
    obs2: &MarkerObservation,
    yaw_rate: f64,
) -> Result<f64, EstimatorError> {
    let chord = chord_length(obs1, obs2, yaw_rate)?;
    Ok(chord / (obs2.t - obs1.t))
}

fn interval(t1: f64, t2: f64) -> Result<f64, EstimatorError> {
    if t2 == t1 {
        Err(EstimatorError::SameTimestamp { t: t1 })
    } else if t2 < t1 {
        Err(EstimatorError::TimeOrder { t1, t2 })
    } else {
        Ok(t2 - t1)
    }
}

/// Displacement on a circular arc of radius `v / yaw_rate`.
///
/// Near-zero yaw rates use the series expansion of the same expressions, so
/// the result is continuous through the switch and tends to `(v dt, 0)`.
pub fn ctrv_delta(v: f64, yaw_rate: f64, dt: f64) -> MotionDelta {
    let dyaw = yaw_rate * dt;
    let d = if yaw_rate.abs() >= OMEGA_MIN {
        let r = v / yaw_rate;
        let half = 0.5 * dyaw;
        // 1 - cos(x) written as 2 sin^2(x/2) to avoid cancellation
        Vec2::new(r * dyaw.sin(), 2.0 * r * half.sin() * half.sin())
    } else {
        let s = v * dt;
        let x2 = dyaw * dyaw;
        Vec2::new(s * (1.0 - x2 / 6.0), 0.5 * s * dyaw * (1.0 - x2 / 12.0))
    };
    MotionDelta { d, dyaw }
}

/// Pose at both observation instants from sightings of two distinct markers.
///
/// The observations may be given in either time order; the result is
/// `(estimate at the earlier instant, estimate at the later one)`. The motion
/// between them is `ctrv_delta(v_og, yaw_rate, dt)`.
pub fn estimate_pose(
    obs_a: &MarkerObservation,
    obs_b: &MarkerObservation,
    n_a: &Marker,
    n_b: &Marker,
    v_og: f64,
    yaw_rate: f64,
) -> Result<(VehicleStateEstimate, VehicleStateEstimate), EstimatorError> {
    let dt = (obs_b.t - obs_a.t).abs();
    let delta = ctrv_delta(v_og, yaw_rate, dt);
    estimate_pose_with_delta(obs_a, obs_b, n_a, n_b, delta, v_og)
}

/// [`estimate_pose`] with the motion between the two instants supplied
/// directly, e.g. composed from several IMU intervals.
pub fn estimate_pose_with_delta(
    obs_a: &MarkerObservation,
    obs_b: &MarkerObservation,
    n_a: &Marker,
    n_b: &Marker,
    delta: MotionDelta,
    v_og: f64,
) -> Result<(VehicleStateEstimate, VehicleStateEstimate), EstimatorError> {
    if obs_a.marker_id == obs_b.marker_id {
        return Err(EstimatorError::SameMarker {
            id: obs_a.marker_id,
        });
    }
    for (obs, n) in [(obs_a, n_a), (obs_b, n_b)] {
        if obs.marker_id != n.id {
            return Err(EstimatorError::WrongLibraryMarker {
                observed: obs.marker_id,
                given: n.id,
            });
        }
    }
    if obs_a.t == obs_b.t {
        return Err(EstimatorError::SameTimestamp { t: obs_a.t });
    }
    let a_first = obs_a.t < obs_b.t;
    let (first, second) = if a_first {
        (obs_a, obs_b)
    } else {
        (obs_b, obs_a)
    };

    // both sightings in the vehicle frame of the earlier instant
    let late = second.p_m.rotated(delta.dyaw) + delta.d;
    let (qa, qb) = if a_first {
        (first.p_m, late)
    } else {
        (late, first.p_m)
    };
    let (na, nb) = (n_a.xy(), n_b.xy());

    let local = qb - qa;
    let global = nb - na;
    let separation = local.norm().min(global.norm());
    if !(separation >= EPS_PAIR) {
        return Err(EstimatorError::DegeneratePair { separation });
    }
    let yaw1 = wrap_pi(global.angle() - local.angle());
    let yaw2 = wrap_pi(yaw1 + delta.dyaw);

    let offset_a = na - qa.rotated(yaw1);
    let offset_b = nb - qb.rotated(yaw1);
    let p1 = (offset_a + offset_b).scale(0.5);
    let p2 = p1 + delta.d.rotated(yaw1);
    let disagreement = (offset_a - offset_b).norm();

    let est = |t, position, yaw| VehicleStateEstimate {
        t,
        position,
        yaw,
        v_og,
        quality: Quality::FullPose,
        offset_disagreement: disagreement,
    };
    Ok((est(first.t, p1, yaw1), est(second.t, p2, yaw2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Pose on the CTRV circle, evaluated from the closed form.
    fn ctrv_pose(p0: Vec2, yaw0: f64, v: f64, w: f64, t: f64) -> (Vec2, f64) {
        let yaw = yaw0 + w * t;
        let p = if w == 0.0 {
            p0 + Vec2::from_polar(v * t, yaw0)
        } else {
            let r = v / w;
            p0 + Vec2::new(r * (yaw.sin() - yaw0.sin()), -r * (yaw.cos() - yaw0.cos()))
        };
        (p, yaw)
    }

    fn sight(t: f64, id: MarkerId, marker: Vec2, pose: (Vec2, f64)) -> MarkerObservation {
        MarkerObservation::new(t, id, (marker - pose.0).rotated(-pose.1))
    }

    fn marker(id: MarkerId, p: Vec2) -> Marker {
        Marker {
            id,
            p_ltp: Vec3::new(p.x, p.y, 0.5),
        }
    }

    #[test]
    fn cone_angle_examples() {
        let ahead = MarkerObservation::new(0.0, 1, Vec2::new(5.0, 0.0));
        assert_eq!(cone_angles(&ahead, &ahead, 0.05, 0.0), (0.0, PI));
        let mut right = ahead;
        right.theta = 1.5 * PI;
        assert_abs_diff_eq!(cone_angles(&right, &ahead, 0.05, 0.0).0, PI / 2.0);
    }

    #[test]
    fn velocity_examples() {
        let o = MarkerObservation::new(0.0, 3, Vec2::new(4.0, 2.0));
        let o2 = MarkerObservation { t: 0.05, ..o };
        assert_eq!(estimate_velocity(&o, &o2, 0.0).unwrap(), 0.0);

        let a = MarkerObservation::new(0.0, 3, Vec2::new(10.0, 0.0));
        let b = MarkerObservation::new(0.05, 3, Vec2::new(9.0, 0.0));
        assert_abs_diff_eq!(chord_length(&a, &b, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            estimate_velocity(&a, &b, 0.0).unwrap(),
            20.0,
            epsilon = 1e-10
        );

        assert!(matches!(
            estimate_velocity(&a, &MarkerObservation { t: 0.0, ..b }, 0.0),
            Err(EstimatorError::SameTimestamp { .. })
        ));
        let other = MarkerObservation { marker_id: 4, ..b };
        assert!(matches!(
            estimate_velocity(&a, &other, 0.0),
            Err(EstimatorError::MarkerMismatch { .. })
        ));
    }

    #[test]
    fn ctrv_examples() {
        let s = ctrv_delta(10.0, 0.0, 0.1);
        assert_eq!(
            s,
            MotionDelta {
                d: Vec2::new(1.0, 0.0),
                dyaw: 0.0
            }
        );
        let c = ctrv_delta(10.0, 0.5, 0.1);
        assert_abs_diff_eq!(c.d.x, 20.0 * 0.05f64.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(c.d.y, 20.0 * (1.0 - 0.05f64.cos()), epsilon = 1e-14);
        assert_abs_diff_eq!(c.dyaw, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn ctrv_continuity_at_switch() {
        for v in [0.1, 1.0, 10.0] {
            for dt in [0.01, 0.05, 0.1, 1.0] {
                for sign in [1.0, -1.0] {
                    let below = ctrv_delta(v, sign * OMEGA_MIN * (1.0 - 1e-12), dt);
                    let above = ctrv_delta(v, sign * OMEGA_MIN, dt);
                    assert!((below.d - above.d).norm() < 1e-9, "v={v} dt={dt}");
                    assert!((below.dyaw - above.dyaw).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn stationary_pose() {
        let n1 = marker(1, Vec2::new(5.0, 1.0));
        let n2 = marker(2, Vec2::new(5.0, -1.0));
        for offset in [Vec2::ZERO, Vec2::new(100.0, 50.0)] {
            let a = MarkerObservation::new(0.0, 1, n1.xy());
            let b = MarkerObservation::new(0.05, 2, n2.xy());
            let na = marker(1, n1.xy() + offset);
            let nb = marker(2, n2.xy() + offset);
            let (e1, e2) = estimate_pose(&a, &b, &na, &nb, 0.0, 0.0).unwrap();
            for e in [e1, e2] {
                assert_abs_diff_eq!((e.position - offset).norm(), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(e.yaw, 0.0, epsilon = 1e-12);
                assert_eq!(e.quality, Quality::FullPose);
            }
        }
    }

    #[test]
    fn pose_errors() {
        let n1 = marker(1, Vec2::new(5.0, 1.0));
        let a = MarkerObservation::new(0.0, 1, n1.xy());
        let b = MarkerObservation::new(0.05, 1, n1.xy());
        assert!(matches!(
            estimate_pose(&a, &b, &n1, &n1, 1.0, 0.0),
            Err(EstimatorError::SameMarker { id: 1 })
        ));
        let n2 = marker(2, Vec2::new(5.0, 1.0 + 1e-4));
        let c = MarkerObservation::new(0.05, 2, n2.xy());
        assert!(matches!(
            estimate_pose(&a, &c, &n1, &n2, 0.0, 0.0),
            Err(EstimatorError::DegeneratePair { .. })
        ));
        assert!(matches!(
            estimate_pose(&a, &c, &n2, &n1, 0.0, 0.0),
            Err(EstimatorError::WrongLibraryMarker { .. })
        ));
    }

    #[test]
    fn arc_scene_pose_is_exact() {
        let (v, w, dt) = (5.0, 0.3, 0.05);
        let start = (Vec2::new(2.0, -3.0), 0.4);
        let pose1 = ctrv_pose(start.0, start.1, v, w, 1.0);
        let pose2 = ctrv_pose(start.0, start.1, v, w, 1.0 + dt);
        let n1 = marker(10, Vec2::new(6.0, 4.0));
        let n2 = marker(11, Vec2::new(-1.0, 5.0));
        let a = sight(1.0, 10, n1.xy(), pose1);
        let b = sight(1.0 + dt, 11, n2.xy(), pose2);
        let (e1, e2) = estimate_pose(&a, &b, &n1, &n2, v, w).unwrap();
        assert_abs_diff_eq!((e1.position - pose1.0).norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!((e2.position - pose2.0).norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(wrap_pi(e1.yaw - pose1.1), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(wrap_pi(e2.yaw - pose2.1), 0.0, epsilon = 1e-9);
        assert!(e1.offset_disagreement < 1e-9);
    }

    #[test]
    fn arc_scene_chord_and_speed() {
        // r = 20 m, w = 0.2 rad/s
        let (v, w, dt) = (4.0, 0.2, 0.05);
        let n = Vec2::new(10.0, 25.0);
        for k in 0..40 {
            let t = k as f64 * 0.5;
            let p1 = ctrv_pose(Vec2::ZERO, 0.0, v, w, t);
            let p2 = ctrv_pose(Vec2::ZERO, 0.0, v, w, t + dt);
            let a = sight(t, 1, n, p1);
            let b = sight(t + dt, 1, n, p2);
            let chord = (p2.0 - p1.0).norm();
            assert_abs_diff_eq!(chord_length(&a, &b, w).unwrap(), chord, epsilon = 1e-9);
            let speed = estimate_velocity(&a, &b, w).unwrap();
            let bound = v * (w * dt).powi(2) / 24.0;
            assert!((speed - v).abs() <= bound * 1.001 + 1e-9, "t={t}");
        }
    }

    proptest! {
        /// Interior angles against the triangle built from ground-truth poses.
        #[test]
        fn cone_angles_match_scene(
            v in 0.5..15.0f64, w in -0.5..0.5f64, yaw0 in -3.1..3.1f64,
            mx in -12.0..12.0f64, my in -12.0..12.0f64,
        ) {
            let dt = 0.05;
            let p1 = ctrv_pose(Vec2::ZERO, yaw0, v, w, 0.0);
            let p2 = ctrv_pose(Vec2::ZERO, yaw0, v, w, dt);
            let n = Vec2::new(mx, my);
            let to1 = n - p1.0;
            let to2 = n - p2.0;
            prop_assume!(to1.norm() > 1.0 && to2.norm() > 1.0);
            let a = sight(0.0, 1, n, p1);
            let b = sight(dt, 1, n, p2);
            // only same-side sightings form the cone directly
            prop_assume!((a.theta <= PI) == (b.theta <= PI));
            let (v1, v2) = cone_angles(&a, &b, dt, w);
            let chord = p2.0 - p1.0;
            let at1 = (chord.dot(to1) / (chord.norm() * to1.norm())).clamp(-1.0, 1.0).acos();
            let at2 = ((p1.0 - p2.0).dot(to2) / (chord.norm() * to2.norm())).clamp(-1.0, 1.0).acos();
            let apex = (to1.dot(to2) / (to1.norm() * to2.norm())).clamp(-1.0, 1.0).acos();
            prop_assert!(((PI - v1 - v2).abs() - apex).abs() < 1e-9);
            // the vehicle heading is not the chord direction on an arc, so
            // each interior angle is off by half the heading change
            let half = 0.5 * (w * dt).abs();
            prop_assert!((v1 - at1).abs() <= half + 1e-9 || (v1 - (PI - at1)).abs() <= half + 1e-9);
            prop_assert!((v2 - at2).abs() <= half + 1e-9 || (v2 - (PI - at2)).abs() <= half + 1e-9);
        }

        #[test]
        fn chord_matches_scene(
            v in 0.5..15.0f64, w in -0.5..0.5f64, yaw0 in -3.1..3.1f64,
            mx in -15.0..15.0f64, my in -15.0..15.0f64, dt in 0.01..0.2f64,
        ) {
            let p1 = ctrv_pose(Vec2::ZERO, yaw0, v, w, 0.0);
            let p2 = ctrv_pose(Vec2::ZERO, yaw0, v, w, dt);
            let n = Vec2::new(mx, my);
            prop_assume!((n - p1.0).norm() > 0.5 && (n - p2.0).norm() > 0.5);
            let a = sight(0.0, 1, n, p1);
            let b = sight(dt, 1, n, p2);
            let chord = chord_length(&a, &b, w).unwrap();
            prop_assert!((chord - (p2.0 - p1.0).norm()).abs() < 1e-9);
        }

        #[test]
        fn velocity_rotation_invariant(
            rot in -3.1..3.1f64, x1 in -10.0..10.0f64, y1 in -10.0..10.0f64,
            x2 in -10.0..10.0f64, y2 in -10.0..10.0f64, w in -0.5..0.5f64,
        ) {
            let p1 = Vec2::new(x1, y1);
            let p2 = Vec2::new(x2, y2);
            prop_assume!(p1.norm() > 0.5 && p2.norm() > 0.5);
            let base = |r: f64| {
                let a = MarkerObservation::new(0.0, 1, p1.rotated(r));
                let b = MarkerObservation::new(0.05, 1, p2.rotated(r));
                estimate_velocity(&a, &b, w).unwrap()
            };
            prop_assert!((base(0.0) - base(rot)).abs() < 1e-9);
        }

        #[test]
        fn pose_exact_on_ctrv(
            v in 0.0..12.0f64, w in -0.6..0.6f64, yaw0 in -3.1..3.1f64,
            x0 in -20.0..20.0f64, y0 in -20.0..20.0f64, dt in 0.01..0.2f64,
            m1 in (-12.0..12.0f64, -12.0..12.0f64), m2 in (-12.0..12.0f64, -12.0..12.0f64),
        ) {
            let start = Vec2::new(x0, y0);
            let p1 = ctrv_pose(start, yaw0, v, w, 0.0);
            let p2 = ctrv_pose(start, yaw0, v, w, dt);
            let n1 = marker(1, start + Vec2::new(m1.0, m1.1));
            let n2 = marker(2, start + Vec2::new(m2.0, m2.1));
            prop_assume!((n1.xy() - n2.xy()).norm() > 0.5);
            let a = sight(0.0, 1, n1.xy(), p1);
            let b = sight(dt, 2, n2.xy(), p2);
            let (e1, e2) = estimate_pose(&a, &b, &n1, &n2, v, w).unwrap();
            prop_assert!((e1.position - p1.0).norm() < 1e-9);
            prop_assert!((e2.position - p2.0).norm() < 1e-9);
            prop_assert!(wrap_pi(e1.yaw - p1.1).abs() < 1e-9);
            prop_assert!(wrap_pi(e2.yaw - p2.1).abs() < 1e-9);
            // time order of the arguments does not matter
            let (f1, f2) = estimate_pose(&b, &a, &n2, &n1, v, w).unwrap();
            prop_assert!((f1.position - e1.position).norm() < 1e-12);
            prop_assert!((f2.position - e2.position).norm() < 1e-12);
            prop_assert!(wrap_pi(f1.yaw - e1.yaw).abs() < 1e-12);
        }

        /// Rigid motion of the map and trajectory moves the estimate with it.
        #[test]
        fn pose_rigid_motion_equivariant(
            rot in -3.1..3.1f64, tx in -100.0..100.0f64, ty in -100.0..100.0f64,
            m1 in (-12.0..12.0f64, -12.0..12.0f64), m2 in (-12.0..12.0f64, -12.0..12.0f64),
            v in 0.0..12.0f64, w in -0.6..0.6f64,
        ) {
            let n1 = Vec2::new(m1.0, m1.1);
            let n2 = Vec2::new(m2.0, m2.1);
            prop_assume!((n1 - n2).norm() > 0.5);
            let p1 = ctrv_pose(Vec2::ZERO, 0.0, v, w, 0.0);
            let p2 = ctrv_pose(Vec2::ZERO, 0.0, v, w, 0.05);
            // sightings are frame-local, so they are unchanged by the motion
            let a = sight(0.0, 1, n1, p1);
            let b = sight(0.05, 2, n2, p2);
            let t = Vec2::new(tx, ty);
            let (e1, e2) = estimate_pose(&a, &b, &marker(1, n1), &marker(2, n2), v, w).unwrap();
            let (g1, g2) = estimate_pose(
                &a, &b, &marker(1, n1.rotated(rot) + t), &marker(2, n2.rotated(rot) + t), v, w,
            ).unwrap();
            for (e, g) in [(e1, g1), (e2, g2)] {
                prop_assert!((e.position.rotated(rot) + t - g.position).norm() < 1e-9);
                prop_assert!(wrap_pi(e.yaw + rot - g.yaw).abs() < 1e-9);
            }
        }

        #[test]
        fn motion_delta_composition(v in 0.0..10.0f64, w in -1.0..1.0f64, t1 in 0.01..0.1f64, t2 in 0.01..0.1f64) {
            let whole = ctrv_delta(v, w, t1 + t2);
            let parts = ctrv_delta(v, w, t1).then(ctrv_delta(v, w, t2));
            prop_assert!((whole.d - parts.d).norm() < 1e-12);
            prop_assert!((whole.dyaw - parts.dyaw).abs() < 1e-15);
            // chord never exceeds arc
            prop_assert!(whole.d.norm() <= v * (t1 + t2) * (1.0 + 1e-12));
        }
    }
}
