//! Runtime measurement of the velocity and pose estimators.

use std::fmt;
use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::estimator::{ctrv_delta, estimate_pose, estimate_velocity, MarkerObservation};
use crate::exec::{map_range, Execution};
use crate::geometry::{Vec2, Vec3};
use crate::marker_map::Marker;

/// Inputs for one velocity fix and one pose fix from a random CTRV scene.
#[derive(Debug, Clone, Copy)]
pub struct BenchCase {
    pub same: (MarkerObservation, MarkerObservation),
    pub pair: (MarkerObservation, MarkerObservation),
    pub markers: (Marker, Marker),
    pub yaw_rate: f64,
}

fn case(seed: u64, i: usize) -> BenchCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    let v = rng.random_range(0.5..12.0);
    let w = rng.random_range(-0.5..0.5);
    let dt = 0.05;
    let yaw0 = rng.random_range(-3.0..3.0);
    let p0 = Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    let step = ctrv_delta(v, w, dt);
    let p1 = p0 + step.d.rotated(yaw0);
    let yaw1 = yaw0 + step.dyaw;
    let mut marker = |id| {
        let off = Vec2::from_polar(
            rng.random_range(2.0..15.0),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let p = p0 + off;
        Marker {
            id,
            p_ltp: Vec3::new(p.x, p.y, 1.0),
        }
    };
    let (a, b) = (marker(1), marker(2));
    let see = |t: f64, m: &Marker, p: Vec2, yaw: f64| {
        MarkerObservation::new(t, m.id, (m.xy() - p).rotated(-yaw))
    };
    BenchCase {
        same: (see(0.0, &a, p0, yaw0), see(dt, &a, p1, yaw1)),
        pair: (see(0.0, &a, p0, yaw0), see(dt, &b, p1, yaw1)),
        markers: (a, b),
        yaw_rate: w,
    }
}

/// Reproducible random cases, generated on the thread pool when available.
pub fn generate_cases(n: usize, seed: u64, exec: Execution) -> Vec<BenchCase> {
    map_range(n, exec, |i| case(seed, i))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub median_us: f64,
    pub std_us: f64,
    pub max_us: f64,
}

impl Timing {
    fn from_ns(mut xs: Vec<f64>) -> Timing {
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        let median = if n % 2 == 1 {
            xs[n / 2]
        } else {
            0.5 * (xs[n / 2 - 1] + xs[n / 2])
        };
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        Timing {
            median_us: median / 1e3,
            std_us: var.sqrt() / 1e3,
            max_us: xs[n - 1] / 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub iterations: usize,
    pub velocity: Timing,
    pub pose: Timing,
    pub combined: Timing,
    pub failures: usize,
}

/// Times each estimator call individually, on the calling thread.
pub fn run_bench(cases: &[BenchCase]) -> BenchReport {
    assert!(!cases.is_empty(), "benchmark needs at least one case");
    let mut tv = Vec::with_capacity(cases.len());
    let mut tp = Vec::with_capacity(cases.len());
    let mut tc = Vec::with_capacity(cases.len());
    let mut failures = 0;
    for c in cases {
        let t0 = Instant::now();
        let v = estimate_velocity(
            black_box(&c.same.0),
            black_box(&c.same.1),
            black_box(c.yaw_rate),
        );
        let t1 = Instant::now();
        let pose = estimate_pose(
            black_box(&c.pair.0),
            black_box(&c.pair.1),
            black_box(&c.markers.0),
            black_box(&c.markers.1),
            *v.as_ref().unwrap_or(&0.0),
            black_box(c.yaw_rate),
        );
        let t2 = Instant::now();
        if v.is_err() || black_box(pose).is_err() {
            failures += 1;
        }
        tv.push((t1 - t0).as_nanos() as f64);
        tp.push((t2 - t1).as_nanos() as f64);
        tc.push((t2 - t0).as_nanos() as f64);
    }
    BenchReport {
        iterations: cases.len(),
        velocity: Timing::from_ns(tv),
        pose: Timing::from_ns(tp),
        combined: Timing::from_ns(tc),
        failures,
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} iterations", self.iterations)?;
        writeln!(
            f,
            "{:<10} {:>12} {:>12} {:>12}",
            "step", "median_us", "std_us", "max_us"
        )?;
        for (name, t) in [
            ("velocity", self.velocity),
            ("pose", self.pose),
            ("combined", self.combined),
        ] {
            writeln!(
                f,
                "{name:<10} {:>12.3} {:>12.3} {:>12.3}",
                t.median_us, t.std_us, t.max_us
            )?;
        }
        Ok(())
    }
}
