//! Frame conventions and rotation-matrix kernels.
//!
//! Two frames are used throughout the crate:
//!
//! * **LTP** (local tangent plane): earth-fixed East-North-Up frame with an
//!   arbitrary origin on the surface.
//! * **LCP** (local vehicle plane): body frame at the sprung-mass centre,
//!   x toward the hood, y toward the driver side, z up. Because the vehicle
//!   moves, an LCP vector is only meaningful together with the time instant
//!   it was expressed at.
//!
//! Matrices are plain row-major 3x3 records. All angles are radians.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Below this angle [`axis_angle_matrix`] returns the identity regardless of
/// the axis.
pub const EPS_ANGLE: f64 = 1e-9;
/// Minimum norm accepted for rotation axes and intermediate cross products.
pub const EPS_AXIS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("rotation axis has norm {norm:e} (below {EPS_AXIS:e}) for a non-zero angle")]
    DegenerateAxis { norm: f64 },
    #[error("matrix columns are (nearly) parallel; cross product norm {norm:e}")]
    DegenerateColumns { norm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Length of the projection onto the horizontal (x, y) plane.
    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Planar vector used by the estimator, which works on the horizontal plane only.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2::new(0.0, 0.0);

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(r * c, r * s)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Angle of the vector in (-pi, pi].
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    /// Counter-clockwise rotation by `theta`.
    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl From<Vec3> for Vec2 {
    fn from(v: Vec3) -> Vec2 {
        Vec2::new(v.x, v.y)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Default for Mat3 {
    fn default() -> Self {
        Mat3::IDENTITY
    }
}

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };
    pub const ZERO: Mat3 = Mat3 { m: [[0.0; 3]; 3] };

    pub const fn from_rows(m: [[f64; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn from_cols(c1: Vec3, c2: Vec3, c3: Vec3) -> Self {
        Self {
            m: [[c1.x, c2.x, c3.x], [c1.y, c2.y, c3.y], [c1.z, c2.z, c3.z]],
        }
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.m;
        Mat3::from_rows([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// `self^T * v` without materializing the transpose.
    pub fn tr_mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.col(0).dot(v), self.col(1).dot(v), self.col(2).dot(v))
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut out = *self;
        out.m.iter_mut().flatten().for_each(|e| *e *= s);
        out
    }

    pub fn determinant(&self) -> f64 {
        self.col(0).dot(self.col(1).cross(self.col(2)))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().flatten().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0_f64, |a, e| a.max(e.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|e| e.is_finite())
    }

    /// `max |R^T R - I|`, the orthonormality defect.
    pub fn orthonormality_error(&self) -> f64 {
        (self.transpose() * *self - Mat3::IDENTITY).max_abs()
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        Mat3::from_rows(out)
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        self.mul_vec(v)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v.scale(self)
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] += o.m[i][j];
            }
        }
        out
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        self + o.scale(-1.0)
    }
}

/// Reference frame a vector is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    Ltp,
    /// Vehicle frame frozen at time instant `t` (seconds).
    Lcp {
        t: f64,
    },
}

/// A vector together with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Framed<V> {
    pub frame: Frame,
    pub v: V,
}

impl<V> Framed<V> {
    pub fn ltp(v: V) -> Self {
        Self {
            frame: Frame::Ltp,
            v,
        }
    }

    pub fn lcp(t: f64, v: V) -> Self {
        Self {
            frame: Frame::Lcp { t },
            v,
        }
    }
}

/// Skew-symmetric cross-product matrix, `skew(w) * v == w x v`.
pub fn skew(w: Vec3) -> Mat3 {
    Mat3::from_rows([[0.0, -w.z, w.y], [w.z, 0.0, -w.x], [-w.y, w.x, 0.0]])
}

/// Rotation by `angle` about `axis` (right-hand rule).
///
/// The entries are written in terms of the *unnormalized* axis
/// `r = (rx, ry, rz)` with `r_m = |r|^2` and `r_c = 1 - cos(angle)`, e.g. the
/// (0, 1) entry is `(rx*ry*r_c - rz*sqrt(r_m)*sin(angle)) / r_m`. Dividing
/// through by `r_m` shows every entry equals the textbook normalized-axis
/// Rodrigues matrix `cI + s[u]x + (1-c)uu^T` with `u = r/|r|`; the tests check
/// this against an independent quaternion construction.
pub fn axis_angle_matrix(axis: Vec3, angle: f64) -> Result<Mat3, GeometryError> {
    if angle.abs() < EPS_ANGLE {
        return Ok(Mat3::IDENTITY);
    }
    let rm = axis.norm_squared();
    let norm = rm.sqrt();
    if norm < EPS_AXIS {
        return Err(GeometryError::DegenerateAxis { norm });
    }
    let (rx, ry, rz) = (axis.x, axis.y, axis.z);
    let (s, c) = angle.sin_cos();
    let rc = 1.0 - c;
    let sq = norm * s;
    Ok(Mat3::from_rows([
        [
            (rx * rx + (ry * ry + rz * rz) * c) / rm,
            (rx * ry * rc - rz * sq) / rm,
            (rx * rz * rc + ry * sq) / rm,
        ],
        [
            (rx * ry * rc + rz * sq) / rm,
            (ry * ry + (rx * rx + rz * rz) * c) / rm,
            (ry * rz * rc - rx * sq) / rm,
        ],
        [
            (rx * rz * rc - ry * sq) / rm,
            (ry * rz * rc + rx * sq) / rm,
            (rz * rz + (rx * rx + ry * ry) * c) / rm,
        ],
    ]))
}

/// Restores orthonormality with the column cross-product scheme: the third
/// column keeps its direction, `r1 = r2' x r3`, `r2 = r3 x r1`, then every
/// column is normalized.
pub fn orthonormalize(r: &Mat3) -> Result<Mat3, GeometryError> {
    let r2p = r.col(1);
    let r3 = r.col(2);
    let r1 = r2p.cross(r3);
    let r2 = r3.cross(r1);
    let (n1, n2, n3) = (r1.norm(), r2.norm(), r3.norm());
    let min = n1.min(n2).min(n3);
    if !(min >= EPS_AXIS) {
        return Err(GeometryError::DegenerateColumns { norm: min });
    }
    Ok(Mat3::from_cols(
        r1.scale(1.0 / n1),
        r2.scale(1.0 / n2),
        r3.scale(1.0 / n3),
    ))
}

/// Rotation about z by `theta`.
pub fn yaw_matrix(theta: f64) -> Mat3 {
    let (s, c) = theta.sin_cos();
    Mat3::from_rows([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_pi(a: f64) -> f64 {
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Wraps an angle into [0, 2pi).
pub fn wrap_2pi(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}
