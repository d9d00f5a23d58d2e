//! Convention-pinned 3D rotation algebra.
//!
//! Quaternions are Hamilton, scalar first (`w, x, y, z`), right-handed.
//! An orientation quaternion is local-to-world: [`UnitQuaternion::rotate`]
//! takes a vector expressed in the local frame and returns it in world
//! coordinates. The matrix from [`UnitQuaternion::to_matrix`] follows the
//! same convention, so its transpose maps world vectors into the local frame.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use thiserror::Error;

/// Below this rotation angle, log/exp switch to their series expansions.
const SMALL_ANGLE: f64 = 1e-6;

/// Tolerance used by [`RotationMatrix3::from_rows`] to accept a matrix.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RotationError {
    #[error("quaternion has zero or non-finite norm")]
    DegenerateQuaternion,
    #[error("matrix is not a proper rotation (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("non-finite value in rotation input")]
    NonFinite,
}

/// Plain 3-vector of `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        (self.x - o.x)
            .abs()
            .max((self.y - o.y).abs())
            .max((self.z - o.z).abs())
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Unit quaternion, canonicalized so that `w >= 0`.
///
/// When `w == 0` the first non-zero vector component is made positive, so
/// every rotation has exactly one representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes and canonicalizes the given components.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, RotationError> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let n2 = w * w + x * x + y * y + z * z;
        if !n2.is_finite() || n2 <= f64::MIN_POSITIVE {
            return Err(RotationError::DegenerateQuaternion);
        }
        Ok(Self::normalized(w, x, y, z, n2))
    }

    // Already-unit inputs are kept bit-for-bit so that serialized
    // quaternions survive a parse/write cycle unchanged.
    fn normalized(w: f64, x: f64, y: f64, z: f64, n2: f64) -> Self {
        let (w, x, y, z) = if (n2 - 1.0).abs() <= 4.0 * f64::EPSILON {
            (w, x, y, z)
        } else {
            let inv = 1.0 / n2.sqrt();
            (w * inv, x * inv, y * inv, z * inv)
        };
        Self::canonical(w, x, y, z)
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        let flip = if w != 0.0 {
            w < 0.0
        } else if x != 0.0 {
            x < 0.0
        } else if y != 0.0 {
            y < 0.0
        } else {
            z < 0.0
        };
        // `+ 0.0` turns any -0.0 into +0.0 for stable output.
        if flip {
            Self { w: -w + 0.0, x: -x + 0.0, y: -y + 0.0, z: -z + 0.0 }
        } else {
            Self { w: w + 0.0, x: x + 0.0, y: y + 0.0, z: z + 0.0 }
        }
    }

    // Renormalizes a product of unit quaternions, which drifts only by
    // rounding error.
    fn from_raw(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n2 = w * w + x * x + y * y + z * z;
        Self::normalized(w, x, y, z, n2)
    }

    /// Rotation of `angle` radians about `axis`. The axis need not be unit
    /// length but must be non-zero.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, RotationError> {
        let n = axis.norm();
        if !n.is_finite() || !angle.is_finite() {
            return Err(RotationError::NonFinite);
        }
        if n == 0.0 {
            return Err(RotationError::DegenerateQuaternion);
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }

    /// Exponential map of a rotation vector `θ·axis` (radians).
    pub fn from_rotation_vector(v: Vec3) -> Result<Self, RotationError> {
        if !v.is_finite() {
            return Err(RotationError::NonFinite);
        }
        let theta = v.norm();
        let (w, k) = if theta < SMALL_ANGLE {
            let t2 = theta * theta;
            (1.0 - t2 / 8.0, 0.5 - t2 / 48.0)
        } else {
            let half = 0.5 * theta;
            (half.cos(), half.sin() / theta)
        };
        Ok(Self::from_raw(w, v.x * k, v.y * k, v.z * k))
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Components as `[w, x, y, z]`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, o: &UnitQuaternion) -> Self {
        let (a, b) = (self, o);
        Self::from_raw(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotates a local-frame vector into the world frame.
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Rotates a world-frame vector into the local frame (`Rᵀ·v`).
    pub fn inverse_rotate(&self, v: Vec3) -> Vec3 {
        self.inverse().rotate(v)
    }

    pub fn to_matrix(&self) -> RotationMatrix3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        RotationMatrix3 {
            m: [
                [
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - w * z),
                    2.0 * (x * z + w * y),
                ],
                [
                    2.0 * (x * y + w * z),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - w * x),
                ],
                [
                    2.0 * (x * z - w * y),
                    2.0 * (y * z + w * x),
                    1.0 - 2.0 * (x * x + y * y),
                ],
            ],
        }
    }

    /// Shepperd's method: pick the largest of the four diagonal
    /// combinations to avoid cancellation.
    pub fn from_matrix(r: &RotationMatrix3) -> Self {
        let m = &r.m;
        let trace = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z) = if trace > m[0][0].max(m[1][1]).max(m[2][2]) {
            let s = 2.0 * (1.0 + trace).sqrt();
            (
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] >= m[1][1] && m[0][0] >= m[2][2] {
            let s = 2.0 * (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt();
            (
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] >= m[2][2] {
            let s = 2.0 * (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt();
            (
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = 2.0 * (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt();
            (
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        };
        Self::from_raw(w, x, y, z)
    }

    /// Logarithm map: returns `θ·axis` with `θ ∈ [0, π]`.
    pub fn log(&self) -> Vec3 {
        let v = Vec3::new(self.x, self.y, self.z);
        let s = v.norm();
        // w >= 0 by canonicalization, so atan2 lands in [0, π/2].
        let half = s.atan2(self.w);
        let k = if 2.0 * half < SMALL_ANGLE {
            // 2·atan(s/w)/s expanded around s = 0.
            let r2 = (s / self.w) * (s / self.w);
            2.0 / self.w * (1.0 - r2 / 3.0)
        } else {
            2.0 * half / s
        };
        v * k
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        2.0 * Vec3::new(self.x, self.y, self.z).norm().atan2(self.w)
    }

    /// Angle of the relative rotation between `self` and `o`.
    pub fn angle_to(&self, o: &UnitQuaternion) -> f64 {
        self.inverse().compose(o).angle()
    }

    /// Componentwise distance to `o`, treating `q` and `-q` as equal.
    pub fn max_abs_diff(&self, o: &UnitQuaternion) -> f64 {
        let a = self.to_array();
        let b = o.to_array();
        let same = (0..4).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
        let flipped = (0..4).map(|i| (a[i] + b[i]).abs()).fold(0.0, f64::max);
        same.min(flipped)
    }

    /// Spherical linear interpolation along the shorter arc, at constant
    /// angular rate. `u` is clamped to `[0, 1]`.
    pub fn slerp(&self, b: &UnitQuaternion, u: f64) -> Self {
        let u = u.clamp(0.0, 1.0);
        if u == 0.0 {
            return *self;
        }
        if u == 1.0 {
            return *b;
        }
        // Canonical form of the relative rotation already picks the short
        // way round; a 180° relative turn keeps its canonical axis.
        let rel = self.inverse().compose(b);
        let step = Self::from_rotation_vector(rel.log() * u)
            .expect("log of a unit quaternion is finite");
        self.compose(&step)
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;
    fn mul(self, o: UnitQuaternion) -> UnitQuaternion {
        self.compose(&o)
    }
}

/// Row-major proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix3 {
    m: [[f64; 3]; 3],
}

impl RotationMatrix3 {
    pub const IDENTITY: RotationMatrix3 = RotationMatrix3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Accepts `rows` only if `MᵀM = I` and `det M = 1` within
    /// [`ORTHONORMAL_TOLERANCE`].
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self, RotationError> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let m = RotationMatrix3 { m: rows };
        let deviation = m.orthonormality_error().max((m.determinant() - 1.0).abs());
        if deviation > ORTHONORMAL_TOLERANCE {
            return Err(RotationError::NotOrthonormal { deviation });
        }
        Ok(m)
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.m[r][c]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        RotationMatrix3 {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let r = |i: usize| self.m[i][0] * v.x + self.m[i][1] * v.y + self.m[i][2] * v.z;
        Vec3::new(r(0), r(1), r(2))
    }

    /// `Rᵀ·v`, i.e. world to local.
    pub fn transpose_mul_vec(&self, v: Vec3) -> Vec3 {
        let c = |j: usize| self.m[0][j] * v.x + self.m[1][j] * v.y + self.m[2][j] * v.z;
        Vec3::new(c(0), c(1), c(2))
    }

    pub fn mul_mat(&self, o: &RotationMatrix3) -> RotationMatrix3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        RotationMatrix3 { m: out }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max absolute entry of `MᵀM − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| self.m[k][i] * self.m[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, o: &RotationMatrix3) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(o.m.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<UnitQuaternion> for RotationMatrix3 {
    fn from(q: UnitQuaternion) -> Self {
        q.to_matrix()
    }
}

impl From<RotationMatrix3> for UnitQuaternion {
    fn from(m: RotationMatrix3) -> Self {
        UnitQuaternion::from_matrix(&m)
    }
}

/// Free-function form of [`UnitQuaternion::to_matrix`].
pub fn quat_to_matrix(q: &UnitQuaternion) -> RotationMatrix3 {
    q.to_matrix()
}

/// Converts a raw row-major matrix, rejecting anything that is not a
/// proper rotation.
pub fn matrix_to_quat(rows: [[f64; 3]; 3]) -> Result<UnitQuaternion, RotationError> {
    RotationMatrix3::from_rows(rows).map(|m| UnitQuaternion::from_matrix(&m))
}

pub fn quat_compose(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    a.compose(b)
}

pub fn quat_inverse(q: &UnitQuaternion) -> UnitQuaternion {
    q.inverse()
}

pub fn slerp(a: &UnitQuaternion, b: &UnitQuaternion, u: f64) -> UnitQuaternion {
    a.slerp(b, u)
}

pub fn quat_log_angle_axis(q: &UnitQuaternion) -> Vec3 {
    q.log()
}

/// Rotation about the world up (Y) axis.
pub fn yaw_rotation(angle: f64) -> UnitQuaternion {
    let (s, c) = (0.5 * angle).sin_cos();
    UnitQuaternion::new(c, 0.0, s, 0.0).expect("finite yaw angle")
}
