//! Noise-free virtual accelerometer and gyroscope.
//!
//! A sensor's world trajectory is differentiated and the results are
//! expressed in the sensor frame:
//!
//! ```text
//! a_local(t) = Rᵀ(t) · (r''(t) − g)
//! ω_local(t) = Rᵀ(t) · ω_world(t)
//! ```
//!
//! where `R` is the local-to-world orientation. A sensor at rest and
//! upright reads `+9.8` on its own Y axis.

use thiserror::Error;

use crate::rotation::{UnitQuaternion, Vec3};
use crate::skeleton::{forward_kinematics, MotionSequence, Skeleton, SkeletonError};

/// Gravity used when nothing else is configured, in m/s².
pub const DEFAULT_GRAVITY: Vec3 = Vec3 { x: 0.0, y: -9.8, z: 0.0 };

/// Differentiation needs at least this many samples.
pub const MIN_SAMPLES: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
}

/// Where a virtual sensor sits on the body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorAttachment {
    pub joint: usize,
    /// Sensor frame relative to the joint frame.
    pub mount_rotation: UnitQuaternion,
    /// Sensor origin in the joint frame, meters.
    pub mount_offset: Vec3,
}

impl SensorAttachment {
    pub fn at_joint(joint: usize) -> Self {
        Self { joint, mount_rotation: UnitQuaternion::IDENTITY, mount_offset: Vec3::ZERO }
    }

    /// Resolves `joint` by name.
    pub fn named(
        sk: &Skeleton,
        joint: &str,
        mount_rotation: UnitQuaternion,
        mount_offset: Vec3,
    ) -> Result<Self, SkeletonError> {
        Ok(Self { joint: sk.joint_index(joint)?, mount_rotation, mount_offset })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityModel {
    pub g_global: Vec3,
}

impl Default for GravityModel {
    fn default() -> Self {
        Self { g_global: DEFAULT_GRAVITY }
    }
}

/// Uniformly sampled world pose of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldTrack {
    rate: f64,
    position: Vec<Vec3>,
    orientation: Vec<UnitQuaternion>,
}

impl WorldTrack {
    pub fn new(
        rate: f64,
        position: Vec<Vec3>,
        orientation: Vec<UnitQuaternion>,
    ) -> Result<Self, SynthesisError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SynthesisError::InvalidRate(rate));
        }
        if position.len() != orientation.len() {
            return Err(SynthesisError::LengthMismatch {
                left: position.len(),
                right: orientation.len(),
            });
        }
        if let Some(i) = position.iter().position(|p| !p.is_finite()) {
            return Err(SynthesisError::NonFinite(i));
        }
        Ok(Self { rate, position, orientation })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn position(&self) -> &[Vec3] {
        &self.position
    }

    pub fn orientation(&self) -> &[UnitQuaternion] {
        &self.orientation
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    /// Applies `p ↦ rotation·p + translation` and `q ↦ rotation∘q` to
    /// every sample.
    pub fn transformed(&self, rotation: &UnitQuaternion, translation: Vec3) -> WorldTrack {
        WorldTrack {
            rate: self.rate,
            position: self.position.iter().map(|&p| rotation.rotate(p) + translation).collect(),
            orientation: self.orientation.iter().map(|q| rotation.compose(q)).collect(),
        }
    }
}

/// Six-channel sensor-frame trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuTrace {
    rate: f64,
    accel: Vec<Vec3>,
    gyro: Vec<Vec3>,
}

impl ImuTrace {
    pub fn new(rate: f64, accel: Vec<Vec3>, gyro: Vec<Vec3>) -> Result<Self, SynthesisError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SynthesisError::InvalidRate(rate));
        }
        if accel.len() != gyro.len() {
            return Err(SynthesisError::LengthMismatch { left: accel.len(), right: gyro.len() });
        }
        if let Some(i) = accel
            .iter()
            .zip(&gyro)
            .position(|(a, g)| !(a.is_finite() && g.is_finite()))
        {
            return Err(SynthesisError::NonFinite(i));
        }
        Ok(Self { rate, accel, gyro })
    }

    /// Builds a trace from rows of `[ax, ay, az, gx, gy, gz]`.
    pub fn from_rows(rate: f64, rows: &[[f64; 6]]) -> Result<Self, SynthesisError> {
        let accel = rows.iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect();
        let gyro = rows.iter().map(|r| Vec3::new(r[3], r[4], r[5])).collect();
        Self::new(rate, accel, gyro)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn accel(&self) -> &[Vec3] {
        &self.accel
    }

    pub fn gyro(&self) -> &[Vec3] {
        &self.gyro
    }

    pub fn len(&self) -> usize {
        self.accel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accel.is_empty()
    }

    /// Sample `i` as `[ax, ay, az, gx, gy, gz]`.
    pub fn row(&self, i: usize) -> [f64; 6] {
        let (a, g) = (self.accel[i], self.gyro[i]);
        [a.x, a.y, a.z, g.x, g.y, g.z]
    }

    pub fn rows(&self) -> impl Iterator<Item = [f64; 6]> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    /// Largest absolute difference over all channels; infinite when the
    /// lengths differ.
    pub fn max_abs_diff(&self, o: &ImuTrace) -> f64 {
        if self.len() != o.len() {
            return f64::INFINITY;
        }
        self.rows()
            .zip(o.rows())
            .flat_map(|(a, b)| (0..6).map(move |c| (a[c] - b[c]).abs()))
            .fold(0.0, f64::max)
    }
}

/// World trajectory of a sensor mounted on a joint.
pub fn extract_track(
    seq: &MotionSequence,
    sk: &Skeleton,
    att: &SensorAttachment,
) -> Result<WorldTrack, SynthesisError> {
    sk.check_joint(att.joint)?;
    seq.check_against(sk)?;
    let mut position = Vec::with_capacity(seq.len());
    let mut orientation = Vec::with_capacity(seq.len());
    for frame in seq.frames() {
        let joint = forward_kinematics(sk, frame)?[att.joint];
        position.push(joint.position + joint.orientation.rotate(att.mount_offset));
        orientation.push(joint.orientation.compose(&att.mount_rotation));
    }
    WorldTrack::new(seq.fps(), position, orientation)
}

fn require_samples(n: usize) -> Result<(), SynthesisError> {
    if n < MIN_SAMPLES {
        Err(SynthesisError::TooFewSamples { needed: MIN_SAMPLES, found: n })
    } else {
        Ok(())
    }
}

/// Second derivative of position.
///
/// Interior samples use `(r[i+1] − 2r[i] + r[i−1]) / dt²`. Endpoints use the
/// one-sided stencil `(2r₀ − 5r₁ + 4r₂ − r₃) / dt²`, which is second-order
/// accurate; with exactly three samples the three-point stencil is reused
/// at the ends.
pub fn linear_accel_global(track: &WorldTrack) -> Result<Vec<Vec3>, SynthesisError> {
    let r = &track.position;
    let n = r.len();
    require_samples(n)?;
    let inv_dt2 = track.rate * track.rate;
    let central = |i: usize| (r[i + 1] - r[i] * 2.0 + r[i - 1]) * inv_dt2;
    let mut out = Vec::with_capacity(n);
    if n == 3 {
        let a = central(1);
        return Ok(vec![a; 3]);
    }
    out.push((r[0] * 2.0 - r[1] * 5.0 + r[2] * 4.0 - r[3]) * inv_dt2);
    out.extend((1..n - 1).map(central));
    out.push((r[n - 1] * 2.0 - r[n - 2] * 5.0 + r[n - 3] * 4.0 - r[n - 4]) * inv_dt2);
    Ok(out)
}

/// World-frame angular velocity from the logarithm of the relative rotation
/// between neighbouring samples: `log(q[i+1] ∘ q[i−1]⁻¹) / (2·dt)`, with the
/// one-sided pair `log(q[1] ∘ q[0]⁻¹) / dt` at the ends.
pub fn angular_velocity_global(track: &WorldTrack) -> Result<Vec<Vec3>, SynthesisError> {
    let q = &track.orientation;
    let n = q.len();
    require_samples(n)?;
    let rate = track.rate;
    let rel = |later: usize, earlier: usize| q[later].compose(&q[earlier].inverse()).log();
    let mut out = Vec::with_capacity(n);
    out.push(rel(1, 0) * rate);
    out.extend((1..n - 1).map(|i| rel(i + 1, i - 1) * (0.5 * rate)));
    out.push(rel(n - 1, n - 2) * rate);
    Ok(out)
}

/// Specific force in the sensor frame: `Rᵀ·(a − g)`.
pub fn to_local_accel(
    track: &WorldTrack,
    a_global: &[Vec3],
    g: &GravityModel,
) -> Result<Vec<Vec3>, SynthesisError> {
    if a_global.len() != track.len() {
        return Err(SynthesisError::LengthMismatch { left: track.len(), right: a_global.len() });
    }
    Ok(track
        .orientation
        .iter()
        .zip(a_global)
        .map(|(q, &a)| q.to_matrix().transpose_mul_vec(a - g.g_global))
        .collect())
}

/// Angular velocity in the sensor frame: `Rᵀ·ω`.
pub fn to_local_gyro(track: &WorldTrack, w_global: &[Vec3]) -> Result<Vec<Vec3>, SynthesisError> {
    if w_global.len() != track.len() {
        return Err(SynthesisError::LengthMismatch { left: track.len(), right: w_global.len() });
    }
    Ok(track
        .orientation
        .iter()
        .zip(w_global)
        .map(|(q, &w)| q.to_matrix().transpose_mul_vec(w))
        .collect())
}

/// Accelerometer and gyroscope readings for an already extracted track.
pub fn synthesize_track(track: &WorldTrack, g: &GravityModel) -> Result<ImuTrace, SynthesisError> {
    let accel = to_local_accel(track, &linear_accel_global(track)?, g)?;
    let gyro = to_local_gyro(track, &angular_velocity_global(track)?)?;
    ImuTrace::new(track.rate, accel, gyro)
}

/// Full pipeline: forward kinematics, sensor mounting, differentiation and
/// projection into the sensor frame. Output rate equals the motion fps.
pub fn synthesize(
    seq: &MotionSequence,
    sk: &Skeleton,
    att: &SensorAttachment,
    g: &GravityModel,
) -> Result<ImuTrace, SynthesisError> {
    require_samples(seq.len())?;
    synthesize_track(&extract_track(seq, sk, att)?, g)
}
