//! Joint hierarchy with fixed bone lengths, forward kinematics, height
//! normalization and origin rebasing.
//!
//! Y is the up axis everywhere. Rest offsets are the only place bone
//! geometry lives, so every frame of a sequence shares the same bone
//! lengths.

use thiserror::Error;

use crate::rotation::{yaw_rotation, RotationError, UnitQuaternion, Vec3};

/// Height used by [`normalize_height`] when no other target is requested.
pub const DEFAULT_HEIGHT_M: f64 = 1.7;

/// Body joints in an SMPL-format pose block.
pub const SMPL_BODY_JOINTS: usize = 22;
/// Joints in one MANO hand block.
pub const MANO_HAND_JOINTS: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkeletonError {
    #[error("skeleton has no joints")]
    Empty,
    #[error("skeleton arrays disagree: {names} names, {parents} parents, {offsets} rest offsets")]
    ArityMismatch { names: usize, parents: usize, offsets: usize },
    #[error("joint {joint} ({name}) has invalid parent {parent}: parents must precede children")]
    InvalidParent { joint: usize, name: String, parent: i64 },
    #[error("joint 0 must be the root (parent -1)")]
    RootNotFirst,
    #[error("joint {joint} ({name}) is a second root")]
    MultipleRoots { joint: usize, name: String },
    #[error("duplicate joint name {0:?}")]
    DuplicateName(String),
    #[error("joint {joint} rest offset is not finite")]
    NonFiniteOffset { joint: usize },
    #[error("frame has {found} joint rotations, skeleton has {expected} joints")]
    JointCountMismatch { expected: usize, found: usize },
    #[error("unknown joint {0:?}")]
    UnknownJoint(String),
    #[error("joint index {index} out of range for {count} joints")]
    JointIndexOutOfRange { index: usize, count: usize },
    #[error("skeleton rest height is zero; cannot normalize")]
    DegenerateHeight,
    #[error("target height must be positive and finite, got {0}")]
    InvalidTargetHeight(f64),
    #[error("frame rate must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("motion sequence has no frames")]
    EmptySequence,
    #[error("frame {frame} root translation is not finite")]
    NonFiniteTranslation { frame: usize },
    #[error("expected {expected} joints in {block} block, got {found}")]
    BlockSize { block: &'static str, expected: usize, found: usize },
    #[error(transparent)]
    Rotation(#[from] RotationError),
}

/// Joint tree. Parents always precede their children, and joint 0 is the
/// single root.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    names: Vec<String>,
    parents: Vec<Option<usize>>,
    rest_offsets: Vec<Vec3>,
}

impl Skeleton {
    /// `parents` uses `-1` for the root, matching the on-disk encoding.
    pub fn new(
        names: Vec<String>,
        parents: Vec<i64>,
        rest_offsets: Vec<Vec3>,
    ) -> Result<Self, SkeletonError> {
        if names.len() != parents.len() || names.len() != rest_offsets.len() {
            return Err(SkeletonError::ArityMismatch {
                names: names.len(),
                parents: parents.len(),
                offsets: rest_offsets.len(),
            });
        }
        if names.is_empty() {
            return Err(SkeletonError::Empty);
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(SkeletonError::DuplicateName(n.clone()));
            }
        }
        let mut resolved = Vec::with_capacity(parents.len());
        for (i, &p) in parents.iter().enumerate() {
            if p == -1 {
                if i != 0 {
                    return Err(SkeletonError::MultipleRoots { joint: i, name: names[i].clone() });
                }
                resolved.push(None);
            } else if i == 0 {
                return Err(SkeletonError::RootNotFirst);
            } else if p < 0 || p as usize >= i {
                return Err(SkeletonError::InvalidParent {
                    joint: i,
                    name: names[i].clone(),
                    parent: p,
                });
            } else {
                resolved.push(Some(p as usize));
            }
        }
        if let Some(joint) = rest_offsets.iter().position(|o| !o.is_finite()) {
            return Err(SkeletonError::NonFiniteOffset { joint });
        }
        Ok(Self { names, parents: resolved, rest_offsets })
    }

    pub fn joint_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    /// Parents in the on-disk `-1`-for-root encoding.
    pub fn parent_indices(&self) -> Vec<i64> {
        self.parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect()
    }

    pub fn rest_offsets(&self) -> &[Vec3] {
        &self.rest_offsets
    }

    pub fn joint_index(&self, name: &str) -> Result<usize, SkeletonError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| SkeletonError::UnknownJoint(name.to_string()))
    }

    pub fn check_joint(&self, index: usize) -> Result<(), SkeletonError> {
        if index < self.joint_count() {
            Ok(())
        } else {
            Err(SkeletonError::JointIndexOutOfRange { index, count: self.joint_count() })
        }
    }

    /// Same hierarchy with every rest offset multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Skeleton {
        Skeleton {
            names: self.names.clone(),
            parents: self.parents.clone(),
            rest_offsets: self.rest_offsets.iter().map(|&o| o * factor).collect(),
        }
    }

    pub fn identity_pose(&self) -> PoseFrame {
        PoseFrame {
            root_translation: Vec3::ZERO,
            rotations: vec![UnitQuaternion::IDENTITY; self.joint_count()],
        }
    }
}

/// One pose: root translation plus one local rotation per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub root_translation: Vec3,
    pub rotations: Vec<UnitQuaternion>,
}

impl PoseFrame {
    pub fn new(root_translation: Vec3, rotations: Vec<UnitQuaternion>) -> Self {
        Self { root_translation, rotations }
    }

    /// Builds a frame from SMPL-style axis-angle blocks: 22 body joints
    /// followed by the optional 30-joint left and right hand blocks.
    pub fn from_smpl_blocks(
        root_translation: Vec3,
        body: &[Vec3],
        left_hand: Option<&[Vec3]>,
        right_hand: Option<&[Vec3]>,
    ) -> Result<Self, SkeletonError> {
        let check = |block: &'static str, v: &[Vec3], expected: usize| {
            if v.len() == expected {
                Ok(())
            } else {
                Err(SkeletonError::BlockSize { block, expected, found: v.len() })
            }
        };
        check("body", body, SMPL_BODY_JOINTS)?;
        let mut all: Vec<Vec3> = body.to_vec();
        if let Some(h) = left_hand {
            check("left hand", h, MANO_HAND_JOINTS)?;
            all.extend_from_slice(h);
        }
        if let Some(h) = right_hand {
            check("right hand", h, MANO_HAND_JOINTS)?;
            all.extend_from_slice(h);
        }
        let rotations = all
            .into_iter()
            .map(UnitQuaternion::from_rotation_vector)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { root_translation, rotations })
    }
}

/// Frames sampled uniformly at `fps`; frame `i` is at `i / fps` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    fps: f64,
    frames: Vec<PoseFrame>,
}

impl MotionSequence {
    pub fn new(fps: f64, frames: Vec<PoseFrame>) -> Result<Self, SkeletonError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(SkeletonError::InvalidFps(fps));
        }
        if let Some(first) = frames.first() {
            let expected = first.rotations.len();
            for (i, f) in frames.iter().enumerate() {
                if f.rotations.len() != expected {
                    return Err(SkeletonError::JointCountMismatch {
                        expected,
                        found: f.rotations.len(),
                    });
                }
                if !f.root_translation.is_finite() {
                    return Err(SkeletonError::NonFiniteTranslation { frame: i });
                }
            }
        }
        Ok(Self { fps, frames })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> &[PoseFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Checks every frame carries one rotation per skeleton joint.
    pub fn check_against(&self, sk: &Skeleton) -> Result<(), SkeletonError> {
        match self.frames.first() {
            Some(f) if f.rotations.len() != sk.joint_count() => {
                Err(SkeletonError::JointCountMismatch {
                    expected: sk.joint_count(),
                    found: f.rotations.len(),
                })
            }
            _ => Ok(()),
        }
    }
}

/// World pose of one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTransform {
    pub position: Vec3,
    pub orientation: UnitQuaternion,
}

pub fn forward_kinematics(
    sk: &Skeleton,
    frame: &PoseFrame,
) -> Result<Vec<JointTransform>, SkeletonError> {
    if frame.rotations.len() != sk.joint_count() {
        return Err(SkeletonError::JointCountMismatch {
            expected: sk.joint_count(),
            found: frame.rotations.len(),
        });
    }
    let mut out: Vec<JointTransform> = Vec::with_capacity(sk.joint_count());
    for (i, local) in frame.rotations.iter().enumerate() {
        let t = match sk.parents[i] {
            None => JointTransform { position: frame.root_translation, orientation: *local },
            Some(p) => {
                let parent = out[p];
                JointTransform {
                    position: parent.position + parent.orientation.rotate(sk.rest_offsets[i]),
                    orientation: parent.orientation.compose(local),
                }
            }
        };
        out.push(t);
    }
    Ok(out)
}

/// Vertical extent of the identity pose.
pub fn rest_height(sk: &Skeleton) -> f64 {
    let joints = forward_kinematics(sk, &sk.identity_pose()).expect("identity pose fits");
    let (lo, hi) = joints.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
        (lo.min(j.position.y), hi.max(j.position.y))
    });
    hi - lo
}

/// Scales all bones uniformly so that [`rest_height`] equals `target`.
pub fn normalize_height(sk: &Skeleton, target: f64) -> Result<Skeleton, SkeletonError> {
    if !(target.is_finite() && target > 0.0) {
        return Err(SkeletonError::InvalidTargetHeight(target));
    }
    let h = rest_height(sk);
    if h.is_nan() || h <= 1e-12 {
        return Err(SkeletonError::DegenerateHeight);
    }
    if h == target {
        return Ok(sk.clone());
    }
    Ok(sk.scaled(target / h))
}

/// Heading of an orientation about the up axis, measured from +Z toward +X.
fn heading(q: &UnitQuaternion) -> f64 {
    let f = q.rotate(Vec3::new(0.0, 0.0, 1.0));
    if f.x.hypot(f.z) > 1e-9 {
        f.x.atan2(f.z)
    } else {
        // Forward axis points straight up or down: use the side axis.
        let s = q.rotate(Vec3::new(1.0, 0.0, 0.0));
        (-s.z).atan2(s.x)
    }
}

/// Moves the whole sequence so that, in frame 0, the midpoint of the two
/// feet joints is at the origin and the root faces +Z. One rigid transform
/// (translation, then a rotation about Y) is applied to every frame.
pub fn rebase_sequence(
    seq: &MotionSequence,
    sk: &Skeleton,
    feet: (usize, usize),
) -> Result<MotionSequence, SkeletonError> {
    sk.check_joint(feet.0)?;
    sk.check_joint(feet.1)?;
    let first = seq.frames.first().ok_or(SkeletonError::EmptySequence)?;
    let joints = forward_kinematics(sk, first)?;
    let center = (joints[feet.0].position + joints[feet.1].position) * 0.5;
    let unyaw = yaw_rotation(-heading(&joints[0].orientation));

    let frames = seq
        .frames
        .iter()
        .map(|f| {
            let mut rotations = f.rotations.clone();
            rotations[0] = unyaw.compose(&f.rotations[0]);
            PoseFrame {
                root_translation: unyaw.rotate(f.root_translation - center),
                rotations,
            }
        })
        .collect();
    MotionSequence::new(seq.fps, frames)
}
