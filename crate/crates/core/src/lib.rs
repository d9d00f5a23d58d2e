//! Virtual IMU synthesis from skeletal motion capture.
//!
//! The pipeline runs forward kinematics over a fixed-bone-length skeleton,
//! mounts a virtual sensor on a joint, differentiates its world trajectory
//! and expresses the result in the sensor frame as accelerometer (specific
//! force, m/s²) and gyroscope (rad/s) readings. Alongside it sit rate
//! conversion, range calibration and windowing for the traces, and exact
//! kernels for the contrastive, reconstruction and classification losses
//! used to pretrain on such data.

pub mod check;
pub mod cli;
pub mod imu;
pub mod io;
pub mod losses;
pub mod rotation;
pub mod signal;
pub mod skeleton;

pub use imu::{synthesize, GravityModel, ImuTrace, SensorAttachment, WorldTrack};
pub use rotation::{RotationMatrix3, UnitQuaternion, Vec3};
pub use skeleton::{MotionSequence, PoseFrame, Skeleton};
