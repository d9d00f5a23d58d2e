//! Rate conversion, range calibration and fixed-length windowing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imu::{ImuTrace, SynthesisError, WorldTrack};
use crate::rotation::Vec3;

/// Channel order used by stats files and windows.
pub const CHANNELS: [&str; 6] = ["ax", "ay", "az", "gx", "gy", "gz"];

/// Synthetic channels with a smaller standard deviation than this are
/// treated as constant by [`calibrate`].
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("input has no samples")]
    Empty,
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("target rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("window length {length} exceeds trace length {available}")]
    WindowTooLong { length: usize, available: usize },
    #[error("window length must be at least 1")]
    ZeroLength,
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("{labels} labels for a trace of {samples} samples")]
    LabelLengthMismatch { labels: usize, samples: usize },
    #[error("invalid channel statistics: {0}")]
    InvalidStats(String),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f64; 6],
    pub std: [f64; 6],
    pub count: usize,
}

impl ChannelStats {
    pub fn new(mean: [f64; 6], std: [f64; 6], count: usize) -> Result<Self, SignalError> {
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return Err(SignalError::InvalidStats("non-finite value".into()));
        }
        if std.iter().any(|&s| s < 0.0) {
            return Err(SignalError::InvalidStats("negative standard deviation".into()));
        }
        if count < 2 {
            return Err(SignalError::InvalidStats(format!("count {count} is below 2")));
        }
        Ok(Self { mean, std, count })
    }
}

/// `l` consecutive samples starting at `start`, stored sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuWindow {
    pub start: usize,
    pub samples: Vec<[f64; 6]>,
    pub labels: Option<Vec<usize>>,
}

impl ImuWindow {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channel(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(move |s| s[c])
    }
}

struct Grid {
    count: usize,
    ratio: f64,
}

// New timestamps k / target for k = 0.. while inside [0, duration].
fn grid(len: usize, rate: f64, target: f64) -> Result<Grid, SignalError> {
    if !(target.is_finite() && target > 0.0) {
        return Err(SignalError::InvalidRate(target));
    }
    if len == 0 {
        return Err(SignalError::Empty);
    }
    if len < 2 {
        return Err(SignalError::TooFewSamples { needed: 2, found: len });
    }
    let span = (len - 1) as f64;
    let ratio = rate / target;
    let last = span / ratio;
    let count = (last + 1e-9 * last.max(1.0)).floor() as usize + 1;
    Ok(Grid { count, ratio })
}

/// Source segment and fraction for output sample `k`. Positions within
/// 1e-9 of a source sample snap onto it so coincident timestamps are copied
/// exactly.
fn locate(k: usize, ratio: f64, len: usize) -> (usize, f64) {
    let pos = k as f64 * ratio;
    let nearest = pos.round();
    let pos = if (pos - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { pos };
    let pos = pos.min((len - 1) as f64);
    let i = (pos.floor() as usize).min(len - 2);
    (i, pos - i as f64)
}

fn lerp(a: Vec3, b: Vec3, u: f64) -> Vec3 {
    if u == 0.0 {
        a
    } else if u == 1.0 {
        b
    } else {
        a + (b - a) * u
    }
}

/// Linear interpolation of positions and slerp of orientations onto a new
/// uniform grid starting at the first sample.
pub fn resample_track(track: &WorldTrack, target: f64) -> Result<WorldTrack, SignalError> {
    let n = track.len();
    let g = grid(n, track.rate(), target)?;
    let (p, q) = (track.position(), track.orientation());
    let (pos, ori) = (0..g.count)
        .map(|k| {
            let (i, u) = locate(k, g.ratio, n);
            (lerp(p[i], p[i + 1], u), q[i].slerp(&q[i + 1], u))
        })
        .unzip();
    Ok(WorldTrack::new(target, pos, ori)?)
}

/// Linear interpolation of all six channels onto a new uniform grid.
pub fn resample_trace(trace: &ImuTrace, target: f64) -> Result<ImuTrace, SignalError> {
    let n = trace.len();
    let g = grid(n, trace.rate(), target)?;
    let (a, w) = (trace.accel(), trace.gyro());
    let (accel, gyro) = (0..g.count)
        .map(|k| {
            let (i, u) = locate(k, g.ratio, n);
            (lerp(a[i], a[i + 1], u), lerp(w[i], w[i + 1], u))
        })
        .unzip();
    Ok(ImuTrace::new(target, accel, gyro)?)
}

/// Mean and population standard deviation per channel, accumulated with
/// Welford's update.
pub fn compute_stats(trace: &ImuTrace) -> Result<ChannelStats, SignalError> {
    let n = trace.len();
    if n < 2 {
        return Err(SignalError::TooFewSamples { needed: 2, found: n });
    }
    let mut mean = [0.0; 6];
    let mut m2 = [0.0; 6];
    for (k, row) in trace.rows().enumerate() {
        let count = (k + 1) as f64;
        for c in 0..6 {
            let delta = row[c] - mean[c];
            mean[c] += delta / count;
            m2[c] += delta * (row[c] - mean[c]);
        }
    }
    let std = m2.map(|v| (v / n as f64).max(0.0).sqrt());
    Ok(ChannelStats { mean, std, count: n })
}

/// Affine per-channel map so the trace takes on the reference mean and
/// standard deviation. Channels that are constant in `synthetic` become the
/// constant reference mean.
pub fn calibrate(synthetic: &ImuTrace, reference: &ChannelStats) -> Result<ImuTrace, SignalError> {
    let own = compute_stats(synthetic)?;
    let map = |c: usize, x: f64| {
        if own.std[c] < DEGENERATE_STD {
            reference.mean[c]
        } else {
            (x - own.mean[c]) / own.std[c] * reference.std[c] + reference.mean[c]
        }
    };
    let rows: Vec<[f64; 6]> = synthetic
        .rows()
        .map(|r| std::array::from_fn(|c| map(c, r[c])))
        .collect();
    Ok(ImuTrace::from_rows(synthetic.rate(), &rows)?)
}

/// Windows of `length` samples starting at `0, stride, 2·stride, …`; a
/// trailing partial window is dropped.
pub fn window(trace: &ImuTrace, length: usize, stride: usize) -> Result<Vec<ImuWindow>, SignalError> {
    window_impl(trace, None, length, stride)
}

/// As [`window`], with one class id per sample carried into each window.
pub fn window_labeled(
    trace: &ImuTrace,
    labels: &[usize],
    length: usize,
    stride: usize,
) -> Result<Vec<ImuWindow>, SignalError> {
    if labels.len() != trace.len() {
        return Err(SignalError::LabelLengthMismatch { labels: labels.len(), samples: trace.len() });
    }
    window_impl(trace, Some(labels), length, stride)
}

fn window_impl(
    trace: &ImuTrace,
    labels: Option<&[usize]>,
    length: usize,
    stride: usize,
) -> Result<Vec<ImuWindow>, SignalError> {
    if length == 0 {
        return Err(SignalError::ZeroLength);
    }
    if stride == 0 {
        return Err(SignalError::ZeroStride);
    }
    let n = trace.len();
    if length > n {
        return Err(SignalError::WindowTooLong { length, available: n });
    }
    Ok((0..=n - length)
        .step_by(stride)
        .map(|start| ImuWindow {
            start,
            samples: (start..start + length).map(|i| trace.row(i)).collect(),
            labels: labels.map(|l| l[start..start + length].to_vec()),
        })
        .collect())
}
