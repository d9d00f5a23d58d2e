//! Readers and writers for motion documents, CSV time series, embeddings
//! and channel statistics.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`, with `.` as the decimal separator and `\n` line endings, so
//! identical values always serialize to identical bytes. Readers reject
//! NaN and infinities instead of passing them through.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::imu::{ImuTrace, SynthesisError, WorldTrack};
use crate::losses::{EmbeddingBatch, LossError, Role};
use crate::rotation::{UnitQuaternion, Vec3};
use crate::signal::{ChannelStats, SignalError, CHANNELS};
use crate::skeleton::{MotionSequence, PoseFrame, Skeleton, SkeletonError};

pub const TRACK_HEADER: [&str; 8] = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"];
pub const IMU_HEADER: [&str; 7] = ["t", "ax", "ay", "az", "gx", "gy", "gz"];
pub const LABEL_HEADER: &str = "label";
const RATE_PREFIX: &str = "# rate_hz=";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("malformed document: {0}")]
    Syntax(String),
    #[error("schema violation at {location}: field `{field}` {problem}")]
    Schema { field: String, location: String, problem: String },
    #[error("invalid hierarchy: {0}")]
    Hierarchy(SkeletonError),
    #[error("non-finite number at {0}")]
    NonFinite(String),
    #[error("fps must be positive, got {0}")]
    InvalidFps(f64),
    #[error("column {position}: expected `{expected}`, found `{found}`")]
    ColumnMismatch { position: usize, expected: String, found: String },
    #[error("header has {found} columns, expected {expected}")]
    ColumnCount { expected: usize, found: usize },
    #[error("line {line}: row has {found} fields, expected {expected}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}, column `{column}`: cannot parse {text:?} as a number")]
    InvalidNumber { line: u64, column: String, text: String },
    #[error("empty trace: no data rows")]
    EmptyTrace,
    #[error("missing or invalid `# rate_hz=` line")]
    MissingRate,
    #[error("timestamps are not uniformly spaced at line {0}")]
    NonUniformTime(u64),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Track(#[from] SynthesisError),
    #[error(transparent)]
    Stats(#[from] SignalError),
    #[error(transparent)]
    Embedding(#[from] LossError),
}

/// How a motion document encodes joint rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationFormat {
    AxisAngle,
    QuaternionWxyz,
}

#[derive(Serialize)]
struct SkeletonDoc<'a> {
    names: &'a [String],
    parents: Vec<i64>,
    rest_offsets: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct FrameDoc {
    root_t: [f64; 3],
    rotations: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct MotionDoc<'a> {
    fps: f64,
    rotation_format: RotationFormat,
    skeleton: SkeletonDoc<'a>,
    frames: Vec<FrameDoc>,
}

fn schema(field: &str, location: &str, problem: impl Into<String>) -> FormatError {
    FormatError::Schema { field: field.into(), location: location.into(), problem: problem.into() }
}

fn field<'v>(obj: &'v Value, name: &str, location: &str) -> Result<&'v Value, FormatError> {
    obj.as_object()
        .ok_or_else(|| schema(name, location, "parent is not an object"))?
        .get(name)
        .ok_or_else(|| schema(name, location, "is missing"))
}

fn array<'v>(v: &'v Value, name: &str, location: &str) -> Result<&'v Vec<Value>, FormatError> {
    v.as_array().ok_or_else(|| schema(name, location, "must be an array"))
}

fn number(v: &Value, name: &str, location: &str) -> Result<f64, FormatError> {
    let x = v.as_f64().ok_or_else(|| schema(name, location, "must be a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(FormatError::NonFinite(location.into()))
    }
}

fn numbers<const N: usize>(v: &Value, name: &str, location: &str) -> Result<[f64; N], FormatError> {
    let items = array(v, name, location)?;
    if items.len() != N {
        return Err(schema(name, location, format!("must have {N} entries, found {}", items.len())));
    }
    let mut out = [0.0; N];
    for (i, item) in items.iter().enumerate() {
        out[i] = number(item, name, &format!("{location}[{i}]"))?;
    }
    Ok(out)
}

/// Parses a JSON motion document into a validated skeleton and sequence.
/// Axis-angle rotations are converted to quaternions here.
pub fn parse_motion(text: &str) -> Result<(Skeleton, MotionSequence), FormatError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        if e.to_string().contains("number out of range") {
            FormatError::NonFinite(format!("line {}, column {}", e.line(), e.column()))
        } else {
            FormatError::Syntax(e.to_string())
        }
    })?;

    let fps = number(field(&doc, "fps", "$")?, "fps", "$.fps")?;
    if fps <= 0.0 {
        return Err(FormatError::InvalidFps(fps));
    }
    let format_value = field(&doc, "rotation_format", "$")?;
    let format: RotationFormat = serde_json::from_value(format_value.clone()).map_err(|_| {
        schema(
            "rotation_format",
            "$.rotation_format",
            "must be \"axis_angle\" or \"quaternion_wxyz\"",
        )
    })?;

    let sk = field(&doc, "skeleton", "$")?;
    let names = array(field(sk, "names", "$.skeleton")?, "names", "$.skeleton.names")?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_str()
                .map(str::to_owned)
                .ok_or_else(|| schema("names", &format!("$.skeleton.names[{i}]"), "must be a string"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let parents = array(field(sk, "parents", "$.skeleton")?, "parents", "$.skeleton.parents")?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_i64().ok_or_else(|| {
                schema("parents", &format!("$.skeleton.parents[{i}]"), "must be an integer")
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let offsets = array(field(sk, "rest_offsets", "$.skeleton")?, "rest_offsets", "$.skeleton.rest_offsets")?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            numbers::<3>(v, "rest_offsets", &format!("$.skeleton.rest_offsets[{i}]")).map(Vec3::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let skeleton = Skeleton::new(names, parents, offsets).map_err(FormatError::Hierarchy)?;

    let frames_value = array(field(&doc, "frames", "$")?, "frames", "$.frames")?;
    let mut frames = Vec::with_capacity(frames_value.len());
    for (fi, f) in frames_value.iter().enumerate() {
        let loc = format!("$.frames[{fi}]");
        let root = numbers::<3>(field(f, "root_t", &loc)?, "root_t", &format!("{loc}.root_t"))?;
        let rots = array(field(f, "rotations", &loc)?, "rotations", &format!("{loc}.rotations"))?;
        if rots.len() != skeleton.joint_count() {
            return Err(schema(
                "rotations",
                &format!("{loc}.rotations"),
                format!("has {} entries, skeleton has {} joints", rots.len(), skeleton.joint_count()),
            ));
        }
        let mut rotations = Vec::with_capacity(rots.len());
        for (ji, r) in rots.iter().enumerate() {
            let rloc = format!("{loc}.rotations[{ji}]");
            let q = match format {
                RotationFormat::AxisAngle => {
                    UnitQuaternion::from_rotation_vector(numbers::<3>(r, "rotations", &rloc)?.into())
                }
                RotationFormat::QuaternionWxyz => {
                    let [w, x, y, z] = numbers::<4>(r, "rotations", &rloc)?;
                    UnitQuaternion::new(w, x, y, z)
                }
            }
            .map_err(|e| schema("rotations", &rloc, e.to_string()))?;
            rotations.push(q);
        }
        frames.push(PoseFrame::new(root.into(), rotations));
    }
    let seq = MotionSequence::new(fps, frames).map_err(FormatError::Hierarchy)?;
    Ok((skeleton, seq))
}

/// Canonical motion document: quaternion rotations, pretty-printed JSON,
/// trailing newline.
pub fn write_motion(sk: &Skeleton, seq: &MotionSequence) -> String {
    let doc = MotionDoc {
        fps: seq.fps(),
        rotation_format: RotationFormat::QuaternionWxyz,
        skeleton: SkeletonDoc {
            names: sk.names(),
            parents: sk.parent_indices(),
            rest_offsets: sk.rest_offsets().iter().map(|o| o.to_array()).collect(),
        },
        frames: seq
            .frames()
            .iter()
            .map(|f| FrameDoc {
                root_t: f.root_translation.to_array(),
                rotations: f.rotations.iter().map(|q| q.to_array().to_vec()).collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("motion document serializes");
    out.push('\n');
    out
}

/// Shortest round-trip decimal form of `x`.
pub fn format_number(x: f64) -> String {
    format!("{x:?}")
}

struct Table {
    rate: Option<f64>,
    rows: Vec<Vec<f64>>,
    lines: Vec<u64>,
}

fn rate_comment(text: &str) -> Result<Option<f64>, FormatError> {
    match text.lines().find(|l| l.starts_with(RATE_PREFIX)) {
        None => Ok(None),
        Some(line) => {
            let rate: f64 = line[RATE_PREFIX.len()..]
                .trim()
                .parse()
                .map_err(|_| FormatError::MissingRate)?;
            if rate.is_finite() && rate > 0.0 {
                Ok(Some(rate))
            } else {
                Err(FormatError::MissingRate)
            }
        }
    }
}

fn read_table(text: &str, expected: &[String]) -> Result<Table, FormatError> {
    let rate = rate_comment(text)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| FormatError::Csv(e.to_string()))?.clone();
    for (position, want) in expected.iter().enumerate() {
        match header.get(position) {
            Some(found) if found == want => {}
            Some(found) => {
                return Err(FormatError::ColumnMismatch {
                    position,
                    expected: want.clone(),
                    found: found.to_string(),
                })
            }
            None => return Err(FormatError::ColumnCount { expected: expected.len(), found: header.len() }),
        }
    }
    if header.len() != expected.len() {
        return Err(FormatError::ColumnCount { expected: expected.len(), found: header.len() });
    }

    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => FormatError::RaggedRow {
                line: pos.as_ref().map_or(0, |p| p.line()),
                expected: *expected_len as usize,
                found: *len as usize,
            },
            _ => FormatError::Csv(e.to_string()),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(expected.len());
        for (c, cell) in record.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| FormatError::InvalidNumber {
                line,
                column: expected[c].clone(),
                text: cell.to_string(),
            })?;
            if !x.is_finite() {
                return Err(FormatError::NonFinite(format!("line {line}, column `{}`", expected[c])));
            }
            row.push(x);
        }
        rows.push(row);
        lines.push(line);
    }
    if rows.is_empty() {
        return Err(FormatError::EmptyTrace);
    }
    Ok(Table { rate, rows, lines })
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        out.push_str(&format_number(v));
        first = false;
    }
    out.push('\n');
}

fn write_table(rate: f64, columns: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = format!("{RATE_PREFIX}{}\n{}\n", format_number(rate), columns.join(","));
    for row in rows {
        push_row(&mut out, row);
    }
    out
}

/// Reads a world-track CSV. The rate comes from the `# rate_hz=` line when
/// present, otherwise from the spacing of the `t` column, which must then
/// be uniform.
pub fn parse_track_csv(text: &str) -> Result<WorldTrack, FormatError> {
    let table = read_table(text, &header(&TRACK_HEADER))?;
    let rate = match table.rate {
        Some(r) => r,
        None => {
            if table.rows.len() < 2 {
                return Err(FormatError::MissingRate);
            }
            let dt = table.rows[1][0] - table.rows[0][0];
            if dt.is_nan() || dt <= 0.0 {
                return Err(FormatError::NonUniformTime(table.lines[1]));
            }
            for (k, row) in table.rows.iter().enumerate() {
                let expected = table.rows[0][0] + k as f64 * dt;
                if (row[0] - expected).abs() > 1e-6 * dt {
                    return Err(FormatError::NonUniformTime(table.lines[k]));
                }
            }
            1.0 / dt
        }
    };
    let mut position = Vec::with_capacity(table.rows.len());
    let mut orientation = Vec::with_capacity(table.rows.len());
    for (row, line) in table.rows.iter().zip(&table.lines) {
        position.push(Vec3::new(row[1], row[2], row[3]));
        let q = UnitQuaternion::new(row[4], row[5], row[6], row[7]).map_err(|e| {
            schema("qw,qx,qy,qz", &format!("line {line}"), e.to_string())
        })?;
        orientation.push(q);
    }
    Ok(WorldTrack::new(rate, position, orientation)?)
}

pub fn write_track_csv(track: &WorldTrack) -> String {
    let rate = track.rate();
    write_table(
        rate,
        &TRACK_HEADER,
        track.position().iter().zip(track.orientation()).enumerate().map(|(i, (p, q))| {
            let [w, x, y, z] = q.to_array();
            vec![i as f64 / rate, p.x, p.y, p.z, w, x, y, z]
        }),
    )
}

/// IMU CSV: `# rate_hz=` line, header, then one row per sample with
/// `t = i / rate`.
pub fn write_imu_csv(trace: &ImuTrace) -> String {
    let rate = trace.rate();
    write_table(
        rate,
        &IMU_HEADER,
        trace.rows().enumerate().map(|(i, r)| {
            let mut row = Vec::with_capacity(7);
            row.push(i as f64 / rate);
            row.extend_from_slice(&r);
            row
        }),
    )
}

pub fn read_imu_csv(text: &str) -> Result<ImuTrace, FormatError> {
    let table = read_table(text, &header(&IMU_HEADER))?;
    let rate = table.rate.ok_or(FormatError::MissingRate)?;
    let rows: Vec<[f64; 6]> = table
        .rows
        .iter()
        .map(|r| [r[1], r[2], r[3], r[4], r[5], r[6]])
        .collect();
    Ok(ImuTrace::from_rows(rate, &rows)?)
}

fn indexed_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn count_columns(text: &str) -> Result<usize, FormatError> {
    text.lines()
        .find(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split(',').count())
        .ok_or(FormatError::EmptyTrace)
}

/// Embeddings CSV with header `e0,…,e{D-1}`, one row per sample.
pub fn read_embeddings_csv(text: &str, role: Role) -> Result<EmbeddingBatch, FormatError> {
    let dim = count_columns(text)?;
    let table = read_table(text, &indexed_header("e", dim))?;
    Ok(EmbeddingBatch::new(table.rows.len(), dim, table.rows.concat(), role)?)
}

pub fn write_embeddings_csv(batch: &EmbeddingBatch) -> String {
    let mut out = indexed_header("e", batch.dim()).join(",");
    out.push('\n');
    for i in 0..batch.rows() {
        push_row(&mut out, batch.row(i).iter().copied());
    }
    out
}

/// Logits CSV with header `c0,…,c{C-1}`, one row per time step. Returns the
/// class count and the flat row-major values.
pub fn read_logits_csv(text: &str) -> Result<(usize, Vec<f64>), FormatError> {
    let classes = count_columns(text)?;
    let table = read_table(text, &indexed_header("c", classes))?;
    Ok((classes, table.rows.concat()))
}

/// Labels CSV with a single `label` column of non-negative integers.
pub fn read_labels_csv(text: &str) -> Result<Vec<usize>, FormatError> {
    let table = read_table(text, &[LABEL_HEADER.to_string()])?;
    table
        .rows
        .iter()
        .zip(&table.lines)
        .map(|(r, &line)| {
            let v = r[0];
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(FormatError::InvalidNumber { line, column: LABEL_HEADER.into(), text: format_number(v) })
            }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ChannelDoc {
    name: String,
    mean: f64,
    std: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsDoc {
    count: usize,
    channels: Vec<ChannelDoc>,
}

/// Stats JSON: `{"count": n, "channels": [{"name": "ax", "mean": …, "std": …}, …]}`
/// with the six channels in `ax, ay, az, gx, gy, gz` order.
pub fn write_stats_json(stats: &ChannelStats) -> String {
    let doc = StatsDoc {
        count: stats.count,
        channels: CHANNELS
            .iter()
            .enumerate()
            .map(|(c, name)| ChannelDoc { name: name.to_string(), mean: stats.mean[c], std: stats.std[c] })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("stats serialize");
    out.push('\n');
    out
}

pub fn read_stats_json(text: &str) -> Result<ChannelStats, FormatError> {
    let doc: StatsDoc = serde_json::from_str(text).map_err(|e| FormatError::Syntax(e.to_string()))?;
    if doc.channels.len() != CHANNELS.len() {
        return Err(FormatError::ColumnCount { expected: CHANNELS.len(), found: doc.channels.len() });
    }
    let mut mean = [0.0; 6];
    let mut std = [0.0; 6];
    for (c, (entry, want)) in doc.channels.iter().zip(CHANNELS).enumerate() {
        if entry.name != want {
            return Err(FormatError::ColumnMismatch {
                position: c,
                expected: want.to_string(),
                found: entry.name.clone(),
            });
        }
        mean[c] = entry.mean;
        std[c] = entry.std;
    }
    Ok(ChannelStats::new(mean, std, doc.count)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "fps": 30,
        "rotation_format": "axis_angle",
        "skeleton": {"names": ["root"], "parents": [-1], "rest_offsets": [[0, 0, 0]]},
        "frames": [
            {"root_t": [0, 1, 2], "rotations": [[0, 0, 0]]},
            {"root_t": [0, 1, 3], "rotations": [[0, 0, 1.5707963267948966]]}
        ]
    }"#;

    #[test]
    fn minimal_document_parses() {
        let (sk, seq) = parse_motion(MINIMAL).unwrap();
        assert_eq!(sk.names(), &["root".to_string()]);
        assert_eq!(seq.fps(), 30.0);
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.frames()[1].root_translation, Vec3::new(0.0, 1.0, 3.0));
        let q = seq.frames()[1].rotations[0];
        let expected = UnitQuaternion::new(0.5f64.sqrt(), 0.0, 0.0, 0.5f64.sqrt()).unwrap();
        assert!(q.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn parent_cycle_is_a_hierarchy_error() {
        let doc = MINIMAL
            .replace(r#"["root"]"#, r#"["a", "b"]"#)
            .replace("[-1]", "[1, 0]")
            .replace("[[0, 0, 0]]}", "[[0, 0, 0], [0, 1, 0]]}");
        assert!(matches!(parse_motion(&doc), Err(FormatError::Hierarchy(_))));
    }

    #[test]
    fn document_error_categories() {
        let missing = MINIMAL.replace("\"fps\": 30,", "");
        match parse_motion(&missing) {
            Err(FormatError::Schema { field, location, .. }) => {
                assert_eq!(field, "fps");
                assert_eq!(location, "$");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(parse_motion(&MINIMAL.replace("30", "0")), Err(FormatError::InvalidFps(0.0)));
        assert!(matches!(
            parse_motion(&MINIMAL.replace("[0, 1, 3]", "[0, 1e999, 3]")),
            Err(FormatError::NonFinite(_))
        ));
        assert!(matches!(parse_motion("{"), Err(FormatError::Syntax(_))));
        match parse_motion(&MINIMAL.replace(r#""rotations": [[0, 0, 0]]}"#, r#""rotations": [[0, 0]]}"#)) {
            Err(FormatError::Schema { location, .. }) => assert_eq!(location, "$.frames[0].rotations[0]"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_motion(&MINIMAL.replace("axis_angle", "euler")),
            Err(FormatError::Schema { .. })
        ));
    }

    #[test]
    fn quaternion_documents_round_trip_through_writer() {
        let (sk, seq) = parse_motion(MINIMAL).unwrap();
        let text = write_motion(&sk, &seq);
        let (sk2, seq2) = parse_motion(&text).unwrap();
        assert_eq!(sk, sk2);
        assert_eq!(seq, seq2);
        assert_eq!(write_motion(&sk2, &seq2), text);
    }

    #[test]
    fn imu_csv_layout() {
        let trace = ImuTrace::from_rows(4.0, &[[0.0, 9.8, 0.0, 0.0, 0.0, 0.0], [0.1, -0.0, 1e-20, 1.5, 2.0, -3.0]]).unwrap();
        let text = write_imu_csv(&trace);
        assert_eq!(
            text,
            "# rate_hz=4.0\nt,ax,ay,az,gx,gy,gz\n0.0,0.0,9.8,0.0,0.0,0.0,0.0\n0.25,0.1,-0.0,1e-20,1.5,2.0,-3.0\n"
        );
        assert_eq!(read_imu_csv(&text).unwrap(), trace);
    }

    #[test]
    fn imu_csv_errors() {
        assert_eq!(read_imu_csv("# rate_hz=10\nt,ax,ay,az,gx,gy,gz\n"), Err(FormatError::EmptyTrace));
        match read_imu_csv("# rate_hz=10\nt,ay,ax,az,gx,gy,gz\n0,0,0,0,0,0,0\n") {
            Err(FormatError::ColumnMismatch { expected, found, position }) => {
                assert_eq!((expected.as_str(), found.as_str(), position), ("ax", "ay", 1));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_imu_csv("# rate_hz=10\nt,ax,ay,az,gx,gy,gz\n0,0,0,0,0,0\n"),
            Err(FormatError::RaggedRow { line: 3, .. })
        ));
        assert!(matches!(
            read_imu_csv("# rate_hz=10\nt,ax,ay,az,gx,gy,gz\n0,NaN,0,0,0,0,0\n"),
            Err(FormatError::NonFinite(_))
        ));
        assert!(matches!(
            read_imu_csv("# rate_hz=10\nt,ax,ay,az,gx,gy,gz\n0,x,0,0,0,0,0\n"),
            Err(FormatError::InvalidNumber { .. })
        ));
        assert_eq!(read_imu_csv("t,ax,ay,az,gx,gy,gz\n0,0,0,0,0,0,0\n"), Err(FormatError::MissingRate));
        assert!(matches!(
            read_imu_csv("# rate_hz=10\nt,ax,ay,az,gx,gy\n0,0,0,0,0,0\n"),
            Err(FormatError::ColumnCount { .. })
        ));
    }

    #[test]
    fn track_csv_rate_from_timestamps() {
        let text = "t,px,py,pz,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.5,1,0,0,1,0,0,0\n1,2,0,0,1,0,0,0\n";
        let t = parse_track_csv(text).unwrap();
        assert_eq!(t.rate(), 2.0);
        assert_eq!(t.len(), 3);
        let bad = "t,px,py,pz,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n0.5,1,0,0,1,0,0,0\n1.2,2,0,0,1,0,0,0\n";
        assert_eq!(parse_track_csv(bad), Err(FormatError::NonUniformTime(4)));
        let written = write_track_csv(&t);
        assert_eq!(parse_track_csv(&written).unwrap(), t);
    }

    #[test]
    fn embeddings_csv() {
        let b = read_embeddings_csv("e0,e1\n1,0\n0.5,0.25\n", Role::Text).unwrap();
        assert_eq!((b.rows(), b.dim()), (2, 2));
        assert_eq!(write_embeddings_csv(&b), "e0,e1\n1.0,0.0\n0.5,0.25\n");
        assert!(matches!(
            read_embeddings_csv("e0,x1\n1,0\n", Role::Text),
            Err(FormatError::ColumnMismatch { position: 1, .. })
        ));
        assert_eq!(read_embeddings_csv("e0,e1\n", Role::Text), Err(FormatError::EmptyTrace));
        assert!(matches!(
            read_embeddings_csv("e0,e1\n0,0\n", Role::Text),
            Err(FormatError::Embedding(LossError::ZeroRow { row: 0 }))
        ));
    }

    #[test]
    fn labels_csv() {
        assert_eq!(read_labels_csv("label\n0\n3\n1\n").unwrap(), vec![0, 3, 1]);
        assert!(matches!(read_labels_csv("label\n0.5\n"), Err(FormatError::InvalidNumber { .. })));
        assert!(matches!(read_labels_csv("label\n-1\n"), Err(FormatError::InvalidNumber { .. })));
    }

    #[test]
    fn stats_json() {
        let s = ChannelStats::new([0.1, 9.8, 0.0, -0.5, 0.0, 1e-3], [1.0, 0.5, 0.0, 2.0, 3.0, 4.0], 10).unwrap();
        let text = write_stats_json(&s);
        assert!(text.contains("\"name\": \"gz\""));
        assert_eq!(read_stats_json(&text).unwrap(), s);
        let swapped = text.replacen("\"ax\"", "\"ay\"", 1);
        assert!(matches!(read_stats_json(&swapped), Err(FormatError::ColumnMismatch { position: 0, .. })));
        let negative = text.replacen("\"std\": 1.0", "\"std\": -1.0", 1);
        assert!(matches!(read_stats_json(&negative), Err(FormatError::Stats(_))));
    }
}
