//! Command-line front end. All file access happens here.
//!
//! Exit codes: 0 success, 2 usage, 3 parse, 4 validation, 5 I/O.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::check;
use crate::imu::{synthesize, GravityModel, ImuTrace, SensorAttachment, SynthesisError};
use crate::io::{
    parse_motion, read_embeddings_csv, read_imu_csv, read_labels_csv, read_logits_csv,
    read_stats_json, write_imu_csv, write_stats_json, FormatError,
};
use crate::losses::{
    contrastive_total, cross_entropy, mse_multitask, pair_loss, LabelWindow, LossConfig, LossError,
    Logits, Role, DEFAULT_TEMPERATURE,
};
use crate::rotation::{UnitQuaternion, Vec3};
use crate::signal::{calibrate, compute_stats, resample_trace, window, SignalError};
use crate::skeleton::{normalize_height, rebase_sequence, Skeleton, SkeletonError, DEFAULT_HEIGHT_M};

/// Feet joint names tried, in order, when `--feet` is not given.
const FEET_CANDIDATES: [(&str, &str); 3] =
    [("left_foot", "right_foot"), ("L_Foot", "R_Foot"), ("LeftFoot", "RightFoot")];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("parse error in {path}: {source}")]
    Parse { path: String, source: FormatError },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0} check(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Parse { .. } => 3,
            CliError::Validation(_) | CliError::CheckFailed(_) => 4,
            CliError::Io { .. } => 5,
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}
validation_from!(SkeletonError, SynthesisError, SignalError, LossError);

#[derive(Debug, Parser)]
#[command(name = "imusynth", version, about = "Virtual IMU synthesis and loss kernels")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize an IMU trace for one sensor from a motion document.
    Simulate(SimulateArgs),
    /// Resample an IMU CSV to a new rate.
    Resample {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        rate: f64,
    },
    /// Match an IMU CSV's per-channel mean and std to reference stats.
    Calibrate {
        input: PathBuf,
        output: PathBuf,
        #[arg(long = "ref-stats")]
        ref_stats: PathBuf,
    },
    /// Write per-channel statistics of an IMU CSV as JSON.
    Stats { input: PathBuf, output: PathBuf },
    /// Evaluate a loss on CSV inputs and print the scalar.
    Loss(LossArgs),
    /// Run the built-in analytic checks.
    Check,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub motion: PathBuf,
    pub output: PathBuf,
    /// Joint the sensor is mounted on.
    #[arg(long)]
    pub joint: String,
    /// Sensor orientation relative to the joint, as an axis-angle vector.
    #[arg(long = "mount-rot", value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
    pub mount_rot: Vec3,
    /// Sensor position in the joint frame, meters.
    #[arg(long = "mount-off", value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
    pub mount_off: Vec3,
    /// Output rate in Hz; defaults to the motion frame rate.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long = "normalize-height", action = ArgAction::Set, default_value_t = true)]
    pub normalize_height: bool,
    #[arg(long, default_value_t = DEFAULT_HEIGHT_M)]
    pub height: f64,
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    pub rebase: bool,
    /// Feet joints as `left,right`.
    #[arg(long)]
    pub feet: Option<String>,
    #[arg(long, value_parser = parse_triple, default_value = "0,-9.8,0", allow_hyphen_values = true)]
    pub gravity: Vec3,
    /// Also write a whitespace-separated data file for gnuplot.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossKind {
    Infonce,
    Total,
    Mse,
    Xent,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, value_enum)]
    pub kind: LossKind,
    /// infonce: Q K; total: TEXT POSE IMU_LEFT IMU_RIGHT; mse: SYNTH POSE2IMU IMU2IMU; xent: LOGITS LABELS.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub tau: f64,
    /// Average both directions of each contrastive pair.
    #[arg(long)]
    pub symmetric: bool,
    /// Window length in samples for mse and xent; defaults to the whole input.
    #[arg(long)]
    pub window: Option<usize>,
}

fn parse_triple(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        let x: f64 = p.trim().parse().map_err(|_| format!("{p:?} is not a number"))?;
        if !x.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
        *slot = x;
    }
    Ok(v.into())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn parsed<T>(path: &Path, r: Result<T, FormatError>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Parse { path: path.display().to_string(), source })
}

/// Writes through a temporary file in the destination directory and
/// renames it into place, so a failed run leaves no partial output.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |e: std::io::Error| CliError::Io { path: path.display().to_string(), message: e.to_string() };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Formats a scalar with 12 significant digits; zero prints as `0`.
pub fn format_scalar(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // Let the exponent formatter do the rounding, then choose a layout.
    let sci = format!("{x:.11e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        format!("{x:.*}", (11 - exp).max(0) as usize)
    } else {
        sci
    }
}

fn resolve_feet(sk: &Skeleton, feet: Option<&str>) -> Result<(usize, usize), CliError> {
    if let Some(spec) = feet {
        let (l, r) = spec
            .split_once(',')
            .ok_or_else(|| CliError::Usage(format!("--feet expects `left,right`, got {spec:?}")))?;
        return Ok((sk.joint_index(l.trim())?, sk.joint_index(r.trim())?));
    }
    for (l, r) in FEET_CANDIDATES {
        if let (Ok(a), Ok(b)) = (sk.joint_index(l), sk.joint_index(r)) {
            return Ok((a, b));
        }
    }
    Ok((0, 0))
}

/// Synthesizes the trace described by `args` without touching the output
/// path.
pub fn simulate_trace(args: &SimulateArgs) -> Result<ImuTrace, CliError> {
    let text = read(&args.motion)?;
    let (mut sk, mut seq) = parsed(&args.motion, parse_motion(&text))?;
    let mount_rotation = UnitQuaternion::from_rotation_vector(args.mount_rot)
        .map_err(|e| CliError::Validation(format!("--mount-rot: {e}")))?;
    let att = SensorAttachment::named(&sk, &args.joint, mount_rotation, args.mount_off)?;
    if args.normalize_height {
        sk = normalize_height(&sk, args.height)?;
    }
    if args.rebase {
        let feet = resolve_feet(&sk, args.feet.as_deref())?;
        seq = rebase_sequence(&seq, &sk, feet)?;
    }
    let trace = synthesize(&seq, &sk, &att, &GravityModel { g_global: args.gravity })?;
    match args.rate {
        Some(rate) if rate != trace.rate() => Ok(resample_trace(&trace, rate)?),
        _ => Ok(trace),
    }
}

fn plot_data(trace: &ImuTrace) -> String {
    let mut out = String::from("# t ax ay az gx gy gz accel_norm gyro_norm\n");
    for (i, r) in trace.rows().enumerate() {
        let t = i as f64 / trace.rate();
        let a = trace.accel()[i].norm();
        let g = trace.gyro()[i].norm();
        let cols: Vec<String> = std::iter::once(t)
            .chain(r)
            .chain([a, g])
            .map(crate::io::format_number)
            .collect();
        out.push_str(&cols.join(" "));
        out.push('\n');
    }
    out
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let trace = simulate_trace(args)?;
    write_atomic(&args.output, &write_imu_csv(&trace))?;
    if let Some(plot) = &args.plot {
        write_atomic(plot, &plot_data(&trace))?;
    }
    Ok(())
}

fn read_trace(path: &Path) -> Result<ImuTrace, CliError> {
    let text = read(path)?;
    parsed(path, read_imu_csv(&text))
}

fn expect_inputs(kind: LossKind, inputs: &[PathBuf], n: usize) -> Result<(), CliError> {
    if inputs.len() == n {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--kind {} takes {n} input files, got {}",
            kind.to_possible_value().expect("named variant").get_name(),
            inputs.len()
        )))
    }
}

/// Computes the loss selected by `args`.
pub fn evaluate_loss(args: &LossArgs) -> Result<f64, CliError> {
    let cfg = LossConfig { temperature: args.tau, symmetrize: args.symmetric };
    cfg.validate()?;
    let embeddings = |path: &PathBuf, role: Role| -> Result<_, CliError> {
        let text = read(path)?;
        parsed(path, read_embeddings_csv(&text, role))
    };
    if args.window == Some(0) {
        return Err(CliError::Usage("--window must be at least 1".into()));
    }
    let value = match args.kind {
        LossKind::Infonce => {
            expect_inputs(args.kind, &args.inputs, 2)?;
            let q = embeddings(&args.inputs[0], Role::Query)?;
            let k = embeddings(&args.inputs[1], Role::Key)?;
            pair_loss(&q, &k, &cfg)?
        }
        LossKind::Total => {
            expect_inputs(args.kind, &args.inputs, 4)?;
            let t = embeddings(&args.inputs[0], Role::Text)?;
            let p = embeddings(&args.inputs[1], Role::Pose)?;
            let l = embeddings(&args.inputs[2], Role::ImuLeft)?;
            let r = embeddings(&args.inputs[3], Role::ImuRight)?;
            contrastive_total(&t, &p, &l, &r, &cfg)?
        }
        LossKind::Mse => {
            expect_inputs(args.kind, &args.inputs, 3)?;
            let traces = args.inputs.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>, _>>()?;
            let l = args.window.unwrap_or(traces[0].len());
            let batches = traces.iter().map(|t| window(t, l, l)).collect::<Result<Vec<_>, _>>()?;
            mse_multitask(&batches[0], &batches[1], &batches[2])?
        }
        LossKind::Xent => {
            expect_inputs(args.kind, &args.inputs, 2)?;
            let (logit_path, label_path) = (&args.inputs[0], &args.inputs[1]);
            let (classes, values) = parsed(logit_path, read_logits_csv(&read(logit_path)?))?;
            let labels = parsed(label_path, read_labels_csv(&read(label_path)?))?;
            let steps = values.len() / classes;
            if labels.len() != steps {
                return Err(CliError::Validation(format!(
                    "{} labels for {steps} logit rows",
                    labels.len()
                )));
            }
            let l = args.window.unwrap_or(steps);
            if l > steps {
                return Err(CliError::Validation(format!("window {l} exceeds {steps} rows")));
            }
            let batch = steps / l;
            let logits = Logits::new(batch, l, classes, values[..batch * l * classes].to_vec())?;
            let windows = labels
                .chunks_exact(l)
                .enumerate()
                .map(|(w, chunk)| {
                    LabelWindow::new(chunk.to_vec(), classes).map_err(|e| match e {
                        LossError::LabelOutOfRange { step, label, classes, .. } => {
                            LossError::LabelOutOfRange { window: w, step, label, classes }
                        }
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            cross_entropy(&logits, &windows)?
        }
    };
    Ok(value)
}

/// Runs one parsed command, writing any console output to `out`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let console = |e: std::io::Error| CliError::Io { path: "<stdout>".into(), message: e.to_string() };
    match &cfg.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Resample { input, output, rate } => {
            let trace = resample_trace(&read_trace(input)?, *rate)?;
            write_atomic(output, &write_imu_csv(&trace))
        }
        Command::Calibrate { input, output, ref_stats } => {
            let trace = read_trace(input)?;
            let reference = parsed(ref_stats, read_stats_json(&read(ref_stats)?))?;
            write_atomic(output, &write_imu_csv(&calibrate(&trace, &reference)?))
        }
        Command::Stats { input, output } => {
            let stats = compute_stats(&read_trace(input)?)?;
            write_atomic(output, &write_stats_json(&stats))
        }
        Command::Loss(args) => {
            let value = evaluate_loss(args)?;
            writeln!(out, "{}", format_scalar(value)).map_err(console)
        }
        Command::Check => {
            let results = check::run_all();
            let mut failed = 0;
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                writeln!(out, "{tag} {}: {}", r.name, r.detail).map_err(console)?;
                failed += usize::from(!r.passed);
            }
            writeln!(out, "{} of {} checks passed", results.len() - failed, results.len()).map_err(console)?;
            if failed > 0 {
                Err(CliError::CheckFailed(failed))
            } else {
                Ok(())
            }
        }
    }
}
