use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use imusynth::io::{read_imu_csv, read_stats_json};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn imusynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imusynth")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn static_pose_reads_gravity_reaction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("imu.csv");
    let o = imusynth(&[
        "simulate",
        path_str(&fixture("static.json")),
        path_str(&out),
        "--joint",
        "root",
        "--normalize-height",
        "false",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = read_imu_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(trace.len(), 10);
    assert_eq!(trace.rate(), 30.0);
    for row in trace.rows() {
        let expected = [0.0, 9.8, 0.0, 0.0, 0.0, 0.0];
        for c in 0..6 {
            assert!((row[c] - expected[c]).abs() < 1e-12, "{row:?}");
        }
    }
}

#[test]
fn circle_has_centripetal_magnitude() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("imu.csv");
    let plot = dir.path().join("plot.dat");
    let o = imusynth(&[
        "simulate",
        path_str(&fixture("circle.json")),
        path_str(&out),
        "--joint",
        "root",
        "--gravity",
        "0,0,0",
        "--normalize-height",
        "false",
        "--rebase",
        "false",
        "--plot",
        path_str(&plot),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = read_imu_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for a in trace.accel() {
        assert!((a.norm() - 4.0).abs() < 1e-3, "{a:?}");
    }
    let plot_text = std::fs::read_to_string(&plot).unwrap();
    assert!(plot_text.starts_with("# t ax ay az gx gy gz accel_norm gyro_norm\n"));
    assert_eq!(plot_text.lines().count(), trace.len() + 1);
}

#[test]
fn simulate_with_rate_resamples_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("imu.csv");
    let o = imusynth(&[
        "simulate",
        path_str(&fixture("walk.json")),
        path_str(&out),
        "--joint",
        "right_wrist",
        "--rate",
        "30",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = read_imu_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(trace.rate(), 30.0);
    assert_eq!(trace.len(), 60);
}

#[test]
fn missing_joint_is_a_validation_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("imu.csv");
    let o = imusynth(&["simulate", path_str(&fixture("walk.json")), path_str(&out), "--joint", "tail"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tail"));
    assert!(!out.exists());
}

#[test]
fn malformed_document_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"fps\": 30.0, \"rotation_format\": \"axis_angle\"");
    let out = dir.path().join("imu.csv");
    let o = imusynth(&["simulate", path_str(&bad), path_str(&out), "--joint", "root"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("imu.csv");
    let missing = dir.path().join("nope.json");
    let o = imusynth(&["simulate", path_str(&missing), path_str(&out), "--joint", "root"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn failed_write_leaves_existing_output_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let out = write(dir.path(), "imu.csv", "previous contents\n");
    let o = imusynth(&["simulate", path_str(&fixture("walk.json")), path_str(&out), "--joint", "tail"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "previous contents\n");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(imusynth(&[]).status.code(), Some(2));
    assert_eq!(imusynth(&["simulate"]).status.code(), Some(2));
    assert_eq!(imusynth(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(imusynth(&["loss", "--kind", "infonce", "a.csv"]).status.code(), Some(2));
    assert_eq!(imusynth(&["--help"]).status.code(), Some(0));
}

#[test]
fn infonce_scalars() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "q.csv", "e0,e1,e2\n0.3,-1.2,0.5\n");
    let k = write(dir.path(), "k.csv", "e0,e1,e2\n2.0,0.1,-0.4\n");
    let o = imusynth(&["loss", "--kind", "infonce", path_str(&q), path_str(&k)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "0");

    let same = write(dir.path(), "same.csv", "e0,e1\n1.0,0.0\n1.0,0.0\n");
    let o = imusynth(&["loss", "--kind", "infonce", path_str(&same), path_str(&same)]);
    assert_eq!(stdout(&o), "0.693147180560");

    let total = imusynth(&[
        "loss",
        "--kind",
        "total",
        path_str(&same),
        path_str(&same),
        path_str(&same),
        path_str(&same),
    ]);
    let value: f64 = stdout(&total).parse().unwrap();
    assert!((value - 6.0 * 2f64.ln()).abs() < 1e-10);
}

#[test]
fn zero_embedding_row_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let q = write(dir.path(), "q.csv", "e0,e1\n0.0,0.0\n1.0,1.0\n");
    let o = imusynth(&["loss", "--kind", "infonce", path_str(&q), path_str(&q)]);
    assert!(matches!(o.status.code(), Some(3) | Some(4)), "{:?}", o.status);
}

#[test]
fn cross_entropy_with_uniform_logits() {
    let dir = tempfile::tempdir().unwrap();
    let logits = write(dir.path(), "logits.csv", "c0,c1,c2\n0,0,0\n0,0,0\n0,0,0\n0,0,0\n");
    let labels = write(dir.path(), "labels.csv", "label\n0\n2\n1\n1\n");
    let o = imusynth(&["loss", "--kind", "xent", "--window", "2", path_str(&logits), path_str(&labels)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let value: f64 = stdout(&o).parse().unwrap();
    assert!((value - 2.0 * 3f64.ln()).abs() < 1e-10);

    let bad = write(dir.path(), "bad.csv", "label\n0\n3\n1\n1\n");
    let o = imusynth(&["loss", "--kind", "xent", path_str(&logits), path_str(&bad)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn calibrate_then_stats_matches_reference() {
    let dir = tempfile::tempdir().unwrap();
    let imu = dir.path().join("imu.csv");
    let o = imusynth(&["simulate", path_str(&fixture("walk.json")), path_str(&imu), "--joint", "left_wrist"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let reference = write(
        dir.path(),
        "ref.json",
        r#"{"count": 500, "channels": [
            {"name": "ax", "mean": 0.5, "std": 2.0},
            {"name": "ay", "mean": 9.6, "std": 1.5},
            {"name": "az", "mean": -0.2, "std": 0.8},
            {"name": "gx", "mean": 0.0, "std": 0.3},
            {"name": "gy", "mean": 0.01, "std": 0.2},
            {"name": "gz", "mean": -0.05, "std": 0.6}
        ]}"#,
    );
    let calibrated = dir.path().join("cal.csv");
    let o = imusynth(&[
        "calibrate",
        path_str(&imu),
        path_str(&calibrated),
        "--ref-stats",
        path_str(&reference),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let stats_path = dir.path().join("stats.json");
    let o = imusynth(&["stats", path_str(&calibrated), path_str(&stats_path)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let got = read_stats_json(&std::fs::read_to_string(&stats_path).unwrap()).unwrap();
    let want = read_stats_json(&std::fs::read_to_string(&reference).unwrap()).unwrap();
    for c in 0..6 {
        assert!((got.mean[c] - want.mean[c]).abs() < 1e-9);
        assert!((got.std[c] - want.std[c]).abs() < 1e-9);
    }
}

#[test]
fn resample_command_changes_rate() {
    let dir = tempfile::tempdir().unwrap();
    let imu = write(
        dir.path(),
        "imu.csv",
        "# rate_hz=4.0\nt,ax,ay,az,gx,gy,gz\n0.0,0,0,0,0,0,0\n0.25,1,2,3,4,5,6\n0.5,2,4,6,8,10,12\n",
    );
    let out = dir.path().join("out.csv");
    let o = imusynth(&["resample", path_str(&imu), path_str(&out), "--rate", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = read_imu_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(trace.len(), 5);
    let mid = trace.row(1);
    assert!((mid[0] - 0.5).abs() < 1e-12 && (mid[5] - 3.0).abs() < 1e-12);
}

#[test]
fn check_command_passes() {
    let o = imusynth(&["check"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().last().unwrap().ends_with("checks passed"));
}
