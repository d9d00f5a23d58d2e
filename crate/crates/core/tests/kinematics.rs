use std::f64::consts::PI;

use imusynth::imu::{synthesize, GravityModel, ImuTrace, SensorAttachment, WorldTrack};
use imusynth::io::parse_motion;
use imusynth::rotation::{UnitQuaternion, Vec3};
use imusynth::signal::{compute_stats, resample_track, window};
use imusynth::skeleton::{forward_kinematics, rebase_sequence, MotionSequence, PoseFrame};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn walk() -> (imusynth::Skeleton, MotionSequence) {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/walk.json")).unwrap();
    parse_motion(&text).unwrap()
}

#[test]
fn fixture_bones_stay_rigid() {
    let (sk, seq) = walk();
    for frame in seq.frames() {
        let joints = forward_kinematics(&sk, frame).unwrap();
        for i in 1..sk.joint_count() {
            let p = sk.parent(i).unwrap();
            let len = (joints[i].position - joints[p].position).norm();
            assert!((len - sk.rest_offsets()[i].norm()).abs() < 1e-12);
        }
    }
}

#[test]
fn rebase_puts_feet_at_origin_facing_forward() {
    let (sk, seq) = walk();
    let (l, r) = (sk.joint_index("left_foot").unwrap(), sk.joint_index("right_foot").unwrap());
    let rebased = rebase_sequence(&seq, &sk, (l, r)).unwrap();
    let joints = forward_kinematics(&sk, &rebased.frames()[0]).unwrap();
    let mid = (joints[l].position + joints[r].position) * 0.5;
    assert!(mid.norm() < 1e-12, "{mid:?}");
    // The root's forward axis has no x component after yaw removal.
    let forward = joints[0].orientation.rotate(Vec3::new(0.0, 0.0, 1.0));
    assert!(forward.x.abs() < 1e-12 && forward.z > 0.0, "{forward:?}");
}

#[test]
fn rebasing_does_not_change_the_imu_signal() {
    let (sk, seq) = walk();
    let (l, r) = (sk.joint_index("left_foot").unwrap(), sk.joint_index("right_foot").unwrap());
    let rebased = rebase_sequence(&seq, &sk, (l, r)).unwrap();
    let att = SensorAttachment::named(&sk, "right_wrist", UnitQuaternion::IDENTITY, Vec3::ZERO).unwrap();
    let g = GravityModel::default();
    let a = synthesize(&seq, &sk, &att, &g).unwrap();
    let b = synthesize(&rebased, &sk, &att, &g).unwrap();
    assert!(a.max_abs_diff(&b) < 1e-9, "{}", a.max_abs_diff(&b));
}

#[test]
fn mismatched_frames_are_rejected() {
    let (sk, _) = walk();
    let frame = PoseFrame::new(Vec3::ZERO, vec![UnitQuaternion::IDENTITY; 3]);
    let seq = MotionSequence::new(30.0, vec![frame; 5]).unwrap();
    assert!(synthesize(&seq, &sk, &SensorAttachment::at_joint(0), &GravityModel::default()).is_err());
}

#[test]
fn sinusoid_track_resampling_stays_within_interpolation_bound() {
    let (amp, omega) = (0.7, 2.0 * PI * 1.5);
    let f = |t: f64| amp * (omega * t).cos();
    let src = 200.0;
    let n = 401;
    let track = WorldTrack::new(
        src,
        (0..n).map(|i| Vec3::new(0.0, f(i as f64 / src), 0.0)).collect(),
        (0..n).map(|i| UnitQuaternion::from_rotation_vector(Vec3::new(0.0, 0.4 * i as f64 / src, 0.0)).unwrap()).collect(),
    )
    .unwrap();
    let target = 70.0;
    let out = resample_track(&track, target).unwrap();
    assert_eq!(out.len(), (2.0 * target) as usize + 1);
    let h = 1.0 / src;
    let bound = h * h / 8.0 * amp * omega * omega + 1e-12;
    for (i, p) in out.position().iter().enumerate() {
        let t = i as f64 / target;
        assert!((p.y - f(t)).abs() <= bound, "t={t}: {} vs {}", p.y, f(t));
        // Constant-rate yaw is reproduced exactly by slerp.
        let expected = UnitQuaternion::from_rotation_vector(Vec3::new(0.0, 0.4 * t, 0.0)).unwrap();
        assert!(out.orientation()[i].angle_to(&expected) < 1e-12);
    }
}

#[test]
fn stats_match_two_pass_reference() {
    let mut rng = StdRng::seed_from_u64(21);
    let rows: Vec<[f64; 6]> = (0..1000).map(|_| std::array::from_fn(|c| 1e4 * c as f64 + rng.gen_range(-1.0..1.0))).collect();
    let trace = ImuTrace::from_rows(100.0, &rows).unwrap();
    let stats = compute_stats(&trace).unwrap();
    let n = rows.len() as f64;
    for c in 0..6 {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        assert!((stats.mean[c] - mean).abs() < 1e-9);
        assert!((stats.std[c] - var.sqrt()).abs() < 1e-9);
    }
    assert_eq!(stats.count, 1000);
}

#[test]
fn windows_cover_the_trace() {
    let rows: Vec<[f64; 6]> = (0..10).map(|i| [i as f64; 6]).collect();
    let trace = ImuTrace::from_rows(10.0, &rows).unwrap();
    let w = window(&trace, 4, 3).unwrap();
    assert_eq!(w.iter().map(|w| w.start).collect::<Vec<_>>(), vec![0, 3, 6]);
    assert!(w.iter().all(|w| w.samples.len() == 4));
    assert_eq!(w[2].samples[3][0], 9.0);
    assert!(window(&trace, 11, 1).is_err());
}
