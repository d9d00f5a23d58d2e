//! Self-test suite run by `imusynth check`: each check drives the library
//! with a motion or batch whose answer is known in closed form.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::imu::{
    angular_velocity_global, linear_accel_global, synthesize_track, to_local_gyro, GravityModel,
    ImuTrace, WorldTrack,
};
use crate::losses::{info_nce, info_nce_grad, EmbeddingBatch, LossConfig, Role};
use crate::rotation::{yaw_rotation, UnitQuaternion, Vec3};
use crate::signal::{calibrate, compute_stats, resample_trace, ChannelStats};
use crate::skeleton::{forward_kinematics, normalize_height, rest_height, PoseFrame, Skeleton};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, error: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        passed: error.is_finite() && error <= tolerance,
        detail: format!("error {error:.3e} (tolerance {tolerance:.0e})"),
    }
}

fn random_quat(rng: &mut StdRng) -> UnitQuaternion {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n2: f64 = c.iter().map(|v| v * v).sum();
        if n2 > 1e-2 && n2 <= 1.0 {
            return UnitQuaternion::new(c[0], c[1], c[2], c[3]).expect("non-degenerate");
        }
    }
}

fn sampled(rate: f64, n: usize, f: impl Fn(f64) -> (Vec3, UnitQuaternion)) -> WorldTrack {
    let (p, q) = (0..n).map(|i| f(i as f64 / rate)).unzip();
    WorldTrack::new(rate, p, q).expect("analytic track is valid")
}

fn stationary(rng: &mut StdRng) -> CheckResult {
    let g = GravityModel::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let q = random_quat(rng);
        let p = Vec3::new(rng.gen(), rng.gen(), rng.gen());
        let trace = synthesize_track(&sampled(60.0, 8, |_| (p, q)), &g).expect("synthesis");
        let expected = q.to_matrix().transpose_mul_vec(Vec3::new(0.0, 9.8, 0.0));
        for (a, w) in trace.accel().iter().zip(trace.gyro()) {
            worst = worst.max(a.max_abs_diff(expected)).max(w.norm());
        }
    }
    result("stationary specific force", worst, 1e-9)
}

fn circle_error(rate: f64) -> f64 {
    let (radius, omega) = (1.0, 2.0);
    let n = (rate * 2.0) as usize + 1;
    let track = sampled(rate, n, |t| {
        (Vec3::new(radius * (omega * t).cos(), 1.0, radius * (omega * t).sin()), UnitQuaternion::IDENTITY)
    });
    linear_accel_global(&track)
        .expect("enough samples")
        .iter()
        .map(|a| (a.norm() - radius * omega * omega).abs())
        .fold(0.0, f64::max)
}

fn circle() -> Vec<CheckResult> {
    let fine = circle_error(240.0);
    let coarse = circle_error(120.0);
    let ratio = coarse / fine;
    vec![
        result("circular motion centripetal magnitude", fine, 1e-3),
        CheckResult {
            name: "second-order convergence",
            passed: ratio >= 3.6,
            detail: format!("error ratio 120 Hz / 240 Hz = {ratio:.3} (need >= 3.6)"),
        },
    ]
}

fn spin(rng: &mut StdRng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let base = random_quat(rng);
        let omega = rng.gen_range(-6.0..6.0);
        let axis = Vec3::new(0.0, 0.0, 1.0);
        let track = sampled(100.0, 50, |t| {
            (Vec3::ZERO, base.compose(&UnitQuaternion::from_rotation_vector(axis * (omega * t)).unwrap()))
        });
        let w = angular_velocity_global(&track).expect("enough samples");
        for wl in to_local_gyro(&track, &w).expect("lengths match") {
            worst = worst.max(wl.max_abs_diff(axis * omega));
        }
    }
    result("constant body-axis spin", worst, 1e-9)
}

fn invariance(rng: &mut StdRng) -> CheckResult {
    let g = GravityModel::default();
    let a0 = random_quat(rng);
    let track = sampled(120.0, 60, |t| {
        (
            Vec3::new((1.3 * t).sin(), 0.2 * (2.1 * t).cos(), t * t),
            a0.compose(&UnitQuaternion::from_rotation_vector(Vec3::new(0.4, -1.1, 0.7) * t).unwrap()),
        )
    });
    let base = synthesize_track(&track, &g).expect("synthesis");
    let yawed = synthesize_track(&track.transformed(&yaw_rotation(rng.gen_range(-3.0..3.0)), Vec3::new(1.0, 2.0, 3.0)), &g)
        .expect("synthesis");
    result("yaw and translation invariance", base.max_abs_diff(&yawed), 1e-9)
}

fn rigidity(rng: &mut StdRng) -> Vec<CheckResult> {
    let n: usize = 12;
    let parents: Vec<i64> = (0..n as i64).map(|i| if i == 0 { -1 } else { rng.gen_range(0..i) }).collect();
    let offsets: Vec<Vec3> = (0..n)
        .map(|_| Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.5..0.5), rng.gen_range(-0.3..0.3)))
        .collect();
    let sk = Skeleton::new((0..n).map(|i| format!("j{i}")).collect(), parents, offsets).expect("valid tree");
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let frame = PoseFrame::new(
            Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
            (0..n).map(|_| random_quat(rng)).collect(),
        );
        let joints = forward_kinematics(&sk, &frame).expect("frame fits");
        for i in 1..n {
            let p = sk.parent(i).expect("non-root");
            let len = (joints[i].position - joints[p].position).norm();
            worst = worst.max((len - sk.rest_offsets()[i].norm()).abs());
        }
    }
    let normalized = normalize_height(&sk, 1.7).map(|s| (rest_height(&s) - 1.7).abs()).unwrap_or(f64::INFINITY);
    vec![result("rigid bones under forward kinematics", worst, 1e-12), result("height normalization", normalized, 1e-9)]
}

fn random_batch(rng: &mut StdRng, n: usize, d: usize) -> EmbeddingBatch {
    let data = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    EmbeddingBatch::new(n, d, data, Role::Generic).expect("random rows are non-zero")
}

fn info_nce_checks(rng: &mut StdRng) -> Vec<CheckResult> {
    let cfg = LossConfig::default();
    let mut worst: f64 = 0.0;
    for n in 1..8 {
        let data: Vec<f64> = (0..n).flat_map(|_| [0.6, 0.0, 0.8]).collect();
        let b = EmbeddingBatch::new(n, 3, data, Role::Generic).expect("valid");
        worst = worst.max((info_nce(&b, &b, &cfg).expect("loss") - (n as f64).ln()).abs());
    }
    let mut grad_worst: f64 = 0.0;
    let h = 1e-4;
    for _ in 0..20 {
        let (q, k) = (random_batch(rng, 3, 4), random_batch(rng, 3, 4));
        let (gq, _) = info_nce_grad(&q, &k, &cfg).expect("grad");
        for idx in 0..q.as_slice().len() {
            let bump = |delta: f64| {
                let mut data = q.as_slice().to_vec();
                data[idx] += delta;
                let moved = EmbeddingBatch::new(3, 4, data, Role::Generic).expect("valid");
                info_nce(&moved, &k, &cfg).expect("loss")
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            grad_worst = grad_worst.max((fd - gq[idx]).abs() / gq[idx].abs().max(fd.abs()).max(1.0));
        }
    }
    vec![result("InfoNCE uniform batch equals log N", worst, 1e-12), result("InfoNCE gradient vs finite differences", grad_worst, 1e-5)]
}

fn calibration(rng: &mut StdRng) -> CheckResult {
    let rows: Vec<[f64; 6]> = (0..200).map(|_| std::array::from_fn(|_| rng.gen_range(-3.0..3.0))).collect();
    let trace = ImuTrace::from_rows(50.0, &rows).expect("finite");
    let reference = ChannelStats::new([0.1, 9.7, -0.3, 0.0, 0.02, -0.01], [1.5, 2.0, 0.7, 0.3, 0.25, 0.4], 1000)
        .expect("valid stats");
    let out = calibrate(&trace, &reference).expect("calibrate");
    let s = compute_stats(&out).expect("stats");
    let err = (0..6)
        .map(|c| (s.mean[c] - reference.mean[c]).abs().max((s.std[c] - reference.std[c]).abs()))
        .fold(0.0, f64::max);
    result("calibration matches reference statistics", err, 1e-9)
}

fn resample_identity(rng: &mut StdRng) -> CheckResult {
    let rows: Vec<[f64; 6]> = (0..97).map(|_| std::array::from_fn(|_| rng.gen_range(-10.0..10.0))).collect();
    let trace = ImuTrace::from_rows(60.0, &rows).expect("finite");
    let same = resample_trace(&trace, 60.0).expect("resample");
    result("resampling at the source rate", trace.max_abs_diff(&same), 1e-12)
}

/// Runs every check with a fixed seed.
pub fn run_all() -> Vec<CheckResult> {
    let mut rng = StdRng::seed_from_u64(0x1_5EED);
    let mut out = vec![stationary(&mut rng)];
    out.extend(circle());
    out.push(spin(&mut rng));
    out.push(invariance(&mut rng));
    out.extend(rigidity(&mut rng));
    out.extend(info_nce_checks(&mut rng));
    out.push(calibration(&mut rng));
    out.push(resample_identity(&mut rng));
    out
}
