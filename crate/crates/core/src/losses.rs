//! Loss kernels for multi-modal pretraining and windowed classification.
//!
//! Everything here is plain `f64` arithmetic with a fixed summation order
//! (ascending index), so a given input always produces the same bits.

use thiserror::Error;

use crate::signal::ImuWindow;

/// Softmax temperature applied to cosine similarities.
pub const DEFAULT_TEMPERATURE: f64 = 0.07;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("embedding row {row} has zero norm")]
    ZeroRow { row: usize },
    #[error("non-finite value at {0}")]
    NonFinite(String),
    #[error("batch is empty")]
    Empty,
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("label {label} at window {window}, step {step} is outside 0..{classes}")]
    LabelOutOfRange { window: usize, step: usize, label: usize, classes: usize },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
}

/// Which modality an embedding batch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Role {
    Text,
    Pose,
    ImuLeft,
    ImuRight,
    Query,
    Key,
    #[default]
    Generic,
}

/// `N × D` row-major embeddings, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
    role: Role,
}

impl EmbeddingBatch {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>, role: Role) -> Result<Self, LossError> {
        if rows == 0 || dim == 0 {
            return Err(LossError::Empty);
        }
        if data.len() != rows * dim {
            return Err(LossError::ShapeMismatch(format!(
                "{} values for a {rows}x{dim} batch",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(LossError::NonFinite(format!("row {}, column {}", i / dim, i % dim)));
        }
        let batch = Self { rows, dim, data, role };
        if let Some(row) = (0..rows).find(|&r| batch.row(r).iter().all(|&v| v == 0.0)) {
            return Err(LossError::ZeroRow { row });
        }
        Ok(batch)
    }

    pub fn from_rows(rows: &[Vec<f64>], role: Role) -> Result<Self, LossError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(LossError::ShapeMismatch(format!("row {r} is ragged")));
        }
        Self::new(rows.len(), dim, rows.concat(), role)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn row_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub temperature: f64,
    /// Average both directions of every contrastive pair.
    pub symmetrize: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { temperature: DEFAULT_TEMPERATURE, symmetrize: false }
    }
}

impl LossConfig {
    pub fn with_temperature(temperature: f64) -> Result<Self, LossError> {
        let cfg = Self { temperature, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if self.temperature.is_finite() && self.temperature > 0.0 {
            Ok(())
        } else {
            Err(LossError::InvalidTemperature(self.temperature))
        }
    }
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Per-class ids for each step of one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelWindow {
    labels: Vec<usize>,
    classes: usize,
}

impl LabelWindow {
    pub fn new(labels: Vec<usize>, classes: usize) -> Result<Self, LossError> {
        if classes < 2 {
            return Err(LossError::TooFewClasses(classes));
        }
        if let Some(step) = labels.iter().position(|&l| l >= classes) {
            return Err(LossError::LabelOutOfRange { window: 0, step, label: labels[step], classes });
        }
        Ok(Self { labels, classes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }
}

/// Classifier outputs shaped `batch × steps × classes`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    batch: usize,
    steps: usize,
    classes: usize,
    data: Vec<f64>,
}

impl Logits {
    pub fn new(batch: usize, steps: usize, classes: usize, data: Vec<f64>) -> Result<Self, LossError> {
        if data.len() != batch * steps * classes {
            return Err(LossError::ShapeMismatch(format!(
                "{} logits for shape {batch}x{steps}x{classes}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let per_window = steps * classes;
            return Err(LossError::NonFinite(format!(
                "logit window {}, step {}, class {}",
                i / per_window,
                (i % per_window) / classes,
                i % classes
            )));
        }
        Ok(Self { batch, steps, classes, data })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn at(&self, b: usize, t: usize) -> &[f64] {
        let start = (b * self.steps + t) * self.classes;
        &self.data[start..start + self.classes]
    }
}

fn same_shape(q: &EmbeddingBatch, k: &EmbeddingBatch) -> Result<(), LossError> {
    if q.rows != k.rows || q.dim != k.dim {
        return Err(LossError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            q.rows, q.dim, k.rows, k.dim
        )));
    }
    Ok(())
}

fn unit_rows(b: &EmbeddingBatch) -> (Vec<f64>, Vec<f64>) {
    let norms: Vec<f64> = (0..b.rows).map(|i| b.row_norm(i)).collect();
    let mut unit = b.data.clone();
    for (i, chunk) in unit.chunks_mut(b.dim).enumerate() {
        chunk.iter_mut().for_each(|v| *v /= norms[i]);
    }
    (unit, norms)
}

fn similarity(qu: &[f64], ku: &[f64], n: usize, d: usize) -> SquareMatrix {
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        let qi = &qu[i * d..(i + 1) * d];
        for j in 0..n {
            let kj = &ku[j * d..(j + 1) * d];
            let dot: f64 = qi.iter().zip(kj).map(|(a, b)| a * b).sum();
            data.push(dot.clamp(-1.0, 1.0));
        }
    }
    SquareMatrix { n, data }
}

/// `S[i][j] = q_i·k_j / (|q_i| |k_j|)`.
pub fn cosine_similarity_matrix(
    q: &EmbeddingBatch,
    k: &EmbeddingBatch,
) -> Result<SquareMatrix, LossError> {
    same_shape(q, k)?;
    let (qu, _) = unit_rows(q);
    let (ku, _) = unit_rows(k);
    Ok(similarity(&qu, &ku, q.rows, q.dim))
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// InfoNCE with the positive pair included in the denominator:
/// `−(1/N) Σᵢ log softmax_j(S[i][j]/τ)[i]`.
pub fn info_nce(q: &EmbeddingBatch, k: &EmbeddingBatch, cfg: &LossConfig) -> Result<f64, LossError> {
    cfg.validate()?;
    let s = cosine_similarity_matrix(q, k)?;
    let tau = cfg.temperature;
    let n = s.size();
    let total: f64 = (0..n)
        .map(|i| log_sum_exp(s.row(i).iter().map(|v| v / tau)) - s.get(i, i) / tau)
        .sum();
    // Rounding can leave the N = 1 case a hair away from zero.
    Ok((total / n as f64).max(0.0))
}

/// Analytic gradient of [`info_nce`] with respect to both inputs.
///
/// With `P = softmax_row(S/τ)` the loss gradient on `S` is
/// `(P − I) / (N τ)`, which is pulled back through the cosine
/// normalization of each row.
pub fn info_nce_grad(
    q: &EmbeddingBatch,
    k: &EmbeddingBatch,
    cfg: &LossConfig,
) -> Result<(Vec<f64>, Vec<f64>), LossError> {
    cfg.validate()?;
    same_shape(q, k)?;
    let (n, d) = (q.rows, q.dim);
    let tau = cfg.temperature;
    let (qu, qn) = unit_rows(q);
    let (ku, kn) = unit_rows(k);
    let s = similarity(&qu, &ku, n, d);

    let scale = 1.0 / (n as f64 * tau);
    let mut ds = vec![0.0; n * n];
    for i in 0..n {
        let lse = log_sum_exp(s.row(i).iter().map(|v| v / tau));
        for j in 0..n {
            let p = (s.get(i, j) / tau - lse).exp();
            ds[i * n + j] = scale * (p - if i == j { 1.0 } else { 0.0 });
        }
    }

    // d(q̂·k̂)/dq = (k̂ − (q̂·k̂) q̂) / |q|, and symmetrically for k.
    let mut gq = vec![0.0; n * d];
    let mut gk = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..n {
            let g = ds[i * n + j];
            let sij = s.get(i, j);
            for c in 0..d {
                let (qc, kc) = (qu[i * d + c], ku[j * d + c]);
                gq[i * d + c] += g * (kc - sij * qc) / qn[i];
                gk[j * d + c] += g * (qc - sij * kc) / kn[j];
            }
        }
    }
    Ok((gq, gk))
}

/// One contrastive pair, averaged over both directions when
/// `cfg.symmetrize` is set.
pub fn pair_loss(q: &EmbeddingBatch, k: &EmbeddingBatch, cfg: &LossConfig) -> Result<f64, LossError> {
    let forward = info_nce(q, k, cfg)?;
    if cfg.symmetrize {
        Ok(0.5 * (forward + info_nce(k, q, cfg)?))
    } else {
        Ok(forward)
    }
}

/// Sum of the six pairwise terms between text, pose, left-wrist and
/// right-wrist embeddings, in the order
/// (t,p), (t,sl), (t,sr), (p,sl), (p,sr), (sl,sr).
pub fn contrastive_total(
    text: &EmbeddingBatch,
    pose: &EmbeddingBatch,
    imu_left: &EmbeddingBatch,
    imu_right: &EmbeddingBatch,
    cfg: &LossConfig,
) -> Result<f64, LossError> {
    let pairs = [
        (text, pose),
        (text, imu_left),
        (text, imu_right),
        (pose, imu_left),
        (pose, imu_right),
        (imu_left, imu_right),
    ];
    let mut total = 0.0;
    for (a, b) in pairs {
        total += pair_loss(a, b, cfg)?;
    }
    Ok(total)
}

fn check_window_batches(batches: [&[ImuWindow]; 3]) -> Result<(usize, usize), LossError> {
    let n = batches[0].len();
    if n == 0 {
        return Err(LossError::Empty);
    }
    if batches.iter().any(|b| b.len() != n) {
        return Err(LossError::ShapeMismatch(format!(
            "batch sizes {}, {}, {}",
            batches[0].len(),
            batches[1].len(),
            batches[2].len()
        )));
    }
    let l = batches[0][0].len();
    if l == 0 {
        return Err(LossError::Empty);
    }
    for (b, batch) in batches.iter().enumerate() {
        if let Some(j) = batch.iter().position(|w| w.len() != l) {
            return Err(LossError::ShapeMismatch(format!(
                "window {j} of input {b} has {} samples, expected {l}",
                batch[j].len()
            )));
        }
    }
    Ok((n, l))
}

/// Pose-to-IMU regression plus IMU reconstruction error against the
/// synthetic target `xv`. The per-sample squared error is averaged over
/// channels, then over the window, then over the batch.
pub fn mse_multitask(xv: &[ImuWindow], xp: &[ImuWindow], xs: &[ImuWindow]) -> Result<f64, LossError> {
    let (n, l) = check_window_batches([xv, xp, xs])?;
    let mut total = 0.0;
    for j in 0..n {
        let mut window_sum = 0.0;
        for i in 0..l {
            let (v, p, s) = (&xv[j].samples[i], &xp[j].samples[i], &xs[j].samples[i]);
            let mut pose2imu = 0.0;
            let mut rec = 0.0;
            for c in 0..6 {
                pose2imu += (v[c] - p[c]).powi(2);
                rec += (v[c] - s[c]).powi(2);
            }
            window_sum += pose2imu / 6.0 + rec / 6.0;
        }
        total += window_sum / l as f64;
    }
    Ok(total / n as f64)
}

/// Cross-entropy summed over the steps of each window and averaged over
/// the batch.
pub fn cross_entropy(logits: &Logits, labels: &[LabelWindow]) -> Result<f64, LossError> {
    if logits.classes < 2 {
        return Err(LossError::TooFewClasses(logits.classes));
    }
    if logits.batch == 0 {
        return Err(LossError::Empty);
    }
    if labels.len() != logits.batch {
        return Err(LossError::ShapeMismatch(format!(
            "{} label windows for {} logit windows",
            labels.len(),
            logits.batch
        )));
    }
    let mut total = 0.0;
    for (b, window) in labels.iter().enumerate() {
        if window.labels.len() != logits.steps || window.classes != logits.classes {
            return Err(LossError::ShapeMismatch(format!(
                "label window {b} is {}x{}, logits are {}x{}",
                window.labels.len(),
                window.classes,
                logits.steps,
                logits.classes
            )));
        }
        for (t, &label) in window.labels.iter().enumerate() {
            let row = logits.at(b, t);
            total += log_sum_exp(row.iter().copied()) - row[label];
        }
    }
    Ok(total / logits.batch as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[&[f64]]) -> EmbeddingBatch {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        EmbeddingBatch::from_rows(&rows, Role::Generic).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let eye = batch(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let s = cosine_similarity_matrix(&eye, &eye).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        let s = cosine_similarity_matrix(&batch(&[&[1.0, 0.0]]), &batch(&[&[0.0, 1.0]])).unwrap();
        assert_eq!(s.get(0, 0), 0.0);
    }

    #[test]
    fn batch_validation() {
        assert_eq!(
            EmbeddingBatch::new(2, 2, vec![1.0, 0.0, 0.0, 0.0], Role::Text),
            Err(LossError::ZeroRow { row: 1 })
        );
        assert!(matches!(
            EmbeddingBatch::new(1, 2, vec![1.0, f64::NAN], Role::Text),
            Err(LossError::NonFinite(_))
        ));
        assert!(matches!(
            EmbeddingBatch::new(1, 3, vec![1.0, 0.0], Role::Text),
            Err(LossError::ShapeMismatch(_))
        ));
        assert_eq!(EmbeddingBatch::new(0, 3, vec![], Role::Text), Err(LossError::Empty));
        let a = batch(&[&[1.0, 0.0]]);
        let b = batch(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(info_nce(&a, &b, &LossConfig::default()), Err(LossError::ShapeMismatch(_))));
    }

    #[test]
    fn temperature_must_be_positive() {
        assert_eq!(LossConfig::with_temperature(0.0), Err(LossError::InvalidTemperature(0.0)));
        let a = batch(&[&[1.0, 0.0]]);
        let cfg = LossConfig { temperature: -1.0, symmetrize: false };
        assert!(matches!(info_nce(&a, &a, &cfg), Err(LossError::InvalidTemperature(_))));
    }

    #[test]
    fn single_row_loss_is_zero() {
        let a = batch(&[&[0.3, -0.4, 2.0]]);
        let b = batch(&[&[-1.0, 0.5, 0.1]]);
        assert_eq!(info_nce(&a, &b, &LossConfig::default()).unwrap(), 0.0);
        let (gq, gk) = info_nce_grad(&a, &b, &LossConfig::default()).unwrap();
        assert!(gq.iter().chain(&gk).all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn identical_rows_give_log_n() {
        for n in 1..6 {
            let rows: Vec<&[f64]> = vec![&[0.6, 0.8]; n];
            let b = batch(&rows);
            let l = info_nce(&b, &b, &LossConfig::default()).unwrap();
            assert!((l - (n as f64).ln()).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn identical_rows_have_identical_gradients() {
        let rows: Vec<&[f64]> = vec![&[0.2, -0.5, 1.0]; 4];
        let b = batch(&rows);
        let (gq, gk) = info_nce_grad(&b, &b, &LossConfig::default()).unwrap();
        for r in 1..4 {
            for c in 0..3 {
                assert!((gq[r * 3 + c] - gq[c]).abs() < 1e-15);
                assert!((gk[r * 3 + c] - gk[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn total_of_identical_orthonormal_batches() {
        let e = batch(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let cfg = LossConfig::default();
        let single = info_nce(&e, &e, &cfg).unwrap();
        let total = contrastive_total(&e, &e, &e, &e, &cfg).unwrap();
        assert!((total - 6.0 * single).abs() < 1e-12);
        let one = batch(&[&[1.0, 2.0, 3.0]]);
        assert_eq!(contrastive_total(&one, &one, &one, &one, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn symmetrize_averages_directions() {
        let a = batch(&[&[1.0, 0.2], &[0.3, 1.0], &[-1.0, 0.5]]);
        let b = batch(&[&[0.9, -0.1], &[0.0, 1.0], &[0.4, 0.4]]);
        let mut cfg = LossConfig::default();
        let fwd = pair_loss(&a, &b, &cfg).unwrap();
        cfg.symmetrize = true;
        let sym = pair_loss(&a, &b, &cfg).unwrap();
        let back = info_nce(&b, &a, &LossConfig::default()).unwrap();
        assert!((sym - 0.5 * (fwd + back)).abs() < 1e-15);
    }

    fn windows(rows: &[[f64; 6]], l: usize) -> Vec<ImuWindow> {
        rows.chunks(l)
            .enumerate()
            .map(|(i, c)| ImuWindow { start: i * l, samples: c.to_vec(), labels: None })
            .collect()
    }

    #[test]
    fn mse_examples() {
        let v: Vec<[f64; 6]> = (0..12).map(|i| [i as f64; 6]).collect();
        let p: Vec<[f64; 6]> = v.iter().map(|r| r.map(|x| x + 1.0)).collect();
        let xv = windows(&v, 3);
        assert_eq!(mse_multitask(&xv, &xv, &xv).unwrap(), 0.0);
        assert_eq!(mse_multitask(&xv, &windows(&p, 3), &xv).unwrap(), 1.0);
        assert!(matches!(mse_multitask(&xv, &xv[..2], &xv), Err(LossError::ShapeMismatch(_))));
        assert!(matches!(mse_multitask(&xv, &windows(&v, 4), &xv), Err(LossError::ShapeMismatch(_))));
        assert_eq!(mse_multitask(&[], &[], &[]), Err(LossError::Empty));
    }

    #[test]
    fn cross_entropy_examples() {
        let logits = Logits::new(1, 3, 2, vec![0.0; 6]).unwrap();
        let labels = [LabelWindow::new(vec![0, 1, 1], 2).unwrap()];
        let l = cross_entropy(&logits, &labels).unwrap();
        assert!((l - 3.0 * 2f64.ln()).abs() < 1e-15);

        let logits = Logits::new(1, 2, 3, vec![30.0, 0.0, 0.0, 0.0, 0.0, 30.0]).unwrap();
        let labels = [LabelWindow::new(vec![0, 2], 3).unwrap()];
        assert!(cross_entropy(&logits, &labels).unwrap() < 1e-9);
    }

    #[test]
    fn cross_entropy_errors() {
        assert!(matches!(LabelWindow::new(vec![0, 2], 2), Err(LossError::LabelOutOfRange { label: 2, .. })));
        assert_eq!(LabelWindow::new(vec![0], 1), Err(LossError::TooFewClasses(1)));
        assert!(matches!(
            Logits::new(1, 1, 2, vec![0.0, f64::INFINITY]),
            Err(LossError::NonFinite(_))
        ));
        let logits = Logits::new(2, 1, 2, vec![0.0; 4]).unwrap();
        let one = [LabelWindow::new(vec![0], 2).unwrap()];
        assert!(matches!(cross_entropy(&logits, &one), Err(LossError::ShapeMismatch(_))));
    }
}
