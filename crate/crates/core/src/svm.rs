//! From-scratch support vector machine.
//!
//! * [`smo_train`] — binary soft-margin SVM trained with a Platt-style
//!   sequential minimal optimization solver over a precomputed Gram matrix,
//!   with an error cache and deterministic seeded pair selection.
//! * [`train_multiclass`] / [`predict`] — one-vs-one multiclass with majority
//!   voting; ties break on summed winning margins, then label order.
//! * [`stratified_kfold`] / [`cross_validate`] — seeded stratified k-fold
//!   cross-validation aggregating a confusion matrix across folds.
//! * [`evaluate`] — confusion matrix plus per-class and macro accuracy for a
//!   fixed train/test split.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::batch;
use crate::features::{FeatureError, Scaler};
use crate::rng::{derive_seed, SplitMix64};

/// Version tag of the serialized model schema.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("feature/label counts differ: {features} vs {labels}")]
    LengthMismatch { features: usize, labels: usize },
    #[error("feature vector has {got} dimensions, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("binary labels must be +1 or -1, got {0}")]
    InvalidLabel(f64),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("class {label} has {count} samples; at least {required} required")]
    ClassTooSmall {
        label: usize,
        count: usize,
        required: usize,
    },
    #[error("label index {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model format version {found} unsupported (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error("model JSON: {0}")]
    ModelJson(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Kernel function of the SVM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Kernel {
    Rbf { gamma: f64 },
    Linear,
}

impl Kernel {
    /// Evaluate the kernel; `x` and `y` must have equal length.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => {
                let mut dist_sq = 0.0;
                for (a, b) in x.iter().zip(y) {
                    let d = a - b;
                    dist_sq += d * d;
                }
                (-gamma * dist_sq).exp()
            }
            Kernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

/// The RBF kernel `exp(-gamma·‖x−y‖²)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            got: y.len(),
            expected: x.len(),
        });
    }
    if !(gamma > 0.0) {
        return Err(SvmError::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(Kernel::Rbf { gamma }.eval(x, y))
}

/// Parameters of a binary SMO training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    /// Soft-margin penalty.
    pub c: f64,
    pub kernel: Kernel,
    /// KKT violation tolerance.
    pub tolerance: f64,
    /// Maximum number of full examination sweeps.
    pub max_passes: usize,
    /// Seed for the fallback pair-selection order.
    pub seed: u64,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            kernel: Kernel::Rbf { gamma: 0.1 },
            tolerance: 1e-3,
            max_passes: 200,
            seed: 1,
        }
    }
}

/// A trained binary SVM: support vectors with signed dual coefficients
/// `α_i·y_i` and a bias. The decision function is
/// `f(x) = Σ coef_i·K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmBinaryModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub kernel: Kernel,
    pub c: f64,
    /// False when training stopped at the sweep cap with KKT violations
    /// above tolerance; the model still holds the best iterate.
    pub converged: bool,
}

impl SvmBinaryModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, &coef)| coef * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

struct SmoSolver<'a> {
    gram: &'a [f64],
    n: usize,
    labels: &'a [f64],
    c: f64,
    tol: f64,
    alphas: Vec<f64>,
    errors: Vec<f64>,
    bias: f64,
    rng: SplitMix64,
    objective_history: Option<Vec<f64>>,
}

impl<'a> SmoSolver<'a> {
    fn new(gram: &'a [f64], labels: &'a [f64], params: &SmoParams, record: bool) -> Self {
        let n = labels.len();
        Self {
            gram,
            n,
            labels,
            c: params.c,
            tol: params.tolerance,
            alphas: vec![0.0; n],
            // With all alphas zero, f(x) = 0 and E_i = -y_i.
            errors: labels.iter().map(|&y| -y).collect(),
            bias: 0.0,
            rng: SplitMix64::new(params.seed),
            objective_history: record.then(Vec::new),
        }
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    fn non_bound(&self, i: usize) -> bool {
        self.alphas[i] > 0.0 && self.alphas[i] < self.c
    }

    /// Dual objective `Σα − ½ΣΣ α_i α_j y_i y_j K_ij`; only used when
    /// recording, O(n²).
    fn objective(&self) -> f64 {
        let mut quad = 0.0;
        for i in 0..self.n {
            if self.alphas[i] == 0.0 {
                continue;
            }
            for j in 0..self.n {
                if self.alphas[j] == 0.0 {
                    continue;
                }
                quad += self.alphas[i]
                    * self.alphas[j]
                    * self.labels[i]
                    * self.labels[j]
                    * self.k(i, j);
            }
        }
        self.alphas.iter().sum::<f64>() - 0.5 * quad
    }

    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (yi, yj) = (self.labels[i], self.labels[j]);
        let (ai, aj) = (self.alphas[i], self.alphas[j]);
        let (ei, ej) = (self.errors[i], self.errors[j]);
        let s = yi * yj;

        let (lo, hi) = if yi != yj {
            ((aj - ai).max(0.0), (self.c + aj - ai).min(self.c))
        } else {
            ((ai + aj - self.c).max(0.0), (ai + aj).min(self.c))
        };
        if lo >= hi {
            return false;
        }

        let k11 = self.k(i, i);
        let k12 = self.k(i, j);
        let k22 = self.k(j, j);
        let eta = k11 + k22 - 2.0 * k12;

        let mut aj_new = if eta > 0.0 {
            (aj + yj * (ei - ej) / eta).clamp(lo, hi)
        } else {
            // Flat direction (duplicate points): evaluate the objective at
            // both clip ends and move to the better one.
            let f1 = yi * (ei + self.bias) - ai * k11 - s * aj * k12;
            let f2 = yj * (ej + self.bias) - s * ai * k12 - aj * k22;
            let l1 = ai + s * (aj - lo);
            let h1 = ai + s * (aj - hi);
            let obj_lo =
                l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
            let obj_hi =
                h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
            if obj_lo < obj_hi - 1e-12 {
                lo
            } else if obj_lo > obj_hi + 1e-12 {
                hi
            } else {
                return false;
            }
        };
        if (aj_new - aj).abs() < 1e-12 * (aj_new + aj + 1e-12) {
            return false;
        }
        // Snap to the box to keep bound classification exact.
        if aj_new < 1e-10 * self.c {
            aj_new = 0.0;
        } else if aj_new > (1.0 - 1e-10) * self.c {
            aj_new = self.c;
        }

        let mut ai_new = ai + s * (aj - aj_new);
        if ai_new < 1e-10 * self.c {
            ai_new = 0.0;
        } else if ai_new > (1.0 - 1e-10) * self.c {
            ai_new = self.c;
        }

        let dai = ai_new - ai;
        let daj = aj_new - aj;
        let b1 = self.bias - ei - yi * dai * k11 - yj * daj * k12;
        let b2 = self.bias - ej - yi * dai * k12 - yj * daj * k22;
        let bias_new = if ai_new > 0.0 && ai_new < self.c {
            b1
        } else if aj_new > 0.0 && aj_new < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        let db = bias_new - self.bias;

        for t in 0..self.n {
            self.errors[t] += yi * dai * self.k(i, t) + yj * daj * self.k(j, t) + db;
        }
        self.alphas[i] = ai_new;
        self.alphas[j] = aj_new;
        self.bias = bias_new;

        if self.objective_history.is_some() {
            let value = self.objective();
            if let Some(history) = self.objective_history.as_mut() {
                history.push(value);
            }
        }
        true
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.errors[i] * self.labels[i];
        (r < -self.tol && self.alphas[i] < self.c) || (r > self.tol && self.alphas[i] > 0.0)
    }

    fn examine(&mut self, i: usize) -> bool {
        if !self.violates_kkt(i) {
            return false;
        }
        // Second-choice heuristic: step along the largest error gap among
        // non-bound multipliers (deterministic; ties resolve to the lowest
        // index).
        let mut best: Option<(f64, usize)> = None;
        for j in 0..self.n {
            if j != i && self.non_bound(j) {
                let gap = (self.errors[i] - self.errors[j]).abs();
                if best.map(|(g, _)| gap > g).unwrap_or(true) {
                    best = Some((gap, j));
                }
            }
        }
        if let Some((_, j)) = best {
            if self.take_step(i, j) {
                return true;
            }
        }
        // Fall back to scanning non-bound, then all, from a seeded offset.
        let offset = self.rng.next_below(self.n as u64) as usize;
        for t in 0..self.n {
            let j = (offset + t) % self.n;
            if self.non_bound(j) && self.take_step(i, j) {
                return true;
            }
        }
        let offset = self.rng.next_below(self.n as u64) as usize;
        for t in 0..self.n {
            let j = (offset + t) % self.n;
            if self.take_step(i, j) {
                return true;
            }
        }
        false
    }

    /// Maximum KKT violation across all training points.
    fn max_kkt_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            // margin = y_i f(x_i) = y_i E_i + 1
            let margin = self.labels[i] * self.errors[i] + 1.0;
            let violation = if self.alphas[i] <= 0.0 {
                1.0 - margin
            } else if self.alphas[i] >= self.c {
                margin - 1.0
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(violation);
        }
        worst
    }

    fn solve(&mut self, max_passes: usize) -> bool {
        let sweep_cap = max_passes.saturating_mul(20).max(1);
        let mut examine_all = true;
        let mut full_sweeps = 0usize;
        let mut total_sweeps = 0usize;
        loop {
            let mut changed = 0usize;
            if examine_all {
                for i in 0..self.n {
                    changed += self.examine(i) as usize;
                }
                full_sweeps += 1;
                if changed == 0 {
                    break;
                }
                examine_all = false;
            } else {
                for i in 0..self.n {
                    if self.non_bound(i) {
                        changed += self.examine(i) as usize;
                    }
                }
                if changed == 0 {
                    examine_all = true;
                }
            }
            total_sweeps += 1;
            if full_sweeps >= max_passes || total_sweeps >= sweep_cap {
                break;
            }
        }
        self.max_kkt_violation() <= self.tol
    }
}

fn validate_binary_inputs(
    features: &[Vec<f64>],
    labels: &[f64],
    params: &SmoParams,
) -> Result<(), SvmError> {
    if features.is_empty() {
        return Err(SvmError::EmptyTrainingSet);
    }
    if features.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let dims = features[0].len();
    for row in features {
        if row.len() != dims {
            return Err(SvmError::DimensionMismatch {
                got: row.len(),
                expected: dims,
            });
        }
    }
    for &y in labels {
        if y != 1.0 && y != -1.0 {
            return Err(SvmError::InvalidLabel(y));
        }
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(SvmError::SingleClass);
    }
    if !(params.c > 0.0) {
        return Err(SvmError::InvalidParameter(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if !(params.tolerance > 0.0) {
        return Err(SvmError::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            params.tolerance
        )));
    }
    if let Kernel::Rbf { gamma } = params.kernel {
        if !(gamma > 0.0) {
            return Err(SvmError::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
    }
    Ok(())
}

fn compute_gram(features: &[Vec<f64>], kernel: &Kernel) -> Vec<f64> {
    let n = features.len();
    let rows = batch::map_indices(n, |i| {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            row.push(kernel.eval(&features[i], &features[j]));
        }
        row
    });
    let mut gram = Vec::with_capacity(n * n);
    for row in rows {
        gram.extend_from_slice(&row);
    }
    gram
}

/// Train a binary SVM with SMO. Labels must be ±1 with both classes present.
/// Deterministic for fixed inputs and `params.seed`. If the sweep cap is hit
/// before the KKT conditions hold within tolerance, the best iterate is
/// returned with `converged = false`.
pub fn smo_train(
    features: &[Vec<f64>],
    labels: &[f64],
    params: &SmoParams,
) -> Result<SvmBinaryModel, SvmError> {
    let (model, _) = smo_train_internal(features, labels, params, false)?;
    Ok(model)
}

fn smo_train_internal(
    features: &[Vec<f64>],
    labels: &[f64],
    params: &SmoParams,
    record_objective: bool,
) -> Result<(SvmBinaryModel, Vec<f64>), SvmError> {
    validate_binary_inputs(features, labels, params)?;
    let gram = compute_gram(features, &params.kernel);
    let mut solver = SmoSolver::new(&gram, labels, params, record_objective);
    let converged = solver.solve(params.max_passes);

    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for i in 0..labels.len() {
        if solver.alphas[i] > 0.0 {
            support_vectors.push(features[i].clone());
            dual_coefficients.push(solver.alphas[i] * labels[i]);
        }
    }
    let history = solver.objective_history.take().unwrap_or_default();
    Ok((
        SvmBinaryModel {
            support_vectors,
            dual_coefficients,
            bias: solver.bias,
            kernel: params.kernel,
            c: params.c,
            converged,
        },
        history,
    ))
}

/// Maximum KKT violation of a trained model over its training set, and the
/// dual-feasibility residual `|Σ α_i y_i|`. Used to audit solutions.
pub fn kkt_report(
    model: &SvmBinaryModel,
    features: &[Vec<f64>],
    labels: &[f64],
) -> (f64, f64) {
    // Recover alphas for the training points: support vectors carry
    // α_i·y_i; everything else has α = 0.
    let mut max_violation = 0.0f64;
    let mut sv_cursor = 0usize;
    let mut alpha_sum = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let alpha = if sv_cursor < model.support_vectors.len()
            && model.support_vectors[sv_cursor] == *x
            && (model.dual_coefficients[sv_cursor] * y) > 0.0
        {
            let a = model.dual_coefficients[sv_cursor] * y;
            sv_cursor += 1;
            a
        } else {
            0.0
        };
        alpha_sum += alpha * y;
        let margin = y * model.decision(x);
        let violation = if alpha <= 0.0 {
            1.0 - margin
        } else if alpha >= model.c {
            margin - 1.0
        } else {
            (margin - 1.0).abs()
        };
        max_violation = max_violation.max(violation);
    }
    (max_violation, alpha_sum.abs())
}

/// How the RBF gamma is chosen for multiclass training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSetting {
    /// `1 / (dims · mean per-dimension variance)` of the standardized
    /// training features.
    Scale,
    Fixed(f64),
}

/// Hyperparameters for one-vs-one multiclass training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub c: f64,
    pub gamma: GammaSetting,
    pub tolerance: f64,
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            c: 10.0,
            gamma: GammaSetting::Scale,
            tolerance: 1e-3,
            max_passes: 200,
            seed: 1,
        }
    }
}

/// One binary model of the one-vs-one ensemble; a positive decision votes
/// for `class_a`, negative for `class_b` (`class_a < class_b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub class_a: usize,
    pub class_b: usize,
    pub model: SvmBinaryModel,
}

/// One-vs-one multiclass SVM with its standardization scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmMulticlassModel {
    pub format_version: u32,
    pub class_labels: Vec<String>,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub binary_models: Vec<PairModel>,
}

impl SvmMulticlassModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, SvmError> {
        let model: SvmMulticlassModel =
            serde_json::from_str(text).map_err(|e| SvmError::ModelJson(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(SvmError::FormatVersion {
                found: model.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(model)
    }
}

fn gamma_value(setting: GammaSetting, standardized: &[Vec<f64>]) -> Result<f64, SvmError> {
    match setting {
        GammaSetting::Fixed(g) => {
            if !(g > 0.0) {
                return Err(SvmError::InvalidParameter(format!(
                    "gamma must be positive, got {g}"
                )));
            }
            Ok(g)
        }
        GammaSetting::Scale => {
            let dims = standardized[0].len();
            let n = standardized.len() as f64;
            let mut mean_var = 0.0;
            for d in 0..dims {
                let mean = standardized.iter().map(|r| r[d]).sum::<f64>() / n;
                let var =
                    standardized.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
                mean_var += var;
            }
            mean_var /= dims as f64;
            if mean_var > 0.0 {
                Ok(1.0 / (dims as f64 * mean_var))
            } else {
                Ok(1.0 / dims as f64)
            }
        }
    }
}

/// Train a one-vs-one multiclass SVM. `labels` are indices into
/// `class_labels`; every class must be present. Features are standardized
/// with a scaler fitted here and stored in the model.
pub fn train_multiclass(
    features: &[Vec<f64>],
    labels: &[usize],
    class_labels: &[String],
    feature_names: &[String],
    opts: &TrainOptions,
) -> Result<SvmMulticlassModel, SvmError> {
    if features.is_empty() {
        return Err(SvmError::EmptyTrainingSet);
    }
    if features.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let classes = class_labels.len();
    if classes < 2 {
        return Err(SvmError::SingleClass);
    }
    for &label in labels {
        if label >= classes {
            return Err(SvmError::LabelOutOfRange { label, classes });
        }
    }
    for class in 0..classes {
        if !labels.contains(&class) {
            return Err(SvmError::ClassTooSmall {
                label: class,
                count: 0,
                required: 1,
            });
        }
    }
    let dims = feature_names.len();
    for row in features {
        if row.len() != dims {
            return Err(SvmError::DimensionMismatch {
                got: row.len(),
                expected: dims,
            });
        }
    }

    let scaler = Scaler::fit(features)?;
    let standardized = scaler.transform_all(features);
    let gamma = gamma_value(opts.gamma, &standardized)?;

    let mut pairs = Vec::new();
    for a in 0..classes {
        for b in (a + 1)..classes {
            pairs.push((a, b));
        }
    }
    let results = batch::map_indices(pairs.len(), |pair_idx| {
        let (a, b) = pairs[pair_idx];
        let mut pair_features = Vec::new();
        let mut pair_labels = Vec::new();
        for (row, &label) in standardized.iter().zip(labels) {
            if label == a || label == b {
                pair_features.push(row.clone());
                pair_labels.push(if label == a { 1.0 } else { -1.0 });
            }
        }
        let params = SmoParams {
            c: opts.c,
            kernel: Kernel::Rbf { gamma },
            tolerance: opts.tolerance,
            max_passes: opts.max_passes,
            seed: derive_seed(opts.seed, pair_idx as u64),
        };
        smo_train(&pair_features, &pair_labels, &params).map(|model| PairModel {
            class_a: a,
            class_b: b,
            model,
        })
    });
    let binary_models: Vec<PairModel> = results.into_iter().collect::<Result<_, _>>()?;

    Ok(SvmMulticlassModel {
        format_version: MODEL_FORMAT_VERSION,
        class_labels: class_labels.to_vec(),
        feature_names: feature_names.to_vec(),
        scaler,
        binary_models,
    })
}

/// Prediction of the one-vs-one ensemble: the winning class index and the
/// per-class vote tally (summing to the number of binary models).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label_index: usize,
    pub votes: Vec<u32>,
}

/// Predict the class of a raw (unstandardized) feature vector.
pub fn predict(model: &SvmMulticlassModel, features: &[f64]) -> Result<Prediction, SvmError> {
    if features.len() != model.feature_names.len() {
        return Err(SvmError::DimensionMismatch {
            got: features.len(),
            expected: model.feature_names.len(),
        });
    }
    let x = model.scaler.transform(features);
    let classes = model.class_labels.len();
    let mut votes = vec![0u32; classes];
    let mut margins = vec![0.0f64; classes];
    for pair in &model.binary_models {
        let d = pair.model.decision(&x);
        let winner = if d >= 0.0 { pair.class_a } else { pair.class_b };
        votes[winner] += 1;
        margins[winner] += d.abs();
    }
    let mut best = 0usize;
    for class in 1..classes {
        if votes[class] > votes[best]
            || (votes[class] == votes[best] && margins[class] > margins[best])
        {
            best = class;
        }
    }
    Ok(Prediction {
        label_index: best,
        votes,
    })
}

/// Confusion matrix with truth on rows and prediction on columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn record(&mut self, truth: usize, prediction: usize) {
        self.counts[truth][prediction] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (cell, &v) in row.iter_mut().zip(other_row) {
                *cell += v;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Per-class accuracy `diagonal / row sum` (0 for empty rows).
    pub fn per_class_accuracy(&self) -> Vec<f64> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    0.0
                } else {
                    row[i] as f64 / total as f64
                }
            })
            .collect()
    }

    pub fn overall_accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let correct: u64 = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        correct as f64 / total as f64
    }

    /// CSV with a `truth\predicted` header column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth\\predicted");
        for label in &self.labels {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.counts) {
            out.push_str(label);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluation of a model on a labeled test set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub per_class_accuracy: Vec<f64>,
    /// Unweighted mean of the per-class accuracies.
    pub macro_mean_accuracy: f64,
    pub overall_accuracy: f64,
}

/// Evaluate a model on a test set of raw feature vectors.
pub fn evaluate(
    model: &SvmMulticlassModel,
    features: &[Vec<f64>],
    labels: &[usize],
) -> Result<EvalReport, SvmError> {
    if features.is_empty() {
        return Err(SvmError::EmptyTestSet);
    }
    if features.len() != labels.len() {
        return Err(SvmError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let classes = model.class_labels.len();
    for &label in labels {
        if label >= classes {
            return Err(SvmError::LabelOutOfRange { label, classes });
        }
    }
    let predictions = batch::map(features, |x| predict(model, x));
    let mut confusion = ConfusionMatrix::new(model.class_labels.clone());
    for (&truth, prediction) in labels.iter().zip(&predictions) {
        let prediction = match prediction {
            Ok(p) => p.label_index,
            Err(_) => unreachable!("dimensions validated above"),
        };
        confusion.record(truth, prediction);
    }
    let per_class = confusion.per_class_accuracy();
    let macro_mean = per_class.iter().sum::<f64>() / per_class.len() as f64;
    Ok(EvalReport {
        per_class_accuracy: per_class,
        macro_mean_accuracy: macro_mean,
        overall_accuracy: confusion.overall_accuracy(),
        confusion,
    })
}

/// Split indices into k stratified folds: per-class counts per fold differ
/// by at most one. Deterministic for a fixed seed.
pub fn stratified_kfold(
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, SvmError> {
    if k < 2 {
        return Err(SvmError::InvalidParameter(format!(
            "fold count must be >= 2, got {k}"
        )));
    }
    if labels.is_empty() {
        return Err(SvmError::EmptyTrainingSet);
    }
    let classes = labels.iter().max().unwrap() + 1;
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (idx, &label) in labels.iter().enumerate() {
        per_class[label].push(idx);
    }
    for (label, members) in per_class.iter().enumerate() {
        if members.len() < k {
            return Err(SvmError::ClassTooSmall {
                label,
                count: members.len(),
                required: k,
            });
        }
    }
    let mut rng = SplitMix64::new(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for members in &mut per_class {
        rng.shuffle(members);
        for (i, &idx) in members.iter().enumerate() {
            folds[i % k].push(idx);
        }
    }
    Ok(folds)
}

/// Cross-validation result. `mean_accuracy` is the arithmetic mean of the
/// per-fold overall accuracies; `macro_mean_accuracy` is the unweighted mean
/// of the per-class accuracies of the aggregate confusion matrix (the two
/// aggregation rules can differ slightly, so both are reported).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_count: usize,
    pub per_fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub macro_mean_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Stratified k-fold cross-validation: for each fold, fit the scaler and the
/// one-vs-one ensemble on the remaining folds and evaluate on the held-out
/// fold. Deterministic given `(features, labels, opts, seed)`.
pub fn cross_validate(
    features: &[Vec<f64>],
    labels: &[usize],
    class_labels: &[String],
    feature_names: &[String],
    k: usize,
    opts: &TrainOptions,
    seed: u64,
) -> Result<CvReport, SvmError> {
    let folds = stratified_kfold(labels, k, seed)?;
    let mut confusion = ConfusionMatrix::new(class_labels.to_vec());
    let mut per_fold_accuracy = Vec::with_capacity(k);
    for (fold_idx, fold) in folds.iter().enumerate() {
        let in_fold: std::collections::HashSet<usize> = fold.iter().copied().collect();
        let mut train_features = Vec::with_capacity(features.len() - fold.len());
        let mut train_labels = Vec::with_capacity(features.len() - fold.len());
        for idx in 0..features.len() {
            if !in_fold.contains(&idx) {
                train_features.push(features[idx].clone());
                train_labels.push(labels[idx]);
            }
        }
        let fold_opts = TrainOptions {
            seed: derive_seed(opts.seed, fold_idx as u64),
            ..opts.clone()
        };
        let model = train_multiclass(
            &train_features,
            &train_labels,
            class_labels,
            feature_names,
            &fold_opts,
        )?;
        let predictions = batch::map(fold, |&idx| {
            predict(&model, &features[idx]).map(|p| p.label_index)
        });
        let mut correct = 0usize;
        for (&idx, prediction) in fold.iter().zip(&predictions) {
            let prediction = match prediction {
                Ok(p) => *p,
                Err(_) => unreachable!("dimensions validated in training"),
            };
            confusion.record(labels[idx], prediction);
            if prediction == labels[idx] {
                correct += 1;
            }
        }
        per_fold_accuracy.push(correct as f64 / fold.len() as f64);
    }
    let mean_accuracy = per_fold_accuracy.iter().sum::<f64>() / k as f64;
    let per_class_accuracy = confusion.per_class_accuracy();
    let macro_mean_accuracy =
        per_class_accuracy.iter().sum::<f64>() / per_class_accuracy.len() as f64;
    Ok(CvReport {
        fold_count: k,
        per_fold_accuracy,
        mean_accuracy,
        per_class_accuracy,
        macro_mean_accuracy,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two well-separated Gaussian blobs in 2-D, 50 points per class.
    fn blob_dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = SplitMix64::new(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..50 {
            features.push(vec![rng.next_gaussian() + 4.0, rng.next_gaussian() + 4.0]);
            labels.push(1.0);
        }
        for _ in 0..50 {
            features.push(vec![rng.next_gaussian() - 4.0, rng.next_gaussian() - 4.0]);
            labels.push(-1.0);
        }
        (features, labels)
    }

    fn xor_dataset() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![
                vec![0.0, 0.0],
                vec![1.0, 1.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
            ],
            vec![1.0, 1.0, -1.0, -1.0],
        )
    }

    fn training_accuracy(model: &SvmBinaryModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
        let correct = x
            .iter()
            .zip(y)
            .filter(|(xi, &yi)| model.decision(xi) * yi > 0.0)
            .count();
        correct as f64 / y.len() as f64
    }

    #[test]
    fn rbf_kernel_identity_is_one() {
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(rbf_kernel(&x, &x, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn rbf_kernel_closed_form() {
        // ‖x−y‖² = 2 with γ = 0.5 gives e^{-1}.
        let x = vec![1.0, 0.0];
        let y = vec![0.0, 1.0];
        let v = rbf_kernel(&x, &y, 0.5).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn rbf_kernel_monotone_in_gamma() {
        let x = vec![0.0, 0.0];
        let y = vec![1.0, 1.0];
        let mut last = 1.0;
        for gamma in [0.1, 0.5, 1.0, 5.0, 25.0, 125.0] {
            let v = rbf_kernel(&x, &y, gamma).unwrap();
            assert!(v < last, "gamma {gamma}");
            last = v;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn rbf_kernel_rejects_mismatched_dims() {
        assert!(rbf_kernel(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn separable_blobs_train_to_full_accuracy() {
        let (x, y) = blob_dataset(7);
        let params = SmoParams {
            c: 1.0,
            kernel: Kernel::Rbf { gamma: 1.0 },
            ..SmoParams::default()
        };
        let model = smo_train(&x, &y, &params).unwrap();
        assert!(model.converged, "solver should converge on separable data");
        assert_eq!(training_accuracy(&model, &x, &y), 1.0);
        let (violation, residual) = kkt_report(&model, &x, &y);
        assert!(violation <= params.tolerance, "KKT violation {violation}");
        assert!(residual < 1e-6, "sum alpha*y residual {residual}");
        assert!(model
            .dual_coefficients
            .iter()
            .all(|&c| c.abs() <= params.c + 1e-12));
        assert!(!model.support_vectors.is_empty());
    }

    #[test]
    fn xor_is_shattered_by_rbf() {
        let (x, y) = xor_dataset();
        let params = SmoParams {
            c: 10.0,
            kernel: Kernel::Rbf { gamma: 1.0 },
            ..SmoParams::default()
        };
        let model = smo_train(&x, &y, &params).unwrap();
        assert_eq!(training_accuracy(&model, &x, &y), 1.0);
        let (violation, _) = kkt_report(&model, &x, &y);
        assert!(violation <= params.tolerance, "KKT violation {violation}");
    }

    #[test]
    fn two_point_linear_split_bisects() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let y = vec![1.0, -1.0];
        let params = SmoParams {
            c: 10.0,
            kernel: Kernel::Linear,
            ..SmoParams::default()
        };
        let model = smo_train(&x, &y, &params).unwrap();
        assert_eq!(model.support_vectors.len(), 2);
        // The midpoint lies on the decision boundary.
        let midpoint = model.decision(&[0.0, 0.0]);
        assert!(midpoint.abs() <= params.tolerance, "midpoint {midpoint}");
        assert!(model.decision(&[1.0, 0.0]) > 0.0);
        assert!(model.decision(&[-1.0, 0.0]) < 0.0);
    }

    #[test]
    fn dual_objective_never_decreases() {
        let (x, y) = blob_dataset(3);
        let params = SmoParams {
            c: 1.0,
            kernel: Kernel::Rbf { gamma: 1.0 },
            ..SmoParams::default()
        };
        let (_, history) = smo_train_internal(&x, &y, &params, true).unwrap();
        assert!(!history.is_empty());
        assert!(history[0] >= -1e-9, "first step {}", history[0]);
        for w in history.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "objective dropped: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = blob_dataset(11);
        let params = SmoParams::default();
        let a = smo_train(&x, &y, &params).unwrap();
        let b = smo_train(&x, &y, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, y) = blob_dataset(1);
        assert!(matches!(
            smo_train(&x, &y[..50], &SmoParams::default()),
            Err(SvmError::LengthMismatch { .. })
        ));
        let ones = vec![1.0; x.len()];
        assert!(matches!(
            smo_train(&x, &ones, &SmoParams::default()),
            Err(SvmError::SingleClass)
        ));
        let mut bad = y.clone();
        bad[0] = 0.5;
        assert!(matches!(
            smo_train(&x, &bad, &SmoParams::default()),
            Err(SvmError::InvalidLabel(_))
        ));
        assert!(smo_train::<>(&[], &[], &SmoParams::default()).is_err());
    }

    /// Three clearly separated clusters for multiclass tests.
    fn cluster_dataset(per_class: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut rng = SplitMix64::new(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (class, center) in centers.iter().enumerate() {
            for _ in 0..per_class {
                features.push(vec![
                    center[0] + rng.next_gaussian() * 0.5,
                    center[1] + rng.next_gaussian() * 0.5,
                ]);
                labels.push(class);
            }
        }
        (features, labels)
    }

    fn class_names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("class_{i}")).collect()
    }

    fn feature_names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn multiclass_recovers_cluster_labels() {
        let (x, y) = cluster_dataset(30, 5);
        let model = train_multiclass(
            &x,
            &y,
            &class_names(3),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        assert_eq!(model.binary_models.len(), 3);
        for (xi, &yi) in x.iter().zip(&y) {
            let p = predict(&model, xi).unwrap();
            assert_eq!(p.label_index, yi);
            assert_eq!(p.votes.iter().sum::<u32>(), 3);
        }
    }

    #[test]
    fn six_class_ensemble_has_fifteen_voters() {
        let mut rng = SplitMix64::new(61);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for class in 0..6usize {
            let angle = class as f64;
            for _ in 0..8 {
                features.push(vec![
                    8.0 * angle.cos() + rng.next_gaussian() * 0.3,
                    8.0 * angle.sin() + rng.next_gaussian() * 0.3,
                ]);
                labels.push(class);
            }
        }
        let model = train_multiclass(
            &features,
            &labels,
            &class_names(6),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        assert_eq!(model.binary_models.len(), 15);
        let p = predict(&model, &features[0]).unwrap();
        assert_eq!(p.votes.iter().sum::<u32>(), 15);
        assert_eq!(p.votes.len(), 6);
    }

    #[test]
    fn single_class_test_set_fills_one_row() {
        let (x, y) = cluster_dataset(10, 19);
        let model = train_multiclass(
            &x,
            &y,
            &class_names(3),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        let only: Vec<usize> = (0..x.len()).filter(|&i| y[i] == 1).collect();
        let test_x: Vec<Vec<f64>> = only.iter().map(|&i| x[i].clone()).collect();
        let test_y: Vec<usize> = only.iter().map(|&i| y[i]).collect();
        let report = evaluate(&model, &test_x, &test_y).unwrap();
        let nonzero_rows = report
            .confusion
            .counts
            .iter()
            .filter(|row| row.iter().sum::<u64>() > 0)
            .count();
        assert_eq!(nonzero_rows, 1);
    }

    #[test]
    fn cross_validation_report_is_deterministic() {
        let (x, y) = cluster_dataset(10, 57);
        let run = || {
            let report = cross_validate(
                &x,
                &y,
                &class_names(3),
                &feature_names(2),
                3,
                &TrainOptions::default(),
                11,
            )
            .unwrap();
            serde_json::to_string(&report).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn two_class_model_reduces_to_sign() {
        let (x, y) = cluster_dataset(20, 9);
        let (x, y): (Vec<_>, Vec<_>) = x
            .into_iter()
            .zip(y)
            .filter(|(_, label)| *label < 2)
            .unzip();
        let model = train_multiclass(
            &x,
            &y,
            &class_names(2),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        assert_eq!(model.binary_models.len(), 1);
        for xi in &x {
            let p = predict(&model, xi).unwrap();
            let d = model.binary_models[0]
                .model
                .decision(&model.scaler.transform(xi));
            assert_eq!(p.label_index, if d >= 0.0 { 0 } else { 1 });
        }
    }

    #[test]
    fn model_json_round_trip_preserves_predictions() {
        let (x, y) = cluster_dataset(15, 21);
        let model = train_multiclass(
            &x,
            &y,
            &class_names(3),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        let restored = SvmMulticlassModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, restored);
        for xi in &x {
            assert_eq!(
                predict(&model, xi).unwrap(),
                predict(&restored, xi).unwrap()
            );
        }
    }

    #[test]
    fn standardize_then_predict_matches_folded_scaler() {
        let (x, y) = cluster_dataset(20, 44);
        let model = train_multiclass(
            &x,
            &y,
            &class_names(3),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        // Training on pre-standardized features gives a model whose scaler
        // is (numerically) the identity; labels must agree with the model
        // that folds the scaler in.
        let standardized = model.scaler.transform_all(&x);
        let pre_model = train_multiclass(
            &standardized,
            &y,
            &class_names(3),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        for (xi, si) in x.iter().zip(&standardized) {
            assert_eq!(
                predict(&model, xi).unwrap().label_index,
                predict(&pre_model, si).unwrap().label_index
            );
        }
    }

    #[test]
    fn model_json_rejects_wrong_version() {
        let (x, y) = cluster_dataset(10, 2);
        let model = train_multiclass(
            &x,
            &y,
            &class_names(3),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        let text = model.to_json().replace(
            "\"format_version\": 1",
            "\"format_version\": 999",
        );
        assert!(matches!(
            SvmMulticlassModel::from_json(&text),
            Err(SvmError::FormatVersion { found: 999, .. })
        ));
    }

    #[test]
    fn kfold_partitions_with_balanced_strata() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let folds = stratified_kfold(&labels, 5, 42).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen: Vec<usize> = folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..60).collect::<Vec<_>>());
        for fold in &folds {
            assert_eq!(fold.len(), 12);
            for class in 0..3 {
                let count = fold.iter().filter(|&&i| labels[i] == class).count();
                assert_eq!(count, 4);
            }
        }
    }

    #[test]
    fn kfold_full_scale_fold_shape() {
        // 2400 samples, 400 per class, five folds: 480 each with exactly 80
        // per class.
        let labels: Vec<usize> = (0..2400).map(|i| i / 400).collect();
        let folds = stratified_kfold(&labels, 5, 1).unwrap();
        for fold in &folds {
            assert_eq!(fold.len(), 480);
            for class in 0..6 {
                assert_eq!(fold.iter().filter(|&&i| labels[i] == class).count(), 80);
            }
        }
    }

    #[test]
    fn kfold_is_deterministic() {
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        assert_eq!(
            stratified_kfold(&labels, 4, 9).unwrap(),
            stratified_kfold(&labels, 4, 9).unwrap()
        );
        assert_ne!(
            stratified_kfold(&labels, 4, 9).unwrap(),
            stratified_kfold(&labels, 4, 10).unwrap()
        );
    }

    #[test]
    fn kfold_rejects_small_classes_and_bad_k() {
        let labels = vec![0, 0, 0, 1, 1];
        assert!(matches!(
            stratified_kfold(&labels, 3, 1),
            Err(SvmError::ClassTooSmall { label: 1, .. })
        ));
        assert!(matches!(
            stratified_kfold(&labels, 1, 1),
            Err(SvmError::InvalidParameter(_))
        ));
    }

    #[test]
    fn cross_validation_on_separable_data_is_perfect() {
        let (x, y) = cluster_dataset(20, 33);
        let report = cross_validate(
            &x,
            &y,
            &class_names(3),
            &feature_names(2),
            5,
            &TrainOptions::default(),
            7,
        )
        .unwrap();
        assert_eq!(report.fold_count, 5);
        assert_eq!(report.per_fold_accuracy.len(), 5);
        assert_eq!(report.mean_accuracy, 1.0);
        assert_eq!(report.confusion.total(), 60);
    }

    #[test]
    fn evaluation_mean_is_unweighted_per_class_mean() {
        // A confusion matrix with the reference per-class accuracies:
        // 96%, 99.25%, 100%, 94.5%, 99.25%, 100% over 400 samples each.
        let mut confusion = ConfusionMatrix::new(class_names(6));
        let diag = [384u64, 397, 400, 378, 397, 400];
        for (i, &d) in diag.iter().enumerate() {
            confusion.counts[i][i] = d;
            confusion.counts[i][(i + 1) % 6] = 400 - d;
        }
        let per_class = confusion.per_class_accuracy();
        let macro_mean = per_class.iter().sum::<f64>() / 6.0;
        assert!((macro_mean - 0.981_666_666_666).abs() < 1e-9, "{macro_mean}");
    }

    #[test]
    fn confusion_row_sums_match_test_counts() {
        let (x, y) = cluster_dataset(12, 13);
        let model = train_multiclass(
            &x,
            &y,
            &class_names(3),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        let report = evaluate(&model, &x, &y).unwrap();
        for row in &report.confusion.counts {
            assert_eq!(row.iter().sum::<u64>(), 12);
        }
        assert_eq!(report.confusion.total(), 36);
        assert!(report
            .per_class_accuracy
            .iter()
            .all(|&a| (0.0..=1.0).contains(&a)));
    }

    #[test]
    fn evaluate_rejects_empty_test_set() {
        let (x, y) = cluster_dataset(10, 3);
        let model = train_multiclass(
            &x,
            &y,
            &class_names(3),
            &feature_names(2),
            &TrainOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            evaluate(&model, &[], &[]),
            Err(SvmError::EmptyTestSet)
        ));
    }
}
