//! Three-class modality classifier (CT, CXR, other figure types).
//!
//! A multinomial logistic-regression (softmax) layer over standardized image
//! features, trained by mini-batch gradient descent on mean cross-entropy.

mod features;

pub use features::{extract_features, FeatureVector, FEATURE_DIM, FEATURE_LONG_SIDE, FEATURE_NAMES, HISTOGRAM_BINS};

use crate::raster::RasterImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub const NUM_CLASSES: usize = 3;
const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "CT")]
    Ct,
    #[serde(rename = "CXR")]
    Cxr,
    #[serde(rename = "Other")]
    Other,
}

impl Modality {
    /// Class order used by every probability vector.
    pub const ALL: [Modality; NUM_CLASSES] = [Modality::Ct, Modality::Cxr, Modality::Other];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Ct => "CT",
            Modality::Cxr => "CXR",
            Modality::Other => "Other",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = ClassifierError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ct" => Ok(Modality::Ct),
            "cxr" => Ok(Modality::Cxr),
            "other" => Ok(Modality::Other),
            _ => Err(ClassifierError::UnknownClass(s.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("feature dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: [f64; NUM_CLASSES],
    pub label: Modality,
}

impl Prediction {
    /// Softmax of `logits` with the max-subtraction trick; ties resolve to the
    /// earliest class.
    pub fn from_logits(logits: &[f64; NUM_CLASSES]) -> Prediction {
        let probs = softmax(logits);
        Prediction { probs, label: argmax_label(&probs) }
    }
}

pub fn softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e = logits.map(|z| (z - max).exp());
    let sum: f64 = e.iter().sum();
    for v in &mut e {
        *v /= sum;
    }
    e
}

fn argmax_label(probs: &[f64; NUM_CLASSES]) -> Modality {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if probs[k] > probs[best] {
            best = k;
        }
    }
    Modality::ALL[best]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of the training set held out for best-epoch selection.
    pub validation_fraction: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { learning_rate: 1e-4, batch_size: 16, epochs: 50, seed: 0, validation_fraction: 0.1 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(ClassifierError::InvalidHyperparams("learning_rate must be finite and >= 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ClassifierError::InvalidHyperparams("batch_size and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(ClassifierError::InvalidHyperparams("validation_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Trained softmax layer plus the feature standardization it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub classes: Vec<Modality>,
    pub feature_names: Vec<String>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Row-major `classes × features`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub hyperparams: Hyperparams,
}

impl ModelParams {
    /// All-zero weights over `dim` features with identity standardization.
    pub fn zeros(dim: usize) -> ModelParams {
        ModelParams {
            classes: Modality::ALL.to_vec(),
            feature_names: if dim == FEATURE_DIM {
                FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
            } else {
                (0..dim).map(|i| format!("f{i}")).collect()
            },
            feature_mean: vec![0.0; dim],
            feature_std: vec![1.0; dim],
            weights: vec![vec![0.0; dim]; NUM_CLASSES],
            bias: vec![0.0; NUM_CLASSES],
            hyperparams: Hyperparams::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let d = self.dim();
        let bad = |m: &str| Err(ClassifierError::InvalidModel(m.to_string()));
        if self.classes != Modality::ALL {
            return bad("class list must be [CT, CXR, Other]");
        }
        if self.feature_std.len() != d || self.feature_names.len() != d {
            return bad("normalization statistics have inconsistent lengths");
        }
        if self.weights.len() != NUM_CLASSES || self.weights.iter().any(|r| r.len() != d) {
            return bad("weights must be 3 × feature_dim");
        }
        if self.bias.len() != NUM_CLASSES {
            return bad("bias must have 3 entries");
        }
        if self.feature_std.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return bad("normalization stds must be positive and finite");
        }
        Ok(())
    }

    pub fn normalize(&self, features: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if features.len() != self.dim() {
            return Err(ClassifierError::DimensionMismatch { expected: self.dim(), got: features.len() });
        }
        Ok(features
            .iter()
            .zip(self.feature_mean.iter().zip(&self.feature_std))
            .map(|(f, (m, s))| (f - m) / s.max(STD_FLOOR))
            .collect())
    }

    pub fn logits_normalized(&self, x: &[f64]) -> [f64; NUM_CLASSES] {
        let mut z = [0.0; NUM_CLASSES];
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = self.bias[k] + self.weights[k].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        z
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<ModelParams, ClassifierError> {
        let m: ModelParams = serde_json::from_str(s).map_err(|e| ClassifierError::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelParams, ClassifierError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `softmax(W · normalize(f) + b)`.
pub fn softmax_forward(params: &ModelParams, features: &FeatureVector) -> Result<Prediction, ClassifierError> {
    let x = params.normalize(features.as_slice())?;
    Ok(Prediction::from_logits(&params.logits_normalized(&x)))
}

pub fn predict(params: &ModelParams, image: &RasterImage) -> Result<Prediction, ClassifierError> {
    softmax_forward(params, &extract_features(image))
}

/// Anything that maps an image to a modality prediction.
pub trait ModalityClassifier: Send + Sync {
    fn classify(&self, image: &RasterImage) -> Result<Prediction, ClassifierError>;
}

impl ModalityClassifier for ModelParams {
    fn classify(&self, image: &RasterImage) -> Result<Prediction, ClassifierError> {
        predict(self, image)
    }
}

/// Gradient of the mean cross-entropy with respect to weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Mean cross-entropy over already-normalized inputs and its gradient.
pub fn loss_and_gradient(params: &ModelParams, batch: &[(&[f64], Modality)]) -> (f64, Gradient) {
    let d = params.dim();
    let mut gw = vec![vec![0.0; d]; NUM_CLASSES];
    let mut gb = vec![0.0; NUM_CLASSES];
    let mut loss = 0.0;
    let n = batch.len().max(1) as f64;
    for (x, y) in batch {
        let z = params.logits_normalized(x);
        let p = softmax(&z);
        let yi = y.index();
        loss -= p[yi].max(f64::MIN_POSITIVE).ln();
        for k in 0..NUM_CLASSES {
            let delta = p[k] - if k == yi { 1.0 } else { 0.0 };
            gb[k] += delta / n;
            for (g, v) in gw[k].iter_mut().zip(x.iter()) {
                *g += delta * v / n;
            }
        }
    }
    (loss / n, Gradient { weights: gw, bias: gb })
}

pub fn mean_loss(params: &ModelParams, rows: &[(Vec<f64>, Modality)]) -> f64 {
    let batch: Vec<(&[f64], Modality)> = rows.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
    loss_and_gradient(params, &batch).0
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean training cross-entropy after each epoch.
    pub loss_trace: Vec<f64>,
    /// Mean validation cross-entropy after each epoch (empty without holdout).
    pub validation_trace: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

/// Train on `(features, class)` pairs.
///
/// A seeded `validation_fraction` holdout picks the epoch with the lowest
/// validation loss; standardization statistics come from the remaining
/// training rows. Deterministic for a given seed.
pub fn train(dataset: &[(FeatureVector, Modality)], hp: &Hyperparams) -> Result<TrainOutcome, ClassifierError> {
    hp.validate()?;
    if dataset.is_empty() {
        return Err(ClassifierError::DegenerateDataset("dataset is empty".into()));
    }
    for class in Modality::ALL {
        if !dataset.iter().any(|(_, y)| *y == class) {
            return Err(ClassifierError::DegenerateDataset(format!("class {class} is absent")));
        }
    }
    let dim = dataset[0].0.len();
    if let Some((f, _)) = dataset.iter().find(|(f, _)| f.len() != dim) {
        return Err(ClassifierError::DimensionMismatch { expected: dim, got: f.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let mut n_val = (dataset.len() as f64 * hp.validation_fraction).floor() as usize;
    if n_val >= dataset.len() {
        n_val = 0;
    }
    let (val_idx, train_idx) = order.split_at(n_val);

    let mut params = ModelParams::zeros(dim);
    params.hyperparams = *hp;
    let n_train = train_idx.len() as f64;
    for j in 0..dim {
        let mean = train_idx.iter().map(|&i| dataset[i].0 .0[j]).sum::<f64>() / n_train;
        let var = train_idx.iter().map(|&i| (dataset[i].0 .0[j] - mean).powi(2)).sum::<f64>() / n_train;
        params.feature_mean[j] = mean;
        params.feature_std[j] = var.sqrt().max(STD_FLOOR);
    }

    let norm = |idx: &[usize], p: &ModelParams| -> Vec<(Vec<f64>, Modality)> {
        idx.iter().map(|&i| (p.normalize(dataset[i].0.as_slice()).expect("dims checked"), dataset[i].1)).collect()
    };
    let train_rows = norm(train_idx, &params);
    let val_rows = norm(val_idx, &params);

    let mut loss_trace = Vec::with_capacity(hp.epochs);
    let mut validation_trace = Vec::new();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut epoch_order: Vec<usize> = (0..train_rows.len()).collect();
    for epoch in 0..hp.epochs {
        epoch_order.shuffle(&mut rng);
        for chunk in epoch_order.chunks(hp.batch_size) {
            let batch: Vec<(&[f64], Modality)> =
                chunk.iter().map(|&i| (train_rows[i].0.as_slice(), train_rows[i].1)).collect();
            let (_, g) = loss_and_gradient(&params, &batch);
            for k in 0..NUM_CLASSES {
                params.bias[k] -= hp.learning_rate * g.bias[k];
                for (w, gw) in params.weights[k].iter_mut().zip(&g.weights[k]) {
                    *w -= hp.learning_rate * gw;
                }
            }
        }
        loss_trace.push(mean_loss(&params, &train_rows));
        if !val_rows.is_empty() {
            let vl = mean_loss(&params, &val_rows);
            validation_trace.push(vl);
            if vl < best.0 {
                best = (vl, epoch, params.clone());
            }
        }
    }
    let (best_epoch, params) = if val_rows.is_empty() { (hp.epochs - 1, params) } else { (best.1, best.2) };
    Ok(TrainOutcome { params, loss_trace, validation_trace, best_epoch })
}

/// Train a model on synthetic CT-, CXR- and chart-like images.
///
/// Used as the default model when no trained model file is configured.
pub fn train_synthetic(per_class: usize, hp: &Hyperparams) -> Result<TrainOutcome, ClassifierError> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x5eed_f00d);
    let mut data = Vec::with_capacity(per_class * NUM_CLASSES);
    for _ in 0..per_class {
        for class in Modality::ALL {
            let (w, h) = (rng.random_range(224..400), rng.random_range(224..400));
            let img = crate::synthetic::modality_like(&mut rng, class, w, h);
            data.push((extract_features(&img), class));
        }
    }
    train(&data, hp)
}
