//! Gradient-boosted decision trees for next-day direction.
//!
//! Binary logistic loss with second-order (Newton) boosting. Each round
//! computes `g = p - y` and `h = p (1 - p)` at the current margin, grows one
//! tree by exact greedy search over midpoints between consecutive distinct
//! feature values, and adds `learning_rate * tree(x)` to the margin.
//!
//! For a candidate split the gain is
//!
//! ```text
//! 1/2 * [ GL^2/(HL+lambda) + GR^2/(HR+lambda) - (GL+GR)^2/(HL+HR+lambda) ]
//! ```
//!
//! and a leaf holding gradient sum `G` and hessian sum `H` gets weight
//! `-G / (H + lambda)`. Features are scanned in index order and thresholds in
//! ascending order; a candidate replaces the incumbent only on strictly
//! larger gain, so ties go to the lowest feature index, then the lowest
//! threshold. There is no sampling, so training is fully deterministic.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    feature_names, fit_scaler, Dataset, FeatureVector, ScalerParams, FEATURE_COUNT,
};
use crate::math;

/// Version written into model files; loading any other version fails.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GbdtError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains only one class")]
    SingleClassDataset,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(&'static str),
    #[error("corrupt model: {0}")]
    CorruptModelFile(String),
    #[error("model schema version {found}, expected {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("feature vectors must be finite")]
    NonFiniteFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub min_child_weight: f64,
    pub decision_threshold: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            max_depth: 6,
            learning_rate: 0.05,
            l2_lambda: 1.0,
            min_child_weight: 1.0,
            decision_threshold: 0.5,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        use GbdtError::InvalidHyperparams as Bad;
        if self.n_estimators == 0 {
            return Err(Bad("n_estimators must be at least 1"));
        }
        if self.max_depth == 0 {
            return Err(Bad("max_depth must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Bad("learning_rate must be in (0, 1]"));
        }
        if !(self.l2_lambda >= 0.0) || !self.l2_lambda.is_finite() {
            return Err(Bad("l2_lambda must be non-negative"));
        }
        if !(self.min_child_weight >= 0.0) || !self.min_child_weight.is_finite() {
            return Err(Bad("min_child_weight must be non-negative"));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(Bad("decision_threshold must be in (0, 1)"));
        }
        Ok(())
    }
}

/// Branch taken by a missing value. Missing values are rejected upstream, so
/// this is always `Left`; it is kept in model files for forward compatibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DefaultDirection {
    #[default]
    #[serde(rename = "left")]
    Left,
    #[serde(rename = "right")]
    Right,
}

/// A regression tree over scaled features. Rows with `x[feature] < threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        #[serde(rename = "f")]
        feature: usize,
        #[serde(rename = "v")]
        threshold: f64,
        #[serde(rename = "l")]
        left: Box<TreeNode>,
        #[serde(rename = "r")]
        right: Box<TreeNode>,
        #[serde(rename = "d", default)]
        default_direction: DefaultDirection,
    },
    Leaf {
        #[serde(rename = "w")]
        weight: f64,
    },
}

impl TreeNode {
    pub fn evaluate(&self, x: &FeatureVector) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x.0[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    fn validate(&self) -> Result<(), GbdtError> {
        match self {
            TreeNode::Leaf { weight } if weight.is_finite() => Ok(()),
            TreeNode::Leaf { .. } => Err(corrupt("non-finite leaf weight")),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if *feature >= FEATURE_COUNT {
                    return Err(corrupt("split feature index out of range"));
                }
                if !threshold.is_finite() {
                    return Err(corrupt("non-finite split threshold"));
                }
                left.validate()?;
                right.validate()
            }
        }
    }
}

fn corrupt(reason: &str) -> GbdtError {
    GbdtError::CorruptModelFile(reason.into())
}

/// A trained classifier together with the scaler its inputs must pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub schema_version: u32,
    pub hyperparams: Hyperparams,
    pub learning_rate: f64,
    pub base_score_logit: f64,
    pub feature_names: Vec<String>,
    pub scaler: ScalerParams,
    pub trees: Vec<TreeNode>,
}

impl Ensemble {
    /// Tree-free model that always outputs `probability`.
    pub fn constant(probability: f64, scaler: ScalerParams) -> Self {
        let p = probability.clamp(1e-12, 1.0 - 1e-12);
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            hyperparams: Hyperparams::default(),
            learning_rate: Hyperparams::default().learning_rate,
            base_score_logit: math::ln(p / (1.0 - p)),
            feature_names: feature_names(),
            scaler,
            trees: Vec::new(),
        }
    }

    /// Raw log-odds for an already scaled vector.
    pub fn margin(&self, scaled: &FeatureVector) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.evaluate(scaled)).sum();
        self.base_score_logit + self.learning_rate * sum
    }

    /// Probability of an up day for an already scaled vector, strictly inside (0, 1).
    pub fn predict_proba(&self, scaled: &FeatureVector) -> f64 {
        clamp_open_unit(math::sigmoid(self.margin(scaled)))
    }

    /// 1 iff the probability reaches the decision threshold.
    pub fn predict(&self, scaled: &FeatureVector) -> u8 {
        u8::from(self.predict_proba(scaled) >= self.hyperparams.decision_threshold)
    }

    /// Applies the embedded scaler to a raw feature vector.
    pub fn scale(&self, raw: &FeatureVector) -> FeatureVector {
        self.scaler.transform(raw)
    }

    /// Checks everything a loaded model must satisfy before it is used.
    pub fn validate(&self) -> Result<(), GbdtError> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(GbdtError::SchemaVersionMismatch {
                found: self.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        self.hyperparams
            .validate()
            .map_err(|_| corrupt("invalid hyperparameters"))?;
        if !self.base_score_logit.is_finite() || !self.learning_rate.is_finite() {
            return Err(corrupt("non-finite base score or learning rate"));
        }
        if self.feature_names != feature_names() {
            return Err(corrupt("feature names do not match the pipeline order"));
        }
        self.scaler
            .validate()
            .map_err(|_| corrupt("invalid scaler block"))?;
        if self.trees.len() > self.hyperparams.n_estimators {
            return Err(corrupt("more trees than n_estimators"));
        }
        for tree in &self.trees {
            tree.validate()?;
            if tree.depth() > self.hyperparams.max_depth {
                return Err(corrupt("tree deeper than max_depth"));
            }
        }
        Ok(())
    }
}

fn clamp_open_unit(p: f64) -> f64 {
    const HI: f64 = 1.0 - f64::EPSILON / 2.0;
    p.clamp(f64::MIN_POSITIVE, HI)
}

/// Mean logistic loss on the training set, before any tree and after each round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub loss_per_round: Vec<f64>,
}

/// Fits a scaler on the dataset rows, standardizes them and boosts.
pub fn train(dataset: &Dataset, hp: &Hyperparams, seed: u64) -> Result<Ensemble, GbdtError> {
    train_with_report(dataset, hp, seed).map(|(model, _)| model)
}

/// `seed` is accepted for interface stability; the exact algorithm draws no
/// random numbers.
pub fn train_with_report(
    dataset: &Dataset,
    hp: &Hyperparams,
    _seed: u64,
) -> Result<(Ensemble, TrainingReport), GbdtError> {
    hp.validate()?;
    if dataset.is_empty() {
        return Err(GbdtError::EmptyDataset);
    }
    let raw = dataset.features();
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(GbdtError::NonFiniteFeatures);
    }
    let labels = dataset.labels();
    check_classes(&labels)?;
    // two classes imply at least two rows
    let scaler = fit_scaler(&raw).map_err(|_| GbdtError::EmptyDataset)?;
    let scaled: Vec<FeatureVector> = raw.iter().map(|x| scaler.transform(x)).collect();
    let (trees, base, report) = boost(&scaled, &labels, hp);
    Ok((
        Ensemble {
            schema_version: MODEL_SCHEMA_VERSION,
            hyperparams: hp.clone(),
            learning_rate: hp.learning_rate,
            base_score_logit: base,
            feature_names: feature_names(),
            scaler,
            trees,
        },
        report,
    ))
}

fn check_classes(labels: &[u8]) -> Result<(), GbdtError> {
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(GbdtError::SingleClassDataset);
    }
    Ok(())
}

/// Boosting on rows that are already scaled.
pub(crate) fn boost(
    x: &[FeatureVector],
    y: &[u8],
    hp: &Hyperparams,
) -> (Vec<TreeNode>, f64, TrainingReport) {
    let n = x.len();
    let rate = y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
    let base = math::ln(rate / (1.0 - rate));
    let mut margin = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut report = TrainingReport {
        loss_per_round: vec![mean_log_loss(&margin, y)],
    };

    let presorted: Vec<Vec<u32>> = (0..FEATURE_COUNT)
        .map(|j| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                x[a as usize].0[j]
                    .total_cmp(&x[b as usize].0[j])
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let mut trees = Vec::with_capacity(hp.n_estimators);
    let mut goes_left = vec![false; n];
    for _ in 0..hp.n_estimators {
        for i in 0..n {
            let p = math::sigmoid(margin[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let grower = Grower {
            x,
            grad: &grad,
            hess: &hess,
            hp,
        };
        let tree = grower.grow(presorted.clone(), 0, &mut goes_left);
        for (m, row) in margin.iter_mut().zip(x) {
            *m += hp.learning_rate * tree.evaluate(row);
        }
        report.loss_per_round.push(mean_log_loss(&margin, y));
        trees.push(tree);
    }
    (trees, base, report)
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + math::ln(1.0 + math::exp(-z))
    } else {
        math::ln(1.0 + math::exp(z))
    }
}

fn mean_log_loss(margin: &[f64], y: &[u8]) -> f64 {
    let total: f64 = margin
        .iter()
        .zip(y)
        .map(|(&z, &label)| {
            if label == 1 {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    total / margin.len() as f64
}

struct Grower<'a> {
    x: &'a [FeatureVector],
    grad: &'a [f64],
    hess: &'a [f64],
    hp: &'a Hyperparams,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    /// `rows[j]` lists the node's rows sorted by feature `j`.
    fn grow(&self, rows: Vec<Vec<u32>>, depth: usize, goes_left: &mut [bool]) -> TreeNode {
        let (g, h) = rows[0].iter().fold((0.0, 0.0), |(g, h), &i| {
            (g + self.grad[i as usize], h + self.hess[i as usize])
        });
        let leaf = TreeNode::Leaf {
            weight: self.leaf_weight(g, h),
        };
        if depth >= self.hp.max_depth || rows[0].len() < 2 {
            return leaf;
        }
        let Some(best) = self.best_split(&rows, g, h) else {
            return leaf;
        };
        for &i in &rows[best.feature] {
            goes_left[i as usize] = self.x[i as usize].0[best.feature] < best.threshold;
        }
        let mut left_rows = Vec::with_capacity(FEATURE_COUNT);
        let mut right_rows = Vec::with_capacity(FEATURE_COUNT);
        for list in rows {
            let (l, r): (Vec<u32>, Vec<u32>) =
                list.into_iter().partition(|&i| goes_left[i as usize]);
            left_rows.push(l);
            right_rows.push(r);
        }
        let left = self.grow(left_rows, depth + 1, goes_left);
        let right = self.grow(right_rows, depth + 1, goes_left);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(left),
            right: Box::new(right),
            default_direction: DefaultDirection::Left,
        }
    }

    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.hp.l2_lambda;
        if denom > 0.0 {
            -g / denom
        } else {
            0.0
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.hp.l2_lambda;
        if denom > 0.0 {
            g * g / denom
        } else {
            0.0
        }
    }

    fn best_split(&self, rows: &[Vec<u32>], g: f64, h: f64) -> Option<Candidate> {
        let parent = self.score(g, h);
        let mut best: Option<Candidate> = None;
        for (feature, sorted) in rows.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                let i = sorted[k] as usize;
                gl += self.grad[i];
                hl += self.hess[i];
                let lo = self.x[i].0[feature];
                let hi = self.x[sorted[k + 1] as usize].0[feature];
                if lo.partial_cmp(&hi) != Some(Ordering::Less) {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.hp.min_child_weight || hr < self.hp.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent);
                if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                    best = Some(Candidate {
                        gain,
                        feature,
                        threshold: midpoint(lo, hi),
                    });
                }
            }
        }
        best
    }
}

/// A threshold `t` with `lo < t <= hi`, so that `lo` goes left and `hi` right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}
