//! Gradient-boosted regression trees with exact greedy splits. Trained on
//! the observational data, one model per KPI; the attribution stage then
//! interprets these models.
//!
//! Fitting is deterministic and invariant to record order: candidate rows
//! are sorted by (value, residual) before prefix sums, ties in split gain
//! break toward the lowest feature index then lowest threshold, and leaf
//! means are accumulated in sorted order.

mod tree;

pub use tree::TreeNode;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnRole, DataError, Dataset};
use crate::scalar::{stable_mean, Real};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown target column `{0}`")]
    UnknownTarget(String),
    #[error("target `{0}` is not a kpi column")]
    TargetNotKpi(String),
    #[error("degenerate target: fewer than 2 distinct values")]
    DegenerateTarget,
    #[error("feature vector has {got} values, model expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty test set")]
    EmptyTestSet,
    #[error("{path}: {msg}")]
    Persist { path: PathBuf, msg: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtHyperParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Include context columns (distance, shadowing) as features.
    pub include_context: bool,
}

impl Default for GbtHyperParams {
    fn default() -> Self {
        GbtHyperParams {
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            include_context: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel<F> {
    pub target: String,
    pub feature_names: Vec<String>,
    pub trees: Vec<TreeNode<F>>,
    pub base_prediction: F,
    pub learning_rate: F,
    pub hyperparams: GbtHyperParams,
    pub n_train: usize,
}

/// Held-out fit metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<F> {
    pub r2: F,
    pub rmse: F,
    pub mae: F,
    pub n_train: usize,
    pub n_test: usize,
}

impl<F: Real> GbtModel<F> {
    /// Prediction without arity validation; callers guarantee the length.
    pub fn predict_raw(&self, x: &[F]) -> F {
        debug_assert_eq!(x.len(), self.feature_names.len());
        let mut acc = self.base_prediction;
        for t in &self.trees {
            acc = acc + self.learning_rate * t.evaluate(x);
        }
        acc
    }

    pub fn predict(&self, x: &[F]) -> Result<F, ModelError> {
        if x.len() != self.feature_names.len() {
            return Err(ModelError::LengthMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        Ok(self.predict_raw(x))
    }

    pub fn save_json(&self, path: &Path) -> Result<(), ModelError> {
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        fs::write(path, json).map_err(|e| ModelError::Persist {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn load_json(path: &Path) -> Result<Self, ModelError> {
        let raw = fs::read_to_string(path).map_err(|e| ModelError::Persist {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        serde_json::from_str(&raw).map_err(|e| ModelError::Persist {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }
}

/// Feature columns used for a given hyperparameter set: all rcp columns,
/// plus context columns when enabled, in schema order.
pub fn feature_columns<F: Real>(data: &Dataset<F>, hyper: &GbtHyperParams) -> Vec<String> {
    data.schema
        .columns
        .iter()
        .filter(|c| {
            c.role == ColumnRole::Rcp || (hyper.include_context && c.role == ColumnRole::Context)
        })
        .map(|c| c.name.clone())
        .collect()
}

/// Fit boosted trees to one KPI with squared-error loss: each round fits a
/// regression tree to the residuals by exact greedy variance-reduction
/// splits over all (feature, midpoint) candidates.
pub fn fit<F: Real>(
    train: &Dataset<F>,
    target: &str,
    hyper: &GbtHyperParams,
) -> Result<GbtModel<F>, ModelError> {
    let spec = train
        .schema
        .column(target)
        .ok_or_else(|| ModelError::UnknownTarget(target.to_string()))?;
    if spec.role != ColumnRole::Kpi {
        return Err(ModelError::TargetNotKpi(target.to_string()));
    }
    let y = train.column_values(target)?;
    {
        let mut distinct = y.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite targets"));
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(ModelError::DegenerateTarget);
        }
    }
    let feature_names = feature_columns(train, hyper);
    let rows = train.rows(&feature_names)?;
    let n = rows.len();

    let base_prediction = {
        let mut sorted = y.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite targets"));
        stable_mean(&sorted)
    };
    let lr = F::of(hyper.learning_rate);

    let mut predictions = vec![base_prediction; n];
    let mut residuals = vec![F::zero(); n];
    let mut trees = Vec::with_capacity(hyper.n_trees);
    for _ in 0..hyper.n_trees {
        for i in 0..n {
            residuals[i] = y[i] - predictions[i];
        }
        let tree = tree::build(&rows, &residuals, hyper);
        for i in 0..n {
            predictions[i] = predictions[i] + lr * tree.evaluate(&rows[i]);
        }
        trees.push(tree);
    }

    Ok(GbtModel {
        target: target.to_string(),
        feature_names,
        trees,
        base_prediction,
        learning_rate: lr,
        hyperparams: hyper.clone(),
        n_train: n,
    })
}

fn metrics<F: Real>(predicted: &[F], actual: &[F], n_train: usize) -> FitReport<F> {
    let n = actual.len();
    let nf = F::of(n as f64);
    let mean_y = stable_mean(actual);
    let mut sse = F::zero();
    let mut sst = F::zero();
    let mut abs = F::zero();
    for (p, a) in predicted.iter().zip(actual) {
        let e = *p - *a;
        sse = sse + e * e;
        abs = abs + e.abs();
        let d = *a - mean_y;
        sst = sst + d * d;
    }
    let r2 = if sst > F::zero() {
        F::one() - sse / sst
    } else if sse == F::zero() {
        F::one()
    } else {
        F::zero()
    };
    FitReport {
        r2,
        rmse: (sse / nf).sqrt(),
        mae: abs / nf,
        n_train,
        n_test: n,
    }
}

/// Held-out metrics of a fitted model on a schema-compatible dataset.
pub fn evaluate<F: Real>(model: &GbtModel<F>, test: &Dataset<F>) -> Result<FitReport<F>, ModelError> {
    if test.is_empty() {
        return Err(ModelError::EmptyTestSet);
    }
    let rows = test.rows(&model.feature_names)?;
    let actual = test.column_values(&model.target)?;
    let predicted: Vec<F> = rows.iter().map(|r| model.predict_raw(r)).collect();
    Ok(metrics(&predicted, &actual, model.n_train))
}
