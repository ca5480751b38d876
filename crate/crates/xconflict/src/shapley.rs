//! Exact Shapley attribution of model predictions to input features, with a
//! marginal value function over a background sample, and aggregation into
//! per-(feature, KPI) importances.
//!
//! With at most a handful of features the full coalition enumeration is
//! cheap, and exactness turns the efficiency/dummy/symmetry axioms into hard
//! test assertions.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataError, Dataset};
use crate::regressor::GbtModel;
use crate::scalar::{stable_mean, stable_sum, Real};

pub const MAX_FEATURES: usize = 16;

#[derive(Debug, Error)]
pub enum ShapError {
    #[error("feature count {0} exceeds the {MAX_FEATURES}-feature exact enumeration capacity")]
    Capacity(usize),
    #[error("background sample is empty")]
    EmptyBackground,
    #[error("background sample has {got} rows, need at least {need}")]
    BackgroundTooSmall { got: usize, need: usize },
    #[error("evaluation sample is empty")]
    EmptyEval,
    #[error("row has {got} values, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{path}: {msg}")]
    Persist { path: PathBuf, msg: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Anything that maps a feature vector to a scalar prediction.
pub trait Model<F>: Sync {
    fn predict(&self, x: &[F]) -> F;
}

impl<F: Real> Model<F> for GbtModel<F> {
    fn predict(&self, x: &[F]) -> F {
        self.predict_raw(x)
    }
}

/// Adapter for closures, mostly used by tests and oracles.
pub struct FnModel<G>(pub G);

impl<F: Real, G: Fn(&[F]) -> F + Sync> Model<F> for FnModel<G> {
    fn predict(&self, x: &[F]) -> F {
        (self.0)(x)
    }
}

/// Per-sample attributions for one KPI model: `phi[s][i]` is feature `i`'s
/// contribution to sample `s`, and `base_value + sum(phi[s])` equals the
/// model prediction on sample `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix<F> {
    pub kpi: String,
    pub feature_names: Vec<String>,
    pub phi: Vec<Vec<F>>,
    pub base_value: F,
    pub background_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow<F> {
    pub kpi: String,
    pub feature: String,
    pub mean_abs_phi: F,
    pub normalized_share: F,
    /// Set when every feature's importance for this KPI is zero, in which
    /// case the shares are reported as zero rather than normalized.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImportanceTable<F> {
    pub rows: Vec<ImportanceRow<F>>,
}

/// Value of every coalition: `v[mask]` is the mean model output over
/// background rows with the masked coordinates replaced by the sample's.
fn coalition_values<F: Real, M: Model<F> + ?Sized>(
    model: &M,
    sample: &[F],
    background: &[Vec<F>],
) -> Vec<F> {
    let d = sample.len();
    let mut values = Vec::with_capacity(1usize << d);
    let mut buffer = vec![F::zero(); d];
    let mut predictions = vec![F::zero(); background.len()];
    for mask in 0..(1usize << d) {
        for (slot, row) in background.iter().enumerate() {
            for i in 0..d {
                buffer[i] = if mask & (1 << i) != 0 { sample[i] } else { row[i] };
            }
            predictions[slot] = model.predict(&buffer);
        }
        values.push(stable_mean(&predictions));
    }
    values
}

/// Exact Shapley values of one sample: the coalition-weighted average of
/// each feature's marginal contribution, over all `2^d` coalitions. Returns
/// `(phi, base_value)`.
pub fn exact_shapley<F: Real, M: Model<F> + ?Sized>(
    model: &M,
    sample: &[F],
    background: &[Vec<F>],
) -> Result<(Vec<F>, F), ShapError> {
    let d = sample.len();
    if d > MAX_FEATURES {
        return Err(ShapError::Capacity(d));
    }
    if background.is_empty() {
        return Err(ShapError::EmptyBackground);
    }
    for row in background {
        if row.len() != d {
            return Err(ShapError::LengthMismatch {
                expected: d,
                got: row.len(),
            });
        }
    }

    let v = coalition_values(model, sample, background);

    // weight(s) = s! (d-1-s)! / d!, exact in f64 for d <= 16
    let mut factorial = [1.0f64; MAX_FEATURES + 1];
    for i in 1..=MAX_FEATURES {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let weights: Vec<F> = (0..d)
        .map(|s| F::of(factorial[s] * factorial[d - 1 - s] / factorial[d]))
        .collect();

    let mut phi = Vec::with_capacity(d);
    let mut terms: Vec<F> = Vec::with_capacity(1usize << (d.saturating_sub(1)));
    for i in 0..d {
        let bit = 1usize << i;
        terms.clear();
        for mask in 0..(1usize << d) {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            terms.push(weights[s] * (v[mask | bit] - v[mask]));
        }
        phi.push(stable_sum(terms.iter().copied()));
    }
    Ok((phi, v[0]))
}

/// Attributions for a batch of samples. Samples run in parallel; the result
/// is identical to sequential evaluation.
pub fn attribution_matrix<F: Real, M: Model<F>>(
    model: &M,
    kpi: &str,
    feature_names: &[String],
    samples: &[Vec<F>],
    background: &[Vec<F>],
) -> Result<AttributionMatrix<F>, ShapError> {
    if samples.is_empty() {
        return Err(ShapError::EmptyEval);
    }
    let results: Vec<Result<(Vec<F>, F), ShapError>> = samples
        .par_iter()
        .map(|s| exact_shapley(model, s, background))
        .collect();
    let mut phi = Vec::with_capacity(samples.len());
    let mut base_value = F::zero();
    for r in results {
        let (p, b) = r?;
        base_value = b;
        phi.push(p);
    }
    Ok(AttributionMatrix {
        kpi: kpi.to_string(),
        feature_names: feature_names.to_vec(),
        phi,
        base_value,
        background_size: background.len(),
    })
}

pub const MIN_BACKGROUND: usize = 10;

/// Mean absolute attribution per feature and its share of the per-KPI total.
/// Context features are attributed like any other input; downstream graph
/// construction decides what becomes a conflict edge.
pub fn global_importance<F: Real>(
    model: &GbtModel<F>,
    eval: &Dataset<F>,
    background: &Dataset<F>,
) -> Result<(Vec<ImportanceRow<F>>, AttributionMatrix<F>), ShapError> {
    if eval.is_empty() {
        return Err(ShapError::EmptyEval);
    }
    if background.len() < MIN_BACKGROUND {
        return Err(ShapError::BackgroundTooSmall {
            got: background.len(),
            need: MIN_BACKGROUND,
        });
    }
    let samples = eval.rows(&model.feature_names)?;
    let bg = background.rows(&model.feature_names)?;
    let matrix = attribution_matrix(model, &model.target, &model.feature_names, &samples, &bg)?;

    let d = model.feature_names.len();
    let mut mean_abs = Vec::with_capacity(d);
    for i in 0..d {
        let col: Vec<F> = matrix.phi.iter().map(|row| row[i].abs()).collect();
        mean_abs.push(stable_mean(&col));
    }
    let total = stable_sum(mean_abs.iter().copied());
    let degenerate = !(total > F::zero());
    let rows = model
        .feature_names
        .iter()
        .zip(&mean_abs)
        .map(|(name, &m)| ImportanceRow {
            kpi: model.target.clone(),
            feature: name.clone(),
            mean_abs_phi: m,
            normalized_share: if degenerate { F::zero() } else { m / total },
            degenerate,
        })
        .collect();
    Ok((rows, matrix))
}

impl<F: Real> ImportanceTable<F> {
    pub fn share(&self, feature: &str, kpi: &str) -> Option<F> {
        self.rows
            .iter()
            .find(|r| r.feature == feature && r.kpi == kpi)
            .map(|r| r.normalized_share)
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), ShapError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| ShapError::Persist {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let persist = |e: csv::Error| ShapError::Persist {
            path: path.to_path_buf(),
            msg: e.to_string(),
        };
        w.write_record(["kpi", "feature", "mean_abs_phi", "normalized_share"])
            .map_err(persist)?;
        for r in &self.rows {
            w.write_record([
                r.kpi.as_str(),
                r.feature.as_str(),
                &format!("{}", r.mean_abs_phi),
                &format!("{}", r.normalized_share),
            ])
            .map_err(persist)?;
        }
        w.flush().map_err(|e| ShapError::Persist {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self, ShapError> {
        let persist = |msg: String| ShapError::Persist {
            path: path.to_path_buf(),
            msg,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(|e| persist(e.to_string()))?;
        let mut rows: Vec<ImportanceRow<F>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| persist(e.to_string()))?;
            if rec.len() != 4 {
                return Err(persist(format!("expected 4 fields, got {}", rec.len())));
            }
            let parse = |s: &str| -> Result<F, ShapError> {
                s.parse::<f64>()
                    .map(F::of)
                    .map_err(|e| persist(format!("bad number `{s}`: {e}")))
            };
            rows.push(ImportanceRow {
                kpi: rec[0].to_string(),
                feature: rec[1].to_string(),
                mean_abs_phi: parse(&rec[2])?,
                normalized_share: parse(&rec[3])?,
                degenerate: false,
            });
        }
        // A KPI whose shares are all zero was flagged degenerate on save.
        let kpis: Vec<String> = rows.iter().map(|r| r.kpi.clone()).collect();
        for kpi in kpis {
            let all_zero = rows
                .iter()
                .filter(|r| r.kpi == kpi)
                .all(|r| r.normalized_share == F::zero());
            if all_zero {
                for r in rows.iter_mut().filter(|r| r.kpi == kpi) {
                    r.degenerate = true;
                }
            }
        }
        Ok(ImportanceTable { rows })
    }

    /// Wide per-sample dump: one row per evaluated sample with each
    /// feature's attribution and the shared base value.
    pub fn save_attributions_csv(
        matrices: &[AttributionMatrix<F>],
        path: &Path,
    ) -> Result<(), ShapError> {
        let persist = |msg: String| ShapError::Persist {
            path: path.to_path_buf(),
            msg,
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| persist(e.to_string()))?;
        let Some(first) = matrices.first() else {
            return Err(persist("no attribution matrices to write".into()));
        };
        let mut header = vec!["kpi".to_string(), "sample_index".to_string()];
        header.extend(first.feature_names.iter().map(|f| format!("phi_{f}")));
        header.push("base_value".to_string());
        w.write_record(&header).map_err(|e| persist(e.to_string()))?;
        for m in matrices {
            for (s, row) in m.phi.iter().enumerate() {
                let mut rec = vec![m.kpi.clone(), s.to_string()];
                rec.extend(row.iter().map(|v| format!("{v}")));
                rec.push(format!("{}", m.base_value));
                w.write_record(&rec).map_err(|e| persist(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| persist(e.to_string()))?;
        Ok(())
    }
}

/// `|sum(phi) + base - prediction|`: zero (to numerical tolerance) by the
/// efficiency axiom.
pub fn efficiency_residual<F: Real, M: Model<F>>(
    model: &M,
    sample: &[F],
    phi: &[F],
    base: F,
) -> F {
    let reconstructed = stable_sum(phi.iter().copied()) + base;
    (reconstructed - model.predict(sample)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressor::{fit, GbtHyperParams};
    use crate::simkernel::{generate_dataset, SimConfig};

    fn linear() -> FnModel<impl Fn(&[f64]) -> f64 + Sync> {
        FnModel(|x: &[f64]| 2.0 * x[0] + 3.0 * x[1])
    }

    #[test]
    fn linear_model_recovers_coefficients() {
        let (phi, base) = exact_shapley(&linear(), &[1.0, 1.0], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(phi, vec![2.0, 3.0]);
        assert_eq!(base, 0.0);
    }

    #[test]
    fn ignored_feature_gets_exactly_zero() {
        let model = FnModel(|x: &[f64]| x[0] * x[0] + 1.0);
        let background = vec![vec![1.0, 7.0], vec![-2.0, 3.0], vec![0.5, -9.0]];
        for sample in [[2.0, 100.0], [-1.0, 0.0], [3.5, 55.0]] {
            let (phi, _) = exact_shapley(&model, &sample, &background).unwrap();
            assert_eq!(phi[1], 0.0);
        }
    }

    #[test]
    fn efficiency_holds_on_fitted_models() {
        let config = SimConfig {
            n_episodes: 120,
            ..Default::default()
        };
        let data = generate_dataset::<f64>(&config).unwrap();
        let hyper = GbtHyperParams {
            n_trees: 40,
            ..Default::default()
        };
        let model = fit(&data, "throughput_mbps", &hyper).unwrap();
        let rows = data.rows(&model.feature_names).unwrap();
        let background = &rows[..20];
        for sample in rows.iter().take(30) {
            let (phi, base) = exact_shapley(&model, sample, background).unwrap();
            let resid = efficiency_residual(&model, sample, &phi, base);
            assert!(resid <= 1e-9, "residual {resid}");
        }
    }

    #[test]
    fn duplicated_feature_with_symmetric_model_splits_evenly() {
        // Third coordinate duplicates the first, and the model averages the
        // two orientations, so it is exactly swap-symmetric in (0, 2).
        let model = FnModel(|x: &[f64]| {
            let f = |a: f64, b: f64| a * a + 3.0 * a + 0.5 * b;
            (f(x[0], x[1]) + f(x[2], x[1])) / 2.0
        });
        let background = vec![vec![1.0, 2.0, 1.0], vec![-3.0, 0.0, -3.0]];
        let sample = [2.0, 5.0, 2.0];
        let (phi, _) = exact_shapley(&model, &sample, &background).unwrap();
        assert!((phi[0] - phi[2]).abs() <= 1e-9, "{phi:?}");
    }

    #[test]
    fn phi_scales_linearly_with_the_model() {
        let base_model = FnModel(|x: &[f64]| x[0].powi(2) - x[1] * x[2] + 4.0);
        let scaled = FnModel(|x: &[f64]| 5.0 * (x[0].powi(2) - x[1] * x[2] + 4.0));
        let background = vec![vec![0.5, 1.0, -1.0], vec![2.0, -1.0, 0.0]];
        let sample = [1.5, 2.0, 1.0];
        let (phi, _) = exact_shapley(&base_model, &sample, &background).unwrap();
        let (phi5, _) = exact_shapley(&scaled, &sample, &background).unwrap();
        for (a, b) in phi.iter().zip(&phi5) {
            assert!((5.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn background_order_does_not_matter() {
        let model = FnModel(|x: &[f64]| x[0] * x[1] + x[2]);
        let background = vec![
            vec![1.0, 2.0, 3.0],
            vec![-1.0, 0.5, 2.0],
            vec![4.0, -2.0, 0.0],
        ];
        let mut reversed = background.clone();
        reversed.reverse();
        let sample = [2.0, 2.0, 2.0];
        let (a, ba) = exact_shapley(&model, &sample, &background).unwrap();
        let (b, bb) = exact_shapley(&model, &sample, &reversed).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
        assert!((ba - bb).abs() <= 1e-12);
    }

    #[test]
    fn capacity_limit_enforced() {
        let model = FnModel(|x: &[f64]| x.iter().sum());
        let sample = vec![1.0; 17];
        let background = vec![vec![0.0; 17]];
        assert!(matches!(
            exact_shapley(&model, &sample, &background),
            Err(ShapError::Capacity(17))
        ));
    }

    #[test]
    fn empty_background_rejected() {
        let model = FnModel(|x: &[f64]| x[0]);
        assert!(matches!(
            exact_shapley(&model, &[1.0], &[]),
            Err(ShapError::EmptyBackground)
        ));
    }

    #[test]
    fn all_zero_model_reports_degenerate_importance() {
        let config = SimConfig {
            n_episodes: 60,
            ..Default::default()
        };
        let data = generate_dataset::<f64>(&config).unwrap();
        let hyper = GbtHyperParams {
            n_trees: 3,
            ..Default::default()
        };
        let mut model = fit(&data, "throughput_mbps", &hyper).unwrap();
        model.trees.clear(); // constant model: every attribution is zero
        let (rows, _) = global_importance(&model, &data, &data.subsample(20, 1)).unwrap();
        assert!(rows.iter().all(|r| r.degenerate));
        assert!(rows.iter().all(|r| r.normalized_share == 0.0));
    }

    #[test]
    fn importance_csv_round_trips() {
        let table = ImportanceTable::<f64> {
            rows: vec![
                ImportanceRow {
                    kpi: "k".into(),
                    feature: "a".into(),
                    mean_abs_phi: 1.25,
                    normalized_share: 0.625,
                    degenerate: false,
                },
                ImportanceRow {
                    kpi: "k".into(),
                    feature: "b".into(),
                    mean_abs_phi: 0.75,
                    normalized_share: 0.375,
                    degenerate: false,
                },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("importance.csv");
        table.save_csv(&path).unwrap();
        let loaded = ImportanceTable::<f64>::load_csv(&path).unwrap();
        assert_eq!(table, loaded);
    }

    /// Independent oracle: the permutation form of the Shapley value, which
    /// never touches the subset-weight formula used by the implementation.
    pub(crate) fn permutation_shapley<F: Real, M: Model<F>>(
        model: &M,
        sample: &[F],
        background: &[Vec<F>],
    ) -> Vec<F> {
        let d = sample.len();
        let v = |mask: usize| -> F {
            let preds: Vec<F> = background
                .iter()
                .map(|row| {
                    let x: Vec<F> = (0..d)
                        .map(|i| if mask & (1 << i) != 0 { sample[i] } else { row[i] })
                        .collect();
                    model.predict(&x)
                })
                .collect();
            stable_mean(&preds)
        };
        let mut order: Vec<usize> = (0..d).collect();
        let mut contributions = vec![Vec::new(); d];
        permute(&mut order, 0, &mut |perm: &[usize]| {
            let mut mask = 0usize;
            for &i in perm {
                let before = v(mask);
                mask |= 1 << i;
                contributions[i].push(v(mask) - before);
            }
        });
        contributions.into_iter().map(|c| stable_mean(&c)).collect()
    }

    fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }

    #[test]
    fn matches_permutation_oracle_on_a_small_tree() {
        use crate::regressor::TreeNode;
        let tree = TreeNode::Split {
            feature: 0,
            threshold: 1.0,
            left: Box::new(TreeNode::Split {
                feature: 2,
                threshold: 0.0,
                left: Box::new(TreeNode::Leaf { value: -3.0 }),
                right: Box::new(TreeNode::Leaf { value: 1.0 }),
            }),
            right: Box::new(TreeNode::Split {
                feature: 1,
                threshold: 2.5,
                left: Box::new(TreeNode::Leaf { value: 4.0 }),
                right: Box::new(TreeNode::Leaf { value: 7.0 }),
            }),
        };
        let model = FnModel(move |x: &[f64]| tree.evaluate(x));
        let background = vec![vec![0.0, 3.0, -1.0], vec![2.0, 1.0, 1.0]];
        let sample = [1.5, 2.0, 0.5];
        let (phi, _) = exact_shapley(&model, &sample, &background).unwrap();
        let oracle = permutation_shapley(&model, &sample, &background);
        for (a, b) in phi.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9, "{phi:?} vs {oracle:?}");
        }
    }
}
