//! Treatment-effect estimation with backdoor adjustment: stratified
//! local-linear slopes (default) or a global linear adjustment, both with
//! seeded percentile-bootstrap uncertainty.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confgraph::{backdoor_sets, CausalDag, ConflictReport, GraphError};
use crate::dataset::{DataError, Dataset, StratumSpec, ValueKind};
use crate::scalar::{stable_mean, stable_sum, Real};

const BOOTSTRAP_STREAM_TAG: u64 = 0xB007;

#[derive(Debug, Error)]
pub enum CausalError {
    #[error("degenerate treatment: fewer than 2 distinct values")]
    DegenerateTreatment,
    #[error("no stratum satisfied the minimum size and treatment-variation requirements")]
    NoValidStrata,
    #[error("no backdoor adjustment set found for ({treatment} -> {outcome})")]
    NoAdjustmentSet { treatment: String, outcome: String },
    #[error("bootstrap produced fewer than 2 successful resamples")]
    BootstrapFailed,
    #[error("conditioning variable `{0}` overlaps treatment or outcome")]
    ConditionOverlap(String),
    #[error("singular design matrix in linear adjustment")]
    SingularDesign,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Stratified,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalOptions {
    pub estimator: Estimator,
    pub bootstrap_samples: usize,
    pub min_stratum_n: usize,
    pub quantile_bins: usize,
    pub max_adjustment_size: usize,
    pub seed: u64,
    /// Fixed adjustment set, bypassing the backdoor search. `Some(vec![])`
    /// forces an unadjusted estimate.
    pub adjustment_override: Option<Vec<String>>,
    /// Columns whose levels are powers of two; treated on log2 scale so the
    /// reported effect is per doubling.
    pub log2_columns: Vec<String>,
}

impl Default for CausalOptions {
    fn default() -> Self {
        CausalOptions {
            estimator: Estimator::Stratified,
            bootstrap_samples: 200,
            min_stratum_n: 20,
            quantile_bins: 5,
            max_adjustment_size: 4,
            seed: 0,
            adjustment_override: None,
            log2_columns: vec!["num_tx_antennas".to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumDiag<F> {
    pub label: String,
    pub n: usize,
    pub slope: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics<F> {
    pub strata: Vec<StratumDiag<F>>,
    pub n_dropped_strata: usize,
    pub n_bootstrap_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate<F> {
    pub treatment: String,
    pub outcome: String,
    pub adjustment_set: Vec<String>,
    pub estimator: Estimator,
    /// "unit" for the natural scale, "log2" when the treatment is analyzed
    /// per doubling.
    pub treatment_scale: String,
    pub ate_per_unit: F,
    pub stderr_boot: F,
    pub ci95: (F, F),
    pub n_used: usize,
    pub diagnostics: Diagnostics<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateStratum<F> {
    pub label: String,
    /// None when the stratum was too small or had no treatment variation.
    pub effect: Option<F>,
    pub stderr: Option<F>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateEstimate<F> {
    /// Pooled effect: the stratum-size-weighted mean of the defined
    /// per-stratum effects, with its own bootstrap interval.
    pub base: EffectEstimate<F>,
    pub condition: StratumSpec,
    pub per_stratum: Vec<CateStratum<F>>,
}

/// One entry of the effect matrix; failures are recorded, not fatal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEntry<F> {
    pub treatment: String,
    pub outcome: String,
    pub estimate: Option<EffectEstimate<F>>,
    pub error: Option<String>,
}

// ---------------------------------------------------------------------------
// working arrays

enum Discretizer<F> {
    Levels(Vec<F>),
    Quantile(Vec<F>),
}

impl<F: Real> Discretizer<F> {
    fn bin(&self, v: F) -> u32 {
        match self {
            Discretizer::Levels(levels) => levels
                .iter()
                .position(|&l| l == v)
                .map(|p| p as u32)
                .unwrap_or(u32::MAX),
            Discretizer::Quantile(edges) => edges.iter().filter(|&&e| v > e).count() as u32,
        }
    }

    fn label(&self, bin: u32, name: &str) -> String {
        match self {
            Discretizer::Levels(levels) => match levels.get(bin as usize) {
                Some(l) => format!("{name}={l}"),
                None => format!("{name}=?"),
            },
            Discretizer::Quantile(_) => format!("{name}:q{bin}"),
        }
    }
}

/// Quantile edges over the current sample, nearest-rank convention.
fn quantile_edges<F: Real>(values: &[F], bins: usize) -> Vec<F> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite covariates"));
    let n = sorted.len();
    (1..bins)
        .map(|k| {
            let idx = ((n as f64 * k as f64 / bins as f64).ceil() as usize)
                .clamp(1, n)
                - 1;
            sorted[idx]
        })
        .collect()
}

struct Arrays<F> {
    t: Vec<F>,
    y: Vec<F>,
    adj_names: Vec<String>,
    adj: Vec<Vec<F>>,
    adj_discrete_levels: Vec<Option<Vec<F>>>,
}

impl<F: Real> Arrays<F> {
    fn extract(
        data: &Dataset<F>,
        treatment: &str,
        outcome: &str,
        adjustment: &[String],
        options: &CausalOptions,
    ) -> Result<Self, CausalError> {
        let mut t = data.column_values(treatment)?;
        if options.log2_columns.iter().any(|c| c == treatment) {
            for v in &mut t {
                *v = v.log2();
            }
        }
        let y = data.column_values(outcome)?;
        let mut adj = Vec::new();
        let mut levels = Vec::new();
        for name in adjustment {
            adj.push(data.column_values(name)?);
            let kind = &data
                .schema
                .column(name)
                .expect("column_values validated the name")
                .kind;
            levels.push(match kind {
                ValueKind::DiscreteSet { levels } => {
                    Some(levels.iter().map(|&l| F::of(l)).collect())
                }
                _ => None,
            });
        }
        Ok(Arrays {
            t,
            y,
            adj_names: adjustment.to_vec(),
            adj,
            adj_discrete_levels: levels,
        })
    }

    fn len(&self) -> usize {
        self.t.len()
    }

    fn take(&self, indices: &[usize]) -> Arrays<F> {
        let pick = |v: &Vec<F>| indices.iter().map(|&i| v[i]).collect();
        Arrays {
            t: pick(&self.t),
            y: pick(&self.y),
            adj_names: self.adj_names.clone(),
            adj: self.adj.iter().map(pick).collect(),
            adj_discrete_levels: self.adj_discrete_levels.clone(),
        }
    }
}

fn slope_1d<F: Real>(t: &[F], y: &[F]) -> Option<F> {
    let tbar = stable_mean(t);
    let ybar = stable_mean(y);
    let mut num = F::zero();
    let mut den = F::zero();
    for (ti, yi) in t.iter().zip(y) {
        let dt = *ti - tbar;
        num = num + dt * (*yi - ybar);
        den = den + dt * dt;
    }
    if den > F::zero() {
        Some(num / den)
    } else {
        None
    }
}

struct PointEstimate<F> {
    ate: F,
    n_used: usize,
    strata: Vec<StratumDiag<F>>,
    n_dropped: usize,
}

/// Stratified local-linear estimate: discretize the adjustment covariates
/// (levels for discrete columns, sample quantiles otherwise), fit a 1-D
/// slope inside each sufficiently large cell, and pool slopes weighted by
/// cell size.
fn stratified_point<F: Real>(
    arrays: &Arrays<F>,
    options: &CausalOptions,
) -> Result<PointEstimate<F>, CausalError> {
    let discretizers: Vec<Discretizer<F>> = arrays
        .adj
        .iter()
        .zip(&arrays.adj_discrete_levels)
        .map(|(values, levels)| match levels {
            Some(levels) => Discretizer::Levels(levels.clone()),
            None => Discretizer::Quantile(quantile_edges(values, options.quantile_bins)),
        })
        .collect();

    let mut groups: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
    for i in 0..arrays.len() {
        let key: Vec<u32> = discretizers
            .iter()
            .enumerate()
            .map(|(c, d)| d.bin(arrays.adj[c][i]))
            .collect();
        groups.entry(key).or_default().push(i);
    }

    let mut strata = Vec::new();
    let mut n_used = 0usize;
    let mut n_dropped = 0usize;
    let mut weighted: Vec<(usize, F)> = Vec::new();
    for (key, members) in &groups {
        let label = if key.is_empty() {
            "all".to_string()
        } else {
            key.iter()
                .enumerate()
                .map(|(c, &bin)| discretizers[c].label(bin, &arrays.adj_names[c]))
                .collect::<Vec<_>>()
                .join(",")
        };
        if members.len() < options.min_stratum_n.max(2) {
            n_dropped += 1;
            continue;
        }
        let t: Vec<F> = members.iter().map(|&i| arrays.t[i]).collect();
        let y: Vec<F> = members.iter().map(|&i| arrays.y[i]).collect();
        match slope_1d(&t, &y) {
            Some(slope) => {
                n_used += members.len();
                weighted.push((members.len(), slope));
                strata.push(StratumDiag {
                    label,
                    n: members.len(),
                    slope,
                });
            }
            None => n_dropped += 1,
        }
    }
    if weighted.is_empty() {
        return Err(CausalError::NoValidStrata);
    }
    let ate = stable_sum(
        weighted
            .iter()
            .map(|&(n, slope)| F::of(n as f64) * slope),
    ) / F::of(n_used as f64);
    Ok(PointEstimate {
        ate,
        n_used,
        strata,
        n_dropped,
    })
}

/// Ordinary least squares of `y` on `[1, t, adjustment...]`; the effect is
/// the `t` coefficient.
fn linear_point<F: Real>(arrays: &Arrays<F>) -> Result<PointEstimate<F>, CausalError> {
    let n = arrays.len();
    let k = 2 + arrays.adj.len();
    if n < k {
        return Err(CausalError::NoValidStrata);
    }
    let row = |i: usize| -> Vec<F> {
        let mut r = Vec::with_capacity(k);
        r.push(F::one());
        r.push(arrays.t[i]);
        for col in &arrays.adj {
            r.push(col[i]);
        }
        r
    };
    // normal equations
    let mut xtx = vec![vec![F::zero(); k]; k];
    let mut xty = vec![F::zero(); k];
    for i in 0..n {
        let r = row(i);
        for a in 0..k {
            for b in 0..k {
                xtx[a][b] = xtx[a][b] + r[a] * r[b];
            }
            xty[a] = xty[a] + r[a] * arrays.y[i];
        }
    }
    let beta = solve(&mut xtx, &mut xty)?;
    Ok(PointEstimate {
        ate: beta[1],
        n_used: n,
        strata: vec![],
        n_dropped: 0,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve<F: Real>(a: &mut [Vec<F>], b: &mut [F]) -> Result<Vec<F>, CausalError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .expect("finite")
            })
            .expect("non-empty");
        if a[pivot][col].abs() <= F::of(1e-12) {
            return Err(CausalError::SingularDesign);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in (col + 1)..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                let delta = factor * a[col][c];
                a[r][c] = a[r][c] - delta;
            }
            let delta = factor * b[col];
            b[r] = b[r] - delta;
        }
    }
    let mut x = vec![F::zero(); n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in (col + 1)..n {
            acc = acc - a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

fn point_estimate<F: Real>(
    arrays: &Arrays<F>,
    options: &CausalOptions,
) -> Result<PointEstimate<F>, CausalError> {
    match options.estimator {
        Estimator::Stratified => stratified_point(arrays, options),
        Estimator::Linear => linear_point(arrays),
    }
}

fn distinct_count<F: Real>(values: &[F]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    sorted.dedup();
    sorted.len()
}

struct BootstrapStats<F> {
    stderr: F,
    ci95: (F, F),
    n_failures: usize,
}

/// Seeded resampling of record indices; each resample reruns the full
/// estimation procedure. Resamples run in parallel with per-index streams,
/// so results never depend on scheduling.
fn bootstrap<F: Real>(
    n: usize,
    options: &CausalOptions,
    estimate: impl Fn(&[usize]) -> Option<F> + Sync,
) -> Result<BootstrapStats<F>, CausalError> {
    let draws: Vec<Option<F>> = (0..options.bootstrap_samples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = crate::rng::stream(options.seed, b, BOOTSTRAP_STREAM_TAG);
            let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            estimate(&indices)
        })
        .collect();
    let n_failures = draws.iter().filter(|d| d.is_none()).count();
    let mut ok: Vec<F> = draws.into_iter().flatten().collect();
    if ok.len() < 2 {
        return Err(CausalError::BootstrapFailed);
    }
    let mean = stable_mean(&ok);
    let var = stable_sum(ok.iter().map(|&v| (v - mean) * (v - mean)))
        / F::of((ok.len() - 1) as f64);
    ok.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = ok.len();
    let lo_idx = ((m as f64) * 0.025).floor() as usize;
    let hi_idx = (((m as f64) * 0.975).ceil() as usize).saturating_sub(1);
    Ok(BootstrapStats {
        stderr: var.sqrt(),
        ci95: (ok[lo_idx.min(m - 1)], ok[hi_idx.min(m - 1)]),
        n_failures,
    })
}

/// Resolve the adjustment set: an explicit override, or the smallest minimal
/// backdoor set (ties broken lexicographically by the search order).
pub fn choose_adjustment(
    dag: &CausalDag,
    treatment: &str,
    outcome: &str,
    options: &CausalOptions,
) -> Result<Vec<String>, CausalError> {
    if let Some(set) = &options.adjustment_override {
        return Ok(set.clone());
    }
    let sets = backdoor_sets(dag, treatment, outcome, options.max_adjustment_size)?;
    sets.into_iter()
        .next()
        .ok_or_else(|| CausalError::NoAdjustmentSet {
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
        })
}

fn scale_label(treatment: &str, options: &CausalOptions) -> String {
    if options.log2_columns.iter().any(|c| c == treatment) {
        "log2".to_string()
    } else {
        "unit".to_string()
    }
}

/// Average effect of one treatment column on one outcome column, adjusted
/// for the backdoor set implied by the DAG (or an explicit override).
pub fn estimate_ate<F: Real>(
    data: &Dataset<F>,
    dag: &CausalDag,
    treatment: &str,
    outcome: &str,
    options: &CausalOptions,
) -> Result<EffectEstimate<F>, CausalError> {
    let adjustment = choose_adjustment(dag, treatment, outcome, options)?;
    let arrays = Arrays::extract(data, treatment, outcome, &adjustment, options)?;
    if distinct_count(&arrays.t) < 2 {
        return Err(CausalError::DegenerateTreatment);
    }
    let point = point_estimate(&arrays, options)?;
    let boot = bootstrap(arrays.len(), options, |indices| {
        point_estimate(&arrays.take(indices), options)
            .ok()
            .map(|p| p.ate)
    })?;
    let (lo, hi) = boot.ci95;
    Ok(EffectEstimate {
        treatment: treatment.to_string(),
        outcome: outcome.to_string(),
        adjustment_set: adjustment,
        estimator: options.estimator,
        treatment_scale: scale_label(treatment, options),
        ate_per_unit: point.ate,
        stderr_boot: boot.stderr,
        ci95: (lo.min(point.ate), hi.max(point.ate)),
        n_used: point.n_used,
        diagnostics: Diagnostics {
            strata: point.strata,
            n_dropped_strata: point.n_dropped,
            n_bootstrap_failures: boot.n_failures,
        },
    })
}

struct CatePoint<F> {
    pooled: F,
    n_used: usize,
    per_stratum: Vec<(String, Option<F>, usize)>,
}

fn cate_point<F: Real>(
    arrays: &Arrays<F>,
    condition_values: &[F],
    spec: &StratumSpec,
    options: &CausalOptions,
) -> Option<CatePoint<F>> {
    let labels = spec.labels();
    let mut member_lists: Vec<Vec<usize>> = vec![Vec::new(); spec.n_strata()];
    for (i, v) in condition_values.iter().enumerate() {
        let bin = spec.bin_of(v.to_f64_lossy())?;
        member_lists[bin].push(i);
    }
    let mut per_stratum = Vec::with_capacity(labels.len());
    let mut weighted_sum = F::zero();
    let mut n_used = 0usize;
    for (label, members) in labels.into_iter().zip(member_lists) {
        if members.len() < options.min_stratum_n {
            per_stratum.push((label, None, members.len()));
            continue;
        }
        let sub = arrays.take(&members);
        match point_estimate(&sub, options) {
            Ok(p) => {
                weighted_sum = weighted_sum + F::of(p.n_used as f64) * p.ate;
                n_used += p.n_used;
                per_stratum.push((label, Some(p.ate), p.n_used));
            }
            Err(_) => per_stratum.push((label, None, members.len())),
        }
    }
    if n_used == 0 {
        return None;
    }
    Some(CatePoint {
        pooled: weighted_sum / F::of(n_used as f64),
        n_used,
        per_stratum,
    })
}

/// Conditional effects: the ATE estimator run inside each stratum of the
/// conditioning variable. The adjustment set drops the conditioning variable
/// when present; strata below the size floor are flagged undefined.
pub fn estimate_cate<F: Real>(
    data: &Dataset<F>,
    dag: &CausalDag,
    treatment: &str,
    outcome: &str,
    condition: &StratumSpec,
    options: &CausalOptions,
) -> Result<CateEstimate<F>, CausalError> {
    if condition.variable == treatment || condition.variable == outcome {
        return Err(CausalError::ConditionOverlap(condition.variable.clone()));
    }
    condition.validate()?;
    let mut adjustment = choose_adjustment(dag, treatment, outcome, options)?;
    adjustment.retain(|c| *c != condition.variable);

    let arrays = Arrays::extract(data, treatment, outcome, &adjustment, options)?;
    if distinct_count(&arrays.t) < 2 {
        return Err(CausalError::DegenerateTreatment);
    }
    let condition_values = data.column_values(&condition.variable)?;
    let point = cate_point(&arrays, &condition_values, condition, options)
        .ok_or(CausalError::NoValidStrata)?;

    // Bootstrap the pooled value and each stratum from the same resamples.
    let n = arrays.len();
    let draws: Vec<Option<(F, Vec<Option<F>>)>> = (0..options.bootstrap_samples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = crate::rng::stream(options.seed, b, BOOTSTRAP_STREAM_TAG);
            let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let sub = arrays.take(&indices);
            let cond: Vec<F> = indices.iter().map(|&i| condition_values[i]).collect();
            cate_point(&sub, &cond, condition, options).map(|p| {
                (
                    p.pooled,
                    p.per_stratum.into_iter().map(|(_, e, _)| e).collect(),
                )
            })
        })
        .collect();
    let n_failures = draws.iter().filter(|d| d.is_none()).count();
    let successes: Vec<(F, Vec<Option<F>>)> = draws.into_iter().flatten().collect();
    if successes.len() < 2 {
        return Err(CausalError::BootstrapFailed);
    }
    let pooled_draws: Vec<F> = successes.iter().map(|(p, _)| *p).collect();
    let pooled_stats = percentile_stats(&pooled_draws);

    let per_stratum: Vec<CateStratum<F>> = point
        .per_stratum
        .iter()
        .enumerate()
        .map(|(s, (label, effect, n_s))| {
            let series: Vec<F> = successes
                .iter()
                .filter_map(|(_, strata)| strata.get(s).copied().flatten())
                .collect();
            let stderr = if effect.is_some() && series.len() >= 2 {
                Some(percentile_stats(&series).0)
            } else {
                None
            };
            CateStratum {
                label: label.clone(),
                effect: *effect,
                stderr,
                n: *n_s,
            }
        })
        .collect();

    let (stderr, lo, hi) = {
        let (se, (lo, hi)) = pooled_stats;
        (se, lo.min(point.pooled), hi.max(point.pooled))
    };
    Ok(CateEstimate {
        base: EffectEstimate {
            treatment: treatment.to_string(),
            outcome: outcome.to_string(),
            adjustment_set: adjustment,
            estimator: options.estimator,
            treatment_scale: scale_label(treatment, options),
            ate_per_unit: point.pooled,
            stderr_boot: stderr,
            ci95: (lo, hi),
            n_used: point.n_used,
            diagnostics: Diagnostics {
                strata: vec![],
                n_dropped_strata: 0,
                n_bootstrap_failures: n_failures,
            },
        },
        condition: condition.clone(),
        per_stratum,
    })
}

fn percentile_stats<F: Real>(series: &[F]) -> (F, (F, F)) {
    let mean = stable_mean(series);
    let var = stable_sum(series.iter().map(|&v| (v - mean) * (v - mean)))
        / F::of((series.len() - 1).max(1) as f64);
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = sorted.len();
    let lo_idx = ((m as f64) * 0.025).floor() as usize;
    let hi_idx = (((m as f64) * 0.975).ceil() as usize).saturating_sub(1);
    (
        var.sqrt(),
        (sorted[lo_idx.min(m - 1)], sorted[hi_idx.min(m - 1)]),
    )
}

/// One adjusted estimate per (rcp, kpi) pair implicated by an indirect or
/// implicit finding. Per-pair failures are recorded on the entry.
pub fn effect_matrix<F: Real>(
    data: &Dataset<F>,
    dag: &CausalDag,
    report: &ConflictReport,
    options: &CausalOptions,
) -> Vec<EffectEntry<F>> {
    report
        .effect_pairs()
        .into_iter()
        .map(|(treatment, outcome)| {
            match estimate_ate(data, dag, &treatment, &outcome, options) {
                Ok(e) => EffectEntry {
                    treatment,
                    outcome,
                    estimate: Some(e),
                    error: None,
                },
                Err(e) => EffectEntry {
                    treatment,
                    outcome,
                    estimate: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confgraph::NodeRole;
    use crate::dataset::{ColumnRole, ColumnSpec, EpisodeRecord, Provenance, Schema, StratumBins};

    /// Weighted empirical joint over binary (c, t, y): `counts[c][t][y]`.
    fn binary_dataset(counts: [[[usize; 2]; 2]; 2]) -> Dataset<f64> {
        let schema = Schema::new(vec![
            ColumnSpec {
                name: "c".into(),
                role: ColumnRole::Context,
                kind: ValueKind::DiscreteSet {
                    levels: vec![0.0, 1.0],
                },
            },
            ColumnSpec {
                name: "t".into(),
                role: ColumnRole::Rcp,
                kind: ValueKind::DiscreteSet {
                    levels: vec![0.0, 1.0],
                },
            },
            ColumnSpec {
                name: "y".into(),
                role: ColumnRole::Kpi,
                kind: ValueKind::DiscreteSet {
                    levels: vec![0.0, 1.0],
                },
            },
        ])
        .unwrap();
        let mut records = Vec::new();
        let mut id = 0u64;
        for c in 0..2 {
            for t in 0..2 {
                for y in 0..2 {
                    for _ in 0..counts[c][t][y] {
                        records.push(EpisodeRecord {
                            episode_id: id,
                            values: vec![c as f64, t as f64, y as f64],
                        });
                        id += 1;
                    }
                }
            }
        }
        Dataset::new(schema, records, Provenance::default()).unwrap()
    }

    fn triangle_dag() -> CausalDag {
        CausalDag::new(
            vec![
                ("c".into(), NodeRole::Context),
                ("t".into(), NodeRole::Rcp),
                ("y".into(), NodeRole::Kpi),
            ],
            vec![
                ("c".into(), "t".into()),
                ("c".into(), "y".into()),
                ("t".into(), "y".into()),
            ],
        )
        .unwrap()
    }

    /// Hand-computed backdoor adjustment on the empirical table:
    /// sum_c (E[y | t=1, c] - E[y | t=0, c]) * P(c).
    fn backdoor_sum(counts: [[[usize; 2]; 2]; 2]) -> f64 {
        let mut total = 0usize;
        let mut acc = 0.0;
        for c in 0..2 {
            let n_c: usize = (0..2).map(|t| counts[c][t][0] + counts[c][t][1]).sum();
            total += n_c;
            let mean_y = |t: usize| {
                counts[c][t][1] as f64 / (counts[c][t][0] + counts[c][t][1]) as f64
            };
            acc += (mean_y(1) - mean_y(0)) * n_c as f64;
        }
        acc / total as f64
    }

    fn fast_options() -> CausalOptions {
        CausalOptions {
            bootstrap_samples: 50,
            seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn stratified_matches_analytic_backdoor_sum_exactly() {
        let counts = [
            [[30, 20], [25, 45]], // c = 0
            [[40, 80], [10, 50]], // c = 1
        ];
        let data = binary_dataset(counts);
        let est = estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()).unwrap();
        assert_eq!(est.adjustment_set, vec!["c".to_string()]);
        let expected = backdoor_sum(counts);
        assert!(
            (est.ate_per_unit - expected).abs() <= 1e-12,
            "{} vs {}",
            est.ate_per_unit,
            expected
        );
        assert_eq!(est.n_used, data.len());
    }

    #[test]
    fn linear_and_stratified_agree_on_binary_confounder() {
        let counts = [[[50, 10], [20, 40]], [[30, 60], [15, 45]]];
        let data = binary_dataset(counts);
        let strat = estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()).unwrap();
        let linear = estimate_ate(
            &data,
            &triangle_dag(),
            "t",
            "y",
            &CausalOptions {
                estimator: Estimator::Linear,
                ..fast_options()
            },
        )
        .unwrap();
        // Same adjustment, similar estimates; linear is a cross-check, not
        // an identity.
        assert!((strat.ate_per_unit - linear.ate_per_unit).abs() < 0.1);
    }

    #[test]
    fn constant_treatment_is_degenerate() {
        let counts = [[[30, 20], [0, 0]], [[40, 80], [0, 0]]];
        let data = binary_dataset(counts);
        assert!(matches!(
            estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()),
            Err(CausalError::DegenerateTreatment)
        ));
    }

    #[test]
    fn affine_outcome_scaling_is_exact_for_powers_of_two() {
        let counts = [[[30, 20], [25, 45]], [[40, 80], [10, 50]]];
        let mut data = binary_dataset(counts);
        let base = estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()).unwrap();
        // y -> 2 y: every float op scales exactly.
        let y_idx = data.schema.index_of("y").unwrap();
        data.schema.columns[y_idx].kind = ValueKind::Real { lo: None, hi: None };
        for r in &mut data.records {
            r.values[y_idx] *= 2.0;
        }
        let scaled = estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()).unwrap();
        assert_eq!(scaled.ate_per_unit, 2.0 * base.ate_per_unit);
        assert_eq!(scaled.stderr_boot, 2.0 * base.stderr_boot);
    }

    #[test]
    fn linear_estimator_scales_affinely_too() {
        let counts = [[[30, 20], [25, 45]], [[40, 80], [10, 50]]];
        let mut data = binary_dataset(counts);
        let options = CausalOptions {
            estimator: Estimator::Linear,
            ..fast_options()
        };
        let base = estimate_ate(&data, &triangle_dag(), "t", "y", &options).unwrap();
        let y_idx = data.schema.index_of("y").unwrap();
        data.schema.columns[y_idx].kind = ValueKind::Real { lo: None, hi: None };
        for r in &mut data.records {
            r.values[y_idx] = 3.0 * r.values[y_idx] + 7.0;
        }
        let scaled = estimate_ate(&data, &triangle_dag(), "t", "y", &options).unwrap();
        assert!((scaled.ate_per_unit - 3.0 * base.ate_per_unit).abs() <= 1e-9);
    }

    #[test]
    fn treatment_rescaling_inverts_the_effect() {
        let counts = [[[30, 20], [25, 45]], [[40, 80], [10, 50]]];
        let mut data = binary_dataset(counts);
        let base = estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()).unwrap();
        let t_idx = data.schema.index_of("t").unwrap();
        data.schema.columns[t_idx].kind = ValueKind::DiscreteSet {
            levels: vec![0.0, 2.0],
        };
        for r in &mut data.records {
            r.values[t_idx] *= 2.0;
        }
        let scaled = estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()).unwrap();
        assert!((scaled.ate_per_unit - base.ate_per_unit / 2.0).abs() <= 1e-9);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let counts = [[[30, 20], [25, 45]], [[40, 80], [10, 50]]];
        let data = binary_dataset(counts);
        let a = estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()).unwrap();
        let b = estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()).unwrap();
        assert_eq!(a, b);
        let c = estimate_ate(
            &data,
            &triangle_dag(),
            "t",
            "y",
            &CausalOptions {
                seed: 10,
                ..fast_options()
            },
        )
        .unwrap();
        assert_ne!(a.ci95, c.ci95);
    }

    #[test]
    fn ci_contains_the_point_estimate() {
        let counts = [[[30, 20], [25, 45]], [[40, 80], [10, 50]]];
        let data = binary_dataset(counts);
        let est = estimate_ate(&data, &triangle_dag(), "t", "y", &fast_options()).unwrap();
        assert!(est.ci95.0 <= est.ate_per_unit && est.ate_per_unit <= est.ci95.1);
    }

    #[test]
    fn single_stratum_cate_equals_the_ate() {
        let counts = [[[30, 20], [25, 45]], [[40, 80], [10, 50]]];
        let data = binary_dataset(counts);
        let options = fast_options();
        // Condition on c with one catch-all bin; adjustment drops c, so each
        // estimate is the plain slope over everything.
        let condition = StratumSpec {
            variable: "c".into(),
            bins: StratumBins::Edges(vec![-0.5, 1.5]),
        };
        let cate =
            estimate_cate(&data, &triangle_dag(), "t", "y", &condition, &options).unwrap();
        assert_eq!(cate.per_stratum.len(), 1);
        let unadjusted = estimate_ate(
            &data,
            &triangle_dag(),
            "t",
            "y",
            &CausalOptions {
                adjustment_override: Some(vec![]),
                ..options
            },
        )
        .unwrap();
        let only = cate.per_stratum[0].effect.unwrap();
        assert!((only - unadjusted.ate_per_unit).abs() <= 1e-12);
        assert!((cate.base.ate_per_unit - only).abs() <= 1e-12);
    }

    #[test]
    fn weighted_stratum_mean_matches_jointly_stratified_ate() {
        let counts = [[[30, 20], [25, 45]], [[40, 80], [10, 50]]];
        let data = binary_dataset(counts);
        let options = fast_options();
        let condition = StratumSpec {
            variable: "c".into(),
            bins: StratumBins::Levels(vec![0.0, 1.0]),
        };
        // CATE by c with empty within-stratum adjustment...
        let cate =
            estimate_cate(&data, &triangle_dag(), "t", "y", &condition, &options).unwrap();
        // ...must pool to the ATE stratified over the same variable.
        let ate = estimate_ate(&data, &triangle_dag(), "t", "y", &options).unwrap();
        let weighted: f64 = cate
            .per_stratum
            .iter()
            .filter_map(|s| s.effect.map(|e| e * s.n as f64))
            .sum::<f64>()
            / cate.per_stratum.iter().map(|s| s.n).sum::<usize>() as f64;
        assert!((weighted - ate.ate_per_unit).abs() <= 1e-6);
        assert!((cate.base.ate_per_unit - weighted).abs() <= 1e-9);
    }

    #[test]
    fn condition_overlapping_treatment_is_rejected() {
        let counts = [[[30, 20], [25, 45]], [[40, 80], [10, 50]]];
        let data = binary_dataset(counts);
        let condition = StratumSpec {
            variable: "t".into(),
            bins: StratumBins::Levels(vec![0.0, 1.0]),
        };
        assert!(matches!(
            estimate_cate(&data, &triangle_dag(), "t", "y", &condition, &fast_options()),
            Err(CausalError::ConditionOverlap(_))
        ));
    }

    #[test]
    fn empty_conflict_report_yields_empty_matrix() {
        let counts = [[[30, 20], [25, 45]], [[40, 80], [10, 50]]];
        let data = binary_dataset(counts);
        let entries = effect_matrix(
            &data,
            &triangle_dag(),
            &ConflictReport::default(),
            &fast_options(),
        );
        assert!(entries.is_empty());
    }

    #[test]
    fn solver_handles_a_known_system() {
        let mut a = vec![
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ];
        let mut b = vec![8.0, -11.0, -3.0];
        let x: Vec<f64> = solve(&mut a, &mut b).unwrap();
        let expect = [2.0f64, 3.0, -1.0];
        for (xi, ei) in x.iter().zip(expect) {
            assert!((xi - ei).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_design_is_detected() {
        let mut a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let mut b = vec![1.0, 2.0];
        assert!(matches!(
            solve(&mut a, &mut b),
            Err(CausalError::SingularDesign)
        ));
    }
}
