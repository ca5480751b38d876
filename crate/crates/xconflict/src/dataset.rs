//! Observational dataset: schema with column roles, CSV persistence with a
//! JSON sidecar for roles and provenance, seeded splitting, and
//! stratification used by the conditional-effect estimators.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::simkernel::SimConfig;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("schema needs at least one `{0}` column")]
    MissingRoleColumn(&'static str),
    #[error("record {episode_id}: expected {expected} values, got {got}")]
    ArityMismatch {
        episode_id: u64,
        expected: usize,
        got: usize,
    },
    #[error("record {episode_id}, column `{column}`: value {value} outside declared domain")]
    DomainViolation {
        episode_id: u64,
        column: String,
        value: f64,
    },
    #[error("duplicate episode_id {0}")]
    DuplicateEpisodeId(u64),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{path}, row {row}, column `{column}`: {msg}")]
    ParseCell {
        path: PathBuf,
        row: usize,
        column: String,
        msg: String,
    },
    #[error("train fraction {0} outside (0, 1)")]
    FractionOutOfRange(f64),
    #[error("stratum bins for `{column}`: {msg}")]
    BadBins { column: String, msg: String },
    #[error("column `{column}`: value {value} falls outside declared bins")]
    ValueOutsideBins { column: String, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Rcp,
    Context,
    Kpi,
}

/// Declared value domain of a column. Discrete sets and integer ranges are
/// validated exactly; real ranges check optional bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ValueKind {
    DiscreteSet { levels: Vec<f64> },
    IntegerRange { lo: i64, hi: i64 },
    Real { lo: Option<f64>, hi: Option<f64> },
}

impl ValueKind {
    pub fn contains(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            ValueKind::DiscreteSet { levels } => levels.iter().any(|&l| l == v),
            ValueKind::IntegerRange { lo, hi } => {
                v.fract() == 0.0 && v >= *lo as f64 && v <= *hi as f64
            }
            ValueKind::Real { lo, hi } => {
                lo.map_or(true, |l| v >= l) && hi.map_or(true, |h| v <= h)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: ColumnRole,
    pub kind: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.clone()) {
                return Err(DataError::DuplicateColumn(c.name.clone()));
            }
        }
        for (role, label) in [(ColumnRole::Rcp, "rcp"), (ColumnRole::Kpi, "kpi")] {
            if !columns.iter().any(|c| c.role == role) {
                return Err(DataError::MissingRoleColumn(label));
            }
        }
        Ok(Schema { columns })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn names_with_role(&self, role: ColumnRole) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.role == role)
            .map(|c| c.name.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord<F> {
    pub episode_id: u64,
    pub values: Vec<F>,
}

/// Where the records came from: the generating configuration, an optional
/// timestamp (left unset by default so reruns stay byte-identical), and the
/// number of feasibility clamps applied during generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub sim_config: Option<SimConfig>,
    pub created_utc: Option<String>,
    #[serde(default)]
    pub clamp_events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    pub schema: Schema,
    pub records: Vec<EpisodeRecord<F>>,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    format_version: u32,
    schema: Schema,
    provenance: Provenance,
}

const META_FORMAT_VERSION: u32 = 1;

/// Shortest decimal form that parses back to the same value; integral values
/// print without a fractional part.
pub(crate) fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 && (v != 0.0 || v.is_sign_positive()) {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl<F: Real> Dataset<F> {
    pub fn new(
        schema: Schema,
        records: Vec<EpisodeRecord<F>>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        let mut ids = BTreeSet::new();
        for r in &records {
            if r.values.len() != schema.columns.len() {
                return Err(DataError::ArityMismatch {
                    episode_id: r.episode_id,
                    expected: schema.columns.len(),
                    got: r.values.len(),
                });
            }
            if !ids.insert(r.episode_id) {
                return Err(DataError::DuplicateEpisodeId(r.episode_id));
            }
            for (spec, v) in schema.columns.iter().zip(&r.values) {
                let v = v.to_f64_lossy();
                if !spec.kind.contains(v) {
                    return Err(DataError::DomainViolation {
                        episode_id: r.episode_id,
                        column: spec.name.clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(Dataset {
            schema,
            records,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// All values of one column, in record order.
    pub fn column_values(&self, name: &str) -> Result<Vec<F>, DataError> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))?;
        Ok(self.records.iter().map(|r| r.values[idx]).collect())
    }

    /// Row-major matrix of the named columns, in record order.
    pub fn rows(&self, names: &[String]) -> Result<Vec<Vec<F>>, DataError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.schema
                    .index_of(n)
                    .ok_or_else(|| DataError::UnknownColumn(n.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(self
            .records
            .iter()
            .map(|r| idx.iter().map(|&i| r.values[i]).collect())
            .collect())
    }

    fn meta_path(path: &Path) -> PathBuf {
        path.with_extension("meta.json")
    }

    /// Write `path` as RFC-4180 CSV plus a `.meta.json` sidecar carrying the
    /// schema roles and provenance. `load(save(d)) == d`.
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let meta = DatasetMeta {
            format_version: META_FORMAT_VERSION,
            schema: self.schema.clone(),
            provenance: self.provenance.clone(),
        };
        let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
        fs::write(Self::meta_path(path), meta_json)?;

        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["episode_id".to_string()];
        header.extend(self.schema.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)
            .map_err(|e| csv_err(path, e))?;
        for r in &self.records {
            let mut row = vec![r.episode_id.to_string()];
            row.extend(r.values.iter().map(|v| fmt_value(v.to_f64_lossy())));
            w.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let meta_path = Self::meta_path(path);
        let meta_raw = fs::read_to_string(&meta_path).map_err(|e| DataError::Parse {
            path: meta_path.clone(),
            msg: format!("missing or unreadable sidecar: {e}"),
        })?;
        let meta: DatasetMeta = serde_json::from_str(&meta_raw).map_err(|e| DataError::Parse {
            path: meta_path.clone(),
            msg: e.to_string(),
        })?;

        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let header = rdr
            .headers()
            .map_err(|e| csv_err(path, e))?
            .clone();
        let mut expected = vec!["episode_id".to_string()];
        expected.extend(meta.schema.columns.iter().map(|c| c.name.clone()));
        for name in &expected {
            if !header.iter().any(|h| h == name) {
                return Err(DataError::Parse {
                    path: path.to_path_buf(),
                    msg: format!("header missing column `{name}`"),
                });
            }
        }
        if header.len() != expected.len() {
            return Err(DataError::Parse {
                path: path.to_path_buf(),
                msg: format!(
                    "header has {} columns, schema declares {}",
                    header.len(),
                    expected.len()
                ),
            });
        }
        // Column order in the file may differ from the schema; map positions.
        let positions: Vec<usize> = expected
            .iter()
            .map(|name| header.iter().position(|h| h == name).unwrap())
            .collect();

        let mut records = Vec::new();
        for (row_idx, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let row = row_idx + 2; // 1-based, after header
            if rec.len() != expected.len() {
                return Err(DataError::Parse {
                    path: path.to_path_buf(),
                    msg: format!("row {row}: expected {} fields, got {}", expected.len(), rec.len()),
                });
            }
            let get = |slot: usize| rec.get(positions[slot]).unwrap();
            let episode_id: u64 = get(0).parse().map_err(|e| DataError::ParseCell {
                path: path.to_path_buf(),
                row,
                column: "episode_id".to_string(),
                msg: format!("{e}"),
            })?;
            let mut values = Vec::with_capacity(meta.schema.columns.len());
            for (slot, col) in meta.schema.columns.iter().enumerate() {
                let raw = get(slot + 1);
                let v: f64 = raw.parse().map_err(|e| DataError::ParseCell {
                    path: path.to_path_buf(),
                    row,
                    column: col.name.clone(),
                    msg: format!("{e}"),
                })?;
                values.push(F::of(v));
            }
            records.push(EpisodeRecord { episode_id, values });
        }
        Dataset::new(meta.schema, records, meta.provenance)
    }

    /// Seeded permutation split. Record order is preserved within each part;
    /// the parts are disjoint and their union is the input.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Self, Self), DataError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(DataError::FractionOutOfRange(train_fraction));
        }
        let n = self.records.len();
        let n_train = ((train_fraction * n as f64).round() as usize).min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut crate::rng::seeded(seed));
        let chosen: BTreeSet<usize> = idx.into_iter().take(n_train).collect();
        let mut train = Vec::with_capacity(n_train);
        let mut test = Vec::with_capacity(n - n_train);
        for (i, r) in self.records.iter().enumerate() {
            if chosen.contains(&i) {
                train.push(r.clone());
            } else {
                test.push(r.clone());
            }
        }
        let mk = |records| Dataset {
            schema: self.schema.clone(),
            records,
            provenance: self.provenance.clone(),
        };
        Ok((mk(train), mk(test)))
    }

    /// Seeded subsample of `n` records without replacement, record order
    /// preserved. Returns the whole dataset when `n >= len`.
    pub fn subsample(&self, n: usize, seed: u64) -> Self {
        if n >= self.records.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.records.len()).collect();
        idx.shuffle(&mut crate::rng::seeded(seed));
        let chosen: BTreeSet<usize> = idx.into_iter().take(n).collect();
        Dataset {
            schema: self.schema.clone(),
            records: chosen.iter().map(|&i| self.records[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn stratify(&self, spec: &StratumSpec) -> Result<StratumMap, DataError> {
        let values = self.column_values(&spec.variable)?;
        spec.validate()?;
        let labels = spec.labels();
        let mut strata: Vec<Stratum> = labels
            .into_iter()
            .map(|label| Stratum {
                label,
                indices: Vec::new(),
            })
            .collect();
        for (i, v) in values.iter().enumerate() {
            let v = v.to_f64_lossy();
            let slot = spec
                .bin_of(v)
                .ok_or_else(|| DataError::ValueOutsideBins {
                    column: spec.variable.clone(),
                    value: v,
                })?;
            strata[slot].indices.push(i);
        }
        Ok(StratumMap {
            variable: spec.variable.clone(),
            strata,
        })
    }
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    DataError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// Conditioning specification: either explicit discrete levels or ascending
/// real bin edges. Every record must map to exactly one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    pub variable: String,
    pub bins: StratumBins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumBins {
    Levels(Vec<f64>),
    Edges(Vec<f64>),
}

impl StratumSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        match &self.bins {
            StratumBins::Levels(levels) if levels.is_empty() => Err(DataError::BadBins {
                column: self.variable.clone(),
                msg: "empty level list".to_string(),
            }),
            StratumBins::Edges(edges) if edges.len() < 2 => Err(DataError::BadBins {
                column: self.variable.clone(),
                msg: "need at least two edges".to_string(),
            }),
            StratumBins::Edges(edges) if edges.windows(2).any(|w| w[0] >= w[1]) => {
                Err(DataError::BadBins {
                    column: self.variable.clone(),
                    msg: "edges must be strictly ascending".to_string(),
                })
            }
            _ => Ok(()),
        }
    }

    pub fn n_strata(&self) -> usize {
        match &self.bins {
            StratumBins::Levels(levels) => levels.len(),
            StratumBins::Edges(edges) => edges.len() - 1,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match &self.bins {
            StratumBins::Levels(levels) => levels
                .iter()
                .map(|l| format!("{}={}", self.variable, fmt_value(*l)))
                .collect(),
            StratumBins::Edges(edges) => (0..edges.len() - 1)
                .map(|i| {
                    let close = if i + 2 == edges.len() { "]" } else { ")" };
                    format!(
                        "{}∈[{},{}{close}",
                        self.variable,
                        fmt_value(edges[i]),
                        fmt_value(edges[i + 1])
                    )
                })
                .collect(),
        }
    }

    /// Stratum index for a value; `None` when it falls outside the bins.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        match &self.bins {
            StratumBins::Levels(levels) => levels.iter().position(|&l| l == v),
            StratumBins::Edges(edges) => {
                let last = edges.len() - 2;
                for i in 0..=last {
                    let hi_ok = if i == last {
                        v <= edges[i + 1]
                    } else {
                        v < edges[i + 1]
                    };
                    if v >= edges[i] && hi_ok {
                        return Some(i);
                    }
                }
                None
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub label: String,
    pub indices: Vec<usize>,
}

/// Exhaustive, disjoint partition of record indices. Declared strata with no
/// records are kept with an empty index list.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumMap {
    pub variable: String,
    pub strata: Vec<Stratum>,
}

impl StratumMap {
    pub fn get(&self, label: &str) -> Option<&Stratum> {
        self.strata.iter().find(|s| s.label == label)
    }
}
