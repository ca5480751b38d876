//! One versioned JSON config drives every stage; its hash is embedded in all
//! analysis outputs so runs are attributable and reproducible.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::causal::{CausalOptions, Estimator};
use crate::confgraph::XApp;
use crate::dataset::{ColumnRole, StratumBins, StratumSpec};
use crate::regressor::GbtHyperParams;
use crate::simkernel::{table_schema, DgpConstants, RcpName, SimConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSection {
    pub n_episodes: u32,
    pub frames_per_episode: u32,
    pub dgp: DgpConstants,
    #[serde(default)]
    pub do_overrides: BTreeMap<RcpName, f64>,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            n_episodes: 1000,
            frames_per_episode: 100,
            dgp: DgpConstants::default(),
            do_overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub xapps: Vec<XApp>,
    pub structural_edges: Vec<(String, String)>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        // Applications with competing objectives: two power controllers (a
        // direct conflict), a booster driving PRBs and antennas, and a
        // spectral-efficiency tuner on bandwidth, which structurally caps
        // the PRB range.
        ScenarioSection {
            xapps: vec![
                XApp {
                    id: "energy_saver".into(),
                    name: "Energy Saver".into(),
                    controlled_rcps: vec!["tx_power_dbm".into()],
                    target_kpis: vec!["bler".into()],
                },
                XApp {
                    id: "power_guard".into(),
                    name: "Coverage Power Guard".into(),
                    controlled_rcps: vec!["tx_power_dbm".into()],
                    target_kpis: vec!["throughput_mbps".into()],
                },
                XApp {
                    id: "se_optimizer".into(),
                    name: "Spectral Efficiency Optimizer".into(),
                    controlled_rcps: vec!["bandwidth_mhz".into()],
                    target_kpis: vec!["spectral_efficiency_bps_hz".into()],
                },
                XApp {
                    id: "throughput_booster".into(),
                    name: "Throughput Booster".into(),
                    controlled_rcps: vec!["num_prbs".into(), "num_tx_antennas".into()],
                    target_kpis: vec!["throughput_mbps".into()],
                },
            ],
            structural_edges: vec![("bandwidth_mhz".into(), "num_prbs".into())],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    #[serde(flatten)]
    pub hyper: GbtHyperParams,
    pub train_fraction: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hyper: GbtHyperParams::default(),
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSection {
    pub background_size: usize,
    pub eval_samples: usize,
    /// Minimum normalized share for an attribution to become a DAG edge.
    pub tau: f64,
    #[serde(default)]
    pub dump_attributions: bool,
}

impl Default for ShapSection {
    fn default() -> Self {
        ShapSection {
            background_size: 100,
            eval_samples: 200,
            tau: 0.1,
            dump_attributions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalSection {
    pub estimator: Estimator,
    pub bootstrap_samples: usize,
    pub min_stratum_n: usize,
    pub quantile_bins: usize,
    pub max_adjustment_size: usize,
    pub log2_columns: Vec<String>,
    pub cate_conditions: Vec<StratumSpec>,
}

impl Default for CausalSection {
    fn default() -> Self {
        CausalSection {
            estimator: Estimator::Stratified,
            bootstrap_samples: 200,
            min_stratum_n: 20,
            quantile_bins: 5,
            max_adjustment_size: 4,
            log2_columns: vec!["num_tx_antennas".into()],
            cate_conditions: vec![StratumSpec {
                variable: "ue_distance_m".into(),
                bins: StratumBins::Edges(vec![10.0, 100.0, 200.0, 300.0]),
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct IoSection {
    /// Default output directory; the `--out` flag overrides it.
    #[serde(default)]
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub version: u32,
    pub master_seed: u64,
    pub sim: SimSection,
    pub scenario: ScenarioSection,
    pub model: ModelSection,
    pub shap: ShapSection,
    pub causal: CausalSection,
    #[serde(default)]
    pub io: IoSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            master_seed: 42,
            sim: SimSection::default(),
            scenario: ScenarioSection::default(),
            model: ModelSection::default(),
            shap: ShapSection::default(),
            causal: CausalSection::default(),
            io: IoSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let config: PipelineConfig = serde_json::from_str(&raw)
            .map_err(|e| format!("cannot parse config {}: {e}", path.display()))?;
        Ok(config)
    }

    /// Assemble the simulator configuration from the sim section plus the
    /// effective master seed.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n_episodes: self.sim.n_episodes,
            frames_per_episode: self.sim.frames_per_episode,
            master_seed: self.master_seed,
            dgp: self.sim.dgp.clone(),
            do_overrides: self.sim.do_overrides.clone(),
        }
    }

    pub fn causal_options(&self) -> CausalOptions {
        CausalOptions {
            estimator: self.causal.estimator,
            bootstrap_samples: self.causal.bootstrap_samples,
            min_stratum_n: self.causal.min_stratum_n,
            quantile_bins: self.causal.quantile_bins,
            max_adjustment_size: self.causal.max_adjustment_size,
            seed: crate::rng::stage_seed(self.master_seed, "bootstrap"),
            adjustment_override: None,
            log2_columns: self.causal.log2_columns.clone(),
        }
    }

    /// SHA-256 of the canonical JSON form. Every analysis artifact embeds
    /// this value; equal hashes imply byte-identical outputs.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        self.sim_config().validate().map_err(|e| e.to_string())?;
        if !(self.model.train_fraction > 0.0 && self.model.train_fraction < 1.0) {
            return Err(format!(
                "model.train_fraction {} outside (0, 1)",
                self.model.train_fraction
            ));
        }
        if self.model.hyper.n_trees == 0 {
            return Err("model.n_trees must be >= 1".into());
        }
        if !(self.shap.tau > 0.0 && self.shap.tau < 1.0) {
            return Err(format!("shap.tau {} outside (0, 1)", self.shap.tau));
        }
        if self.shap.background_size < crate::shapley::MIN_BACKGROUND {
            return Err(format!(
                "shap.background_size must be >= {}",
                crate::shapley::MIN_BACKGROUND
            ));
        }
        if self.shap.eval_samples == 0 {
            return Err("shap.eval_samples must be >= 1".into());
        }
        if self.causal.bootstrap_samples < 2 {
            return Err("causal.bootstrap_samples must be >= 2".into());
        }
        if self.causal.min_stratum_n < 2 {
            return Err("causal.min_stratum_n must be >= 2".into());
        }
        if self.causal.quantile_bins < 2 {
            return Err("causal.quantile_bins must be >= 2".into());
        }

        let schema = table_schema();
        let rcp_names = schema.names_with_role(ColumnRole::Rcp);
        let kpi_names = schema.names_with_role(ColumnRole::Kpi);
        let mut seen_ids = std::collections::BTreeSet::new();
        for xapp in &self.scenario.xapps {
            if xapp.id.is_empty() {
                return Err("scenario xapp with empty id".into());
            }
            if !seen_ids.insert(xapp.id.clone()) {
                return Err(format!("duplicate xapp id `{}`", xapp.id));
            }
            for rcp in &xapp.controlled_rcps {
                if !rcp_names.contains(rcp) {
                    return Err(format!(
                        "xapp `{}` controls unknown rcp column `{rcp}`",
                        xapp.id
                    ));
                }
            }
            for kpi in &xapp.target_kpis {
                if !kpi_names.contains(kpi) {
                    return Err(format!(
                        "xapp `{}` targets unknown kpi column `{kpi}`",
                        xapp.id
                    ));
                }
            }
        }
        for (from, to) in &self.scenario.structural_edges {
            if !rcp_names.contains(from) || !rcp_names.contains(to) {
                return Err(format!(
                    "structural edge {from} -> {to} must connect rcp columns"
                ));
            }
        }
        for spec in &self.causal.cate_conditions {
            if schema.column(&spec.variable).is_none() {
                return Err(format!(
                    "cate condition on unknown column `{}`",
                    spec.variable
                ));
            }
            spec.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}
