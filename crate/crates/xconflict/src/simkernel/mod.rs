//! Surrogate RAN simulator: samples control-parameter assignments, produces
//! KPIs through a pinned analytic link budget, and supports interventional
//! `do()` runs that serve as a ground-truth causal oracle.

mod linkbudget;
mod oracle;

pub use linkbudget::{
    prb_max, spectral_efficiency_bps_hz, throughput_mbps, LinkBudget, ANTENNA_COUNTS,
    BANDWIDTHS_MHZ, MIN_PRBS, SCS_KHZ, SUBCARRIERS_PER_PRB, TX_POWER_RANGE_DBM,
    UE_DISTANCE_RANGE_M,
};
pub use oracle::{oracle_ate, oracle_ate_conditional, OracleEstimate};

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confgraph::{CausalDag, NodeRole};
use crate::dataset::{
    ColumnRole, ColumnSpec, Dataset, EpisodeRecord, Provenance, Schema, ValueKind,
};
use crate::rng::{stream, STREAM_FADE, STREAM_SAMPLE};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unsupported bandwidth {0} MHz")]
    UnsupportedBandwidth(u32),
    #[error("override for {rcp}: value {value} outside the parameter domain ({reason})")]
    BadOverride {
        rcp: RcpName,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("oracle delta must be nonzero")]
    ZeroDelta,
    #[error("empty oracle sample: every interventional pair was clamped or filtered")]
    EmptyOracleSample,
    #[error(transparent)]
    Data(#[from] crate::dataset::DataError),
}

/// Control parameters an application can set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RcpName {
    #[serde(rename = "bandwidth_mhz")]
    Bandwidth,
    #[serde(rename = "num_prbs")]
    NumPrbs,
    #[serde(rename = "tx_power_dbm")]
    TxPower,
    #[serde(rename = "num_tx_antennas")]
    NumTxAntennas,
}

impl RcpName {
    pub const ALL: [RcpName; 4] = [
        RcpName::Bandwidth,
        RcpName::NumPrbs,
        RcpName::TxPower,
        RcpName::NumTxAntennas,
    ];

    pub fn column(&self) -> &'static str {
        match self {
            RcpName::Bandwidth => "bandwidth_mhz",
            RcpName::NumPrbs => "num_prbs",
            RcpName::TxPower => "tx_power_dbm",
            RcpName::NumTxAntennas => "num_tx_antennas",
        }
    }

    pub fn parse(s: &str) -> Option<RcpName> {
        Self::ALL.into_iter().find(|r| r.column() == s)
    }
}

impl std::fmt::Display for RcpName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.column())
    }
}

/// Observed performance indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KpiName {
    #[serde(rename = "throughput_mbps")]
    Throughput,
    #[serde(rename = "spectral_efficiency_bps_hz")]
    SpectralEfficiency,
    #[serde(rename = "bler")]
    Bler,
}

impl KpiName {
    pub const ALL: [KpiName; 3] = [
        KpiName::Throughput,
        KpiName::SpectralEfficiency,
        KpiName::Bler,
    ];

    pub fn column(&self) -> &'static str {
        match self {
            KpiName::Throughput => "throughput_mbps",
            KpiName::SpectralEfficiency => "spectral_efficiency_bps_hz",
            KpiName::Bler => "bler",
        }
    }

    pub fn parse(s: &str) -> Option<KpiName> {
        Self::ALL.into_iter().find(|k| k.column() == s)
    }
}

impl std::fmt::Display for KpiName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.column())
    }
}

/// One control-parameter assignment. `num_prbs <= prb_max(bandwidth_mhz)`
/// always holds for values produced by this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcpAssignment {
    pub bandwidth_mhz: u32,
    pub num_prbs: u32,
    pub tx_power_dbm: i32,
    pub num_tx_antennas: u32,
}

impl RcpAssignment {
    pub fn get(&self, rcp: RcpName) -> f64 {
        match rcp {
            RcpName::Bandwidth => self.bandwidth_mhz as f64,
            RcpName::NumPrbs => self.num_prbs as f64,
            RcpName::TxPower => self.tx_power_dbm as f64,
            RcpName::NumTxAntennas => self.num_tx_antennas as f64,
        }
    }
}

/// Exogenous per-episode state observed alongside the assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextState {
    pub ue_distance_m: f64,
    pub shadowing_db: f64,
    pub episode_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord<F> {
    pub throughput_mbps: F,
    pub spectral_efficiency_bps_hz: F,
    pub bler: F,
}

impl<F: Real> KpiRecord<F> {
    pub fn get(&self, kpi: KpiName) -> F {
        match kpi {
            KpiName::Throughput => self.throughput_mbps,
            KpiName::SpectralEfficiency => self.spectral_efficiency_bps_hz,
            KpiName::Bler => self.bler,
        }
    }
}

/// Pinned constants of the data-generating process. Serialized with every
/// dataset so downstream stages can reproduce the generating run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConstants {
    pub pathloss_offset_db: f64,
    pub pathloss_distance_coef: f64,
    pub pathloss_freq_coef: f64,
    pub carrier_freq_ghz: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub shadowing_sigma_db: f64,
    pub fade_sigma_db: f64,
    pub link_margin_db: f64,
    pub se_cap_bps_hz: f64,
}

impl Default for DgpConstants {
    fn default() -> Self {
        DgpConstants {
            pathloss_offset_db: 32.4,
            pathloss_distance_coef: 21.0,
            pathloss_freq_coef: 20.0,
            carrier_freq_ghz: 2.6,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 7.0,
            shadowing_sigma_db: 4.0,
            fade_sigma_db: 2.0,
            link_margin_db: 3.0,
            se_cap_bps_hz: 7.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_episodes: u32,
    pub frames_per_episode: u32,
    pub master_seed: u64,
    pub dgp: DgpConstants,
    /// Interventions forced after sampling. `num_prbs` overrides are clamped
    /// to the feasible range of the (final) bandwidth and the clamp counted.
    #[serde(default)]
    pub do_overrides: BTreeMap<RcpName, f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_episodes: 1000,
            frames_per_episode: 100,
            master_seed: 42,
            dgp: DgpConstants::default(),
            do_overrides: BTreeMap::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_episodes < 1 {
            return Err(SimError::BadConfig("n_episodes must be >= 1".into()));
        }
        if self.frames_per_episode < 1 {
            return Err(SimError::BadConfig(
                "frames_per_episode must be >= 1".into(),
            ));
        }
        for (&rcp, &value) in &self.do_overrides {
            validate_override(rcp, value)?;
        }
        Ok(())
    }
}

fn is_integer(v: f64) -> bool {
    v.is_finite() && v.fract() == 0.0
}

fn validate_override(rcp: RcpName, value: f64) -> Result<(), SimError> {
    let bad = |reason| SimError::BadOverride { rcp, value, reason };
    match rcp {
        RcpName::Bandwidth => {
            if !is_integer(value) || !BANDWIDTHS_MHZ.contains(&(value as u32)) {
                return Err(bad("not a supported bandwidth"));
            }
        }
        RcpName::TxPower => {
            let (lo, hi) = TX_POWER_RANGE_DBM;
            if !is_integer(value) || value < lo as f64 || value > hi as f64 {
                return Err(bad("outside the integer power range"));
            }
        }
        RcpName::NumTxAntennas => {
            if !is_integer(value) || !ANTENNA_COUNTS.contains(&(value as u32)) {
                return Err(bad("not a supported antenna count"));
            }
        }
        RcpName::NumPrbs => {
            // The upper side is handled by the feasibility clamp; only
            // non-representable requests are rejected outright.
            if !is_integer(value) || value < 1.0 {
                return Err(bad("not a positive integer"));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledEpisode {
    pub assignment: RcpAssignment,
    pub context: ContextState,
    /// True when the PRB count had to be clamped into the feasible range
    /// after overrides were applied.
    pub clamped: bool,
}

/// Draw one assignment and context from the episode's sample stream, then
/// force any configured overrides. Draw order is fixed (bandwidth, PRBs,
/// power, antennas, distance, shadowing) so overriding one parameter never
/// shifts the draws of the others.
pub fn sample_assignment(
    rng: &mut ChaCha8Rng,
    config: &SimConfig,
    episode_id: u64,
) -> Result<SampledEpisode, SimError> {
    let bandwidth_mhz = BANDWIDTHS_MHZ[rng.gen_range(0..BANDWIDTHS_MHZ.len())];
    let num_prbs = rng.gen_range(MIN_PRBS..=prb_max(bandwidth_mhz)?);
    let tx_power_dbm = rng.gen_range(TX_POWER_RANGE_DBM.0..=TX_POWER_RANGE_DBM.1);
    let num_tx_antennas = ANTENNA_COUNTS[rng.gen_range(0..ANTENNA_COUNTS.len())];
    let (dist_lo, dist_hi) = UE_DISTANCE_RANGE_M;
    let ue_distance_m = rng.gen_range(dist_lo..=dist_hi);
    let shadowing = Normal::new(0.0, config.dgp.shadowing_sigma_db)
        .expect("finite sigma")
        .sample(rng);

    let mut assignment = RcpAssignment {
        bandwidth_mhz,
        num_prbs,
        tx_power_dbm,
        num_tx_antennas,
    };
    for (&rcp, &value) in &config.do_overrides {
        validate_override(rcp, value)?;
        match rcp {
            RcpName::Bandwidth => assignment.bandwidth_mhz = value as u32,
            RcpName::TxPower => assignment.tx_power_dbm = value as i32,
            RcpName::NumTxAntennas => assignment.num_tx_antennas = value as u32,
            RcpName::NumPrbs => assignment.num_prbs = value as u32,
        }
    }
    // Feasibility clamp: keeps num_prbs within the (possibly overridden)
    // bandwidth's transmittable range.
    let cap = prb_max(assignment.bandwidth_mhz)?;
    let clamped_prbs = assignment.num_prbs.clamp(MIN_PRBS, cap);
    let clamped = clamped_prbs != assignment.num_prbs;
    assignment.num_prbs = clamped_prbs;

    Ok(SampledEpisode {
        assignment,
        context: ContextState {
            ue_distance_m,
            shadowing_db: shadowing,
            episode_id,
        },
        clamped,
    })
}

/// Run one episode through the link budget, drawing per-frame fades from the
/// episode's fade stream. Always consumes exactly `frames_per_episode` draws.
pub fn simulate_episode<F: Real>(
    assignment: &RcpAssignment,
    ctx: &ContextState,
    config: &SimConfig,
    fade_rng: &mut ChaCha8Rng,
) -> KpiRecord<F> {
    let lb = LinkBudget::<F>::new(&config.dgp);
    let sinr = lb.sinr_db(assignment, ctx.ue_distance_m, ctx.shadowing_db);
    let se_selected = lb.selected_se(sinr);
    let threshold = lb.decode_threshold_db(se_selected);

    let fade = Normal::new(0.0, config.dgp.fade_sigma_db).expect("finite sigma");
    let mut errored_frames = 0u32;
    for _ in 0..config.frames_per_episode {
        let f = F::of(fade.sample(fade_rng));
        if sinr + f < threshold {
            errored_frames += 1;
        }
    }
    let bler = F::of(errored_frames as f64) / F::of(config.frames_per_episode as f64);
    let throughput = throughput_mbps(se_selected, assignment.num_prbs, bler);
    KpiRecord {
        throughput_mbps: throughput,
        spectral_efficiency_bps_hz: spectral_efficiency_bps_hz(
            throughput,
            assignment.bandwidth_mhz,
        ),
        bler,
    }
}

/// Column layout of generated datasets.
pub fn table_schema() -> Schema {
    let discrete = |levels: &[u32]| ValueKind::DiscreteSet {
        levels: levels.iter().map(|&v| v as f64).collect(),
    };
    Schema::new(vec![
        ColumnSpec {
            name: "bandwidth_mhz".into(),
            role: ColumnRole::Rcp,
            kind: discrete(&BANDWIDTHS_MHZ),
        },
        ColumnSpec {
            name: "num_prbs".into(),
            role: ColumnRole::Rcp,
            kind: ValueKind::IntegerRange {
                lo: MIN_PRBS as i64,
                hi: prb_max(50).expect("50 MHz supported") as i64,
            },
        },
        ColumnSpec {
            name: "tx_power_dbm".into(),
            role: ColumnRole::Rcp,
            kind: ValueKind::IntegerRange {
                lo: TX_POWER_RANGE_DBM.0 as i64,
                hi: TX_POWER_RANGE_DBM.1 as i64,
            },
        },
        ColumnSpec {
            name: "num_tx_antennas".into(),
            role: ColumnRole::Rcp,
            kind: discrete(&ANTENNA_COUNTS),
        },
        ColumnSpec {
            name: "ue_distance_m".into(),
            role: ColumnRole::Context,
            kind: ValueKind::Real {
                lo: Some(UE_DISTANCE_RANGE_M.0),
                hi: Some(UE_DISTANCE_RANGE_M.1),
            },
        },
        ColumnSpec {
            name: "shadowing_db".into(),
            role: ColumnRole::Context,
            kind: ValueKind::Real { lo: None, hi: None },
        },
        ColumnSpec {
            name: "throughput_mbps".into(),
            role: ColumnRole::Kpi,
            kind: ValueKind::Real {
                lo: Some(0.0),
                hi: None,
            },
        },
        ColumnSpec {
            name: "spectral_efficiency_bps_hz".into(),
            role: ColumnRole::Kpi,
            kind: ValueKind::Real {
                lo: Some(0.0),
                hi: None,
            },
        },
        ColumnSpec {
            name: "bler".into(),
            role: ColumnRole::Kpi,
            kind: ValueKind::Real {
                lo: Some(0.0),
                hi: Some(1.0),
            },
        },
    ])
    .expect("table schema is well-formed")
}

/// Generate the observational dataset: one record per episode, each episode
/// drawn from its own counter-keyed streams. Episodes run in parallel but the
/// result is identical to sequential execution.
pub fn generate_dataset<F: Real>(config: &SimConfig) -> Result<Dataset<F>, SimError> {
    config.validate()?;
    let episodes: Vec<(EpisodeRecord<F>, bool)> = (0..config.n_episodes as u64)
        .into_par_iter()
        .map(|episode_id| {
            let mut sample_rng = stream(config.master_seed, episode_id, STREAM_SAMPLE);
            let mut fade_rng = stream(config.master_seed, episode_id, STREAM_FADE);
            let sampled = sample_assignment(&mut sample_rng, config, episode_id)
                .expect("overrides validated upfront");
            let kpis =
                simulate_episode::<F>(&sampled.assignment, &sampled.context, config, &mut fade_rng);
            let a = &sampled.assignment;
            let c = &sampled.context;
            let record = EpisodeRecord {
                episode_id,
                values: vec![
                    F::of(a.bandwidth_mhz as f64),
                    F::of(a.num_prbs as f64),
                    F::of(a.tx_power_dbm as f64),
                    F::of(a.num_tx_antennas as f64),
                    F::of(c.ue_distance_m),
                    F::of(c.shadowing_db),
                    kpis.throughput_mbps,
                    kpis.spectral_efficiency_bps_hz,
                    kpis.bler,
                ],
            };
            (record, sampled.clamped)
        })
        .collect();

    let clamp_events = episodes.iter().filter(|(_, clamped)| *clamped).count() as u64;
    let records = episodes.into_iter().map(|(r, _)| r).collect();
    let provenance = Provenance {
        sim_config: Some(config.clone()),
        created_utc: None,
        clamp_events,
    };
    Ok(Dataset::new(table_schema(), records, provenance)?)
}

/// The data-generating process's actual causal structure over parameters,
/// context, and KPIs. Useful as a reference graph in tests and reports.
pub fn true_dag() -> CausalDag {
    let mut nodes: Vec<(String, NodeRole)> = RcpName::ALL
        .iter()
        .map(|r| (r.column().to_string(), NodeRole::Rcp))
        .collect();
    nodes.push(("ue_distance_m".into(), NodeRole::Context));
    nodes.push(("shadowing_db".into(), NodeRole::Context));
    nodes.extend(
        KpiName::ALL
            .iter()
            .map(|k| (k.column().to_string(), NodeRole::Kpi)),
    );

    let mut edges: Vec<(String, String)> = vec![("bandwidth_mhz".into(), "num_prbs".into())];
    // Every SINR input drives all three KPIs; PRB count scales only the
    // rate KPIs, never the error rate.
    let sinr_inputs = [
        "bandwidth_mhz",
        "tx_power_dbm",
        "num_tx_antennas",
        "ue_distance_m",
        "shadowing_db",
    ];
    for src in sinr_inputs {
        for kpi in KpiName::ALL {
            edges.push((src.into(), kpi.column().into()));
        }
    }
    edges.push(("num_prbs".into(), "throughput_mbps".into()));
    edges.push(("num_prbs".into(), "spectral_efficiency_bps_hz".into()));

    CausalDag::new(nodes, edges).expect("true DGP graph is acyclic")
}
