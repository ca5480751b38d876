//! Ground-truth interventional oracle: paired common-random-number runs of
//! the simulator, differing only in one forced parameter.

use rayon::prelude::*;

use super::linkbudget::{prb_max, ANTENNA_COUNTS, BANDWIDTHS_MHZ, MIN_PRBS, TX_POWER_RANGE_DBM};
use super::{sample_assignment, simulate_episode, KpiName, RcpAssignment, RcpName, SimConfig,
            SimError};
use crate::rng::{stream, STREAM_FADE, STREAM_SAMPLE};
use crate::scalar::{stable_mean, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate<F> {
    /// Mean per-unit outcome change across included pairs.
    pub ate_per_unit: F,
    pub n_pairs_used: u32,
    /// Pairs dropped because the shifted treatment left its domain.
    pub n_pairs_clamped: u32,
    /// Pairs dropped by the caller's context filter.
    pub n_pairs_filtered: u32,
}

/// Shift a treatment value and snap it back into its domain. Returns the
/// realized value; a pair is excluded when the snap changed the request.
fn snap(rcp: RcpName, requested: f64, bandwidth_mhz: u32) -> Result<f64, SimError> {
    let nearest = |levels: &[u32]| {
        let mut best = levels[0] as f64;
        for &l in levels {
            let l = l as f64;
            if (l - requested).abs() < (best - requested).abs() {
                best = l;
            }
        }
        best
    };
    Ok(match rcp {
        RcpName::Bandwidth => nearest(&BANDWIDTHS_MHZ),
        RcpName::NumTxAntennas => nearest(&ANTENNA_COUNTS),
        RcpName::TxPower => requested
            .round()
            .clamp(TX_POWER_RANGE_DBM.0 as f64, TX_POWER_RANGE_DBM.1 as f64),
        RcpName::NumPrbs => requested
            .round()
            .clamp(MIN_PRBS as f64, prb_max(bandwidth_mhz)? as f64),
    })
}

fn with_treatment(
    base: &RcpAssignment,
    rcp: RcpName,
    value: f64,
) -> Result<RcpAssignment, SimError> {
    let mut a = *base;
    match rcp {
        RcpName::Bandwidth => a.bandwidth_mhz = value as u32,
        RcpName::NumPrbs => a.num_prbs = value as u32,
        RcpName::TxPower => a.tx_power_dbm = value as i32,
        RcpName::NumTxAntennas => a.num_tx_antennas = value as u32,
    }
    // A bandwidth intervention can strand the sampled PRB count outside the
    // new cap; the PRB response to that is part of the intervention's effect.
    a.num_prbs = a.num_prbs.clamp(MIN_PRBS, prb_max(a.bandwidth_mhz)?);
    Ok(a)
}

/// Monte Carlo average effect of `do(treatment = t + delta)` on `outcome`,
/// per unit of `delta`, with all exogenous draws held fixed between the two
/// arms of each pair.
pub fn oracle_ate<F: Real>(
    treatment: RcpName,
    delta: f64,
    outcome: KpiName,
    config: &SimConfig,
) -> Result<OracleEstimate<F>, SimError> {
    oracle_ate_conditional(treatment, delta, outcome, config, |_, _| true)
}

/// As [`oracle_ate`], restricted to episodes accepted by `include`. Used to
/// validate conditional effects against per-stratum interventions.
pub fn oracle_ate_conditional<F: Real>(
    treatment: RcpName,
    delta: f64,
    outcome: KpiName,
    config: &SimConfig,
    include: impl Fn(&RcpAssignment, &super::ContextState) -> bool + Sync,
) -> Result<OracleEstimate<F>, SimError> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(SimError::ZeroDelta);
    }
    config.validate()?;

    enum PairOutcome<F> {
        Used(F),
        Clamped,
        Filtered,
    }

    let pairs: Vec<PairOutcome<F>> = (0..config.n_episodes as u64)
        .into_par_iter()
        .map(|episode_id| {
            let mut sample_rng = stream(config.master_seed, episode_id, STREAM_SAMPLE);
            let fade_rng = stream(config.master_seed, episode_id, STREAM_FADE);
            let sampled = sample_assignment(&mut sample_rng, config, episode_id)
                .expect("overrides validated upfront");
            if !include(&sampled.assignment, &sampled.context) {
                return PairOutcome::Filtered;
            }
            let natural = sampled.assignment.get(treatment);
            let requested = natural + delta;
            let realized =
                snap(treatment, requested, sampled.assignment.bandwidth_mhz).expect("valid bw");
            if realized != requested {
                return PairOutcome::Clamped;
            }
            let shifted =
                with_treatment(&sampled.assignment, treatment, realized).expect("valid bw");

            let mut lo_rng = fade_rng.clone();
            let mut hi_rng = fade_rng;
            let y_lo =
                simulate_episode::<F>(&sampled.assignment, &sampled.context, config, &mut lo_rng)
                    .get(outcome);
            let y_hi = simulate_episode::<F>(&shifted, &sampled.context, config, &mut hi_rng)
                .get(outcome);
            PairOutcome::Used((y_hi - y_lo) / F::of(delta))
        })
        .collect();

    let mut used = Vec::new();
    let mut n_clamped = 0u32;
    let mut n_filtered = 0u32;
    for p in pairs {
        match p {
            PairOutcome::Used(v) => used.push(v),
            PairOutcome::Clamped => n_clamped += 1,
            PairOutcome::Filtered => n_filtered += 1,
        }
    }
    if used.is_empty() {
        return Err(SimError::EmptyOracleSample);
    }
    Ok(OracleEstimate {
        ate_per_unit: stable_mean(&used),
        n_pairs_used: used.len() as u32,
        n_pairs_clamped: n_clamped,
        n_pairs_filtered: n_filtered,
    })
}
