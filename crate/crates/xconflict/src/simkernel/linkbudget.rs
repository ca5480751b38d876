//! Analytic link budget used as the data-generating process: urban-micro
//! line-of-sight pathloss, antenna array gain, thermal noise over the full
//! configured bandwidth, SINR-driven spectral-efficiency selection with a
//! link-adaptation margin, and fade-threshold block errors.

use super::{DgpConstants, RcpAssignment, SimError};
use crate::scalar::Real;

/// Transmission-bandwidth configuration (max PRBs) at 15 kHz subcarrier
/// spacing for the supported channel bandwidths, per the FR1 standard table.
const PRB_TABLE: [(u32, u32); 10] = [
    (5, 25),
    (10, 52),
    (15, 79),
    (20, 106),
    (25, 133),
    (30, 160),
    (35, 188),
    (40, 216),
    (45, 242),
    (50, 270),
];

pub const BANDWIDTHS_MHZ: [u32; 10] = [5, 10, 15, 20, 25, 30, 35, 40, 45, 50];
pub const ANTENNA_COUNTS: [u32; 5] = [1, 2, 4, 8, 16];
pub const TX_POWER_RANGE_DBM: (i32, i32) = (1, 40);
pub const MIN_PRBS: u32 = 4;
pub const UE_DISTANCE_RANGE_M: (f64, f64) = (10.0, 300.0);

pub const SCS_KHZ: u32 = 15;
pub const SUBCARRIERS_PER_PRB: u32 = 12;

/// Largest PRB count transmittable in the given channel bandwidth at 15 kHz
/// subcarrier spacing.
pub fn prb_max(bandwidth_mhz: u32) -> Result<u32, SimError> {
    PRB_TABLE
        .iter()
        .find(|(bw, _)| *bw == bandwidth_mhz)
        .map(|(_, prbs)| *prbs)
        .ok_or(SimError::UnsupportedBandwidth(bandwidth_mhz))
}

/// The pinned link-budget formulas, with constants narrowed to the scalar
/// type once at construction.
pub struct LinkBudget<F> {
    pathloss_offset_db: F,
    pathloss_distance_coef: F,
    pathloss_freq_term_db: F,
    noise_density_dbm_hz: F,
    noise_figure_db: F,
    link_margin_db: F,
    se_cap_bps_hz: F,
}

impl<F: Real> LinkBudget<F> {
    pub fn new(dgp: &DgpConstants) -> Self {
        LinkBudget {
            pathloss_offset_db: F::of(dgp.pathloss_offset_db),
            pathloss_distance_coef: F::of(dgp.pathloss_distance_coef),
            pathloss_freq_term_db: F::of(dgp.pathloss_freq_coef)
                * F::of(dgp.carrier_freq_ghz).log10(),
            noise_density_dbm_hz: F::of(dgp.noise_density_dbm_hz),
            noise_figure_db: F::of(dgp.noise_figure_db),
            link_margin_db: F::of(dgp.link_margin_db),
            se_cap_bps_hz: F::of(dgp.se_cap_bps_hz),
        }
    }

    pub fn pathloss_db(&self, distance_m: F) -> F {
        self.pathloss_offset_db
            + self.pathloss_distance_coef * distance_m.log10()
            + self.pathloss_freq_term_db
    }

    pub fn antenna_gain_db(&self, num_tx_antennas: u32) -> F {
        F::of(10.0) * F::of(num_tx_antennas as f64).log10()
    }

    /// Thermal noise integrated over the full configured channel bandwidth,
    /// plus receiver noise figure.
    pub fn noise_dbm(&self, bandwidth_mhz: u32) -> F {
        self.noise_density_dbm_hz
            + F::of(10.0) * F::of(bandwidth_mhz as f64 * 1e6).log10()
            + self.noise_figure_db
    }

    pub fn sinr_db(&self, a: &RcpAssignment, ue_distance_m: f64, shadowing_db: f64) -> F {
        F::of(a.tx_power_dbm as f64) + self.antenna_gain_db(a.num_tx_antennas)
            - self.pathloss_db(F::of(ue_distance_m))
            - F::of(shadowing_db)
            - self.noise_dbm(a.bandwidth_mhz)
    }

    /// Spectral efficiency selected by link adaptation: Shannon efficiency at
    /// `sinr - margin`, capped at the configured maximum.
    pub fn selected_se(&self, sinr_db: F) -> F {
        let margin_adjusted = (sinr_db - self.link_margin_db) / F::of(10.0);
        let linear = F::of(10.0).powf(margin_adjusted);
        (F::one() + linear).log2().min(self.se_cap_bps_hz)
    }

    /// SINR needed to decode the selected spectral efficiency.
    pub fn decode_threshold_db(&self, se_selected: F) -> F {
        F::of(10.0) * (F::of(2.0).powf(se_selected) - F::one()).log10()
    }
}

pub fn throughput_mbps<F: Real>(se_selected: F, num_prbs: u32, bler: F) -> F {
    se_selected
        * F::of(num_prbs as f64)
        * F::of(SUBCARRIERS_PER_PRB as f64)
        * F::of(SCS_KHZ as f64 * 1000.0)
        * (F::one() - bler)
        / F::of(1e6)
}

pub fn spectral_efficiency_bps_hz<F: Real>(throughput_mbps: F, bandwidth_mhz: u32) -> F {
    throughput_mbps * F::of(1e6) / F::of(bandwidth_mhz as f64 * 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prb_lookup_matches_standard_table() {
        assert_eq!(prb_max(5).unwrap(), 25);
        assert_eq!(prb_max(20).unwrap(), 106);
        assert_eq!(prb_max(50).unwrap(), 270);
        for (bw, expect) in PRB_TABLE {
            assert_eq!(prb_max(bw).unwrap(), expect);
        }
    }

    #[test]
    fn prb_lookup_rejects_unsupported_bandwidth() {
        match prb_max(12) {
            Err(SimError::UnsupportedBandwidth(12)) => {}
            other => panic!("expected unsupported-bandwidth error, got {other:?}"),
        }
    }

    #[test]
    fn throughput_formula_hand_value() {
        // 5 bps/Hz over 100 PRBs with no block errors:
        // 5 * 100 * 12 * 15000 / 1e6 = 90 Mbps.
        assert_eq!(throughput_mbps(5.0f64, 100, 0.0), 90.0);
    }

    #[test]
    fn total_loss_gives_zero_throughput() {
        assert_eq!(throughput_mbps(5.0f64, 100, 1.0), 0.0);
    }

    #[test]
    fn decode_threshold_inverts_uncapped_selection() {
        let lb = LinkBudget::<f64>::new(&DgpConstants::default());
        for sinr in [-10.0, 0.0, 5.0, 15.0, 24.0] {
            let se = lb.selected_se(sinr);
            if se < 7.4 {
                let theta = lb.decode_threshold_db(se);
                assert!((theta - (sinr - 3.0)).abs() < 1e-9, "sinr={sinr}");
            }
        }
    }

    #[test]
    fn selection_caps_at_configured_maximum() {
        let lb = LinkBudget::<f64>::new(&DgpConstants::default());
        assert_eq!(lb.selected_se(60.0), 7.4);
    }
}
