//! Scenario configuration and the shipped default preset.

use std::path::Path;

use fdsim_core::channel::{dbm_to_watts, db_to_linear, IndoorPathLoss};
use fdsim_core::energy::Harvester;
use fdsim_core::signal::OfdmGrid;
use serde::{Deserialize, Serialize};

use crate::SimError;

/// The default scenario, embedded at build time.
pub const DEFAULT_PRESET: &str = include_str!("../presets/default.json");

/// Every scalar of a simulation run. Powers are in dBm, gains in dB,
/// distances in meters. See `presets/default.json` for the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_subcarriers: usize,
    pub cp_len: usize,
    /// Explicit first subcarrier set (zero-based). Contiguous halves when
    /// absent; the second set is the complement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcarriers_first: Option<Vec<usize>>,
    /// Largest tap delay `l`; the channels have `l + 1` taps.
    pub max_delay: usize,
    /// `T_s / tau_h` of the exponential power delay profile.
    pub decay_ratio: f64,
    pub d_sa: f64,
    pub d_ss: f64,
    /// Distance between an SN and the other SN's AN.
    pub d_cross: f64,
    pub carrier_hz: f64,
    pub path_loss_slope_db: f64,
    pub path_loss_constant_db: f64,
    /// SN transmit power of the forward phase.
    pub p_dbm: f64,
    pub p_th_dbm: f64,
    pub p_sat_dbm: f64,
    /// AN transmit power.
    pub p_a_dbm: f64,
    /// Fraction of the SN power spent on OFDMA in the forward phase.
    pub power_split_fwd: f64,
    /// The backward phase runs at `p_dbm - backward_offset_db`.
    pub backward_offset_db: f64,
    pub alpha_c_db: f64,
    pub alpha_m_db: f64,
    pub beta: f64,
    pub n0_dbm: f64,
    pub rho_grid: Vec<f64>,
    /// Forward-phase powers of the power sweep; the backward sweep uses the
    /// same values lowered by `backward_offset_db`.
    pub power_grid_dbm: Vec<f64>,
    pub n_realizations: usize,
    pub seed: u64,
    /// Residual-SI anchor offset relative to `P_th`.
    pub epsilon_rel: f64,
    /// Degenerate draws resampled per realization before giving up.
    pub max_resamples: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_PRESET).expect("shipped preset parses")
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: &str| Err(SimError::Config(m.to_string()));
        self.grid()?;
        if self.max_delay + 1 > self.n_subcarriers {
            return fail("channel taps exceed the number of subcarriers");
        }
        if self.p_th_dbm > self.p_sat_dbm {
            return fail("p_th_dbm must not exceed p_sat_dbm");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return fail("beta must lie in (0, 1]");
        }
        if !(self.power_split_fwd >= 0.0 && self.power_split_fwd <= 1.0) {
            return fail("power_split_fwd must lie in [0, 1]");
        }
        if self.rho_grid.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return fail("rho values must lie in [0, 1]");
        }
        if self.decay_ratio.is_nan() || self.decay_ratio <= 0.0 {
            return fail("decay_ratio must be positive");
        }
        if [self.d_sa, self.d_ss, self.d_cross].iter().any(|d| d.is_nan() || *d < 1.0) {
            return fail("distances must be at least 1 m");
        }
        if self.carrier_hz.is_nan() || self.carrier_hz <= 0.0 {
            return fail("carrier_hz must be positive");
        }
        if self.epsilon_rel.is_nan() || self.epsilon_rel <= 0.0 {
            return fail("epsilon_rel must be positive");
        }
        if self.n_realizations == 0 {
            return fail("n_realizations must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<OfdmGrid, SimError> {
        let grid = match &self.subcarriers_first {
            None => OfdmGrid::contiguous(self.n_subcarriers, self.cp_len),
            Some(first) => {
                let second = (0..self.n_subcarriers).filter(|k| !first.contains(k)).collect();
                OfdmGrid::new(self.n_subcarriers, self.cp_len, first.clone(), second)
            }
        };
        grid.map_err(|e| SimError::Config(e.to_string()))
    }

    fn path_gain(&self, d: f64) -> f64 {
        let model = IndoorPathLoss { slope_db: self.path_loss_slope_db, constant_db: self.path_loss_constant_db };
        model.gain(self.carrier_hz, d).expect("validated distance and carrier")
    }

    /// Linear path gains and noise derived from the scenario.
    pub fn budget(&self) -> Budget {
        Budget {
            alpha_sa: self.path_gain(self.d_sa),
            alpha_cross: self.path_gain(self.d_cross),
            alpha_b: self.path_gain(self.d_ss),
            n0: dbm_to_watts(self.n0_dbm),
            p_th: dbm_to_watts(self.p_th_dbm),
            p_sat: dbm_to_watts(self.p_sat_dbm),
            p_a: dbm_to_watts(self.p_a_dbm),
            harvester: Harvester {
                beta: self.beta,
                alpha_c: db_to_linear(self.alpha_c_db),
                alpha_m: db_to_linear(self.alpha_m_db),
            },
        }
    }
}

/// Linear-scale quantities shared by both phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub alpha_sa: f64,
    pub alpha_cross: f64,
    pub alpha_b: f64,
    pub n0: f64,
    pub p_th: f64,
    pub p_sat: f64,
    pub p_a: f64,
    pub harvester: Harvester,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_is_valid() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.n_subcarriers, cfg.cp_len, cfg.max_delay), (64, 16, 16));
        assert_eq!(cfg.rho_grid.len(), 21);
        let b = cfg.budget();
        assert!((10.0 * b.alpha_sa.log10() + 57.1).abs() < 0.05);
        assert!((10.0 * b.alpha_b.log10() + 63.1).abs() < 0.05);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig::default();
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ScenarioConfig { beta: 1.5, ..Default::default() }.validate().is_err());
        assert!(ScenarioConfig { p_th_dbm: 30.0, ..Default::default() }.validate().is_err());
        assert!(ScenarioConfig { decay_ratio: f64::NAN, ..Default::default() }.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.rho_grid.push(1.2);
        assert!(cfg.validate().is_err());
        assert!(ScenarioConfig::from_json("{\"n_subcarriers\": 64}").is_err());
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_PRESET).unwrap();
        v["unknown_key"] = serde_json::json!(1);
        assert!(ScenarioConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn explicit_subcarrier_sets() {
        let mut cfg = ScenarioConfig { subcarriers_first: Some((0..64).step_by(2).collect()), ..Default::default() };
        let grid = cfg.grid().unwrap();
        assert_eq!(grid.set(fdsim_core::signal::Side::Second)[0], 1);
        cfg.subcarriers_first = Some(vec![70]);
        assert!(cfg.validate().is_err());
    }
}
