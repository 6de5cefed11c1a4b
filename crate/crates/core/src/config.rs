//! Scenario configuration, unit conversion and validation.
//!
//! Every quantity stored here is in SI units: watts, hertz, bits, cycles per
//! second, meters. Values quoted in dBm or kilobits are converted when the
//! defaults are built, never later.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("amplification power budget must be positive, got {budget_w} W")]
    NonPositiveBudget { budget_w: f64 },
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    NonPositiveParameter { name: String, value: f64 },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("cannot read config: {0}")]
    Parse(String),
}

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossExponents {
    pub user_ris: f64,
    pub ris_ap: f64,
    pub user_ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UserPlacement {
    /// Users drawn uniformly in a horizontal square of side `side_m`
    /// centered at `center_xy`, all at `height_m`.
    Uniform {
        center_xy: [f64; 2],
        side_m: f64,
        height_m: f64,
    },
    Fixed {
        positions: Vec<[f64; 3]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub ap: [f64; 3],
    pub ris: [f64; 3],
    pub users: UserPlacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTask {
    pub task_bits: u64,
    pub local_cpu_hz: f64,
    pub cycles_per_bit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeProfile {
    pub users: Vec<UserTask>,
    pub edge_cpu_total_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSettings {
    /// Relative MCL change that stops the outer loop.
    pub outer_tol: f64,
    pub max_outer_iters: usize,
    /// Relative objective change that stops the SCA loop.
    pub sca_tol: f64,
    pub max_sca_iters: usize,
    /// KKT residual tolerance handed to the conic solver.
    pub kkt_tol: f64,
    /// Keep `p_k = p_max` instead of optimizing transmit powers.
    #[serde(default)]
    pub fixed_power: bool,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        Self {
            outer_tol: 1e-4,
            max_outer_iters: 100,
            sca_tol: 1e-6,
            max_sca_iters: 50,
            kkt_tol: 1e-8,
            fixed_power: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_antennas: usize,
    pub num_elements: usize,
    pub bandwidth_hz: f64,
    /// Thermal noise power at each RIS element.
    pub ris_noise_w: f64,
    /// Thermal noise power at each AP antenna.
    pub ap_noise_w: f64,
    pub max_user_power_w: f64,
    pub total_power_w: f64,
    pub amp_efficiency: f64,
    pub dc_bias_w: f64,
    pub circuit_power_w: f64,
    /// Pins the amplification budget instead of deriving it from `total_power_w`.
    #[serde(default)]
    pub ris_budget_override_w: Option<f64>,
    pub path_loss: PathLossExponents,
    pub positions: Positions,
    pub compute: ComputeProfile,
    pub rng_seed: u64,
    #[serde(default)]
    pub algorithm: AlgorithmSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::baseline()
    }
}

impl ScenarioConfig {
    /// Default simulation setting: three users, N = 4, M = 16, P_tot = 10 mW.
    pub fn baseline() -> Self {
        let kb = 1000u64;
        Self {
            num_antennas: 4,
            num_elements: 16,
            bandwidth_hz: 1e6,
            ris_noise_w: dbm_to_watts(-70.0),
            ap_noise_w: dbm_to_watts(-80.0),
            max_user_power_w: 1e-3,
            total_power_w: 10e-3,
            amp_efficiency: 0.8,
            dc_bias_w: dbm_to_watts(-5.0),
            circuit_power_w: dbm_to_watts(-10.0),
            ris_budget_override_w: None,
            path_loss: PathLossExponents {
                user_ris: 2.2,
                ris_ap: 2.2,
                user_ap: 2.8,
            },
            positions: Positions {
                ap: [0.0, 0.0, 30.0],
                ris: [260.0, 0.0, 10.0],
                users: UserPlacement::Uniform {
                    center_xy: [280.0, 10.0],
                    side_m: 10.0,
                    height_m: 1.5,
                },
            },
            compute: ComputeProfile {
                users: vec![
                    UserTask {
                        task_bits: 250 * kb,
                        local_cpu_hz: 4e8,
                        cycles_per_bit: 700.0,
                    },
                    UserTask {
                        task_bits: 300 * kb,
                        local_cpu_hz: 5e8,
                        cycles_per_bit: 750.0,
                    },
                    UserTask {
                        task_bits: 350 * kb,
                        local_cpu_hz: 6e8,
                        cycles_per_bit: 800.0,
                    },
                ],
                edge_cpu_total_hz: 50e9,
            },
            rng_seed: 0,
            algorithm: AlgorithmSettings::default(),
        }
    }

    pub fn num_users(&self) -> usize {
        self.compute.users.len()
    }

    /// `ξ (P_tot − M (P_DC + P_c))`, before any override.
    pub fn derived_ris_budget_w(&self) -> f64 {
        self.amp_efficiency
            * (self.total_power_w
                - self.num_elements as f64 * (self.dc_bias_w + self.circuit_power_w))
    }

    /// Power left for a passive RIS of the same size: `P_tot − M P_c`.
    pub fn passive_budget_w(&self) -> f64 {
        self.total_power_w - self.num_elements as f64 * self.circuit_power_w
    }

    /// Largest element count leaving a positive passive budget; ratios
    /// within 1e-9 of an integer count as reaching it.
    pub fn passive_element_cap(&self) -> usize {
        let ratio = self.total_power_w / self.circuit_power_w;
        ((ratio - 1e-9).ceil() as usize).saturating_sub(1)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn validate(self) -> Result<Scenario, ConfigError> {
        validate_config(self)
    }
}

fn positive(name: &str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::NonPositiveParameter {
            name: name.to_string(),
            value,
        })
    }
}

fn positive_count(name: &str, value: usize) -> Result<(), ConfigError> {
    positive(name, value as f64)
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Checks every parameter and fills the derived amplification budget.
pub fn validate_config(cfg: ScenarioConfig) -> Result<Scenario, ConfigError> {
    positive_count("num_antennas", cfg.num_antennas)?;
    positive_count("num_elements", cfg.num_elements)?;
    positive_count("num_users", cfg.num_users())?;
    positive("bandwidth_hz", cfg.bandwidth_hz)?;
    positive("ris_noise_w", cfg.ris_noise_w)?;
    positive("ap_noise_w", cfg.ap_noise_w)?;
    positive("max_user_power_w", cfg.max_user_power_w)?;
    positive("total_power_w", cfg.total_power_w)?;
    positive("amp_efficiency", cfg.amp_efficiency)?;
    if cfg.amp_efficiency > 1.0 {
        return Err(ConfigError::NonPositiveParameter {
            name: "amp_efficiency (must lie in (0, 1])".into(),
            value: cfg.amp_efficiency,
        });
    }
    positive("dc_bias_w", cfg.dc_bias_w)?;
    positive("circuit_power_w", cfg.circuit_power_w)?;
    positive("path_loss.user_ris", cfg.path_loss.user_ris)?;
    positive("path_loss.ris_ap", cfg.path_loss.ris_ap)?;
    positive("path_loss.user_ap", cfg.path_loss.user_ap)?;
    positive("edge_cpu_total_hz", cfg.compute.edge_cpu_total_hz)?;
    for (k, u) in cfg.compute.users.iter().enumerate() {
        positive(&format!("users[{k}].task_bits"), u.task_bits as f64)?;
        positive(&format!("users[{k}].local_cpu_hz"), u.local_cpu_hz)?;
        positive(&format!("users[{k}].cycles_per_bit"), u.cycles_per_bit)?;
    }
    let a = &cfg.algorithm;
    if !(a.outer_tol >= 0.0 && a.sca_tol >= 0.0 && a.kkt_tol > 0.0) {
        return Err(ConfigError::NonPositiveParameter {
            name: "algorithm tolerances".into(),
            value: a.kkt_tol.min(a.outer_tol).min(a.sca_tol),
        });
    }
    positive_count("algorithm.max_outer_iters", a.max_outer_iters)?;
    positive_count("algorithm.max_sca_iters", a.max_sca_iters)?;

    let pos = &cfg.positions;
    if distance(&pos.ap, &pos.ris) <= 0.0 {
        return Err(ConfigError::DegenerateGeometry(
            "RIS and AP coincide".into(),
        ));
    }
    match &pos.users {
        UserPlacement::Uniform { side_m, .. } => {
            if !(*side_m >= 0.0) {
                return Err(ConfigError::NonPositiveParameter {
                    name: "positions.users.side_m".into(),
                    value: *side_m,
                });
            }
        }
        UserPlacement::Fixed { positions } => {
            if positions.len() != cfg.num_users() {
                return Err(ConfigError::DimensionMismatch {
                    what: "fixed user positions",
                    expected: cfg.num_users(),
                    found: positions.len(),
                });
            }
            for p in positions {
                if distance(p, &pos.ap) <= 0.0 || distance(p, &pos.ris) <= 0.0 {
                    return Err(ConfigError::DegenerateGeometry(
                        "user coincides with the AP or the RIS".into(),
                    ));
                }
            }
        }
    }

    let ris_budget_w = cfg
        .ris_budget_override_w
        .unwrap_or_else(|| cfg.derived_ris_budget_w());
    if !(ris_budget_w > 0.0) || !ris_budget_w.is_finite() {
        return Err(ConfigError::NonPositiveBudget {
            budget_w: ris_budget_w,
        });
    }
    Ok(Scenario {
        config: cfg,
        ris_budget_w,
    })
}

/// A validated configuration together with its derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    config: ScenarioConfig,
    ris_budget_w: f64,
}

impl Scenario {
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Amplification power budget `P_aRIS` in watts.
    pub fn ris_budget_w(&self) -> f64 {
        self.ris_budget_w
    }

    pub fn num_users(&self) -> usize {
        self.config.num_users()
    }

    pub fn num_antennas(&self) -> usize {
        self.config.num_antennas
    }

    pub fn num_elements(&self) -> usize {
        self.config.num_elements
    }

    pub fn bandwidth(&self) -> f64 {
        self.config.bandwidth_hz
    }

    pub fn compute(&self) -> &ComputeProfile {
        &self.config.compute
    }

    pub fn settings(&self) -> &AlgorithmSettings {
        &self.config.algorithm
    }

    /// Replaces the amplification budget; zero is allowed here so that
    /// boundary cases can be exercised.
    pub fn with_ris_budget(mut self, budget_w: f64) -> Self {
        assert!(budget_w >= 0.0, "budget must be nonnegative");
        self.ris_budget_w = budget_w;
        self
    }

    /// Replaces the per-user power cap; zero is allowed.
    pub fn with_max_user_power(mut self, p_max_w: f64) -> Self {
        assert!(p_max_w >= 0.0, "power cap must be nonnegative");
        self.config.max_user_power_w = p_max_w;
        self
    }

    pub fn with_settings(mut self, settings: AlgorithmSettings) -> Self {
        self.config.algorithm = settings;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn baseline_budget_matches_hand_value() {
        let scn = ScenarioConfig::baseline().validate().unwrap();
        // 0.8 * (10 - 16 * (0.316228 + 0.1)) mW
        assert_relative_eq!(scn.ris_budget_w(), 2.6722e-3, max_relative = 1e-4);
    }

    #[test]
    fn passive_budget_hits_zero_at_the_element_cap() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.num_elements = 100;
        assert!(cfg.passive_budget_w().abs() < 1e-15);
        assert_eq!(cfg.passive_element_cap(), 99);
        cfg.total_power_w = 20e-3;
        cfg.num_elements = 200;
        assert!(cfg.passive_budget_w().abs() < 1e-15);
        assert_eq!(cfg.passive_element_cap(), 199);
        cfg.total_power_w = 10.05e-3;
        assert_eq!(cfg.passive_element_cap(), 100);
    }

    #[test]
    fn zero_efficiency_is_rejected() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.amp_efficiency = 0.0;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::NonPositiveParameter { .. })
        ));
    }

    #[test]
    fn exhausted_budget_is_rejected() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.num_elements = 32;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::NonPositiveBudget { .. })
        ));
        let mut cfg = ScenarioConfig::baseline();
        cfg.num_elements = 32;
        cfg.ris_budget_override_w = Some(10e-3);
        assert_eq!(cfg.validate().unwrap().ris_budget_w(), 10e-3);
    }

    #[test]
    fn coincident_ris_and_ap_are_rejected() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.positions.ris = cfg.positions.ap;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn fixed_positions_must_match_user_count() {
        let mut cfg = ScenarioConfig::baseline();
        cfg.positions.users = UserPlacement::Fixed {
            positions: vec![[280.0, 10.0, 1.5]],
        };
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig::baseline();
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn baseline_noise_levels() {
        let cfg = ScenarioConfig::baseline();
        assert_relative_eq!(cfg.ap_noise_w, 1e-11, max_relative = 1e-12);
        assert_relative_eq!(cfg.ris_noise_w, 1e-10, max_relative = 1e-12);
        assert_relative_eq!(cfg.circuit_power_w, 1e-4, max_relative = 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn dbm_round_trip(x in 1e-15f64..1e3) {
            let back = dbm_to_watts(watts_to_dbm(x));
            proptest::prop_assert!(((back - x) / x).abs() < 1e-12);
        }
    }
}
