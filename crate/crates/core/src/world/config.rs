use crate::physics::{ChannelParams, LaserParams, PropulsionParams};

use super::WorldError;

/// How the AoI-collection reward `r_s` is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollectReward {
    /// One unit per IoT collected in the slot.
    #[default]
    Count,
    /// Age of each collected packet, normalized by `aoi_norm`.
    Age,
}

impl CollectReward {
    pub fn name(self) -> &'static str {
        match self {
            CollectReward::Count => "count",
            CollectReward::Age => "age",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "count" => Some(CollectReward::Count),
            "age" => Some(CollectReward::Age),
            _ => None,
        }
    }
}

/// Fixed placement overriding the seeded random layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub iots: Vec<[f64; 2]>,
    /// `(x, y, z)` of each LBD.
    pub lbds: Vec<[f64; 3]>,
    pub uavs: Vec<[f64; 2]>,
}

/// Every physical, geometric and reward constant of a scenario.
///
/// Defaults reproduce the canonical four-UAV, fifty-IoT, single central LBD
/// scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_uavs: usize,
    pub n_iots: usize,
    /// Number of LBDs. When no layout places them, one sits at the origin and
    /// any further ones are spread on a ring of radius `charge_radius`.
    pub n_lbds: usize,
    /// Half the side of the square operating area, centred on the origin.
    pub area_half_side: f64,
    pub altitude: f64,
    pub speed: f64,
    pub slot_dt: f64,
    pub horizon: usize,
    pub charge_radius: f64,
    /// Radius of the flight-limit disc around the origin (`2 R_c`).
    pub flight_limit: f64,
    /// Full battery energy in J.
    pub e_full: f64,
    pub e_init_frac: f64,
    pub e_charge_threshold: f64,
    /// Tolerance for treating a battery as full.
    pub e_full_tol: f64,
    pub e_iot_init: f64,
    pub e_iot_floor: f64,
    pub data_volume: f64,
    pub comm_radius: f64,
    pub collision_dist: f64,
    pub obs_k_nearest: usize,
    pub alpha_a: f64,
    pub beta_p: f64,
    pub gamma_s: f64,
    pub r_pen1: f64,
    pub r_pen2: f64,
    pub r_0: f64,
    /// Penalty per collision or boundary-clip event, added to `r_p`.
    pub event_penalty: f64,
    /// Terminal penalty for the agent whose battery empties, added to `r_p`.
    pub death_penalty: f64,
    pub aoi_norm: f64,
    pub collect_reward: CollectReward,
    pub regenerate_on_collect: bool,
    pub include_hover_action: bool,
    /// Collection additionally requires the accumulated uplink volume to reach
    /// `data_volume`.
    pub rate_gated: bool,
    pub channel: ChannelParams<f64>,
    pub laser: LaserParams<f64>,
    pub propulsion: PropulsionParams<f64>,
    pub rng_seed: u64,
    pub layout: Option<Layout>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let e_full = 30_000.0;
        let e_iot_init = 1_000.0;
        let horizon = 500;
        Self {
            n_uavs: 4,
            n_iots: 50,
            n_lbds: 1,
            area_half_side: 500.0,
            altitude: 80.0,
            speed: 5.0,
            slot_dt: 1.0,
            horizon,
            charge_radius: 250.0,
            flight_limit: 500.0,
            e_full,
            e_init_frac: 0.6,
            e_charge_threshold: 0.3 * e_full,
            e_full_tol: 1.0,
            e_iot_init,
            e_iot_floor: 0.2 * e_iot_init,
            data_volume: 1e6,
            comm_radius: 60.0,
            collision_dist: 10.0,
            obs_k_nearest: 8,
            alpha_a: 1.0,
            beta_p: 0.5,
            gamma_s: 1.0,
            r_pen1: 0.01,
            r_pen2: 0.005,
            r_0: 0.1,
            event_penalty: 1.0,
            death_penalty: 10.0,
            aoi_norm: horizon as f64,
            collect_reward: CollectReward::Count,
            regenerate_on_collect: true,
            include_hover_action: false,
            rate_gated: false,
            channel: ChannelParams::default(),
            laser: LaserParams::default(),
            propulsion: PropulsionParams::default(),
            rng_seed: 42,
            layout: None,
        }
    }
}

fn bad(key: &'static str, msg: impl Into<String>) -> WorldError {
    WorldError::Config {
        key,
        message: msg.into(),
    }
}

impl ScenarioConfig {
    /// Canonical scenario with ten LBDs: one central, nine on a ring.
    pub fn ring_of_lbds() -> Self {
        Self {
            n_lbds: 10,
            ..Self::default()
        }
    }

    /// Compact two-UAV scenario sized for desk-scale training runs.
    pub fn tiny() -> Self {
        let horizon = 100;
        Self {
            n_uavs: 2,
            n_iots: 10,
            area_half_side: 60.0,
            flight_limit: 60.0,
            charge_radius: 50.0,
            horizon,
            aoi_norm: horizon as f64,
            comm_radius: 30.0,
            obs_k_nearest: 10,
            gamma_s: 3.0,
            collect_reward: CollectReward::Age,
            ..Self::default()
        }
    }

    pub fn n_actions(&self) -> usize {
        if self.include_hover_action {
            9
        } else {
            8
        }
    }

    pub fn obs_dim(&self) -> usize {
        3 + 2 + 4 * self.obs_k_nearest
    }

    /// Length of the global state vector fed to the centralized critic.
    pub fn global_state_dim(&self) -> usize {
        3 * self.n_uavs + 2 * self.n_iots + 1
    }

    pub fn e_init(&self) -> f64 {
        self.e_init_frac * self.e_full
    }

    /// Distance covered by one non-hover action.
    pub fn step_length(&self) -> f64 {
        self.speed * self.slot_dt
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.n_uavs == 0 {
            return Err(bad("n_uavs", "must be at least 1"));
        }
        if self.n_lbds == 0 {
            return Err(bad("n_lbds", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(bad("horizon_T", "must be at least 1"));
        }
        let positive = [
            ("area_half_side", self.area_half_side),
            ("altitude_H", self.altitude),
            ("speed_v", self.speed),
            ("slot_dt", self.slot_dt),
            ("charge_radius_Rc", self.charge_radius),
            ("flight_limit_2Rc", self.flight_limit),
            ("e_full", self.e_full),
            ("comm_radius", self.comm_radius),
            ("aoi_norm", self.aoi_norm),
            ("data_volume_Vi", self.data_volume),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(key, format!("must be a positive finite number, got {v}")));
            }
        }
        if self.charge_radius > self.flight_limit {
            return Err(bad("charge_radius_Rc", "must not exceed flight_limit_2Rc"));
        }
        if !(self.e_init_frac > 0.0 && self.e_init_frac <= 1.0) {
            return Err(bad("e_init_frac", "must lie in (0, 1]"));
        }
        if !(self.e_charge_threshold < self.e_full) {
            return Err(bad("e_charge_threshold", "must be below e_full"));
        }
        if self.obs_k_nearest > self.n_iots {
            return Err(bad("obs_k_nearest", "must not exceed n_iots"));
        }
        if self.collision_dist < 0.0 || self.e_iot_init < 0.0 || self.e_iot_floor < 0.0 {
            return Err(bad("collision_dist_d", "distances and energies must be nonnegative"));
        }
        self.channel
            .validate()
            .map_err(|e| bad("channel", e.to_string()))?;
        self.laser.validate().map_err(|e| bad("laser", e.to_string()))?;
        self.propulsion
            .validate()
            .map_err(|e| bad("propulsion", e.to_string()))?;
        if let Some(layout) = &self.layout {
            if !layout.iots.is_empty() && layout.iots.len() != self.n_iots {
                return Err(bad("layout", format!("{} IOT records for n_iots = {}", layout.iots.len(), self.n_iots)));
            }
            if !layout.lbds.is_empty() && layout.lbds.len() != self.n_lbds {
                return Err(bad("layout", format!("{} LBD records for n_lbds = {}", layout.lbds.len(), self.n_lbds)));
            }
            if !layout.uavs.is_empty() && layout.uavs.len() != self.n_uavs {
                return Err(bad("layout", format!("{} UAV records for n_uavs = {}", layout.uavs.len(), self.n_uavs)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
        ScenarioConfig::tiny().validate().unwrap();
        ScenarioConfig::ring_of_lbds().validate().unwrap();
    }

    #[test]
    fn default_thresholds() {
        let c = ScenarioConfig::default();
        assert_eq!(c.e_init(), 18_000.0);
        assert_eq!(c.e_charge_threshold, 9_000.0);
        assert_eq!(c.e_iot_floor, 0.2 * c.e_iot_init);
        assert_eq!(c.obs_dim(), 5 + 4 * 8);
    }

    #[test]
    fn rejects_violations() {
        let mut c = ScenarioConfig::default();
        c.n_uavs = 0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.charge_radius = 600.0;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.obs_k_nearest = 51;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.e_init_frac = 0.0;
        assert!(c.validate().is_err());
    }
}
