use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::dynamics::{presets, BehaviorParams, RoadGeometry, DEFAULT_DECEL_CAP};
use crate::traffic_graph::DEFAULT_D_MIN;

/// Which traffic population the road is filled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Homogeneous midpoint drivers, no behavior enrichment.
    Default,
    /// Conservative drivers only.
    Conservative,
    /// Conservative drivers mixed with `aggressive_fraction` aggressive ones.
    Aggressive,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Default, Scenario::Conservative, Scenario::Aggressive];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Default => "default",
            Scenario::Conservative => "conservative",
            Scenario::Aggressive => "aggressive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub collision: f64,
    pub lane_change: f64,
    pub right_lane: f64,
    pub high_speed: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { collision: -10.0, lane_change: 0.2, right_lane: 0.1, high_speed: 0.4 }
    }
}

/// Per-class driving parameters used to populate the road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PresetTable {
    pub conservative: BehaviorParams,
    pub aggressive: BehaviorParams,
    pub default: BehaviorParams,
}

impl Default for PresetTable {
    fn default() -> Self {
        Self { conservative: presets::conservative(), aggressive: presets::aggressive(), default: presets::default_traffic() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub lane_count: usize,
    pub lane_width: f64,
    pub lane_change_duration: f64,
    /// Vehicles on the road, ego included.
    pub vehicle_count: usize,
    pub scenario: Scenario,
    /// Share of non-ego vehicles that are aggressive in [`Scenario::Aggressive`].
    pub aggressive_fraction: f64,
    pub dt: f64,
    /// Simulation ticks per agent decision.
    pub decision_period: usize,
    pub episode_duration: f64,
    pub d_min: f64,
    pub rewards: RewardWeights,
    /// `[v_min, v_max]` used to normalise the high-speed reward, m/s.
    pub speed_range: [f64; 2],
    pub seed: u64,
    /// Rows `V` of the observation matrix, ego included.
    pub observed_vehicles: usize,
    /// Longitudinal sensing range ahead and behind the ego, m.
    pub sensing_range: f64,
    /// Change of the ego speed target per accelerate/decelerate action, m/s.
    pub speed_step: f64,
    /// Bounds of the ego speed target, m/s.
    pub ego_speed_limits: [f64; 2],
    pub ego_initial_speed: f64,
    /// Distance between spawn slots in one lane, m (centre to centre).
    pub spawn_spacing: f64,
    /// Length of the spawn region, m.
    pub spawn_length: f64,
    pub decel_cap: f64,
    pub presets: PresetTable,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            lane_count: 4,
            lane_width: 4.0,
            lane_change_duration: 2.0,
            vehicle_count: 10,
            scenario: Scenario::Aggressive,
            aggressive_fraction: 0.5,
            dt: 0.1,
            decision_period: 10,
            episode_duration: 60.0,
            d_min: DEFAULT_D_MIN,
            rewards: RewardWeights::default(),
            speed_range: [20.0, 30.0],
            seed: 0,
            observed_vehicles: 10,
            sensing_range: 180.0,
            speed_step: 2.5,
            ego_speed_limits: [10.0, 30.0],
            ego_initial_speed: 25.0,
            spawn_spacing: 40.0,
            spawn_length: 320.0,
            decel_cap: DEFAULT_DECEL_CAP,
            presets: PresetTable::default(),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), EnvError> {
    if ok {
        Ok(())
    } else {
        Err(EnvError::InvalidConfig(msg()))
    }
}

impl EnvConfig {
    pub fn road(&self) -> RoadGeometry {
        RoadGeometry {
            lane_count: self.lane_count,
            lane_width: self.lane_width,
            lane_change_duration: self.lane_change_duration,
        }
    }

    pub fn slots_per_lane(&self) -> usize {
        (self.spawn_length / self.spawn_spacing).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        check(self.lane_count >= 2, || format!("lane_count must be >= 2, got {}", self.lane_count))?;
        check(self.vehicle_count >= 1, || "vehicle_count must be >= 1".into())?;
        check(self.dt > 0.0, || format!("dt must be positive, got {}", self.dt))?;
        check(self.decision_period >= 1, || "decision_period must be >= 1".into())?;
        check(self.episode_duration > 0.0, || "episode_duration must be positive".into())?;
        check(self.speed_range[0] < self.speed_range[1], || {
            format!("speed_range must satisfy v_min < v_max, got {:?}", self.speed_range)
        })?;
        check((0.0..=1.0).contains(&self.aggressive_fraction), || {
            format!("aggressive_fraction must be in [0, 1], got {}", self.aggressive_fraction)
        })?;
        check(self.rewards.collision < 0.0, || "rewards.collision must be negative".into())?;
        check(
            self.rewards.lane_change >= 0.0 && self.rewards.right_lane >= 0.0 && self.rewards.high_speed >= 0.0,
            || "lane_change, right_lane and high_speed rewards must be non-negative".into(),
        )?;
        check(self.observed_vehicles >= 1, || "observed_vehicles must be >= 1".into())?;
        check(self.d_min > 0.0 && self.sensing_range > 0.0, || "d_min and sensing_range must be positive".into())?;
        check(
            self.ego_speed_limits[0] > 0.0 && self.ego_speed_limits[0] <= self.ego_speed_limits[1],
            || format!("ego_speed_limits must satisfy 0 < min <= max, got {:?}", self.ego_speed_limits),
        )?;
        check(self.lane_change_duration > 0.0 && self.lane_width > 0.0, || {
            "lane_width and lane_change_duration must be positive".into()
        })?;
        for p in [&self.presets.conservative, &self.presets.aggressive, &self.presets.default] {
            p.validate().map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        }
        let min_spacing = self.presets.conservative.idm.min_distance + crate::dynamics::DEFAULT_VEHICLE_LENGTH;
        check(self.spawn_spacing >= min_spacing, || {
            format!("spawn_spacing {} is below the collision-free minimum {}", self.spawn_spacing, min_spacing)
        })?;
        let capacity = self.slots_per_lane() * self.lane_count;
        if self.vehicle_count > capacity {
            return Err(EnvError::Overcrowded { vehicles: self.vehicle_count, capacity });
        }
        Ok(())
    }

    /// Number of aggressive non-ego agents the scenario spawns.
    pub fn aggressive_count(&self) -> usize {
        match self.scenario {
            Scenario::Aggressive => (self.aggressive_fraction * (self.vehicle_count - 1) as f64).round() as usize,
            _ => 0,
        }
    }

    pub fn ticks_per_episode(&self) -> u64 {
        (self.episode_duration / self.dt - 1e-9).ceil() as u64
    }
}
