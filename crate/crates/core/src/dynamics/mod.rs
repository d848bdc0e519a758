//! Longitudinal (IDM) and lateral (MOBIL) driver models and the kinematic step.
//!
//! Everything here is a pure function over value types.

mod idm;
mod kinematics;
mod mobil;
pub mod presets;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use idm::{idm_acceleration, idm_desired_gap, IdmParams, DEFAULT_DECEL_CAP};
pub use kinematics::{integrate, LaneChange, RoadGeometry};
pub use mobil::{
    bumper_gap, mobil_decide, mobil_incentive, mobil_safety, AccelerationChanges, LaneNeighbors, LaneSide,
    MobilParams, Neighbor, NeighborSnapshot,
};
pub use presets::BehaviorParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("parameter `{name}` out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("collision imminent: bumper gap {gap} m")]
    CollisionImminent { gap: f64 },
}

/// Driving-style tag carried by every vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorClass {
    Conservative,
    Aggressive,
    /// Homogeneous midpoint traffic without behavior enrichment.
    Default,
    Ego,
}

impl BehaviorClass {
    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorClass::Conservative => "conservative",
            BehaviorClass::Aggressive => "aggressive",
            BehaviorClass::Default => "default",
            BehaviorClass::Ego => "ego",
        }
    }
}

pub const DEFAULT_VEHICLE_LENGTH: f64 = 5.0;
pub const DEFAULT_VEHICLE_WIDTH: f64 = 2.0;

/// Kinematic state of one vehicle at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    /// Lane index, 0 = rightmost. During a maneuver this is the target lane.
    pub lane: usize,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub length: f64,
    pub width: f64,
    pub behavior: BehaviorClass,
    pub maneuver: Option<LaneChange>,
}

impl VehicleState {
    pub fn new(id: u32, lane: usize, x: f64, y: f64, vx: f64, behavior: BehaviorClass) -> Self {
        Self {
            id,
            lane,
            x,
            y,
            vx,
            vy: 0.0,
            length: DEFAULT_VEHICLE_LENGTH,
            width: DEFAULT_VEHICLE_WIDTH,
            behavior,
            maneuver: None,
        }
    }

    /// Whether this vehicle occupies `lane` for neighbour queries. A vehicle
    /// mid-maneuver occupies both its origin and target lanes.
    pub fn occupies(&self, lane: usize) -> bool {
        self.lane == lane || self.maneuver.is_some_and(|m| m.from_lane == lane)
    }

    /// Axis-aligned rectangle overlap test.
    pub fn overlaps(&self, other: &VehicleState) -> bool {
        (self.x - other.x).abs() < 0.5 * (self.length + other.length)
            && (self.y - other.y).abs() < 0.5 * (self.width + other.width)
    }
}
