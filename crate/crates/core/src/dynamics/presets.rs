//! Driving-style presets for the conservative and aggressive vehicle classes,
//! plus the homogeneous midpoint style used by the unenriched "default" traffic.

use serde::{Deserialize, Serialize};

use super::{BehaviorClass, DynamicsError, IdmParams, MobilParams};

/// Desired speed of conservative drivers, m/s.
pub const CONSERVATIVE_DESIRED_SPEED: f64 = 25.0;
/// Desired speed of aggressive drivers, m/s. Higher than the flow so they overspeed.
pub const AGGRESSIVE_DESIRED_SPEED: f64 = 35.0;
/// Desired speed of the homogeneous default traffic, m/s. Between the two
/// classes and below the ego speed cap.
pub const DEFAULT_TRAFFIC_DESIRED_SPEED: f64 = 27.5;

/// The parameter bundle Ξ that defines one driving style.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorParams {
    pub idm: IdmParams,
    pub mobil: MobilParams,
    pub label: BehaviorClass,
}

impl BehaviorParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.idm.validate()?;
        self.mobil.validate()
    }

    pub fn with_speed(mut self, desired_speed: f64) -> Self {
        self.idm.desired_speed = desired_speed;
        self
    }
}

pub fn conservative() -> BehaviorParams {
    BehaviorParams {
        idm: IdmParams {
            desired_speed: CONSERVATIVE_DESIRED_SPEED,
            time_gap: 1.5,
            min_distance: 5.0,
            max_accel: 3.0,
            comfort_decel: 6.0,
            exponent: 4.0,
        },
        mobil: MobilParams { politeness: 0.5, min_accel_gain: 0.2, safe_decel_limit: 3.0 },
        label: BehaviorClass::Conservative,
    }
}

pub fn aggressive() -> BehaviorParams {
    BehaviorParams {
        idm: IdmParams {
            desired_speed: AGGRESSIVE_DESIRED_SPEED,
            time_gap: 1.2,
            min_distance: 2.5,
            max_accel: 6.0,
            comfort_decel: 9.0,
            exponent: 4.0,
        },
        mobil: MobilParams { politeness: 0.0, min_accel_gain: 0.0, safe_decel_limit: 9.0 },
        label: BehaviorClass::Aggressive,
    }
}

/// Arithmetic midpoint of the two classes, labelled [`BehaviorClass::Default`].
pub fn midpoint() -> BehaviorParams {
    let (c, a) = (conservative(), aggressive());
    let mid = |x: f64, y: f64| 0.5 * (x + y);
    BehaviorParams {
        idm: IdmParams {
            desired_speed: mid(c.idm.desired_speed, a.idm.desired_speed),
            time_gap: mid(c.idm.time_gap, a.idm.time_gap),
            min_distance: mid(c.idm.min_distance, a.idm.min_distance),
            max_accel: mid(c.idm.max_accel, a.idm.max_accel),
            comfort_decel: mid(c.idm.comfort_decel, a.idm.comfort_decel),
            exponent: 4.0,
        },
        mobil: MobilParams {
            politeness: mid(c.mobil.politeness, a.mobil.politeness),
            min_accel_gain: mid(c.mobil.min_accel_gain, a.mobil.min_accel_gain),
            safe_decel_limit: mid(c.mobil.safe_decel_limit, a.mobil.safe_decel_limit),
        },
        label: BehaviorClass::Default,
    }
}

/// The default-scenario population: [`midpoint`] driving at
/// [`DEFAULT_TRAFFIC_DESIRED_SPEED`].
pub fn default_traffic() -> BehaviorParams {
    midpoint().with_speed(DEFAULT_TRAFFIC_DESIRED_SPEED)
}
