use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Default bound on braking magnitude, m/s².
pub const DEFAULT_DECEL_CAP: f64 = 10.0;

/// Intelligent Driver Model parameters for one driving style.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdmParams {
    /// Desired free-road speed `v0`, m/s.
    pub desired_speed: f64,
    /// Safe time headway `T`, s.
    pub time_gap: f64,
    /// Jam distance `s0`, m.
    pub min_distance: f64,
    /// Maximum comfortable acceleration `a`, m/s².
    pub max_accel: f64,
    /// Comfortable deceleration `b`, m/s².
    pub comfort_decel: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_exponent() -> f64 {
    4.0
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let fields = [
            ("desired_speed", self.desired_speed),
            ("time_gap", self.time_gap),
            ("min_distance", self.min_distance),
            ("max_accel", self.max_accel),
            ("comfort_decel", self.comfort_decel),
            ("exponent", self.exponent),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn with_desired_speed(mut self, v0: f64) -> Self {
        self.desired_speed = v0;
        self
    }
}

/// Desired dynamic gap `s*(v, Δv)`, never below the jam distance.
///
/// `dv` is the approach rate `v - v_leader`; positive when closing in.
pub fn idm_desired_gap(v: f64, dv: f64, p: &IdmParams) -> f64 {
    let dynamic = p.min_distance
        + v * p.time_gap
        + v * dv / (2.0 * (p.max_accel * p.comfort_decel).sqrt());
    dynamic.max(p.min_distance)
}

/// IDM acceleration, clamped to `[-decel_cap, max_accel]`.
///
/// Pass `f64::INFINITY` as `gap` for a vehicle without a leader. A finite
/// non-positive gap means the bumpers already touch and is reported as
/// [`DynamicsError::CollisionImminent`].
pub fn idm_acceleration(
    v: f64,
    gap: f64,
    dv: f64,
    p: &IdmParams,
    decel_cap: f64,
) -> Result<f64, DynamicsError> {
    if gap <= 0.0 || gap.is_nan() {
        return Err(DynamicsError::CollisionImminent { gap });
    }
    let free = (v / p.desired_speed).powf(p.exponent);
    let interaction = if gap.is_infinite() {
        0.0
    } else {
        let ratio = idm_desired_gap(v, dv, p) / gap;
        ratio * ratio
    };
    let accel = p.max_accel * (1.0 - free - interaction);
    Ok(accel.clamp(-decel_cap, p.max_accel))
}
