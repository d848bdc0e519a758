use serde::{Deserialize, Serialize};

use super::VehicleState;

/// Straight multi-lane road geometry. Lane 0 is rightmost and centred at `y = 0`;
/// lane `k` is centred at `y = k * lane_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadGeometry {
    pub lane_count: usize,
    pub lane_width: f64,
    /// Duration of one lane-change maneuver, s.
    pub lane_change_duration: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        Self { lane_count: 4, lane_width: 4.0, lane_change_duration: 2.0 }
    }
}

impl RoadGeometry {
    pub fn lane_center(&self, lane: usize) -> f64 {
        lane as f64 * self.lane_width
    }
}

/// An active lane change: constant lateral velocity toward the centre of
/// `to_lane` for a fixed duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChange {
    pub from_lane: usize,
    pub to_lane: usize,
    pub elapsed: f64,
    pub duration: f64,
}

const TIME_EPS: f64 = 1e-9;

/// Advances one vehicle by `dt` under constant acceleration.
///
/// A vehicle that would reverse within the step instead stops exactly: the
/// applied acceleration becomes `-vx / dt`, so `x' - x = vx·dt + ½·a_eff·dt²`
/// holds with `a_eff = (vx' - vx) / dt` in every case.
///
/// A `lane_target` different from the current lane starts a maneuver unless
/// one is already running; the lane index switches to the target immediately.
pub fn integrate(
    state: &VehicleState,
    accel: f64,
    lane_target: Option<usize>,
    dt: f64,
    road: &RoadGeometry,
) -> VehicleState {
    debug_assert!(dt > 0.0);
    let mut next = state.clone();

    let accel = if state.vx + accel * dt < 0.0 { -state.vx / dt } else { accel };
    next.vx = (state.vx + accel * dt).max(0.0);
    next.x = state.x + state.vx * dt + 0.5 * accel * dt * dt;

    if next.maneuver.is_none() {
        if let Some(target) = lane_target.filter(|&l| l != state.lane && l < road.lane_count) {
            let duration = road.lane_change_duration;
            next.vy = (road.lane_center(target) - state.y) / duration;
            next.maneuver = Some(LaneChange { from_lane: state.lane, to_lane: target, elapsed: 0.0, duration });
            next.lane = target;
        }
    }

    if let Some(mut m) = next.maneuver {
        m.elapsed += dt;
        if m.elapsed + TIME_EPS >= m.duration {
            next.y = road.lane_center(m.to_lane);
            next.vy = 0.0;
            next.maneuver = None;
        } else {
            next.y = state.y + next.vy * dt;
            next.maneuver = Some(m);
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::BehaviorClass;
    use proptest::prelude::*;

    fn car(lane: usize, x: f64, vx: f64) -> VehicleState {
        VehicleState::new(1, lane, x, 4.0 * lane as f64, vx, BehaviorClass::Conservative)
    }

    #[test]
    fn constant_speed_step() {
        let road = RoadGeometry::default();
        let next = integrate(&car(0, 10.0, 20.0), 0.0, None, 0.1, &road);
        assert_eq!(next.x, 10.0 + 20.0 * 0.1);
        assert_eq!(next.vx, 20.0);
        assert_eq!(next.y, 0.0);
    }

    #[test]
    fn stops_instead_of_reversing() {
        let road = RoadGeometry::default();
        let next = integrate(&car(0, 0.0, 0.5), -10.0, None, 0.1, &road);
        assert_eq!(next.vx, 0.0);
        assert!((next.x - 0.025).abs() < 1e-15);
        let again = integrate(&next, -10.0, None, 0.1, &road);
        assert_eq!(again.x, next.x);
    }

    #[test]
    fn lane_change_takes_fixed_duration() {
        let road = RoadGeometry::default();
        let mut s = integrate(&car(1, 0.0, 20.0), 0.0, Some(2), 0.1, &road);
        assert_eq!(s.lane, 2);
        assert!(s.maneuver.is_some());
        assert!((s.vy - 2.0).abs() < 1e-12);
        let mut ticks = 1;
        while s.maneuver.is_some() {
            // Further requests are ignored mid-maneuver.
            s = integrate(&s, 0.0, Some(0), 0.1, &road);
            ticks += 1;
        }
        assert_eq!(ticks, 20);
        assert_eq!(s.y, 8.0);
        assert_eq!(s.vy, 0.0);
        assert_eq!(s.lane, 2);
    }

    #[test]
    fn off_road_target_ignored() {
        let road = RoadGeometry::default();
        let s = integrate(&car(3, 0.0, 20.0), 0.0, Some(4), 0.1, &road);
        assert_eq!(s.lane, 3);
        assert!(s.maneuver.is_none());
    }

    proptest! {
        #[test]
        fn deterministic(x in -1e3f64..1e3, v in 0.0f64..40.0, a in -10.0f64..6.0, dt in 0.01f64..0.5) {
            let road = RoadGeometry::default();
            let s = car(1, x, v);
            let a1 = integrate(&s, a, Some(2), dt, &road);
            let a2 = integrate(&s, a, Some(2), dt, &road);
            prop_assert_eq!(a1, a2);
        }

        #[test]
        fn zero_accel_advances_by_speed(x in -1e3f64..1e3, v in 0.0f64..40.0, dt in 0.01f64..0.5) {
            let road = RoadGeometry::default();
            let s = car(0, x, v);
            let n = integrate(&s, 0.0, None, dt, &road);
            prop_assert_eq!(n.x, x + v * dt);
        }

        #[test]
        fn kinematic_consistency(x in -1e3f64..1e3, v in 0.0f64..40.0, a in -10.0f64..6.0) {
            let road = RoadGeometry::default();
            let dt = 0.1;
            let s = car(0, x, v);
            let n = integrate(&s, a, None, dt, &road);
            let a_eff = (n.vx - s.vx) / dt;
            prop_assert!((n.x - s.x - s.vx * dt - 0.5 * a_eff * dt * dt).abs() < 1e-9);
            prop_assert!(n.vx >= 0.0);
        }
    }
}
