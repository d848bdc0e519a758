use serde::{Deserialize, Serialize};

use super::idm::{idm_acceleration, IdmParams};
use super::{DynamicsError, VehicleState};

/// MOBIL lane-change parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilParams {
    /// Politeness factor `p` in `[0, 1]`.
    pub politeness: f64,
    /// Minimum net acceleration gain `Δa_th`, m/s².
    pub min_accel_gain: f64,
    /// Largest braking imposed on the new follower, `b_safe`, m/s².
    pub safe_decel_limit: f64,
}

impl MobilParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(0.0..=1.0).contains(&self.politeness) {
            return Err(DynamicsError::InvalidParameter { name: "politeness", value: self.politeness });
        }
        if !(self.min_accel_gain >= 0.0 && self.min_accel_gain.is_finite()) {
            return Err(DynamicsError::InvalidParameter {
                name: "min_accel_gain",
                value: self.min_accel_gain,
            });
        }
        if !(self.safe_decel_limit > 0.0 && self.safe_decel_limit.is_finite()) {
            return Err(DynamicsError::InvalidParameter {
                name: "safe_decel_limit",
                value: self.safe_decel_limit,
            });
        }
        Ok(())
    }
}

/// Accelerations before (`old`) and after (`new`) a hypothetical lane change
/// for the changing vehicle, the new follower `n` and the old follower `o`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AccelerationChanges {
    pub ego_new: f64,
    pub ego_old: f64,
    pub new_follower_new: f64,
    pub new_follower_old: f64,
    pub old_follower_new: f64,
    pub old_follower_old: f64,
}

impl AccelerationChanges {
    /// Politeness-weighted net gain, the left-hand side of the incentive test.
    pub fn net_gain(&self, politeness: f64) -> f64 {
        (self.ego_new - self.ego_old)
            + politeness
                * ((self.new_follower_new - self.new_follower_old)
                    + (self.old_follower_new - self.old_follower_old))
    }
}

pub fn mobil_safety(a_target_after: f64, p: &MobilParams) -> bool {
    a_target_after >= -p.safe_decel_limit
}

pub fn mobil_incentive(gains: &AccelerationChanges, p: &MobilParams) -> bool {
    gains.net_gain(p.politeness) > p.min_accel_gain
}

/// A vehicle seen by the deciding driver, with the IDM parameters it drives by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub x: f64,
    pub vx: f64,
    pub length: f64,
    pub idm: IdmParams,
}

impl Neighbor {
    pub fn from_state(state: &VehicleState, idm: IdmParams) -> Self {
        Self { x: state.x, vx: state.vx, length: state.length, idm }
    }
}

/// Closest vehicle ahead and behind in one lane. `None` is an infinitely
/// distant slot.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LaneNeighbors {
    pub leader: Option<Neighbor>,
    pub follower: Option<Neighbor>,
}

/// Neighbourhood of a vehicle. `left`/`right` are `None` when the lane does not
/// exist (road edge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeighborSnapshot {
    pub current: LaneNeighbors,
    pub left: Option<LaneNeighbors>,
    pub right: Option<LaneNeighbors>,
}

/// Lane-change direction relative to the current lane (lane 0 is rightmost).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneSide {
    Left,
    Right,
}

/// Bumper-to-bumper distance from a follower at `(x_f, len_f)` to a leader.
pub fn bumper_gap(follower_x: f64, follower_len: f64, leader_x: f64, leader_len: f64) -> f64 {
    leader_x - follower_x - 0.5 * (follower_len + leader_len)
}

/// A longitudinal body: position, speed, length and driving parameters.
#[derive(Debug, Clone, Copy)]
struct Body {
    x: f64,
    vx: f64,
    length: f64,
    idm: IdmParams,
}

impl From<Neighbor> for Body {
    fn from(n: Neighbor) -> Self {
        Body { x: n.x, vx: n.vx, length: n.length, idm: n.idm }
    }
}

fn follow(body: &Body, leader: Option<&Body>, decel_cap: f64) -> Result<f64, DynamicsError> {
    match leader {
        None => idm_acceleration(body.vx, f64::INFINITY, 0.0, &body.idm, decel_cap),
        Some(l) => {
            let gap = bumper_gap(body.x, body.length, l.x, l.length);
            idm_acceleration(body.vx, gap, body.vx - l.vx, &body.idm, decel_cap)
        }
    }
}

/// Evaluates a change into `target`. Returns the net gain when both criteria
/// hold; `None` when the change is unsafe, physically blocked or not worth it.
fn evaluate_lane(
    me: &Body,
    current: &LaneNeighbors,
    target: &LaneNeighbors,
    mobil: &MobilParams,
    decel_cap: f64,
) -> Option<f64> {
    let old_leader = current.leader.map(Body::from);
    let new_leader = target.leader.map(Body::from);
    let new_follower = target.follower.map(Body::from);
    let old_follower = current.follower.map(Body::from);

    // Any overlap in the target lane blocks the change outright.
    let ego_new = follow(me, new_leader.as_ref(), decel_cap).ok()?;
    let (nf_new, nf_old) = match &new_follower {
        Some(nf) => (follow(nf, Some(me), decel_cap).ok()?, follow(nf, new_leader.as_ref(), decel_cap).ok()?),
        None => (0.0, 0.0),
    };
    if !mobil_safety(nf_new, mobil) {
        return None;
    }

    let ego_old = follow(me, old_leader.as_ref(), decel_cap).unwrap_or(-decel_cap);
    let (of_new, of_old) = match &old_follower {
        Some(of) => (
            follow(of, old_leader.as_ref(), decel_cap).unwrap_or(-decel_cap),
            follow(of, Some(me), decel_cap).unwrap_or(-decel_cap),
        ),
        None => (0.0, 0.0),
    };
    let gains = AccelerationChanges {
        ego_new,
        ego_old,
        new_follower_new: nf_new,
        new_follower_old: nf_old,
        old_follower_new: of_new,
        old_follower_old: of_old,
    };
    mobil_incentive(&gains, mobil).then(|| gains.net_gain(mobil.politeness))
}

/// MOBIL lane selection for one vehicle. Returns the target lane index, if any.
///
/// When both sides qualify the larger net gain wins; an exact tie keeps right.
pub fn mobil_decide(
    vehicle: &VehicleState,
    neighbors: &NeighborSnapshot,
    idm: &IdmParams,
    mobil: &MobilParams,
    decel_cap: f64,
) -> Option<usize> {
    let me = Body { x: vehicle.x, vx: vehicle.vx, length: vehicle.length, idm: *idm };
    let right = neighbors
        .right
        .as_ref()
        .filter(|_| vehicle.lane > 0)
        .and_then(|lane| evaluate_lane(&me, &neighbors.current, lane, mobil, decel_cap));
    let left = neighbors
        .left
        .as_ref()
        .and_then(|lane| evaluate_lane(&me, &neighbors.current, lane, mobil, decel_cap));
    match (right, left) {
        (Some(r), Some(l)) if l > r => Some(vehicle.lane + 1),
        (Some(_), _) => Some(vehicle.lane - 1),
        (None, Some(_)) => Some(vehicle.lane + 1),
        (None, None) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{presets, BehaviorClass, DEFAULT_DECEL_CAP};
    use proptest::prelude::*;

    fn vehicle(lane: usize, x: f64, vx: f64) -> VehicleState {
        VehicleState::new(0, lane, x, 4.0 * lane as f64, vx, BehaviorClass::Conservative)
    }

    fn neighbor(x: f64, vx: f64) -> Neighbor {
        Neighbor { x, vx, length: 5.0, idm: presets::conservative().idm }
    }

    #[test]
    fn safety_rejects_hard_braking() {
        assert!(!mobil_safety(-10.0, &presets::aggressive().mobil));
    }

    #[test]
    fn safety_accepts_non_braking_follower() {
        assert!(mobil_safety(0.0, &presets::aggressive().mobil));
        assert!(mobil_safety(0.0, &presets::conservative().mobil));
    }

    #[test]
    fn safety_boundary_is_inclusive() {
        assert!(mobil_safety(-3.0, &presets::conservative().mobil));
    }

    #[test]
    fn egoistic_driver_ignores_neighbors() {
        let gains = AccelerationChanges {
            ego_new: 0.1,
            ego_old: 0.0,
            new_follower_new: -7.0,
            new_follower_old: 1.0,
            old_follower_new: -2.0,
            old_follower_old: 0.5,
        };
        assert!(mobil_incentive(&gains, &presets::aggressive().mobil));
    }

    #[test]
    fn polite_driver_worked_example() {
        let gains = AccelerationChanges {
            ego_new: 0.5,
            ego_old: 0.0,
            new_follower_new: -0.4,
            new_follower_old: 0.0,
            old_follower_new: 0.0,
            old_follower_old: 0.0,
        };
        let p = MobilParams { politeness: 0.5, min_accel_gain: 0.2, safe_decel_limit: 3.0 };
        assert!((gains.net_gain(0.5) - 0.3).abs() < 1e-15);
        assert!(mobil_incentive(&gains, &p));
    }

    #[test]
    fn zero_gain_never_triggers() {
        let gains = AccelerationChanges::default();
        assert!(!mobil_incentive(&gains, &presets::aggressive().mobil));
        assert!(!mobil_incentive(&gains, &presets::conservative().mobil));
    }

    #[test]
    fn empty_road_at_desired_speed_keeps_lane() {
        let p = presets::aggressive();
        let v = vehicle(1, 0.0, p.idm.desired_speed);
        let snap = NeighborSnapshot {
            current: LaneNeighbors::default(),
            left: Some(LaneNeighbors::default()),
            right: Some(LaneNeighbors::default()),
        };
        assert_eq!(mobil_decide(&v, &snap, &p.idm, &p.mobil, DEFAULT_DECEL_CAP), None);
    }

    #[test]
    fn slow_leader_triggers_left_change() {
        let p = presets::aggressive();
        // Rightmost lane, so the left lane is the only candidate.
        let v = vehicle(0, 0.0, 30.0);
        let snap = NeighborSnapshot {
            current: LaneNeighbors { leader: Some(neighbor(40.0, 15.0)), follower: None },
            left: Some(LaneNeighbors::default()),
            right: None,
        };
        assert_eq!(mobil_decide(&v, &snap, &p.idm, &p.mobil, DEFAULT_DECEL_CAP), Some(1));
    }

    #[test]
    fn edge_lane_only_evaluates_existing_side() {
        let p = presets::aggressive();
        let v = vehicle(3, 0.0, 30.0);
        let snap = NeighborSnapshot {
            current: LaneNeighbors { leader: Some(neighbor(40.0, 15.0)), follower: None },
            left: None,
            right: Some(LaneNeighbors::default()),
        };
        assert_eq!(mobil_decide(&v, &snap, &p.idm, &p.mobil, DEFAULT_DECEL_CAP), Some(2));
    }

    #[test]
    fn blocked_target_lane_is_rejected() {
        let p = presets::aggressive();
        let v = vehicle(0, 0.0, 30.0);
        let snap = NeighborSnapshot {
            current: LaneNeighbors { leader: Some(neighbor(40.0, 15.0)), follower: None },
            // A car right alongside overlaps the ego body.
            left: Some(LaneNeighbors { leader: Some(neighbor(2.0, 30.0)), follower: None }),
            right: None,
        };
        assert_eq!(mobil_decide(&v, &snap, &p.idm, &p.mobil, DEFAULT_DECEL_CAP), None);
    }

    #[test]
    fn unsafe_cut_in_is_rejected() {
        let p = presets::conservative();
        let v = vehicle(0, 0.0, 20.0);
        let snap = NeighborSnapshot {
            current: LaneNeighbors { leader: Some(neighbor(30.0, 5.0)), follower: None },
            // Fast follower just behind in the target lane would have to brake hard.
            left: Some(LaneNeighbors { leader: None, follower: Some(neighbor(-12.0, 35.0)) }),
            right: None,
        };
        assert_eq!(mobil_decide(&v, &snap, &p.idm, &p.mobil, DEFAULT_DECEL_CAP), None);
    }

    #[test]
    fn symmetric_tie_keeps_right() {
        let p = presets::aggressive();
        let v = vehicle(1, 0.0, 30.0);
        let snap = NeighborSnapshot {
            current: LaneNeighbors { leader: Some(neighbor(40.0, 15.0)), follower: None },
            left: Some(LaneNeighbors::default()),
            right: Some(LaneNeighbors::default()),
        };
        assert_eq!(mobil_decide(&v, &snap, &p.idm, &p.mobil, DEFAULT_DECEL_CAP), Some(0));
    }

    proptest! {
        #[test]
        fn egoistic_reduces_to_own_gain(
            vals in proptest::array::uniform6(-9.0f64..9.0),
            th in 0.0f64..1.0,
        ) {
            let gains = AccelerationChanges {
                ego_new: vals[0], ego_old: vals[1],
                new_follower_new: vals[2], new_follower_old: vals[3],
                old_follower_new: vals[4], old_follower_old: vals[5],
            };
            let p = MobilParams { politeness: 0.0, min_accel_gain: th, safe_decel_limit: 9.0 };
            prop_assert_eq!(mobil_incentive(&gains, &p), vals[0] - vals[1] > th);
        }

        #[test]
        fn unchanged_world_gives_no_incentive(
            ego in -9.0f64..9.0, n in -9.0f64..9.0, o in -9.0f64..9.0, pol in 0.0f64..1.0, th in 0.0f64..1.0,
        ) {
            let gains = AccelerationChanges {
                ego_new: ego, ego_old: ego,
                new_follower_new: n, new_follower_old: n,
                old_follower_new: o, old_follower_old: o,
            };
            let p = MobilParams { politeness: pol, min_accel_gain: th, safe_decel_limit: 3.0 };
            prop_assert!(!mobil_incentive(&gains, &p));
        }
    }
}
