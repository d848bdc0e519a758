//! The multi-lane traffic world: every tick NPCs pick lanes with MOBIL, all
//! vehicles accelerate with IDM from the same snapshot, then integrate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvConfig, EnvError};
use crate::dynamics::{
    bumper_gap, idm_acceleration, integrate, mobil_decide, BehaviorClass, BehaviorParams, IdmParams, LaneChange, LaneNeighbors,
    LaneSide, Neighbor, NeighborSnapshot, RoadGeometry, VehicleState,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control {
    /// IDM longitudinal control plus MOBIL lane selection.
    Npc,
    /// Externally driven: IDM tracking `target_speed`, lane changes on request.
    External { target_speed: f64, lane_request: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Driver {
    pub params: BehaviorParams,
    pub control: Control,
}

impl Driver {
    pub fn npc(params: BehaviorParams) -> Self {
        Self { params, control: Control::Npc }
    }

    /// IDM parameters actually in effect (external drivers track their target).
    pub fn idm(&self) -> IdmParams {
        match self.control {
            Control::Npc => self.params.idm,
            Control::External { target_speed, .. } => self.params.idm.with_desired_speed(target_speed),
        }
    }
}

/// Lane-change start marker written into trajectory logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maneuver {
    LaneChangeLeft,
    LaneChangeRight,
}

impl From<LaneSide> for Maneuver {
    fn from(side: LaneSide) -> Self {
        match side {
            LaneSide::Left => Maneuver::LaneChangeLeft,
            LaneSide::Right => Maneuver::LaneChangeRight,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickEvents {
    /// `(vehicle id, direction)` of maneuvers begun this tick.
    pub started: Vec<(u32, LaneSide)>,
    /// Vehicles whose maneuver finished this tick.
    pub completed: Vec<u32>,
    /// Overlapping pairs after the tick, `(lower id, higher id)`.
    pub collisions: Vec<(u32, u32)>,
}

#[derive(Debug, Clone)]
pub struct World {
    road: RoadGeometry,
    dt: f64,
    decel_cap: f64,
    vehicles: Vec<VehicleState>,
    drivers: Vec<Driver>,
    tick: u64,
}

impl World {
    pub fn new(road: RoadGeometry, dt: f64, decel_cap: f64, vehicles: Vec<VehicleState>, drivers: Vec<Driver>) -> Self {
        assert_eq!(vehicles.len(), drivers.len());
        Self { road, dt, decel_cap, vehicles, drivers, tick: 0 }
    }

    pub fn road(&self) -> &RoadGeometry {
        &self.road
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn drivers(&self) -> &[Driver] {
        &self.drivers
    }

    pub fn driver_mut(&mut self, index: usize) -> &mut Driver {
        &mut self.drivers[index]
    }

    /// Nearest vehicles ahead and behind vehicle `me` among those occupying `lane`.
    pub fn lane_neighbors(&self, me: usize, lane: usize) -> LaneNeighbors {
        lane_neighbors_in(&self.vehicles, &self.drivers, me, lane)
    }

    pub fn neighbor_snapshot(&self, me: usize) -> NeighborSnapshot {
        neighbor_snapshot_in(&self.vehicles, &self.drivers, self.road.lane_count, me)
    }

    /// IDM acceleration of vehicle `i` behind the closest leader in any lane
    /// it occupies. Overlap with the leader yields full braking.
    pub fn longitudinal_accel(&self, i: usize) -> f64 {
        longitudinal_accel_in(&self.vehicles, &self.drivers, self.decel_cap, i)
    }

    pub fn step(&mut self) -> TickEvents {
        let n = self.vehicles.len();
        let mut targets = vec![None; n];
        // Decisions are taken in index order against a working copy in which
        // earlier movers already occupy their target lane, so two vehicles
        // cannot merge into the same gap from opposite sides.
        let mut planned = self.vehicles.clone();
        for i in 0..n {
            if planned[i].maneuver.is_some() {
                continue;
            }
            let d = &self.drivers[i];
            let target = match d.control {
                Control::Npc => mobil_decide(
                    &planned[i],
                    &neighbor_snapshot_in(&planned, &self.drivers, self.road.lane_count, i),
                    &d.params.idm,
                    &d.params.mobil,
                    self.decel_cap,
                ),
                Control::External { lane_request, .. } => lane_request,
            };
            if let Some(lane) = target.filter(|&l| l < self.road.lane_count && l != planned[i].lane) {
                let v = &mut planned[i];
                v.maneuver =
                    Some(LaneChange { from_lane: v.lane, to_lane: lane, elapsed: 0.0, duration: self.road.lane_change_duration });
                v.lane = lane;
            }
            targets[i] = target;
        }
        let accels: Vec<f64> =
            (0..n).map(|i| longitudinal_accel_in(&planned, &self.drivers, self.decel_cap, i)).collect();

        let mut events = TickEvents::default();
        for i in 0..n {
            let before = &self.vehicles[i];
            let after = integrate(before, accels[i], targets[i], self.dt, &self.road);
            if before.maneuver.is_none() && after.lane != before.lane {
                let side = if after.lane > before.lane { LaneSide::Left } else { LaneSide::Right };
                events.started.push((after.id, side));
            }
            if before.maneuver.is_some() && after.maneuver.is_none() {
                events.completed.push(after.id);
            }
            self.vehicles[i] = after;
        }
        self.tick += 1;

        for i in 0..n {
            for j in (i + 1)..n {
                if self.vehicles[i].overlaps(&self.vehicles[j]) {
                    let (a, b) = (self.vehicles[i].id, self.vehicles[j].id);
                    events.collisions.push((a.min(b), a.max(b)));
                }
            }
        }
        events
    }
}

fn longitudinal_accel_in(vehicles: &[VehicleState], drivers: &[Driver], decel_cap: f64, i: usize) -> f64 {
    let me = &vehicles[i];
    let idm = drivers[i].idm();
    let mut lanes = vec![me.lane];
    if let Some(m) = me.maneuver {
        lanes.push(m.from_lane);
    }
    let leader = lanes
        .into_iter()
        .filter_map(|lane| lane_neighbors_in(vehicles, drivers, i, lane).leader)
        .min_by(|a, b| a.x.total_cmp(&b.x));
    let result = match leader {
        None => idm_acceleration(me.vx, f64::INFINITY, 0.0, &idm, decel_cap),
        Some(l) => {
            let gap = bumper_gap(me.x, me.length, l.x, l.length);
            idm_acceleration(me.vx, gap, me.vx - l.vx, &idm, decel_cap)
        }
    };
    result.unwrap_or(-decel_cap)
}

fn lane_neighbors_in(vehicles: &[VehicleState], drivers: &[Driver], me: usize, lane: usize) -> LaneNeighbors {
    let x = vehicles[me].x;
    let mut leader: Option<usize> = None;
    let mut follower: Option<usize> = None;
    for (j, other) in vehicles.iter().enumerate() {
        if j == me || !other.occupies(lane) {
            continue;
        }
        if other.x >= x {
            if leader.is_none_or(|l| other.x < vehicles[l].x) {
                leader = Some(j);
            }
        } else if follower.is_none_or(|f| other.x > vehicles[f].x) {
            follower = Some(j);
        }
    }
    let as_neighbor = |j: usize| Neighbor::from_state(&vehicles[j], drivers[j].idm());
    LaneNeighbors { leader: leader.map(as_neighbor), follower: follower.map(as_neighbor) }
}

fn neighbor_snapshot_in(vehicles: &[VehicleState], drivers: &[Driver], lane_count: usize, me: usize) -> NeighborSnapshot {
    let lane = vehicles[me].lane;
    NeighborSnapshot {
        current: lane_neighbors_in(vehicles, drivers, me, lane),
        left: (lane + 1 < lane_count).then(|| lane_neighbors_in(vehicles, drivers, me, lane + 1)),
        right: (lane > 0).then(|| lane_neighbors_in(vehicles, drivers, me, lane - 1)),
    }
}

/// Spawn slots in a lane: `x = k * spacing` for `k` in `0..slots_per_lane`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub lane: usize,
    pub index: usize,
}

/// Places vehicles on random distinct slots. When `with_ego` is set the
/// first returned slot is the mid-pack ego slot in a random lane.
pub fn spawn_slots<R: Rng>(cfg: &EnvConfig, count: usize, with_ego: bool, rng: &mut R) -> Result<Vec<Slot>, EnvError> {
    let per_lane = cfg.slots_per_lane();
    let capacity = per_lane * cfg.lane_count;
    if count > capacity {
        return Err(EnvError::Overcrowded { vehicles: count, capacity });
    }
    let mut out = Vec::with_capacity(count);
    let ego = with_ego.then(|| Slot { lane: rng.random_range(0..cfg.lane_count), index: per_lane / 2 });
    let mut free: Vec<Slot> = (0..cfg.lane_count)
        .flat_map(|lane| (0..per_lane).map(move |index| Slot { lane, index }))
        .filter(|s| ego.is_none_or(|e| *s != e))
        .collect();
    free.shuffle(rng);
    out.extend(ego);
    out.extend(free.into_iter().take(count - out.len()));
    Ok(out)
}

/// Builds a vehicle on `slot` moving at `speed`. Lanes are staggered by
/// `spacing / lane_count` so neighbouring lanes do not start side by side.
pub fn place(cfg: &EnvConfig, id: u32, slot: Slot, speed: f64, behavior: BehaviorClass) -> VehicleState {
    let road = cfg.road();
    let x = (slot.index as f64 + slot.lane as f64 / cfg.lane_count as f64) * cfg.spawn_spacing;
    VehicleState::new(id, slot.lane, x, road.lane_center(slot.lane), speed, behavior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::presets;

    fn world_of(states: Vec<VehicleState>, params: BehaviorParams) -> World {
        let drivers = states.iter().map(|_| Driver::npc(params)).collect();
        World::new(RoadGeometry::default(), 0.1, 10.0, states, drivers)
    }

    #[test]
    fn solo_vehicle_at_desired_speed_stays_put() {
        let p = presets::conservative();
        let mut w = world_of(vec![VehicleState::new(0, 1, 0.0, 4.0, 25.0, BehaviorClass::Conservative)], p);
        for _ in 0..100 {
            let ev = w.step();
            assert!(ev.started.is_empty() && ev.collisions.is_empty());
        }
        assert_eq!(w.vehicles()[0].vx, 25.0);
        assert!((w.vehicles()[0].x - 250.0).abs() < 1e-9);
    }

    #[test]
    fn leader_lookup_per_lane() {
        let p = presets::conservative();
        let w = world_of(
            vec![
                VehicleState::new(0, 0, 0.0, 0.0, 20.0, BehaviorClass::Conservative),
                VehicleState::new(1, 0, 50.0, 0.0, 20.0, BehaviorClass::Conservative),
                VehicleState::new(2, 1, 10.0, 4.0, 20.0, BehaviorClass::Conservative),
                VehicleState::new(3, 0, -30.0, 0.0, 20.0, BehaviorClass::Conservative),
            ],
            p,
        );
        let n = w.lane_neighbors(0, 0);
        assert_eq!(n.leader.unwrap().x, 50.0);
        assert_eq!(n.follower.unwrap().x, -30.0);
        let left = w.lane_neighbors(0, 1);
        assert_eq!(left.leader.unwrap().x, 10.0);
        assert!(left.follower.is_none());
    }

    #[test]
    fn aggressive_driver_overtakes_slow_leader() {
        let mut w = World::new(
            RoadGeometry::default(),
            0.1,
            10.0,
            vec![
                VehicleState::new(0, 0, 0.0, 0.0, 30.0, BehaviorClass::Aggressive),
                VehicleState::new(1, 0, 60.0, 0.0, 15.0, BehaviorClass::Conservative),
            ],
            vec![Driver::npc(presets::aggressive()), Driver::npc(presets::conservative().with_speed(15.0))],
        );
        let mut started = Vec::new();
        for _ in 0..50 {
            started.extend(w.step().started);
        }
        assert_eq!(started.first(), Some(&(0, LaneSide::Left)));
    }

    #[test]
    fn external_driver_follows_requests() {
        let p = presets::midpoint();
        let mut w = World::new(
            RoadGeometry::default(),
            0.1,
            10.0,
            vec![VehicleState::new(0, 1, 0.0, 4.0, 25.0, BehaviorClass::Ego)],
            vec![Driver { params: p, control: Control::External { target_speed: 25.0, lane_request: Some(2) } }],
        );
        let ev = w.step();
        assert_eq!(ev.started, vec![(0, LaneSide::Left)]);
        assert_eq!(w.vehicles()[0].vx, 25.0);
    }
}
