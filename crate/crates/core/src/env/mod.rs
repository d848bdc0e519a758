//! Episodic highway MDP around one ego vehicle.
//!
//! The ego picks one of five discrete actions every `decision_period` ticks;
//! all other vehicles are IDM/MOBIL agents drawn from the scenario's
//! behavior classes. Transitions are deterministic given the reset seed.

mod config;
mod world;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{EnvConfig, PresetTable, RewardWeights, Scenario};
pub use world::{place, spawn_slots, Control, Driver, Maneuver, Slot, TickEvents, World};

use crate::dynamics::{BehaviorClass, BehaviorParams, VehicleState};

/// Columns of an observation row: presence, x, y, vx, vy.
pub const FEATURES: usize = 5;
pub const ACTION_COUNT: usize = 5;
pub const EGO_ID: u32 = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot place {vehicles} vehicles on {capacity} collision-free spawn slots")]
    Overcrowded { vehicles: usize, capacity: usize },
    #[error("step called on a finished episode; call reset first")]
    EpisodeDone,
    #[error("step called before reset")]
    NotReset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Accelerate,
    Decelerate,
    RightLaneChange,
    LeftLaneChange,
    Idle,
}

impl Action {
    pub const ALL: [Action; ACTION_COUNT] =
        [Action::Accelerate, Action::Decelerate, Action::RightLaneChange, Action::LeftLaneChange, Action::Idle];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }
}

/// `V×F` matrix; row 0 is the ego in absolute coordinates, the remaining rows
/// are the nearest sensed vehicles relative to the ego, padded with zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub matrix: Array2<f64>,
}

impl Observation {
    pub fn zeros(rows: usize) -> Self {
        Self { matrix: Array2::zeros((rows, FEATURES)) }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_present(&self, row: usize) -> bool {
        self.matrix[[row, 0]] != 0.0
    }

    pub fn present_count(&self) -> usize {
        (0..self.rows()).filter(|&r| self.is_present(r)).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub collided: bool,
    pub ego_speed: f64,
    /// An ego lane change completed during this step.
    pub lane_changed: bool,
    pub ego_lane: usize,
    pub time_limit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

impl RewardWeights {
    /// Collision, lane-change, right-lane and high-speed terms, in that order.
    pub fn terms(&self, info: &StepInfo, speed_range: [f64; 2]) -> [f64; 4] {
        let indicator = |b: bool| if b { 1.0 } else { 0.0 };
        let speed_frac = ((info.ego_speed - speed_range[0]) / (speed_range[1] - speed_range[0])).clamp(0.0, 1.0);
        [
            self.collision * indicator(info.collided),
            self.lane_change * indicator(info.lane_changed),
            self.right_lane * indicator(info.ego_lane == 0),
            self.high_speed * speed_frac,
        ]
    }
}

/// One vehicle at one tick, as written to trajectory logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub id: u32,
    pub lane: usize,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub behavior: BehaviorClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maneuver: Option<Maneuver>,
}

impl TrajectoryRecord {
    pub fn from_state(t: f64, s: &VehicleState, maneuver: Option<Maneuver>) -> Self {
        Self { t, id: s.id, lane: s.lane, x: s.x, y: s.y, vx: s.vx, vy: s.vy, behavior: s.behavior, maneuver }
    }
}

/// Appends one record per vehicle for the world's current tick.
pub fn record_tick(world: &World, events: Option<&TickEvents>, out: &mut Vec<TrajectoryRecord>) {
    let t = world.time();
    for v in world.vehicles() {
        let maneuver = events
            .and_then(|ev| ev.started.iter().find(|(id, _)| *id == v.id))
            .map(|&(_, side)| Maneuver::from(side));
        out.push(TrajectoryRecord::from_state(t, v, maneuver));
    }
}

/// Parameters each scenario assigns to NPC `k` (0-based among NPCs), given
/// the sampled set of aggressive NPC indices.
fn npc_params(cfg: &EnvConfig, k: usize, aggressive: &[usize]) -> (BehaviorParams, BehaviorClass) {
    match cfg.scenario {
        Scenario::Default => (cfg.presets.default, BehaviorClass::Default),
        Scenario::Conservative => (cfg.presets.conservative, BehaviorClass::Conservative),
        Scenario::Aggressive if aggressive.contains(&k) => (cfg.presets.aggressive, BehaviorClass::Aggressive),
        Scenario::Aggressive => (cfg.presets.conservative, BehaviorClass::Conservative),
    }
}

/// An NPC-only world: `vehicle_count` agents on random spawn slots, classes
/// drawn per the scenario. Deterministic in `(cfg, seed)`.
pub fn npc_world(cfg: &EnvConfig, seed: u64) -> Result<World, EnvError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.vehicle_count;
    let slots = spawn_slots(cfg, n, false, &mut rng)?;
    let share = match cfg.scenario {
        Scenario::Aggressive => (cfg.aggressive_fraction * n as f64).round() as usize,
        _ => 0,
    };
    let aggressive = sample(&mut rng, n, share).into_vec();
    let (vehicles, drivers) = slots
        .iter()
        .enumerate()
        .map(|(k, &slot)| {
            let (params, class) = npc_params(cfg, k, &aggressive);
            (place(cfg, k as u32, slot, params.idm.desired_speed, class), Driver::npc(params))
        })
        .unzip();
    Ok(World::new(cfg.road(), cfg.dt, cfg.decel_cap, vehicles, drivers))
}

/// Runs `world` for `ticks` ticks, returning the full per-tick trace
/// (initial state included).
pub fn run_world(world: &mut World, ticks: u64) -> Vec<TrajectoryRecord> {
    let mut out = Vec::new();
    record_tick(world, None, &mut out);
    for _ in 0..ticks {
        let ev = world.step();
        record_tick(world, Some(&ev), &mut out);
    }
    out
}

#[derive(Debug, Clone)]
pub struct HighwayEnv {
    cfg: EnvConfig,
    world: Option<World>,
    target_speed: f64,
    done: bool,
    start_x: f64,
    lane_changes: usize,
    npc_collisions: usize,
    trace: Option<Vec<TrajectoryRecord>>,
}

impl HighwayEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        Ok(Self {
            target_speed: cfg.ego_initial_speed,
            cfg,
            world: None,
            done: false,
            start_x: 0.0,
            lane_changes: 0,
            npc_collisions: 0,
            trace: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Start recording one [`TrajectoryRecord`] per vehicle per tick.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<TrajectoryRecord> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn world(&self) -> Option<&World> {
        self.world.as_ref()
    }

    pub fn ego(&self) -> Option<&VehicleState> {
        self.world.as_ref().map(|w| &w.vehicles()[0])
    }

    pub fn target_speed(&self) -> f64 {
        self.target_speed
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn elapsed(&self) -> f64 {
        self.world.as_ref().map_or(0.0, World::time)
    }

    /// Longitudinal distance the ego covered since reset, m.
    pub fn ego_distance(&self) -> f64 {
        self.ego().map_or(0.0, |e| e.x - self.start_x)
    }

    /// Completed ego lane changes since reset.
    pub fn lane_changes(&self) -> usize {
        self.lane_changes
    }

    pub fn npc_collisions(&self) -> usize {
        self.npc_collisions
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        let cfg = &self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = cfg.vehicle_count;
        let slots = spawn_slots(cfg, n, true, &mut rng)?;
        let aggressive: Vec<usize> = sample(&mut rng, n - 1, cfg.aggressive_count()).into_vec();

        let mut vehicles = Vec::with_capacity(n);
        let mut drivers = Vec::with_capacity(n);
        let limits = cfg.ego_speed_limits;
        self.target_speed = cfg.ego_initial_speed.clamp(limits[0], limits[1]);
        vehicles.push(place(cfg, EGO_ID, slots[0], cfg.ego_initial_speed, BehaviorClass::Ego));
        drivers.push(Driver {
            params: cfg.presets.default,
            control: Control::External { target_speed: self.target_speed, lane_request: None },
        });
        for (k, &slot) in slots.iter().enumerate().skip(1) {
            let (params, class) = npc_params(cfg, k - 1, &aggressive);
            vehicles.push(place(cfg, k as u32, slot, params.idm.desired_speed, class));
            drivers.push(Driver::npc(params));
        }
        let world = World::new(cfg.road(), cfg.dt, cfg.decel_cap, vehicles, drivers);
        self.start_x = world.vehicles()[0].x;
        if let Some(trace) = self.trace.as_mut() {
            trace.clear();
            record_tick(&world, None, trace);
        }
        self.world = Some(world);
        self.done = false;
        self.lane_changes = 0;
        self.npc_collisions = 0;
        Ok(self.observe())
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let cfg = &self.cfg;
        let world = self.world.as_mut().ok_or(EnvError::NotReset)?;
        let limits = cfg.ego_speed_limits;
        let ego_lane = world.vehicles()[0].lane;
        let mut lane_request = None;
        match action {
            Action::Accelerate => self.target_speed = (self.target_speed + cfg.speed_step).min(limits[1]),
            Action::Decelerate => self.target_speed = (self.target_speed - cfg.speed_step).max(limits[0]),
            Action::RightLaneChange => lane_request = ego_lane.checked_sub(1),
            Action::LeftLaneChange => lane_request = (ego_lane + 1 < cfg.lane_count).then_some(ego_lane + 1),
            Action::Idle => {}
        }
        world.driver_mut(0).control = Control::External { target_speed: self.target_speed, lane_request };

        let end_tick = cfg.ticks_per_episode();
        let mut collided = false;
        let mut lane_changed = false;
        for _ in 0..cfg.decision_period {
            let events = world.step();
            if let Some(trace) = self.trace.as_mut() {
                record_tick(world, Some(&events), trace);
            }
            for &(a, b) in &events.collisions {
                if a == EGO_ID || b == EGO_ID {
                    collided = true;
                } else {
                    self.npc_collisions += 1;
                }
            }
            if !collided && events.completed.contains(&EGO_ID) {
                lane_changed = true;
                self.lane_changes += 1;
            }
            if collided || world.tick_count() >= end_tick {
                break;
            }
        }
        let time_limit = world.tick_count() >= end_tick;
        let ego = &world.vehicles()[0];
        let info = StepInfo { collided, ego_speed: ego.vx, lane_changed, ego_lane: ego.lane, time_limit };
        let reward = cfg.rewards.terms(&info, cfg.speed_range).iter().sum();
        self.done = collided || time_limit;
        Ok(StepResult { observation: self.observe(), reward, done: self.done, info })
    }

    pub fn observe(&self) -> Observation {
        let v_rows = self.cfg.observed_vehicles;
        let mut obs = Observation::zeros(v_rows);
        let Some(world) = self.world.as_ref() else { return obs };
        let vehicles = world.vehicles();
        let ego = &vehicles[0];
        obs.matrix.row_mut(0).assign(&ndarray::arr1(&[1.0, ego.x, ego.y, ego.vx, ego.vy]));

        let mut sensed: Vec<(f64, u32, &VehicleState)> = vehicles[1..]
            .iter()
            .filter(|v| (v.x - ego.x).abs() <= self.cfg.sensing_range)
            .map(|v| ((v.x - ego.x).hypot(v.y - ego.y), v.id, v))
            .collect();
        sensed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (row, (_, _, v)) in sensed.into_iter().take(v_rows.saturating_sub(1)).enumerate() {
            obs.matrix
                .row_mut(row + 1)
                .assign(&ndarray::arr1(&[1.0, v.x - ego.x, v.y - ego.y, v.vx - ego.vx, v.vy - ego.vy]));
        }
        obs
    }
}

/// Outcome of one episode driven by a fixed policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub seed: u64,
    pub total_reward: f64,
    pub steps: usize,
    pub collided: bool,
    /// Ego distance covered, m.
    pub distance: f64,
    /// Simulated time, s.
    pub duration: f64,
    /// Completed ego lane changes.
    pub lane_changes: usize,
}

impl EpisodeStats {
    pub fn avg_speed(&self) -> f64 {
        if self.duration > 0.0 {
            self.distance / self.duration
        } else {
            0.0
        }
    }
}

/// Resets `env` with `seed` and steps it with `policy` until the episode ends.
pub fn run_episode<P>(env: &mut HighwayEnv, seed: u64, mut policy: P) -> Result<EpisodeStats, EnvError>
where
    P: FnMut(&Observation) -> Action,
{
    let mut obs = env.reset(seed)?;
    let mut stats = EpisodeStats {
        seed,
        total_reward: 0.0,
        steps: 0,
        collided: false,
        distance: 0.0,
        duration: 0.0,
        lane_changes: 0,
    };
    loop {
        let r = env.step(policy(&obs))?;
        stats.total_reward += r.reward;
        stats.steps += 1;
        stats.collided |= r.info.collided;
        obs = r.observation;
        if r.done {
            break;
        }
    }
    stats.distance = env.ego_distance();
    stats.duration = env.elapsed();
    stats.lane_changes = env.lane_changes();
    Ok(stats)
}
