//! Reference scenes for behavior generation: one subject vehicle starting at
//! the rear of conservative background traffic.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::BehaviorParams;
use crate::env::{place, run_world, Driver, EnvConfig, EnvError, Slot, TrajectoryRecord, World};

/// Id of the subject vehicle in a scene.
pub const SUBJECT_ID: u32 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    /// Vehicles in the scene, subject included.
    pub vehicle_count: usize,
    /// Length of the spawn region, m. Long enough that a fast subject finds
    /// gaps to overtake through.
    pub spawn_length: f64,
    pub duration: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { vehicle_count: 20, spawn_length: 800.0, duration: 60.0 }
    }
}

impl SceneConfig {
    /// The environment the scene runs in: road, timing and presets from
    /// `base`, density from `self`.
    pub fn env(&self, base: &EnvConfig) -> EnvConfig {
        EnvConfig { vehicle_count: self.vehicle_count, spawn_length: self.spawn_length, ..base.clone() }
    }

    pub fn ticks(&self, dt: f64) -> u64 {
        (self.duration / dt - 1e-9).ceil() as u64
    }
}

/// Builds the scene: the subject on the rearmost slot of a random lane, the
/// others on random free slots with the conservative preset.
pub fn subject_world(
    base: &EnvConfig,
    scene: &SceneConfig,
    subject: &BehaviorParams,
    seed: u64,
) -> Result<World, EnvError> {
    let cfg = scene.env(base);
    cfg.validate()?;
    subject.validate().map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_lane = cfg.slots_per_lane();
    let first = Slot { lane: rng.random_range(0..cfg.lane_count), index: 0 };
    let mut free: Vec<Slot> = (0..cfg.lane_count)
        .flat_map(|lane| (0..per_lane).map(move |index| Slot { lane, index }))
        .filter(|s| *s != first)
        .collect();
    free.shuffle(&mut rng);

    let background = cfg.presets.conservative;
    let mut vehicles = vec![place(&cfg, SUBJECT_ID, first, subject.idm.desired_speed, subject.label)];
    let mut drivers = vec![Driver::npc(*subject)];
    for (k, slot) in free.into_iter().take(cfg.vehicle_count - 1).enumerate() {
        vehicles.push(place(&cfg, k as u32 + 1, slot, background.idm.desired_speed, background.label));
        drivers.push(Driver::npc(background));
    }
    Ok(World::new(cfg.road(), cfg.dt, cfg.decel_cap, vehicles, drivers))
}

/// Runs one scene to completion and returns its trajectory log.
pub fn run_subject_scene(
    base: &EnvConfig,
    scene: &SceneConfig,
    subject: &BehaviorParams,
    seed: u64,
) -> Result<Vec<TrajectoryRecord>, EnvError> {
    let mut world = subject_world(base, scene, subject, seed)?;
    Ok(run_world(&mut world, scene.ticks(base.dt)))
}
