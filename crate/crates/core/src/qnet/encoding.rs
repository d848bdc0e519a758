use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, Observation, FEATURES};

/// Per-column scaling applied to an observation before it enters a network.
/// The ego row and the relative rows have separate scales; a zero scale
/// drops the column (the ego's absolute `x` carries no policy information).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputEncoding {
    pub ego_scale: [f64; FEATURES],
    pub other_scale: [f64; FEATURES],
}

impl InputEncoding {
    pub fn identity() -> Self {
        Self { ego_scale: [1.0; FEATURES], other_scale: [1.0; FEATURES] }
    }

    pub fn for_env(cfg: &EnvConfig) -> Self {
        let road_width = cfg.lane_width * (cfg.lane_count.max(2) - 1) as f64;
        let v_max = cfg.ego_speed_limits[1];
        let lateral_speed = cfg.lane_width / cfg.lane_change_duration;
        Self {
            ego_scale: [1.0, 0.0, 1.0 / road_width, 1.0 / v_max, 1.0 / lateral_speed],
            other_scale: [1.0, 1.0 / cfg.d_min, 1.0 / cfg.lane_width, 0.1, 1.0 / lateral_speed],
        }
    }

    pub fn encode(&self, obs: &Observation) -> Array2<f64> {
        let mut x = obs.matrix.clone();
        for (r, mut row) in x.rows_mut().into_iter().enumerate() {
            let scale = if r == 0 { &self.ego_scale } else { &self.other_scale };
            for (v, s) in row.iter_mut().zip(scale) {
                *v *= s;
            }
        }
        x
    }
}
