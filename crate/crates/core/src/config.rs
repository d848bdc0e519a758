//! TOML run configuration shared by every command, and the provenance header
//! written at the top of every text artifact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::behavior::{Baseline, BehaviorError, CalibrationConfig, Classifier, ScoreWeights};
use crate::dynamics::BehaviorClass;
use crate::env::EnvConfig;
use crate::qnet::TrainConfig;
use crate::traffic_graph::EdgeWeighting;

pub const TOOL_NAME: &str = "behav";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ConfigError {
    /// Syntax or schema error; the message carries line and column.
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// What `simulate` puts on the road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulateMode {
    /// The `[env]` scenario with every vehicle, ego slot included, driven by
    /// its preset.
    Npc,
    /// The `[calibration.scene]` layout with one subject of class
    /// `subject_class` behind conservative traffic.
    Subject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub mode: SimulateMode,
    pub subject_class: BehaviorClass,
    /// Simulated time for `npc` mode, s. Subject scenes use the scene duration.
    pub duration: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { mode: SimulateMode::Npc, subject_class: BehaviorClass::Aggressive, duration: 60.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 100, seed: 2_000_000 }
    }
}

/// Scoring settings shared by `classify` and `calibrate`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub edge_weighting: EdgeWeighting,
    pub weights: ScoreWeights,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub calibration: CalibrationConfig,
    pub classify: ClassifyConfig,
    pub simulate: SimulateConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env.validate().map_err(|e| ConfigError::Invalid(format!("[env] {e}")))?;
        self.train.validate().map_err(|e| ConfigError::Invalid(format!("[train] {e}")))?;
        self.calibration.validate().map_err(|e| ConfigError::Invalid(format!("[calibration] {e}")))?;
        if !(self.simulate.duration > 0.0) {
            return Err(ConfigError::Invalid("[simulate] duration must be positive".into()));
        }
        if self.simulate.mode == SimulateMode::Subject
            && !matches!(self.simulate.subject_class, BehaviorClass::Conservative | BehaviorClass::Aggressive) {
            return Err(ConfigError::Invalid("[simulate] subject_class must be conservative or aggressive".into()));
        }
        if self.eval.episodes < 1 {
            return Err(ConfigError::Invalid("[eval] episodes must be >= 1".into()));
        }
        Ok(())
    }
}

impl RunConfig {
    /// Classifier at graph radius `d_min`, with its baseline regenerated from
    /// the calibration reference scenes at that radius.
    pub fn classifier(&self, d_min: f64) -> Result<Classifier, BehaviorError> {
        let env = EnvConfig { d_min, ..self.env.clone() };
        let cal = &self.calibration;
        let baseline = Baseline::generate(&env, &cal.scene, cal.baseline_seed_range(), self.classify.edge_weighting)?;
        Ok(Classifier { baseline, weights: self.classify.weights, d_min, weighting: self.classify.edge_weighting })
    }
}

/// Hex sha256 of the configuration text exactly as read.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// The configuration text, verbatim; empty when running on defaults.
    pub config: String,
}

impl Provenance {
    pub fn new(config_text: &str, seed: u64) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config_hash: config_hash(config_text),
            seed,
            config: config_text.to_string(),
        }
    }

    /// `#`-prefixed comment block for CSV and other line formats.
    pub fn comment_block(&self) -> String {
        let mut s = format!(
            "# tool: {} {}\n# config_sha256: {}\n# seed: {}\n",
            self.tool, self.version, self.config_hash, self.seed
        );
        for line in self.config.lines() {
            s.push_str("# | ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}

/// Drops leading `#` lines so the rest parses as plain CSV.
pub fn strip_comment_block(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.find('\n').map_or("", |i| &rest[i + 1..]);
    }
    rest
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn nested_keys_override() {
        let cfg = RunConfig::parse("[env]\nvehicle_count = 5\n[env.rewards]\ncollision = -3.0\n[train]\nepisodes = 7\n").unwrap();
        assert_eq!(cfg.env.vehicle_count, 5);
        assert_eq!(cfg.env.rewards.collision, -3.0);
        assert_eq!(cfg.env.rewards.lane_change, 0.2);
        assert_eq!(cfg.train.episodes, 7);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("[env]\nlane_count = 4\nlanes = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::Parse(_)));
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("lanes"), "{msg}");
    }

    #[test]
    fn semantic_errors_are_invalid() {
        let err = RunConfig::parse("[env]\ndt = -0.1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn comment_block_round_trip() {
        let p = Provenance::new("[env]\nseed = 3\n", 9);
        let block = p.comment_block();
        assert!(block.contains("# | seed = 3\n"));
        let text = format!("{block}a,b\n1,2\n");
        assert_eq!(strip_comment_block(&text), "a,b\n1,2\n");
        assert_eq!(config_hash(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
