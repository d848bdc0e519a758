//! Hill-climbing search for driver parameters that score as aggressive while
//! their maneuvers stay detectable in the centrality signal.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{maneuver_log, run_subject_scene, SUBJECT_ID, series_for, time_deviation_error_with, BehaviorError, Classifier, DerivativePeak, SceneConfig};
use crate::dynamics::{presets, BehaviorClass, BehaviorParams};
use crate::env::{EnvConfig, TrajectoryRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Stop once the accepted parameters reach a TDE below this, s.
    pub tde_threshold: f64,
    pub max_episodes: usize,
    /// Half-width of the multiplicative perturbation `U(1 - s, 1 + s)`.
    pub perturbation_scale: f64,
    pub rng_seed: u64,
    /// Scene seeds simulated for every candidate.
    pub scene_seeds: Vec<u64>,
    /// Number of seeds used to build the scoring baseline.
    pub baseline_seeds: u64,
    /// First baseline seed; kept apart from `scene_seeds`.
    pub baseline_seed_offset: u64,
    pub detector: DerivativePeak,
    pub scene: SceneConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            tde_threshold: 2.0,
            max_episodes: 50,
            perturbation_scale: 0.2,
            rng_seed: 0,
            scene_seeds: vec![0, 1, 2],
            baseline_seeds: 20,
            baseline_seed_offset: 1_000_000,
            detector: DerivativePeak::default(),
            scene: SceneConfig::default(),
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), BehaviorError> {
        let bad = |m: &str| Err(BehaviorError::InvalidConfig(m.to_string()));
        if !(self.tde_threshold >= 0.0) {
            return bad("tde_threshold must be non-negative");
        }
        if self.max_episodes < 1 {
            return bad("max_episodes must be >= 1");
        }
        if !(0.0..1.0).contains(&self.perturbation_scale) {
            return bad("perturbation_scale must be in [0, 1)");
        }
        if self.baseline_seeds < 1 {
            return bad("baseline_seeds must be >= 1");
        }
        if self.detector.window <= 0.0 {
            return bad("detector.window must be positive");
        }
        Ok(())
    }

    pub fn baseline_seed_range(&self) -> std::ops::Range<u64> {
        self.baseline_seed_offset..self.baseline_seed_offset + self.baseline_seeds
    }
}

/// One simulated scene and the vehicle being calibrated in it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRun {
    pub records: Vec<TrajectoryRecord>,
    pub subject: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationEpisode {
    pub episode: usize,
    pub score: f64,
    /// `None` when the subject performed no detectable maneuver.
    pub tde: Option<f64>,
    pub accepted: bool,
    pub params: BehaviorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub best: BehaviorParams,
    pub best_score: f64,
    pub final_tde: Option<f64>,
    pub converged: bool,
    pub episodes: Vec<CalibrationEpisode>,
}

impl CalibrationReport {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "episode",
            "score",
            "tde",
            "accepted",
            "desired_speed",
            "time_gap",
            "min_distance",
            "max_accel",
            "comfort_decel",
            "politeness",
            "min_accel_gain",
            "safe_decel_limit",
        ])?;
        for e in &self.episodes {
            let (i, m) = (&e.params.idm, &e.params.mobil);
            let mut row = vec![e.episode.to_string(), e.score.to_string()];
            row.push(e.tde.map_or_else(String::new, |t| t.to_string()));
            row.push(e.accepted.to_string());
            row.extend(
                [
                    i.desired_speed,
                    i.time_gap,
                    i.min_distance,
                    i.max_accel,
                    i.comfort_decel,
                    m.politeness,
                    m.min_accel_gain,
                    m.safe_decel_limit,
                ]
                .map(|v| v.to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush()
    }
}

fn params_mut(p: &mut BehaviorParams) -> [&mut f64; 8] {
    let BehaviorParams { idm, mobil, .. } = p;
    [
        &mut idm.desired_speed,
        &mut idm.time_gap,
        &mut idm.min_distance,
        &mut idm.max_accel,
        &mut idm.comfort_decel,
        &mut mobil.politeness,
        &mut mobil.min_accel_gain,
        &mut mobil.safe_decel_limit,
    ]
}

/// Confines every parameter to `[0.25x, 4x]` of the conservative preset.
pub fn clamp_to_bounds(mut p: BehaviorParams) -> BehaviorParams {
    let mut reference = presets::conservative();
    for (v, r) in params_mut(&mut p).into_iter().zip(params_mut(&mut reference)) {
        *v = v.clamp(0.25 * *r, 4.0 * *r);
    }
    p
}

/// Log-uniform draw in `[0.5x, 2x]` of the conservative preset, labelled aggressive.
pub fn random_params<R: Rng>(rng: &mut R) -> BehaviorParams {
    let mut p = presets::conservative();
    p.label = BehaviorClass::Aggressive;
    for v in params_mut(&mut p) {
        *v *= rng.random_range(0.5f64.ln()..2.0f64.ln()).exp();
    }
    p
}

fn perturb<R: Rng>(p: &BehaviorParams, scale: f64, rng: &mut R) -> BehaviorParams {
    let mut next = *p;
    for v in params_mut(&mut next) {
        *v *= rng.random_range(1.0 - scale..=1.0 + scale);
    }
    clamp_to_bounds(next)
}

/// Mean subject score and pooled TDE over the runs.
fn assess(runs: &[SceneRun], classifier: &Classifier, detector: &DerivativePeak) -> Result<(f64, Option<f64>), BehaviorError> {
    let mut score = 0.0;
    let (mut tde_sum, mut tde_n) = (0.0, 0usize);
    for run in runs {
        let series = series_for(&run.records, run.subject, classifier.d_min, classifier.weighting)?;
        score += classifier.classify_series(&series)?.score.value;
        let log = maneuver_log(&run.records, run.subject);
        match time_deviation_error_with(detector, &series, &log) {
            Ok(t) => {
                tde_sum += t * log.len() as f64;
                tde_n += log.len();
            }
            Err(BehaviorError::NoManeuvers) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((score / runs.len().max(1) as f64, (tde_n > 0).then(|| tde_sum / tde_n as f64)))
}

/// The calibration simulator: `params` as subject of every scene seed in `cfg`.
pub fn subject_scene_runs(
    base: &EnvConfig,
    cfg: &CalibrationConfig,
    params: &BehaviorParams,
) -> Result<Vec<SceneRun>, BehaviorError> {
    cfg.scene_seeds
        .iter()
        .map(|&seed| {
            let records = run_subject_scene(base, &cfg.scene, params, seed)?;
            Ok(SceneRun { records, subject: SUBJECT_ID })
        })
        .collect()
}

/// Evaluates `init`, then repeatedly perturbs the best parameters found so
/// far, keeping a candidate only if its score improves. Stops as soon as the
/// accepted parameters have a TDE below the threshold, or after
/// `max_episodes` simulations.
pub fn calibrate_params<F>(
    init: BehaviorParams,
    mut sim: F,
    classifier: &Classifier,
    cfg: &CalibrationConfig,
) -> Result<CalibrationReport, BehaviorError>
where
    F: FnMut(&BehaviorParams) -> Result<Vec<SceneRun>, BehaviorError>,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut episodes = Vec::new();
    let mut best = init;
    let mut best_score = f64::NEG_INFINITY;
    let mut best_tde = None;
    let mut candidate = init;
    for episode in 0..cfg.max_episodes {
        let (score, tde) = assess(&sim(&candidate)?, classifier, &cfg.detector)?;
        let accepted = episode == 0 || score > best_score;
        episodes.push(CalibrationEpisode { episode, score, tde, accepted, params: candidate });
        log::debug!("calibration episode {episode}: score {score:.4} tde {tde:?} accepted {accepted}");
        if accepted {
            best = candidate;
            best_score = score;
            best_tde = tde;
            if tde.is_some_and(|t| t < cfg.tde_threshold) {
                return Ok(CalibrationReport { best, best_score, final_tde: tde, converged: true, episodes });
            }
        }
        candidate = perturb(&best, cfg.perturbation_scale, &mut rng);
    }
    Ok(CalibrationReport { best, best_score, final_tde: best_tde, converged: false, episodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::Baseline;

    #[test]
    fn bounds_hold_after_clamp() {
        let mut p = presets::aggressive();
        p.idm.desired_speed = 1000.0;
        p.idm.time_gap = 0.0001;
        let c = clamp_to_bounds(p);
        assert_eq!(c.idm.desired_speed, 100.0);
        assert_eq!(c.idm.time_gap, 0.375);
    }

    #[test]
    fn random_params_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            random_params(&mut rng).validate().unwrap();
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = CalibrationConfig { max_episodes: 0, ..CalibrationConfig::default() };
        let c = Classifier::new(Baseline::default(), 25.0);
        let r = calibrate_params(presets::aggressive(), |_| Ok(vec![]), &c, &cfg);
        assert!(matches!(r, Err(BehaviorError::InvalidConfig(_))));
    }
}
