//! Aggressiveness scoring and classification from centrality series, plus the
//! parameter calibration loop that searches for aggressive driver settings.
//!
//! A vehicle's trajectory is summarised by two features: how much its
//! closeness centrality fluctuates (lateral aggression: weaving, cutting in)
//! and how fast it accumulates new neighbours (overspeeding). Both are
//! standardised against a reference [`Baseline`] and squashed through a
//! logistic, so the score lies in `[0, 1]` and `0.5` is the class boundary.

mod calibrate;
mod scene;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calibrate::{
    calibrate_params, clamp_to_bounds, random_params, subject_scene_runs, CalibrationConfig, CalibrationEpisode,
    CalibrationReport, SceneRun,
};
pub use scene::{run_subject_scene, subject_world, SceneConfig, SUBJECT_ID};

use crate::dynamics::BehaviorClass;
use crate::env::{EnvConfig, EnvError, Maneuver, TrajectoryRecord};
use crate::traffic_graph::{centrality_series, CentralitySeries, EdgeWeighting, ProximityGraph, TimedGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BehaviorError {
    #[error("centrality series has {0} samples, at least 2 are needed")]
    SeriesTooShort(usize),
    #[error("maneuver log is empty; time deviation error is undefined")]
    NoManeuvers,
    #[error("vehicle {0} does not appear in the trajectory log")]
    UnknownVehicle(u32),
    #[error("invalid calibration configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    /// Population standard deviation of the closeness series.
    pub closeness_variability: f64,
    /// `(final - initial degree) / duration`, neighbours per second.
    pub degree_growth_rate: f64,
}

impl Features {
    pub fn of(series: &CentralitySeries) -> Result<Self, BehaviorError> {
        let n = series.len();
        if n < 2 {
            return Err(BehaviorError::SeriesTooShort(n));
        }
        let mean = series.closeness.iter().sum::<f64>() / n as f64;
        let var = series.closeness.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n as f64;
        let duration = series.duration();
        let growth = if duration > 0.0 {
            (series.degree[n - 1] as f64 - series.degree[0] as f64) / duration
        } else {
            0.0
        };
        Ok(Self { closeness_variability: var.sqrt(), degree_growth_rate: growth })
    }

    fn as_array(&self) -> [f64; 2] {
        [self.closeness_variability, self.degree_growth_rate]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreWeights {
    pub closeness: f64,
    pub degree: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { closeness: 1.0, degree: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggressivenessScore {
    pub value: f64,
    pub features: Features,
}

/// Centre and scale used to standardise features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub center: Features,
    pub scale: Features,
}

const MIN_SCALE: f64 = 1e-12;

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

impl Baseline {
    /// Standardisation against one reference population.
    pub fn from_reference(reference: &[Features]) -> Self {
        assert!(!reference.is_empty(), "baseline needs at least one reference sample");
        let [c, d] = [0, 1].map(|k| mean_std(&reference.iter().map(|f| f.as_array()[k]).collect::<Vec<_>>()));
        Self {
            center: Features { closeness_variability: c.0, degree_growth_rate: d.0 },
            scale: Features { closeness_variability: c.1, degree_growth_rate: d.1 },
        }
    }

    /// Centred halfway between the conservative and aggressive reference
    /// means and scaled by the pooled within-class deviation, so a score of
    /// 0.5 separates the two populations.
    pub fn from_classes(conservative: &[Features], aggressive: &[Features]) -> Self {
        let (c, a) = (Self::from_reference(conservative), Self::from_reference(aggressive));
        let mid = |x: f64, y: f64| 0.5 * (x + y);
        let pooled = |x: f64, y: f64| ((x * x + y * y) / 2.0).sqrt();
        Self {
            center: Features {
                closeness_variability: mid(c.center.closeness_variability, a.center.closeness_variability),
                degree_growth_rate: mid(c.center.degree_growth_rate, a.center.degree_growth_rate),
            },
            scale: Features {
                closeness_variability: pooled(c.scale.closeness_variability, a.scale.closeness_variability),
                degree_growth_rate: pooled(c.scale.degree_growth_rate, a.scale.degree_growth_rate),
            },
        }
    }

    /// Runs the reference scenes for `seeds` with both presets as subject
    /// and builds a two-class baseline from the subjects' features.
    pub fn generate(
        base: &EnvConfig,
        scene: &SceneConfig,
        seeds: impl IntoIterator<Item = u64>,
        weighting: EdgeWeighting,
    ) -> Result<Self, BehaviorError> {
        let mut cons = Vec::new();
        let mut aggr = Vec::new();
        for seed in seeds {
            for (params, out) in [(&base.presets.conservative, &mut cons), (&base.presets.aggressive, &mut aggr)] {
                let records = run_subject_scene(base, scene, params, seed)?;
                let series = series_for(&records, SUBJECT_ID, base.d_min, weighting)?;
                out.push(Features::of(&series)?);
            }
        }
        if cons.is_empty() {
            return Err(BehaviorError::InvalidConfig("baseline needs at least one reference seed".into()));
        }
        Ok(Self::from_classes(&cons, &aggr))
    }

    pub fn standardize(&self, f: &Features) -> [f64; 2] {
        let z = |x: f64, c: f64, s: f64| (x - c) / s.max(MIN_SCALE);
        [
            z(f.closeness_variability, self.center.closeness_variability, self.scale.closeness_variability),
            z(f.degree_growth_rate, self.center.degree_growth_rate, self.scale.degree_growth_rate),
        ]
    }

    pub fn score(&self, f: &Features, w: &ScoreWeights) -> f64 {
        let [z1, z2] = self.standardize(f);
        logistic(w.closeness * z1 + w.degree * z2)
    }
}

impl Default for Baseline {
    fn default() -> Self {
        let zero = Features { closeness_variability: 0.0, degree_growth_rate: 0.0 };
        let one = Features { closeness_variability: 1.0, degree_growth_rate: 1.0 };
        Self { center: zero, scale: one }
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn aggressiveness_score(
    series: &CentralitySeries,
    baseline: &Baseline,
    weights: &ScoreWeights,
) -> Result<AggressivenessScore, BehaviorError> {
    let features = Features::of(series)?;
    Ok(AggressivenessScore { value: baseline.score(&features, weights), features })
}

/// One proximity graph per distinct timestamp in the log, in time order.
pub fn graph_history(records: &[TrajectoryRecord], d_min: f64, weighting: EdgeWeighting) -> Vec<TimedGraph> {
    let mut sorted: Vec<&TrajectoryRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.id.cmp(&b.id)));
    sorted
        .chunk_by(|a, b| a.t == b.t)
        .map(|frame| TimedGraph {
            time: frame[0].t,
            graph: ProximityGraph::from_points(frame.iter().map(|r| (r.id, (r.x, r.y))), d_min, weighting),
        })
        .collect()
}

pub fn series_for(
    records: &[TrajectoryRecord],
    id: u32,
    d_min: f64,
    weighting: EdgeWeighting,
) -> Result<CentralitySeries, BehaviorError> {
    centrality_series(&graph_history(records, d_min, weighting))
        .remove(&id)
        .ok_or(BehaviorError::UnknownVehicle(id))
}

/// Lane-change start times of vehicle `id`.
pub fn maneuver_log(records: &[TrajectoryRecord], id: u32) -> Vec<(f64, Maneuver)> {
    records.iter().filter(|r| r.id == id).filter_map(|r| r.maneuver.map(|m| (r.t, m))).collect()
}

/// Locates the centrality response to a maneuver executed at `t_executed`.
pub trait ManeuverDetector {
    fn detect(&self, series: &CentralitySeries, t_executed: f64) -> Option<f64>;
}

/// Time of the largest `|Δcloseness / Δt|` within `±window` seconds of the
/// execution time. Each difference is stamped with its later sample; ties go
/// to the earliest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativePeak {
    pub window: f64,
}

impl Default for DerivativePeak {
    fn default() -> Self {
        Self { window: 5.0 }
    }
}

impl ManeuverDetector for DerivativePeak {
    fn detect(&self, series: &CentralitySeries, t_executed: f64) -> Option<f64> {
        let (t, c) = (&series.timestamps, &series.closeness);
        let mut best: Option<(f64, f64)> = None;
        for k in 1..t.len() {
            if (t[k] - t_executed).abs() > self.window + 1e-9 {
                continue;
            }
            let slope = ((c[k] - c[k - 1]) / (t[k] - t[k - 1])).abs();
            if best.is_none_or(|(_, s)| slope > s) {
                best = Some((t[k], slope));
            }
        }
        best.map(|(time, _)| time)
    }
}

/// Mean `|t_detected - t_executed|` over the maneuvers the detector can place.
pub fn time_deviation_error(series: &CentralitySeries, maneuvers: &[(f64, Maneuver)]) -> Result<f64, BehaviorError> {
    time_deviation_error_with(&DerivativePeak::default(), series, maneuvers)
}

pub fn time_deviation_error_with(
    detector: &dyn ManeuverDetector,
    series: &CentralitySeries,
    maneuvers: &[(f64, Maneuver)],
) -> Result<f64, BehaviorError> {
    if maneuvers.is_empty() {
        return Err(BehaviorError::NoManeuvers);
    }
    let offsets: Vec<f64> = maneuvers
        .iter()
        .filter_map(|&(t, _)| detector.detect(series, t).map(|d| (d - t).abs()))
        .collect();
    if offsets.is_empty() {
        return Err(BehaviorError::NoManeuvers);
    }
    Ok(offsets.iter().sum::<f64>() / offsets.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: BehaviorClass,
    pub score: AggressivenessScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub baseline: Baseline,
    pub weights: ScoreWeights,
    pub d_min: f64,
    pub weighting: EdgeWeighting,
}

impl Classifier {
    pub fn new(baseline: Baseline, d_min: f64) -> Self {
        Self { baseline, weights: ScoreWeights::default(), d_min, weighting: EdgeWeighting::default() }
    }

    pub fn label_of(value: f64) -> BehaviorClass {
        if value >= 0.5 {
            BehaviorClass::Aggressive
        } else {
            BehaviorClass::Conservative
        }
    }

    pub fn classify_series(&self, series: &CentralitySeries) -> Result<Classification, BehaviorError> {
        let score = aggressiveness_score(series, &self.baseline, &self.weights)?;
        Ok(Classification { label: Self::label_of(score.value), score })
    }

    /// Classifies vehicle `id` within the scene described by `context`.
    pub fn classify(&self, id: u32, context: &[TrajectoryRecord]) -> Result<Classification, BehaviorError> {
        self.classify_series(&series_for(context, id, self.d_min, self.weighting)?)
    }

    /// Classifies every vehicle in the log.
    pub fn classify_all(&self, context: &[TrajectoryRecord]) -> Result<BTreeMap<u32, Classification>, BehaviorError> {
        centrality_series(&graph_history(context, self.d_min, self.weighting))
            .into_iter()
            .map(|(id, s)| self.classify_series(&s).map(|c| (id, c)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(closeness: &[f64], degree: &[usize], dt: f64) -> CentralitySeries {
        CentralitySeries {
            vehicle_id: 1,
            timestamps: (0..closeness.len()).map(|k| k as f64 * dt).collect(),
            closeness: closeness.to_vec(),
            degree: degree.to_vec(),
        }
    }

    #[test]
    fn baseline_matched_scores_half() {
        let s = series(&[0.2; 5], &[3; 5], 1.0);
        let f = Features::of(&s).unwrap();
        assert_eq!(f.closeness_variability, 0.0);
        assert_eq!(f.degree_growth_rate, 0.0);
        let b = Baseline {
            center: f,
            scale: Features { closeness_variability: 0.1, degree_growth_rate: 0.1 },
        };
        let score = aggressiveness_score(&s, &b, &ScoreWeights::default()).unwrap();
        assert_eq!(score.value, 0.5);
    }

    #[test]
    fn short_series_rejected() {
        let s = series(&[0.2], &[1], 1.0);
        assert_eq!(Features::of(&s), Err(BehaviorError::SeriesTooShort(1)));
    }

    #[test]
    fn features_by_hand() {
        let s = series(&[0.0, 1.0, 0.0, 1.0], &[0, 1, 2, 3], 0.5);
        let f = Features::of(&s).unwrap();
        assert_abs_diff_eq!(f.closeness_variability, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f.degree_growth_rate, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn two_class_baseline_centre() {
        let f = |c, d| Features { closeness_variability: c, degree_growth_rate: d };
        let b = Baseline::from_classes(&[f(0.0, 0.0), f(2.0, 0.0)], &[f(4.0, 1.0), f(6.0, 1.0)]);
        assert_eq!(b.center, f(3.0, 0.5));
        assert_eq!(b.scale.closeness_variability, 1.0);
        assert_eq!(b.scale.degree_growth_rate, 0.0);
        assert_eq!(b.score(&f(3.0, 0.5), &ScoreWeights::default()), 0.5);
    }

    #[test]
    fn tde_step_after_maneuver() {
        let mut c = vec![0.1; 100];
        for v in c.iter_mut().skip(32) {
            *v = 0.3;
        }
        let s = series(&c, &[0; 100], 0.1);
        let tde = time_deviation_error(&s, &[(2.0, Maneuver::LaneChangeLeft)]).unwrap();
        assert_abs_diff_eq!(tde, 1.2, epsilon = 1e-9);
    }

    #[test]
    fn tde_requires_maneuvers() {
        let s = series(&[0.1, 0.2], &[0, 0], 0.1);
        assert_eq!(time_deviation_error(&s, &[]), Err(BehaviorError::NoManeuvers));
    }

    #[test]
    fn label_threshold_inclusive() {
        assert_eq!(Classifier::label_of(0.5), BehaviorClass::Aggressive);
        assert_eq!(Classifier::label_of(0.4999), BehaviorClass::Conservative);
    }
}
