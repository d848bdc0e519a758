//! Policy evaluation over the default / conservative / aggressive traffic
//! scenarios, and CSV export of the results.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{run_episode, Action, EnvConfig, EnvError, EpisodeStats, HighwayEnv, Observation, Scenario};
use crate::qnet::{argmax, EpisodeRecord, QNetwork};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: Scenario,
    /// Vehicles on the road, ego included.
    pub n: usize,
    pub model: String,
    /// Mean over episodes of distance / episode duration, m/s.
    pub avg_speed: f64,
    /// Mean completed ego lane changes per episode.
    pub avg_lane_changes: f64,
    pub episodes: usize,
    pub collision_rate: f64,
    /// Mean simulated episode duration, s.
    pub avg_duration: f64,
}

impl EvalReport {
    pub fn from_stats(scenario: Scenario, n: usize, model: &str, stats: &[EpisodeStats]) -> Self {
        let k = stats.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EpisodeStats) -> f64| stats.iter().map(f).sum::<f64>() / k;
        Self {
            scenario,
            n,
            model: model.to_string(),
            avg_speed: mean(&|s| s.avg_speed()),
            avg_lane_changes: mean(&|s| s.lane_changes as f64),
            episodes: stats.len(),
            collision_rate: mean(&|s| if s.collided { 1.0 } else { 0.0 }),
            avg_duration: mean(&|s| s.duration),
        }
    }
}

/// Runs `episodes` episodes of `policy` with seeds `base_seed + k`.
pub fn run_policy<P>(cfg: &EnvConfig, episodes: usize, base_seed: u64, mut policy: P) -> Result<Vec<EpisodeStats>, EnvError>
where
    P: FnMut(&Observation) -> Action,
{
    let mut env = HighwayEnv::new(cfg.clone())?;
    (0..episodes as u64).map(|k| run_episode(&mut env, base_seed.wrapping_add(k), &mut policy)).collect()
}

/// Greedy evaluation of a Q-network on `cfg`.
pub fn evaluate(net: &QNetwork, cfg: &EnvConfig, episodes: usize, base_seed: u64) -> Result<EvalReport, EnvError> {
    assert!(episodes >= 1, "evaluation needs at least one episode");
    let stats = run_policy(cfg, episodes, base_seed, |obs| {
        Action::from_index(argmax(&net.forward(obs))).expect("valid action index")
    })?;
    Ok(EvalReport::from_stats(cfg.scenario, cfg.vehicle_count, net.kind().as_str(), &stats))
}

/// Every `(scenario, n, model)` combination, in that nesting order.
pub fn scenario_suite(
    models: &[(String, QNetwork)],
    ns: &[usize],
    base: &EnvConfig,
    episodes: usize,
    base_seed: u64,
) -> Result<Vec<EvalReport>, EnvError> {
    let mut out = Vec::with_capacity(models.len() * ns.len() * Scenario::ALL.len());
    for scenario in Scenario::ALL {
        for &n in ns {
            let cfg = EnvConfig { scenario, vehicle_count: n, ..base.clone() };
            for (label, net) in models {
                let mut report = evaluate(net, &cfg, episodes, base_seed)?;
                report.model = label.clone();
                out.push(report);
            }
        }
    }
    Ok(out)
}

pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "n", "model", "avg_spd_mps", "lane_changes", "episodes", "collision_rate", "avg_duration_s"])?;
    for r in reports {
        w.write_record([
            r.scenario.as_str().to_string(),
            r.n.to_string(),
            r.model.clone(),
            r.avg_speed.to_string(),
            r.avg_lane_changes.to_string(),
            r.episodes.to_string(),
            r.collision_rate.to_string(),
            r.avg_duration.to_string(),
        ])?;
    }
    w.flush()
}

/// `(episode, total_reward, epsilon, test_mean_reward)`; the last column is
/// empty except on checkpoint episodes.
pub fn write_history_csv<W: Write>(history: &[EpisodeRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "total_reward", "epsilon", "test_mean_reward"])?;
    for h in history {
        w.write_record([
            h.episode.to_string(),
            h.total_reward.to_string(),
            h.epsilon.to_string(),
            h.test_mean_reward.map_or_else(String::new, |v| v.to_string()),
        ])?;
    }
    w.flush()
}

/// Trailing mean over at most `window` values ending at each index.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            if i >= window {
                sum -= values[i - window];
            }
            sum / (i + 1).min(window) as f64
        })
        .collect()
}

/// Writes `(episode, reward, rolling_mean_50)` rows, preceded by `header`
/// verbatim.
pub fn export_reward_curve(history: &[EpisodeRecord], header: &str, path: &Path) -> std::io::Result<()> {
    let rewards: Vec<f64> = history.iter().map(|h| h.total_reward).collect();
    let rolling = rolling_mean(&rewards, 50);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(header.as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["episode", "reward", "rolling_mean_50"])?;
    for ((h, r), m) in history.iter().zip(&rewards).zip(&rolling) {
        w.write_record([h.episode.to_string(), r.to_string(), m.to_string()])?;
    }
    w.flush()
}
