use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{accumulate, zero_gradients, Adam, AdamConfig, Gradients, InputEncoding, ModelKind, QNetwork, QValues};
use super::{ReplayBuffer, Transition};
use crate::env::{run_episode, Action, EnvConfig, EnvError, EpisodeStats, HighwayEnv, ACTION_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    /// Share of the episodes over which epsilon decays linearly to its floor.
    pub epsilon_decay_fraction: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions collected before the first update.
    pub learning_starts: usize,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    pub priority_epsilon: f64,
    pub use_target_network: bool,
    /// Optimizer steps between target-network syncs.
    pub target_sync_period: usize,
    /// Episodes between checkpoints and greedy test evaluations.
    pub checkpoint_period: usize,
    pub test_episodes: usize,
    /// Test episodes use seeds `seed + test_seed_offset + k`.
    pub test_seed_offset: u64,
    pub hidden: [usize; 2],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            gamma: 0.9,
            learning_rate: 0.0005,
            epsilon_start: 1.0,
            epsilon_min: 0.05,
            epsilon_decay_fraction: 0.8,
            batch_size: 32,
            buffer_capacity: 20_000,
            learning_starts: 64,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            priority_epsilon: 1e-3,
            use_target_network: true,
            target_sync_period: 500,
            checkpoint_period: 50,
            test_episodes: 20,
            test_seed_offset: 1_000_000,
            hidden: [64, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must be in (0, 1), got {}", self.gamma));
        }
        if !(0.0..=self.epsilon_start).contains(&self.epsilon_min) || self.epsilon_start > 1.0 {
            return bad(format!(
                "epsilon must satisfy 0 <= epsilon_min <= epsilon_start <= 1, got {} and {}",
                self.epsilon_min, self.epsilon_start
            ));
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return bad("epsilon_decay_fraction must be in (0, 1]".into());
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be positive".into());
        }
        if self.learning_rate <= 0.0 || self.priority_epsilon <= 0.0 {
            return bad("learning_rate and priority_epsilon must be positive".into());
        }
        if self.target_sync_period == 0 || self.checkpoint_period == 0 {
            return bad("target_sync_period and checkpoint_period must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_min` over the first
    /// `epsilon_decay_fraction` of the episodes, then constant.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let horizon = self.epsilon_decay_fraction * self.episodes as f64;
        if horizon <= 0.0 {
            return self.epsilon_min;
        }
        let frac = episode as f64 / horizon;
        if frac >= 1.0 {
            return self.epsilon_min;
        }
        self.epsilon_start + (self.epsilon_min - self.epsilon_start) * frac
    }

    /// Importance-sampling exponent, annealed linearly over the run.
    pub fn beta(&self, episode: usize) -> f64 {
        let frac = if self.episodes > 1 { episode as f64 / (self.episodes - 1) as f64 } else { 1.0 };
        self.per_beta_start + (self.per_beta_end - self.per_beta_start) * frac.min(1.0)
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("non-finite loss at episode {episode}, optimizer step {step}")]
    NonFinite { episode: usize, step: u64, model: Box<QNetwork> },
    #[error("{0}")]
    Hook(String),
}

/// Index of the largest Q-value; ties go to the lowest index.
pub fn argmax(q: &QValues) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// With probability `epsilon` a uniform random action, otherwise the argmax.
pub fn epsilon_greedy<R: Rng>(q: &QValues, epsilon: f64, rng: &mut R) -> Action {
    let explore = rng.random::<f64>() < epsilon;
    let index = if explore { rng.random_range(0..ACTION_COUNT) } else { argmax(q) };
    Action::from_index(index).expect("index below ACTION_COUNT")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdLoss {
    pub loss: f64,
    /// `Q(s, a) - target` per sample.
    pub td_errors: Vec<f64>,
}

fn td_targets(batch: &[&Transition], target: &QNetwork, gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                t.reward
            } else {
                let next = target.forward(&t.next_state);
                t.reward + gamma * next.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

/// Importance-weighted mean squared TD error.
pub fn td_loss(batch: &[&Transition], online: &QNetwork, target: &QNetwork, gamma: f64, is_weights: &[f64]) -> TdLoss {
    assert!(!batch.is_empty(), "td_loss needs a non-empty batch");
    let targets = td_targets(batch, target, gamma);
    let td_errors: Vec<f64> =
        batch.iter().zip(&targets).map(|(t, y)| online.forward(&t.state)[t.action.index()] - y).collect();
    let loss = td_errors.iter().zip(is_weights).map(|(d, w)| w * d * d).sum::<f64>() / batch.len() as f64;
    TdLoss { loss, td_errors }
}

/// [`td_loss`] and its gradient with respect to the online parameters.
pub fn td_gradients(
    batch: &[&Transition],
    online: &QNetwork,
    target: &QNetwork,
    gamma: f64,
    is_weights: &[f64],
) -> (TdLoss, Gradients) {
    assert!(!batch.is_empty(), "td_gradients needs a non-empty batch");
    let targets = td_targets(batch, target, gamma);
    let n = batch.len() as f64;
    let mut grads = zero_gradients(online.layers());
    let mut td_errors = Vec::with_capacity(batch.len());
    let mut loss = 0.0;
    for ((t, y), w) in batch.iter().zip(&targets).zip(is_weights) {
        let a = t.action.index();
        let delta = online.forward(&t.state)[a] - y;
        loss += w * delta * delta / n;
        td_errors.push(delta);
        let mut dq = [0.0; ACTION_COUNT];
        dq[a] = 2.0 * w * delta / n;
        accumulate(&mut grads, &online.backward(&t.state, &dq));
    }
    (TdLoss { loss, td_errors }, grads)
}

/// Runs one greedy (`epsilon = 0`) episode.
pub fn greedy_episode(env: &mut HighwayEnv, net: &QNetwork, seed: u64) -> Result<EpisodeStats, EnvError> {
    run_episode(env, seed, |obs| Action::from_index(argmax(&net.forward(obs))).expect("valid index"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub epsilon: f64,
    /// Mean greedy test reward, present on checkpoint episodes.
    pub test_mean_reward: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: QNetwork,
    pub history: Vec<EpisodeRecord>,
    pub optimizer_steps: u64,
}

/// Callbacks invoked by [`train_with_hooks`].
pub trait TrainHooks {
    fn on_episode(&mut self, _record: &EpisodeRecord) {}

    /// Called after every `checkpoint_period` episodes with the 1-based count.
    fn on_checkpoint(&mut self, _episodes_done: usize, _model: &QNetwork) -> Result<(), TrainError> {
        Ok(())
    }
}

impl TrainHooks for () {}

pub fn train(env_cfg: &EnvConfig, cfg: &TrainConfig, kind: ModelKind) -> Result<TrainOutcome, TrainError> {
    train_with_hooks(env_cfg, cfg, kind, &mut ())
}

/// DQN with prioritised replay, epsilon-greedy exploration and an optional
/// target network. Training episode `k` uses env seed `cfg.seed + k`.
pub fn train_with_hooks(
    env_cfg: &EnvConfig,
    cfg: &TrainConfig,
    kind: ModelKind,
    hooks: &mut dyn TrainHooks,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mut env = HighwayEnv::new(env_cfg.clone())?;
    let mut test_env = HighwayEnv::new(env_cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let encoding = InputEncoding::for_env(env_cfg);
    let mut online = QNetwork::new(kind, env_cfg.observed_vehicles, cfg.hidden, encoding, env_cfg.d_min, &mut rng);
    let mut target = online.clone();
    let mut adam = Adam::new(online.layers(), AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() });
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, cfg.per_alpha, cfg.priority_epsilon);
    let mut history = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon(episode);
        let beta = cfg.beta(episode);
        let mut obs = env.reset(cfg.seed.wrapping_add(episode as u64))?;
        let mut total_reward = 0.0;
        loop {
            let action = epsilon_greedy(&online.forward(&obs), epsilon, &mut rng);
            let step = env.step(action)?;
            total_reward += step.reward;
            let done = step.done;
            buffer.push(Transition {
                state: obs,
                action,
                reward: step.reward,
                next_state: step.observation.clone(),
                done,
            });
            obs = step.observation;

            if buffer.len() >= cfg.learning_starts.max(cfg.batch_size) {
                let sample = buffer.sample(cfg.batch_size, beta, &mut rng).expect("buffer is non-empty");
                let batch: Vec<&Transition> = sample.indices.iter().map(|&i| buffer.get(i)).collect();
                let bootstrap = if cfg.use_target_network { &target } else { &online };
                let (loss, grads) = td_gradients(&batch, &online, bootstrap, cfg.gamma, &sample.weights);
                if !loss.loss.is_finite() {
                    return Err(TrainError::NonFinite { episode, step: adam.step, model: Box::new(online) });
                }
                adam.step(online.layers_mut(), &grads);
                buffer.update_priorities(&sample.indices, &loss.td_errors);
                if cfg.use_target_network && adam.step.is_multiple_of(cfg.target_sync_period as u64) {
                    target = online.clone();
                }
            }
            if done {
                break;
            }
        }

        let mut record = EpisodeRecord { episode, total_reward, epsilon, test_mean_reward: None };
        let episodes_done = episode + 1;
        if episodes_done % cfg.checkpoint_period == 0 {
            if cfg.test_episodes > 0 {
                let mut sum = 0.0;
                for k in 0..cfg.test_episodes {
                    let seed = cfg.seed.wrapping_add(cfg.test_seed_offset).wrapping_add(k as u64);
                    sum += greedy_episode(&mut test_env, &online, seed)?.total_reward;
                }
                record.test_mean_reward = Some(sum / cfg.test_episodes as f64);
            }
            hooks.on_checkpoint(episodes_done, &online)?;
        }
        log::debug!("episode {episode}: reward {total_reward:.3} epsilon {epsilon:.3}");
        hooks.on_episode(&record);
        history.push(record);
    }
    Ok(TrainOutcome { model: online, history, optimizer_steps: adam.step })
}

/// Slope of the ordinary least-squares line through `(k, ys[k])`.
pub fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, y) in ys.iter().enumerate() {
        let dx = k as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.0, 2.0, 1.0, 2.0, 0.0]), 1);
        assert_eq!(argmax(&[3.0; 5]), 0);
    }

    #[test]
    fn greedy_at_zero_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy(&[0.0, 0.0, 0.0, 5.0, 0.0], 0.0, &mut rng), Action::LeftLaneChange);
        }
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = TrainConfig { episodes: 100, ..TrainConfig::default() };
        assert_eq!(cfg.epsilon(0), 1.0);
        assert!((cfg.epsilon(40) - 0.525).abs() < 1e-12);
        assert!((cfg.epsilon(80) - 0.05).abs() < 1e-12);
        assert_eq!(cfg.epsilon(99), 0.05);
    }

    #[test]
    fn slope_of_line() {
        assert!((least_squares_slope(&[1.0, 3.0, 5.0, 7.0]) - 2.0).abs() < 1e-12);
        assert_eq!(least_squares_slope(&[4.0]), 0.0);
    }

    #[test]
    fn invalid_gamma_rejected() {
        let cfg = TrainConfig { gamma: 1.0, ..TrainConfig::default() };
        assert!(matches!(cfg.validate(), Err(TrainError::Config(_))));
    }

    #[test]
    fn zero_episodes_returns_initial_model() {
        let env = EnvConfig { vehicle_count: 3, ..EnvConfig::default() };
        let cfg = TrainConfig { episodes: 0, hidden: [4, 4], ..TrainConfig::default() };
        let out = train(&env, &cfg, ModelKind::Gcn).unwrap();
        assert!(out.history.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fresh = QNetwork::new(ModelKind::Gcn, 10, [4, 4], InputEncoding::for_env(&env), env.d_min, &mut rng);
        assert_eq!(out.model, fresh);
    }
}
