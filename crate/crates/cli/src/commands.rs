use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use behav_core::behavior::{calibrate_params, random_params, run_subject_scene, subject_scene_runs, CalibrationConfig};
use behav_core::config::{Provenance, RunConfig, SimulateMode};
use behav_core::dynamics::BehaviorClass;
use behav_core::env::{npc_world, run_world, EnvConfig, Scenario};
use behav_core::eval::{evaluate as eval_net, export_reward_curve, write_history_csv, write_reports_csv};
use behav_core::qnet::{read_checkpoint, train_with_hooks, write_checkpoint, ModelKind, QNetwork, TrainConfig, TrainError, TrainHooks};
use behav_core::trajlog::{read_trajectory, write_trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Unconverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Unconverged(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Runtime(m) => f.write_str(m),
            CliError::Unconverged(m) => write!(f, "calibration did not converge: {m}"),
        }
    }
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Reads and validates the config; no path means all defaults.
fn load_config(path: Option<&Path>) -> Result<(String, RunConfig), CliError> {
    let Some(path) = path else {
        return Ok((String::new(), RunConfig::default()));
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((text, cfg))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_at(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_at(path))
}

pub fn simulate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let (text, cfg) = load_config(config)?;
    let seed = seed.unwrap_or(cfg.env.seed);
    let records = match cfg.simulate.mode {
        SimulateMode::Npc => {
            let mut world = npc_world(&cfg.env, seed).map_err(runtime)?;
            let ticks = (cfg.simulate.duration / cfg.env.dt - 1e-9).ceil() as u64;
            run_world(&mut world, ticks)
        }
        SimulateMode::Subject => {
            let params = match cfg.simulate.subject_class {
                BehaviorClass::Conservative => cfg.env.presets.conservative,
                _ => cfg.env.presets.aggressive,
            };
            run_subject_scene(&cfg.env, &cfg.calibration.scene, &params, seed).map_err(runtime)?
        }
    };
    log::info!("simulated {} records with seed {seed}", records.len());
    let mut w = create(out)?;
    write_trajectory(&mut w, &Provenance::new(&text, seed), &records).map_err(runtime)
}

pub fn calibrate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let (text, cfg) = load_config(config)?;
    let seed = seed.unwrap_or(cfg.calibration.rng_seed);
    let cal = CalibrationConfig { rng_seed: seed, ..cfg.calibration.clone() };
    let classifier = cfg.classifier(cfg.env.d_min).map_err(runtime)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    init_rng.set_stream(1);
    let init = random_params(&mut init_rng);
    let report = calibrate_params(init, |p| subject_scene_runs(&cfg.env, &cal, p), &classifier, &cal).map_err(runtime)?;
    log::info!(
        "calibration: {} episodes, best score {:.4}, final tde {:?}",
        report.episodes.len(),
        report.best_score,
        report.final_tde
    );

    fs::create_dir_all(out).map_err(io_at(out))?;
    let header = Provenance::new(&text, seed).comment_block();
    let csv_path = out.join("calibration.csv");
    let mut w = create(&csv_path)?;
    w.write_all(header.as_bytes()).map_err(io_at(&csv_path))?;
    report.write_csv(w).map_err(io_at(&csv_path))?;

    let mut presets = toml::Table::new();
    presets.insert("aggressive".into(), toml::Value::try_from(report.best).map_err(runtime)?);
    let mut env = toml::Table::new();
    env.insert("presets".into(), toml::Value::Table(presets));
    let mut root = toml::Table::new();
    root.insert("env".into(), toml::Value::Table(env));
    let body = toml::to_string(&root).map_err(runtime)?;
    write_text(&out.join("params.toml"), &format!("{header}{body}"))?;

    if report.converged {
        Ok(())
    } else {
        let tde = report.final_tde.map_or_else(|| "undefined".to_string(), |t| format!("{t:.3} s"));
        Err(CliError::Unconverged(format!(
            "TDE {tde} after {} episodes (threshold {} s)",
            report.episodes.len(),
            cal.tde_threshold
        )))
    }
}

struct CheckpointWriter {
    dir: PathBuf,
}

impl TrainHooks for CheckpointWriter {
    fn on_checkpoint(&mut self, episodes_done: usize, model: &QNetwork) -> Result<(), TrainError> {
        let path = self.dir.join(format!("checkpoint_{episodes_done:05}.bin"));
        let file = File::create(&path).map_err(|e| TrainError::Hook(format!("{}: {e}", path.display())))?;
        write_checkpoint(model, BufWriter::new(file)).map_err(|e| TrainError::Hook(format!("{}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

fn save_model(net: &QNetwork, path: &Path) -> Result<(), CliError> {
    write_checkpoint(net, create(path)?).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn train(config: Option<&Path>, kind: ModelKind, seed: Option<u64>, out_dir: &Path) -> Result<(), CliError> {
    let (text, cfg) = load_config(config)?;
    let seed = seed.unwrap_or(cfg.train.seed);
    let tcfg = TrainConfig { seed, ..cfg.train.clone() };
    fs::create_dir_all(out_dir).map_err(io_at(out_dir))?;
    let header = Provenance::new(&text, seed).comment_block();
    write_text(&out_dir.join("provenance.txt"), &header)?;

    let mut hooks = CheckpointWriter { dir: out_dir.to_path_buf() };
    let outcome = match train_with_hooks(&cfg.env, &tcfg, kind, &mut hooks) {
        Ok(o) => o,
        Err(TrainError::NonFinite { episode, step, model }) => {
            save_model(&model, &out_dir.join("diverged.bin"))?;
            return Err(CliError::Runtime(format!(
                "non-finite loss at episode {episode}, optimizer step {step}; model saved to diverged.bin"
            )));
        }
        Err(TrainError::Config(m)) => return Err(CliError::Config(m)),
        Err(e) => return Err(runtime(e)),
    };
    save_model(&outcome.model, &out_dir.join("model.bin"))?;

    let rewards = out_dir.join("rewards.csv");
    let mut w = create(&rewards)?;
    w.write_all(header.as_bytes()).map_err(io_at(&rewards))?;
    write_history_csv(&outcome.history, w).map_err(io_at(&rewards))?;
    let curve = out_dir.join("reward_curve.csv");
    export_reward_curve(&outcome.history, &header, &curve).map_err(io_at(&curve))?;
    log::info!("trained {} episodes, {} optimizer steps", outcome.history.len(), outcome.optimizer_steps);
    Ok(())
}

pub struct EvaluateOptions {
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
    pub scenario: Option<Scenario>,
    pub ns: Vec<usize>,
    pub label: Option<String>,
}

pub fn evaluate(checkpoint: &Path, config: Option<&Path>, opts: &EvaluateOptions, out: &Path) -> Result<(), CliError> {
    let (text, cfg) = load_config(config)?;
    let file = File::open(checkpoint).map_err(io_at(checkpoint))?;
    let net = read_checkpoint(BufReader::new(file)).map_err(|e| CliError::Runtime(format!("{}: {e}", checkpoint.display())))?;
    if let QNetwork::Mlp(m) = &net {
        if m.rows != cfg.env.observed_vehicles {
            return Err(CliError::Config(format!(
                "checkpoint expects {} observed vehicles, env.observed_vehicles is {}",
                m.rows, cfg.env.observed_vehicles
            )));
        }
    }
    let episodes = opts.episodes.unwrap_or(cfg.eval.episodes);
    if episodes == 0 {
        return Err(CliError::Config("--episodes must be >= 1".into()));
    }
    let seed = opts.seed.unwrap_or(cfg.eval.seed);
    let ns = if opts.ns.is_empty() { vec![cfg.env.vehicle_count] } else { opts.ns.clone() };
    let scenarios = opts.scenario.map_or_else(|| Scenario::ALL.to_vec(), |s| vec![s]);
    let label = opts.label.clone().unwrap_or_else(|| net.kind().as_str().to_string());

    let mut reports = Vec::new();
    for &scenario in &scenarios {
        for &n in &ns {
            let env = EnvConfig { scenario, vehicle_count: n, ..cfg.env.clone() };
            env.validate().map_err(|e| CliError::Config(e.to_string()))?;
            let mut r = eval_net(&net, &env, episodes, seed).map_err(runtime)?;
            r.model = label.clone();
            log::info!("{} n={n}: {:.3} m/s, {:.2} lane changes", scenario.as_str(), r.avg_speed, r.avg_lane_changes);
            reports.push(r);
        }
    }
    let mut w = create(out)?;
    w.write_all(Provenance::new(&text, seed).comment_block().as_bytes()).map_err(io_at(out))?;
    write_reports_csv(&reports, w).map_err(io_at(out))
}

pub fn classify(traj: &Path, d_min: Option<f64>, config: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let (text, cfg) = load_config(config)?;
    let d_min = d_min.unwrap_or(cfg.env.d_min);
    if !(d_min > 0.0 && d_min.is_finite()) {
        return Err(CliError::Config(format!("--d-min must be positive, got {d_min}")));
    }
    let file = File::open(traj).map_err(io_at(traj))?;
    let (provenance, records) = read_trajectory(BufReader::new(file)).map_err(|e| CliError::Runtime(format!("{}: {e}", traj.display())))?;
    let classifier = cfg.classifier(d_min).map_err(runtime)?;
    let labels = classifier.classify_all(&records).map_err(runtime)?;
    let mut truth = BTreeMap::new();
    for r in &records {
        truth.entry(r.id).or_insert(r.behavior);
    }

    let seed = provenance.map_or(0, |p| p.seed);
    let mut w = create(out)?;
    w.write_all(Provenance::new(&text, seed).comment_block().as_bytes()).map_err(io_at(out))?;
    let mut csv = csv::Writer::from_writer(w);
    let row_err = |e: csv::Error| CliError::Runtime(format!("{}: {e}", out.display()));
    csv.write_record(["id", "behavior", "label", "score", "closeness_variability", "degree_growth_rate"]).map_err(row_err)?;
    for (id, c) in &labels {
        let f = &c.score.features;
        csv.write_record([
            id.to_string(),
            truth[id].as_str().to_string(),
            c.label.as_str().to_string(),
            c.score.value.to_string(),
            f.closeness_variability.to_string(),
            f.degree_growth_rate.to_string(),
        ])
        .map_err(row_err)?;
    }
    csv.flush().map_err(io_at(out))
}
