use behav_core::config::Provenance;
use behav_core::env::{
    npc_world, run_world, Action, EnvConfig, HighwayEnv, Scenario, TrajectoryRecord, ACTION_COUNT,
};
use behav_core::trajlog::{read_trajectory, write_trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_actions(seed: u64, n: usize) -> Vec<Action> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Action::from_index(rng.random_range(0..ACTION_COUNT)).unwrap()).collect()
}

fn rewards_for(cfg: &EnvConfig, seed: u64, actions: &[Action]) -> Vec<f64> {
    let mut env = HighwayEnv::new(cfg.clone()).unwrap();
    env.reset(seed).unwrap();
    let mut out = Vec::new();
    for &a in actions {
        let r = env.step(a).unwrap();
        out.push(r.reward);
        if r.done {
            break;
        }
    }
    out
}

#[test]
fn identical_inputs_give_bit_identical_rewards() {
    for scenario in Scenario::ALL {
        let cfg = EnvConfig { scenario, vehicle_count: 15, ..EnvConfig::default() };
        let actions = random_actions(1, 60);
        let a = rewards_for(&cfg, 42, &actions);
        let b = rewards_for(&cfg, 42, &actions);
        assert_eq!(a.iter().map(|r| r.to_bits()).collect::<Vec<_>>(), b.iter().map(|r| r.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn observation_selects_nearest_sensed_vehicles() {
    let cfg = EnvConfig { vehicle_count: 20, observed_vehicles: 6, spawn_length: 600.0, ..EnvConfig::default() };
    let mut env = HighwayEnv::new(cfg.clone()).unwrap();
    for seed in 0..10 {
        env.reset(seed).unwrap();
        for &a in &random_actions(seed, 8) {
            if env.step(a).unwrap().done {
                break;
            }
            let obs = env.observe();
            let world = env.world().unwrap();
            let ego = &world.vehicles()[0];
            // brute force: every candidate, sorted by (distance, id)
            let mut cands: Vec<(f64, u32)> = world.vehicles()[1..]
                .iter()
                .filter(|v| (v.x - ego.x).abs() <= cfg.sensing_range)
                .map(|v| ((v.x - ego.x).hypot(v.y - ego.y), v.id))
                .collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cands.truncate(cfg.observed_vehicles - 1);
            assert_eq!(obs.present_count(), 1 + cands.len());
            for (row, (_, id)) in cands.iter().enumerate() {
                let v = world.vehicles().iter().find(|v| v.id == *id).unwrap();
                let m = obs.matrix.row(row + 1);
                assert_eq!(m[0], 1.0);
                assert_eq!(m[1], v.x - ego.x);
                assert_eq!(m[2], v.y - ego.y);
                assert_eq!(m[3], v.vx - ego.vx);
            }
            for row in 1 + cands.len()..cfg.observed_vehicles {
                assert!(obs.matrix.row(row).iter().all(|&x| x == 0.0));
            }
        }
    }
}

#[test]
fn conservative_traffic_never_collides_in_200_seconds() {
    let cfg = EnvConfig { scenario: Scenario::Conservative, vehicle_count: 20, ..EnvConfig::default() };
    for seed in 0..3 {
        let mut world = npc_world(&cfg, seed).unwrap();
        for _ in 0..2000 {
            let ev = world.step();
            assert!(ev.collisions.is_empty(), "seed {seed} t {}: {:?}", world.time(), ev.collisions);
        }
    }
}

#[test]
fn idle_ego_in_conservative_traffic_never_collides() {
    let cfg = EnvConfig {
        scenario: Scenario::Conservative,
        vehicle_count: 20,
        episode_duration: 200.0,
        ..EnvConfig::default()
    };
    let mut env = HighwayEnv::new(cfg).unwrap();
    env.reset(5).unwrap();
    loop {
        let r = env.step(Action::Idle).unwrap();
        assert!(!r.info.collided);
        if r.done {
            break;
        }
    }
    assert_eq!(env.npc_collisions(), 0);
}

fn replay_check(records: &[TrajectoryRecord], dt: f64) {
    let mut by_id: std::collections::BTreeMap<u32, Vec<&TrajectoryRecord>> = Default::default();
    for r in records {
        by_id.entry(r.id).or_default().push(r);
    }
    for track in by_id.values() {
        for w in track.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!((b.t - a.t - dt).abs() < 1e-9);
            let accel = (b.vx - a.vx) / dt;
            let resid = b.x - a.x - a.vx * dt - 0.5 * accel * dt * dt;
            assert!(resid.abs() < 1e-9, "id {} t {}: residual {resid}", a.id, a.t);
        }
    }
}

#[test]
fn logged_trajectories_are_kinematically_consistent() {
    let cfg = EnvConfig { scenario: Scenario::Aggressive, vehicle_count: 20, spawn_length: 800.0, ..EnvConfig::default() };
    let mut world = npc_world(&cfg, 11).unwrap();
    let records = run_world(&mut world, 600);
    let mut buf = Vec::new();
    write_trajectory(&mut buf, &Provenance::new("", 11), &records).unwrap();
    let (_, back) = read_trajectory(buf.as_slice()).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in back.iter().zip(&records) {
        assert!(a == b, "round trip changed {b:?} into {a:?}");
    }
    replay_check(&back, cfg.dt);
}

#[test]
fn reward_decomposes_into_four_terms() {
    let cfg = EnvConfig { vehicle_count: 20, spawn_length: 400.0, ..EnvConfig::default() };
    let mut env = HighwayEnv::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut steps = 0;
    let mut seed = 0;
    env.reset(seed).unwrap();
    while steps < 1000 {
        let a = Action::from_index(rng.random_range(0..ACTION_COUNT)).unwrap();
        let r = env.step(a).unwrap();
        let i = &r.info;
        let w = &cfg.rewards;
        let [lo, hi] = cfg.speed_range;
        let collision = if i.collided { w.collision } else { 0.0 };
        let lane_change = if i.lane_changed { w.lane_change } else { 0.0 };
        let right_lane = if i.ego_lane == 0 { w.right_lane } else { 0.0 };
        let high_speed = w.high_speed * ((i.ego_speed - lo) / (hi - lo)).clamp(0.0, 1.0);
        assert_eq!(r.reward, collision + lane_change + right_lane + high_speed);
        steps += 1;
        if r.done {
            seed += 1;
            env.reset(seed).unwrap();
        }
    }
}
