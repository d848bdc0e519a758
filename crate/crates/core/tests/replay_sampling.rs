use behav_core::env::{Action, Observation, ACTION_COUNT};
use behav_core::qnet::{epsilon_greedy, ReplayBuffer, Transition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn transition(reward: f64) -> Transition {
    Transition {
        state: Observation::zeros(1),
        action: Action::Idle,
        reward,
        next_state: Observation::zeros(1),
        done: false,
    }
}

fn filled(n: usize, alpha: f64) -> ReplayBuffer {
    let mut b = ReplayBuffer::new(n, alpha, 1e-3);
    for i in 0..n {
        b.push(transition(i as f64));
    }
    b
}

fn counts(b: &ReplayBuffer, draws: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = vec![0; b.len()];
    let s = b.sample(draws, 1.0, &mut rng).unwrap();
    for i in s.indices {
        c[i] += 1;
    }
    c
}

/// Pearson chi-square statistic against a uniform expectation.
fn chi_square_uniform(c: &[usize]) -> f64 {
    let total: usize = c.iter().sum();
    let e = total as f64 / c.len() as f64;
    c.iter().map(|&o| (o as f64 - e).powi(2) / e).sum()
}

// Upper 1% point of chi-square with 9 degrees of freedom.
const CHI2_9DOF_P01: f64 = 21.666;

#[test]
fn prioritized_distribution_converges() {
    let mut b = filled(10, 0.6);
    let td: Vec<f64> = (0..10).map(|i| 0.1 + 0.5 * i as f64).collect();
    b.update_priorities(&(0..10).collect::<Vec<_>>(), &td);
    let p: Vec<f64> = td.iter().map(|d| (d + 1e-3f64).powf(0.6)).collect();
    let z: f64 = p.iter().sum();
    for (i, pi) in p.iter().enumerate() {
        assert!((b.probability(i) - pi / z).abs() < 1e-12);
    }
    let draws = 100_000;
    let c = counts(&b, draws, 7);
    let tv: f64 = c.iter().zip(&p).map(|(&k, pi)| (k as f64 / draws as f64 - pi / z).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "total variation {tv}");
}

#[test]
fn equal_priorities_sample_uniformly() {
    let b = filled(10, 0.6);
    let chi2 = chi_square_uniform(&counts(&b, 10_000, 8));
    assert!(chi2 < CHI2_9DOF_P01, "chi-square {chi2}");
}

#[test]
fn alpha_zero_ignores_priorities() {
    let mut b = filled(10, 0.0);
    b.update_priorities(&[0, 1, 2], &[100.0, 0.0, 5.0]);
    for i in 0..10 {
        assert!((b.probability(i) - 0.1).abs() < 1e-15);
    }
    let chi2 = chi_square_uniform(&counts(&b, 10_000, 9));
    assert!(chi2 < CHI2_9DOF_P01, "chi-square {chi2}");
}

#[test]
fn importance_weights_are_max_normalised() {
    let mut b = filled(4, 1.0);
    b.update_priorities(&[0, 1, 2, 3], &[1.0, 2.0, 3.0, 4.0]);
    let s = b.sample(64, 0.5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let max = s.weights.iter().cloned().fold(0.0, f64::max);
    assert_eq!(max, 1.0);
    for (&i, &w) in s.indices.iter().zip(&s.weights) {
        let raw = |j: usize| (4.0 * b.probability(j)).powf(-0.5);
        let lo = s.indices.iter().map(|&j| raw(j)).fold(0.0, f64::max);
        assert!((w - raw(i) / lo).abs() < 1e-12);
    }
}

#[test]
fn full_exploration_is_uniform_over_actions() {
    let q = [5.0, 1.0, 0.0, -1.0, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut c = vec![0usize; ACTION_COUNT];
    for _ in 0..10_000 {
        c[epsilon_greedy(&q, 1.0, &mut rng).index()] += 1;
    }
    // 4 degrees of freedom, upper 1% point
    assert!(chi_square_uniform(&c) < 13.277);
}
