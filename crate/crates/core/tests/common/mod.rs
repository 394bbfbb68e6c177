#![allow(dead_code)]

use holderpg::rng::seeded;
use holderpg::{ParamVector, TabularMdp};
use rand::Rng;

fn simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Random MDP with full-support dynamics, rewards in [−1, 1].
pub fn random_mdp(seed: u64, n_states: usize, n_actions: usize, gamma: f64) -> TabularMdp {
    let mut rng = seeded(seed);
    let transition: Vec<Vec<Vec<f64>>> = (0..n_states)
        .map(|_| (0..n_actions).map(|_| simplex(n_states, &mut rng)).collect())
        .collect();
    let reward: Vec<Vec<f64>> = (0..n_states)
        .map(|_| (0..n_actions).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let rho = simplex(n_states, &mut rng);
    TabularMdp::from_nested(&transition, &reward, gamma, rho, 1.0).unwrap()
}

pub fn random_theta(seed: u64, dim: usize, scale: f64) -> ParamVector {
    let mut rng = seeded(seed ^ 0x9e37_79b9_7f4a_7c15);
    ParamVector::new((0..dim).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

pub fn zero_reward_chain(gamma: f64) -> TabularMdp {
    TabularMdp::from_nested(
        &[
            vec![vec![0.3, 0.7], vec![0.6, 0.4]],
            vec![vec![1.0, 0.0], vec![0.5, 0.5]],
        ],
        &[vec![0.0, 0.0], vec![0.0, 0.0]],
        gamma,
        vec![0.5, 0.5],
        1.0,
    )
    .unwrap()
}
