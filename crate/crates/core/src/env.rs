//! Environments, trajectory generation and discounted-visitation sampling.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ParamVector, Policy};

const PROB_TOL: f64 = 1e-12;

/// Dynamics of an MDP with a discrete state space.
///
/// Actions are whatever the paired policy emits (`usize` for tabular MDPs,
/// `f64` for the exploration bandit, points of the unit ball for the safe
/// policy environment).
pub trait Environment: Sync {
    type Action: Clone + Send + Sync;

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize;

    /// Returns `(reward, next_state)`.
    fn step<R: Rng + ?Sized>(&self, state: usize, action: &Self::Action, rng: &mut R)
        -> (f64, usize);

    /// Bound α on |r|.
    fn reward_bound(&self) -> f64;

    fn discount(&self) -> f64;
}

/// Tabular MDP `(S, A, P, r, γ, ρ)` with deterministic mean rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `P[s][a][s']`, flattened row-major.
    transition: Vec<f64>,
    /// `r[s][a]`, flattened row-major.
    reward: Vec<f64>,
    alpha: f64,
    gamma: f64,
    init_dist: Vec<f64>,
}

/// On-disk layout of a [`TabularMdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularMdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    /// `P[s][a][s']` flattened row-major (length `S·A·S`).
    pub transition: Vec<f64>,
    /// `r[s][a]` flattened row-major (length `S·A`).
    pub reward: Vec<f64>,
    pub gamma: f64,
    pub rho: Vec<f64>,
    pub alpha: f64,
}

impl TabularMdp {
    /// Validates and builds a tabular MDP from flattened arrays.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        rho: Vec<f64>,
        alpha: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Dimension(
                "n_states and n_actions must be positive".into(),
            ));
        }
        let (s_n, a_n) = (n_states, n_actions);
        if transition.len() != s_n * a_n * s_n {
            return Err(Error::Dimension(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                s_n * a_n * s_n
            )));
        }
        if reward.len() != s_n * a_n {
            return Err(Error::Dimension(format!(
                "reward has {} entries, expected {}",
                reward.len(),
                s_n * a_n
            )));
        }
        if rho.len() != s_n {
            return Err(Error::Dimension(format!(
                "rho has {} entries, expected {}",
                rho.len(),
                s_n
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::OutOfRange {
                name: "gamma",
                range: "[0,1)",
                value: gamma,
            });
        }
        if !(alpha >= 0.0) {
            return Err(Error::OutOfRange {
                name: "alpha",
                range: "[0,∞)",
                value: alpha,
            });
        }
        for s in 0..s_n {
            for a in 0..a_n {
                let row = &transition[(s * a_n + a) * s_n..(s * a_n + a + 1) * s_n];
                if let Some((next, &value)) =
                    row.iter().enumerate().find(|(_, p)| !(**p >= 0.0))
                {
                    return Err(Error::NegativeProbability {
                        state: s,
                        action: a,
                        next,
                        value,
                    });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::RowSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                let r = reward[s * a_n + a];
                if !(r.abs() <= alpha) {
                    return Err(Error::RewardBound {
                        state: s,
                        action: a,
                        value: r,
                        alpha,
                    });
                }
            }
        }
        if rho.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InitialDistribution(
                "entries must be nonnegative".into(),
            ));
        }
        let rho_sum: f64 = rho.iter().sum();
        if (rho_sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InitialDistribution(format!(
                "sums to {rho_sum} ≠ 1"
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            alpha,
            gamma,
            init_dist: rho,
        })
    }

    /// Builds from nested `P[s][a][s']` and `r[s][a]`.
    pub fn from_nested(
        transition: &[Vec<Vec<f64>>],
        reward: &[Vec<f64>],
        gamma: f64,
        rho: Vec<f64>,
        alpha: f64,
    ) -> Result<Self> {
        let n_states = transition.len();
        let n_actions = transition.first().map_or(0, Vec::len);
        if transition.iter().any(|rows| rows.len() != n_actions)
            || transition
                .iter()
                .flatten()
                .any(|row| row.len() != n_states)
        {
            return Err(Error::Dimension("ragged transition tensor".into()));
        }
        if reward.len() != n_states || reward.iter().any(|r| r.len() != n_actions) {
            return Err(Error::Dimension(
                "reward matrix does not match transition tensor".into(),
            ));
        }
        Self::new(
            n_states,
            n_actions,
            transition.iter().flatten().flatten().copied().collect(),
            reward.iter().flatten().copied().collect(),
            gamma,
            rho,
            alpha,
        )
    }

    pub fn from_file_repr(file: TabularMdpFile) -> Result<Self> {
        Self::new(
            file.n_states,
            file.n_actions,
            file.transition,
            file.reward,
            file.gamma,
            file.rho,
            file.alpha,
        )
    }

    pub fn to_file_repr(&self) -> TabularMdpFile {
        TabularMdpFile {
            n_states: self.n_states,
            n_actions: self.n_actions,
            transition: self.transition.clone(),
            reward: self.reward.clone(),
            gamma: self.gamma,
            rho: self.init_dist.clone(),
            alpha: self.alpha,
        }
    }

    /// Parses the TOML document layout of [`TabularMdpFile`].
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TabularMdpFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file_repr(file)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_file_repr()).expect("MDP serializes to TOML")
    }

    /// The two-state, two-action chain used throughout the test-suite:
    /// `P[0][0] = (0.9, 0.1)`, `P[0][1] = (0.1, 0.9)`, `P[1][·] = (0.5, 0.5)`,
    /// `r = [[1, 0], [0, 1]]`, uniform `ρ`.
    pub fn two_state_chain(gamma: f64) -> Result<Self> {
        Self::from_nested(
            &[
                vec![vec![0.9, 0.1], vec![0.1, 0.9]],
                vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            ],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            gamma,
            vec![0.5, 0.5],
            1.0,
        )
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn init_dist(&self) -> &[f64] {
        &self.init_dist
    }

    /// `P[s][a][·]`.
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_states;
        let start = (s * self.n_actions + a) * n;
        &self.transition[start..start + n]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Same dynamics with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::OutOfRange {
                name: "gamma",
                range: "[0,1)",
                value: gamma,
            });
        }
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }
}

impl Environment for TabularMdp {
    type Action = usize;

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.init_dist, rng)
    }

    fn step<R: Rng + ?Sized>(&self, state: usize, action: &usize, rng: &mut R) -> (f64, usize) {
        let next = sample_categorical(self.transition_row(state, *action), rng);
        (self.reward(state, *action), next)
    }

    fn reward_bound(&self) -> f64 {
        self.alpha
    }

    fn discount(&self) -> f64 {
        self.gamma
    }
}

/// Single-state continuous-action bandit with reward
/// `(1 − (a − θ*)²)·1{|a − θ*| ≤ 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationBandit {
    pub theta_star: f64,
}

impl ExplorationBandit {
    pub fn new(theta_star: f64) -> Self {
        Self { theta_star }
    }
}

impl Environment for ExplorationBandit {
    type Action = f64;

    fn initial_state<R: Rng + ?Sized>(&self, _rng: &mut R) -> usize {
        0
    }

    fn step<R: Rng + ?Sized>(&self, _state: usize, action: &f64, _rng: &mut R) -> (f64, usize) {
        (exploration_reward(*action, self.theta_star), 0)
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn discount(&self) -> f64 {
        0.0
    }
}

/// Single-state environment whose actions are points of the unit ball in
/// `R^dim`, with zero reward. Pairs with [`crate::policy::SafeLogBarrier`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitBallEnv {
    pub dim: usize,
}

impl Environment for UnitBallEnv {
    type Action = Vec<f64>;

    fn initial_state<R: Rng + ?Sized>(&self, _rng: &mut R) -> usize {
        0
    }

    fn step<R: Rng + ?Sized>(&self, _state: usize, _action: &Vec<f64>, _rng: &mut R) -> (f64, usize) {
        (0.0, 0)
    }

    fn reward_bound(&self) -> f64 {
        0.0
    }

    fn discount(&self) -> f64 {
        0.0
    }
}

pub fn exploration_reward(a: f64, theta_star: f64) -> f64 {
    let d = a - theta_star;
    if d.abs() <= 1.0 {
        1.0 - d * d
    } else {
        0.0
    }
}

/// Draws `k ≥ 0` with `P(k) = p(1 − p)^k`.
pub fn geom_draw<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::OutOfRange {
            name: "p",
            range: "(0,1]",
            value: p,
        });
    }
    if p == 1.0 {
        return Ok(0);
    }
    Ok(Geometric::new(p)
        .expect("p validated above")
        .sample(rng))
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Roundoff in the cumulative sum: fall back to the last positive entry.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// A rollout of `length` transitions `(s_t, a_t, r_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample<A> {
    pub states: Vec<usize>,
    pub actions: Vec<A>,
    pub rewards: Vec<f64>,
}

impl<A> TrajectorySample<A> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn sample_trajectory<E, P, R>(
    env: &E,
    policy: &P,
    theta: &ParamVector,
    length: usize,
    rng: &mut R,
) -> Result<TrajectorySample<E::Action>>
where
    E: Environment,
    P: Policy<Action = E::Action>,
    R: Rng + ?Sized,
{
    if length == 0 {
        return Err(Error::OutOfRange {
            name: "length",
            range: "[1,∞)",
            value: 0.0,
        });
    }
    let mut traj = TrajectorySample {
        states: Vec::with_capacity(length),
        actions: Vec::with_capacity(length),
        rewards: Vec::with_capacity(length),
    };
    let mut s = env.initial_state(rng);
    for _ in 0..length {
        let a = policy.sample_action(theta, s, rng)?;
        let (r, next) = env.step(s, &a, rng);
        traj.states.push(s);
        traj.actions.push(a);
        traj.rewards.push(r);
        s = next;
    }
    Ok(traj)
}

/// A draw `(s_j, a_j)` from the discounted visitation distribution together
/// with its geometric index `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitationDraw<A> {
    pub state: usize,
    pub action: A,
    pub horizon_j: u64,
}

/// Draws `j ∼ Geom(1 − γ)`, rolls `j + 1` steps under `π_θ` and returns the
/// last state–action pair; its law is `d_θ^ρ`.
pub fn sample_visitation<E, P, R>(
    env: &E,
    policy: &P,
    theta: &ParamVector,
    gamma: f64,
    rng: &mut R,
) -> Result<VisitationDraw<E::Action>>
where
    E: Environment,
    P: Policy<Action = E::Action>,
    R: Rng + ?Sized,
{
    check_gamma(gamma)?;
    let j = geom_draw(1.0 - gamma, rng)?;
    let mut s = env.initial_state(rng);
    let mut u = 0;
    loop {
        let a = policy.sample_action(theta, s, rng)?;
        if u == j {
            return Ok(VisitationDraw {
                state: s,
                action: a,
                horizon_j: j,
            });
        }
        let (_, next) = env.step(s, &a, rng);
        s = next;
        u += 1;
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "gamma",
            range: "[0,1)",
            value: gamma,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn single_state_mdp_is_valid() {
        let mdp =
            TabularMdp::from_nested(&[vec![vec![1.0]]], &[vec![0.0]], 0.5, vec![1.0], 0.0).unwrap();
        assert_eq!(mdp.n_states(), 1);
        assert_eq!(mdp.n_actions(), 1);
    }

    #[test]
    fn row_sum_error_reports_sum() {
        let err = TabularMdp::from_nested(
            &[vec![vec![0.5, 0.6]], vec![vec![0.5, 0.5]]],
            &[vec![0.0], vec![0.0]],
            0.5,
            vec![1.0, 0.0],
            1.0,
        )
        .unwrap_err();
        match err {
            Error::RowSum { state, action, sum } => {
                assert_eq!((state, action), (0, 0));
                assert!((sum - 1.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(TabularMdp::two_state_chain(0.9).is_ok());
    }

    #[test]
    fn validation_errors() {
        let p = vec![vec![vec![1.0]]];
        assert!(matches!(
            TabularMdp::from_nested(&p, &[vec![2.0]], 0.5, vec![1.0], 1.0),
            Err(Error::RewardBound { .. })
        ));
        assert!(matches!(
            TabularMdp::from_nested(&p, &[vec![0.0]], 1.0, vec![1.0], 1.0),
            Err(Error::OutOfRange { name: "gamma", .. })
        ));
        assert!(matches!(
            TabularMdp::from_nested(&p, &[vec![0.0]], 0.5, vec![0.5], 1.0),
            Err(Error::InitialDistribution(_))
        ));
        assert!(matches!(
            TabularMdp::new(1, 1, vec![1.0, 0.0], vec![0.0], 0.5, vec![1.0], 1.0),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            TabularMdp::from_nested(
                &[vec![vec![1.5, -0.5]], vec![vec![0.5, 0.5]]],
                &[vec![0.0], vec![0.0]],
                0.5,
                vec![1.0, 0.0],
                1.0
            ),
            Err(Error::NegativeProbability { .. })
        ));
    }

    #[test]
    fn toml_round_trip() {
        let mdp = TabularMdp::two_state_chain(0.9).unwrap();
        let text = mdp.to_toml_string();
        assert_eq!(TabularMdp::from_toml_str(&text).unwrap(), mdp);
        assert!(TabularMdp::from_toml_str(&format!("{text}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn exploration_reward_shape() {
        assert_eq!(exploration_reward(3.9, 3.9), 1.0);
        assert_eq!(exploration_reward(4.9, 3.9), 0.0);
        assert!(exploration_reward(2.9, 3.9).abs() < 1e-12);
        assert_eq!(exploration_reward(0.0, 3.9), 0.0);
        assert!((exploration_reward(3.4, 3.9) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn geom_degenerate_and_invalid() {
        let mut rng = seeded(1);
        assert!((0..100).all(|_| geom_draw(1.0, &mut rng).unwrap() == 0));
        assert!(geom_draw(0.0, &mut rng).is_err());
        assert!(geom_draw(1.5, &mut rng).is_err());
    }
}
