use nalgebra::DVector;
use rand::Rng;

use super::{log_sum_exp, DiscretePolicy, ParamVector, Policy, Score};
use crate::env::sample_categorical;
use crate::error::{Error, Result};

/// Softmax policy with logits `⟨φ(s, a), θ⟩`.
///
/// The tabular parameterization uses one-hot features, so `θ[s·|A| + a]` is
/// the logit of action `a` in state `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    /// `φ(s, a)` stored at `(s·|A| + a)·N`; `None` for one-hot features.
    features: Option<Vec<f64>>,
}

impl SoftmaxPolicy {
    pub fn tabular(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            dim: n_states * n_actions,
            features: None,
        }
    }

    /// Linear softmax; `features[s·|A| + a]` is `φ(s, a)`.
    pub fn linear(n_states: usize, n_actions: usize, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "expected {} feature rows, got {}",
                n_states * n_actions,
                features.len()
            )));
        }
        let dim = features.first().map_or(0, Vec::len);
        if dim == 0 || features.iter().any(|f| f.len() != dim) {
            return Err(Error::Dimension("feature rows must share a positive length".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            dim,
            features: Some(features.into_iter().flatten().collect()),
        })
    }

    fn feature(&self, s: usize, a: usize) -> Option<&[f64]> {
        self.features.as_ref().map(|f| {
            let start = (s * self.n_actions + a) * self.dim;
            &f[start..start + self.dim]
        })
    }

    pub fn logits(&self, theta: &ParamVector, s: usize) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        if s >= self.n_states {
            return Err(Error::Dimension(format!("state {s} out of range")));
        }
        let th = theta.as_slice();
        Ok((0..self.n_actions)
            .map(|a| match self.feature(s, a) {
                None => th[s * self.n_actions + a],
                Some(phi) => phi.iter().zip(th).map(|(x, y)| x * y).sum(),
            })
            .collect())
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a < self.n_actions {
            Ok(())
        } else {
            Err(Error::Dimension(format!("action {a} out of range")))
        }
    }
}

impl Policy for SoftmaxPolicy {
    type Action = usize;

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, theta: &ParamVector, state: usize, action: &usize) -> Result<f64> {
        self.check_action(*action)?;
        let z = self.logits(theta, state)?;
        Ok(z[*action] - log_sum_exp(&z))
    }

    fn score(&self, theta: &ParamVector, state: usize, action: &usize) -> Result<Score> {
        self.check_action(*action)?;
        let probs = self.action_probs(theta, state)?;
        let mut g = DVector::zeros(self.dim);
        match &self.features {
            None => {
                let base = state * self.n_actions;
                for (b, p) in probs.iter().enumerate() {
                    g[base + b] = -p;
                }
                g[base + action] += 1.0;
            }
            Some(_) => {
                for (b, p) in probs.iter().enumerate() {
                    let phi = self.feature(state, b).expect("linear features present");
                    let w = if b == *action { 1.0 - p } else { -p };
                    for (k, x) in phi.iter().enumerate() {
                        g[k] += w * x;
                    }
                }
            }
        }
        Ok(Score::smooth(g))
    }

    fn sample_action<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        state: usize,
        rng: &mut R,
    ) -> Result<usize> {
        Ok(sample_categorical(&self.action_probs(theta, state)?, rng))
    }
}

impl DiscretePolicy for SoftmaxPolicy {
    fn n_states(&self) -> usize {
        self.n_states
    }

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn action_probs(&self, theta: &ParamVector, state: usize) -> Result<Vec<f64>> {
        let z = self.logits(theta, state)?;
        let lse = log_sum_exp(&z);
        Ok(z.iter().map(|v| (v - lse).exp()).collect())
    }
}
