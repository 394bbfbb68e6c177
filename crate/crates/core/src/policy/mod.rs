//! Exponential policy classes `π_θ(a|s) ∝ exp(ν_θ(s, a))`.

mod gaussian;
mod safe;
mod softmax;

pub use gaussian::GeneralizedGaussian;
pub use safe::SafeLogBarrier;
pub use softmax::SoftmaxPolicy;

use std::ops::{Add, Index};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Policy parameter `θ ∈ R^N`; every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(DVector<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(values))
    }

    pub fn from_vector(values: DVector<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::OutOfRange {
                name: "theta entry",
                range: "finite reals",
                value: values[i],
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `θ + scale·direction`, rejecting non-finite results.
    pub fn perturbed(&self, direction: &DVector<f64>, scale: f64) -> Result<Self> {
        if direction.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "direction has dimension {}, parameter has {}",
                direction.len(),
                self.dim()
            )));
        }
        Self::from_vector(&self.0 + direction * scale)
    }

    /// Copy with coordinate `i` replaced.
    pub fn with_coord(&self, i: usize, value: f64) -> Result<Self> {
        let mut v = self.0.clone();
        v[i] = value;
        Self::from_vector(v)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add<&DVector<f64>> for &ParamVector {
    type Output = DVector<f64>;
    fn add(self, rhs: &DVector<f64>) -> DVector<f64> {
        &self.0 + rhs
    }
}

/// Score `ψ_θ(s, a) = ∇_θ log π_θ(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub grad: DVector<f64>,
    /// Set when `(θ, s, a)` sits on a non-differentiable point and `grad` is
    /// the symmetric (zero) subgradient.
    pub at_kink: bool,
}

impl Score {
    pub fn smooth(grad: DVector<f64>) -> Self {
        Self {
            grad,
            at_kink: false,
        }
    }
}

/// An exponential policy over discrete states.
pub trait Policy: Sync {
    type Action: Clone + Send + Sync;

    /// Dimension `N` of θ.
    fn dim(&self) -> usize;

    /// `log π_θ(a|s) = ν_θ(s, a) − log Z_θ(s)`.
    fn log_density(&self, theta: &ParamVector, state: usize, action: &Self::Action)
        -> Result<f64>;

    fn score(&self, theta: &ParamVector, state: usize, action: &Self::Action) -> Result<Score>;

    fn sample_action<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        state: usize,
        rng: &mut R,
    ) -> Result<Self::Action>;

    fn check_dim(&self, theta: &ParamVector) -> Result<()> {
        if theta.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "theta has dimension {}, policy expects {}",
                theta.dim(),
                self.dim()
            )))
        }
    }
}

/// A policy over a finite action set `{0, …, |A| − 1}`, which makes exact
/// sums over actions available to the oracle.
pub trait DiscretePolicy: Policy<Action = usize> {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn action_probs(&self, theta: &ParamVector, state: usize) -> Result<Vec<f64>>;
}

/// Serializable description of a policy class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// Softmax over a finite action set. Without `features` the
    /// parameterization is fully tabular (`N = |S|·|A|`); otherwise
    /// `features[s·|A| + a]` is `φ(s, a) ∈ R^N`.
    TabularSoftmax {
        #[serde(default)]
        features: Option<Vec<Vec<f64>>>,
    },
    /// `ν_θ(s, a) = −|a − ⟨φ(s), θ⟩|^κ` on the real line. `state_features[s]`
    /// is `φ(s)`; the default `[[1.0]]` is the 1-D location family.
    GeneralizedGaussian {
        kappa: f64,
        #[serde(default)]
        state_features: Option<Vec<Vec<f64>>>,
    },
    /// `ν_θ(a) = −θ log ‖a − φ*‖` on the unit ball of `R^d`, `d = len(φ*)`.
    SafeLogBarrier { phi_star: Vec<f64> },
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PolicySpec::TabularSoftmax { features } => {
                if let Some(f) = features {
                    let n = f.first().map_or(0, Vec::len);
                    if n == 0 || f.iter().any(|row| row.len() != n) {
                        return Err(Error::Config(
                            "policy.features rows must be non-empty and of equal length".into(),
                        ));
                    }
                }
                Ok(())
            }
            PolicySpec::GeneralizedGaussian {
                kappa,
                state_features,
            } => {
                GeneralizedGaussian::check_kappa(*kappa)?;
                if let Some(f) = state_features {
                    let n = f.first().map_or(0, Vec::len);
                    if n == 0 || f.iter().any(|row| row.len() != n) {
                        return Err(Error::Config(
                            "policy.state_features rows must be non-empty and of equal length"
                                .into(),
                        ));
                    }
                }
                Ok(())
            }
            PolicySpec::SafeLogBarrier { phi_star } => SafeLogBarrier::new(phi_star.clone()).map(|_| ()),
        }
    }
}

/// Hölder orders of a policy class: KL order `β₁ ∈ [1, 2]` and score order
/// `β₂ ∈ (0, 1]`, with `β₀ = min(β₁/4, β₂)` the dominant order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessSpec {
    pub beta1: f64,
    pub beta2: f64,
    pub c_nu1: f64,
    pub c_nu2: f64,
}

impl SmoothnessSpec {
    pub fn new(beta1: f64, beta2: f64, c_nu1: f64, c_nu2: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&beta1) {
            return Err(Error::OutOfRange {
                name: "beta1",
                range: "[1,2]",
                value: beta1,
            });
        }
        if !(beta2 > 0.0 && beta2 <= 1.0) {
            return Err(Error::OutOfRange {
                name: "beta2",
                range: "(0,1]",
                value: beta2,
            });
        }
        if !(c_nu1 >= 0.0 && c_nu2 >= 0.0) {
            return Err(Error::Config("smoothness constants must be nonnegative".into()));
        }
        Ok(Self {
            beta1,
            beta2,
            c_nu1,
            c_nu2,
        })
    }

    pub fn beta0(&self) -> f64 {
        (self.beta1 / 4.0).min(self.beta2)
    }

    pub fn beta_max(&self) -> f64 {
        (self.beta1 / 4.0).max(self.beta2)
    }
}

/// Numerically stable `log Σ exp(x_i)`.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
