use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::policy::{DiscretePolicy, GeneralizedGaussian, ParamVector, Policy, SoftmaxPolicy};
use crate::stats::{loglog_fit, logspace};

/// Per-state KL divergence `KL(π_θ(·|s) ‖ π_θ'(·|s))`.
pub trait KlDivergence: Policy {
    fn kl(&self, theta: &ParamVector, other: &ParamVector, state: usize) -> Result<f64>;
}

impl KlDivergence for SoftmaxPolicy {
    fn kl(&self, theta: &ParamVector, other: &ParamVector, state: usize) -> Result<f64> {
        if theta == other {
            return Ok(0.0);
        }
        let p = self.action_probs(theta, state)?;
        let lq: Vec<f64> = (0..self.n_actions())
            .map(|a| self.log_density(other, state, &a))
            .collect::<Result<_>>()?;
        let mut kl = 0.0;
        for (a, pa) in p.iter().enumerate() {
            if *pa > 0.0 {
                kl += pa * (pa.ln() - lq[a]);
            }
        }
        Ok(kl.max(0.0))
    }
}

impl KlDivergence for GeneralizedGaussian {
    fn kl(&self, theta: &ParamVector, other: &ParamVector, state: usize) -> Result<f64> {
        GeneralizedGaussian::kl(self, theta, other, state)
    }
}

/// Measured values against `‖η‖` and the fitted log-log exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderFit {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub exponent: f64,
    pub exponent_std_error: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmoothnessReport {
    pub kl: Option<HolderFit>,
    pub score: Option<HolderFit>,
}

impl SmoothnessReport {
    pub fn fitted_beta1(&self) -> Option<f64> {
        self.kl.as_ref().map(|f| f.exponent)
    }

    pub fn fitted_beta2(&self) -> Option<f64> {
        self.score.as_ref().map(|f| f.exponent)
    }
}

/// Nine radii log-spaced over `[1e-3, 1e-1]`.
pub fn default_radii() -> Vec<f64> {
    logspace(1e-3, 1e-1, 9)
}

/// 1-D sample points concentrated around a kink at `center`: offsets
/// `±10^k` for `n` exponents spread over `[lo, hi]`, plus the kink itself.
pub fn kink_grid(center: f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut pts = vec![center];
    for r in logspace(lo, hi, n) {
        pts.push(center + r);
        pts.push(center - r);
    }
    pts
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < 2 {
        return Err(Error::Config("at least two radii are needed for a fit".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Config("radii must be positive and finite".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("radii must be strictly increasing".into()));
    }
    Ok(())
}

fn unit_directions(directions: &[DVector<f64>], dim: usize) -> Result<Vec<DVector<f64>>> {
    if directions.is_empty() {
        return Err(Error::Config("at least one direction is needed".into()));
    }
    directions
        .iter()
        .map(|d| {
            if d.len() != dim {
                return Err(Error::Dimension(format!(
                    "direction has dimension {}, policy expects {dim}",
                    d.len()
                )));
            }
            let n = d.norm();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::Config("directions must be non-zero".into()));
            }
            Ok(d / n)
        })
        .collect()
}

fn fit(radii: &[f64], values: Vec<f64>) -> Result<HolderFit> {
    let lf = loglog_fit(radii, &values)
        .ok_or_else(|| Error::Config("too few positive values for a log-log fit".into()))?;
    Ok(HolderFit {
        radii: radii.to_vec(),
        values,
        exponent: lf.slope,
        exponent_std_error: lf.slope_std_error,
        r2: lf.r2,
    })
}

/// `max_{u, s} KL(π_θ(·|s) ‖ π_{θ+r·u}(·|s))` per radius `r`, with the fitted
/// exponent β₁.
pub fn probe_kl_smoothness<P: KlDivergence>(
    policy: &P,
    theta: &ParamVector,
    directions: &[DVector<f64>],
    radii: &[f64],
    states: &[usize],
) -> Result<HolderFit> {
    check_radii(radii)?;
    policy.check_dim(theta)?;
    let dirs = unit_directions(directions, policy.dim())?;
    let values = radii
        .par_iter()
        .map(|&r| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for u in &dirs {
                let other = theta.perturbed(u, r)?;
                for &s in states {
                    worst = worst.max(policy.kl(theta, &other, s)?);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    fit(radii, values)
}

/// `max ‖ψ_θ(s, a) − ψ_{θ+r·u}(s, a)‖` over directions and the supplied sample
/// points, per radius, with the fitted exponent β₂. A max over finitely many
/// points under-estimates the true sup; put points near the score's kinks.
pub fn probe_score_smoothness<P: Policy>(
    policy: &P,
    theta: &ParamVector,
    directions: &[DVector<f64>],
    radii: &[f64],
    sample_points: &[(usize, P::Action)],
) -> Result<HolderFit> {
    check_radii(radii)?;
    policy.check_dim(theta)?;
    if sample_points.is_empty() {
        return Err(Error::Config("at least one sample point is needed".into()));
    }
    let dirs = unit_directions(directions, policy.dim())?;
    let base: Vec<DVector<f64>> = sample_points
        .iter()
        .map(|(s, a)| policy.score(theta, *s, a).map(|sc| sc.grad))
        .collect::<Result<_>>()?;
    let values = radii
        .par_iter()
        .map(|&r| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for u in &dirs {
                let other = theta.perturbed(u, r)?;
                for ((s, a), g) in sample_points.iter().zip(&base) {
                    let diff = (policy.score(&other, *s, a)?.grad - g).norm();
                    worst = worst.max(diff);
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    fit(radii, values)
}
