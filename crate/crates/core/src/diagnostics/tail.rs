use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::{ParamVector, Policy};
use crate::rng::par_substreams;

/// Mean score difference `E‖ψ_θ − ψ_ref‖` along a 1-D parameter scan, for
/// two policies.
#[derive(Debug, Clone, PartialEq)]
pub struct TailScan {
    pub grid: Vec<f64>,
    pub curve_a: Vec<f64>,
    pub curve_b: Vec<f64>,
}

fn scan<P: Policy, R: Rng + ?Sized>(
    policy: &P,
    reference: &ParamVector,
    grid: &[f64],
    state: usize,
    n_actions: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    policy.check_dim(reference)?;
    // Actions drawn once from π_ref and shared by every grid point.
    let actions: Vec<P::Action> = par_substreams(rng, n_actions, |_, sub| {
        policy.sample_action(reference, state, sub)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let base: Vec<_> = actions
        .iter()
        .map(|a| policy.score(reference, state, a).map(|s| s.grad))
        .collect::<Result<_>>()?;
    grid.iter()
        .map(|&x| {
            let theta = reference.with_coord(0, x)?;
            let mut total = 0.0;
            for (a, g) in actions.iter().zip(&base) {
                total += (policy.score(&theta, state, a)?.grad - g).norm();
            }
            Ok(total / n_actions as f64)
        })
        .collect()
}

/// For each `θ⁽¹⁾` in `grid` (first coordinate of `reference` replaced), the
/// mean of `‖ψ_θ(s, a) − ψ_ref(s, a)‖` over `n_actions` actions sampled from
/// each policy at the reference parameter.
pub fn probe_tail_scan<PA, PB, R>(
    policy_a: &PA,
    policy_b: &PB,
    reference: &ParamVector,
    grid: &[f64],
    state: usize,
    n_actions: usize,
    rng: &mut R,
) -> Result<TailScan>
where
    PA: Policy,
    PB: Policy,
    R: Rng + ?Sized,
{
    if n_actions == 0 || grid.is_empty() {
        return Err(Error::Config("tail scan needs a grid and at least one action".into()));
    }
    Ok(TailScan {
        grid: grid.to_vec(),
        curve_a: scan(policy_a, reference, grid, state, n_actions, rng)?,
        curve_b: scan(policy_b, reference, grid, state, n_actions, rng)?,
    })
}
