//! Exact quantities on tabular MDPs: the ground truth for every estimator and
//! probe.
//!
//! `d_θ^ρ` is normalized to sum to one, so `∇J(θ) = (1/(1−γ)) E_d[Q ψ]`. The
//! sampled estimator targets `E_d[Q ψ]` (see [`scaled_gradient`]).

use nalgebra::{DMatrix, DVector};

use crate::env::TabularMdp;
use crate::error::{Error, Result};
use crate::estimators::{pseudo_inverse_apply, DEFAULT_RANK_TOL};
use crate::optim::{OracleTracker, TrackedPoint};
use crate::policy::{DiscretePolicy, ParamVector};

/// Central finite-difference step for gradient validation.
pub const FD_STEP: f64 = 1e-5;
/// Step of the Richardson fallback.
pub const FD_FALLBACK_STEP: f64 = 1e-4;
/// Relative-error gate for analytic vs finite-difference gradients.
pub const FD_REL_TOL: f64 = 1e-5;
/// Absolute floor of the gate, for gradients at or near zero.
const FD_ABS_FLOOR: f64 = 1e-8;

fn check_shapes<P: DiscretePolicy>(mdp: &TabularMdp, policy: &P) -> Result<()> {
    if mdp.n_states() != policy.n_states() || mdp.n_actions() != policy.n_actions() {
        return Err(Error::Dimension(format!(
            "MDP is {}×{}, policy is {}×{}",
            mdp.n_states(),
            mdp.n_actions(),
            policy.n_states(),
            policy.n_actions()
        )));
    }
    Ok(())
}

/// `π_θ(a|s)` as an `S × A` matrix.
pub fn policy_matrix<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
) -> Result<DMatrix<f64>> {
    check_shapes(mdp, policy)?;
    let mut pi = DMatrix::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for (a, p) in policy.action_probs(theta, s)?.into_iter().enumerate() {
            pi[(s, a)] = p;
        }
    }
    Ok(pi)
}

/// State chain `P_π(s, s') = Σ_a π(a|s) P(s'|s, a)`.
pub fn state_transition(mdp: &TabularMdp, pi: &DMatrix<f64>) -> DMatrix<f64> {
    let n = mdp.n_states();
    let mut p = DMatrix::zeros(n, n);
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let w = pi[(s, a)];
            if w == 0.0 {
                continue;
            }
            for (next, q) in mdp.transition_row(s, a).iter().enumerate() {
                p[(s, next)] += w * q;
            }
        }
    }
    p
}

fn policy_reward(mdp: &TabularMdp, pi: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(mdp.n_states(), |s, _| {
        (0..mdp.n_actions()).map(|a| pi[(s, a)] * mdp.reward(s, a)).sum()
    })
}

fn resolvent_matrix(mdp: &TabularMdp, p_pi: &DMatrix<f64>) -> DMatrix<f64> {
    let n = mdp.n_states();
    DMatrix::identity(n, n) - p_pi * mdp.gamma()
}

fn values_from_pi(mdp: &TabularMdp, pi: &DMatrix<f64>) -> Result<DVector<f64>> {
    let a = resolvent_matrix(mdp, &state_transition(mdp, pi));
    let b = policy_reward(mdp, pi);
    let v = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("I − γP_π".into()))?;
    // One refinement step pushes the residual to roundoff.
    let r = &b - &a * &v;
    let dv = a
        .lu()
        .solve(&r)
        .ok_or_else(|| Error::Singular("I − γP_π".into()))?;
    Ok(v + dv)
}

fn q_from_values(mdp: &TabularMdp, v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        let next: f64 = mdp
            .transition_row(s, a)
            .iter()
            .zip(v.iter())
            .map(|(p, x)| p * x)
            .sum();
        mdp.reward(s, a) + mdp.gamma() * next
    })
}

fn visitation_from_pi(mdp: &TabularMdp, pi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a = resolvent_matrix(mdp, &state_transition(mdp, pi));
    let rho = DVector::from_column_slice(mdp.init_dist());
    // H = (1−γ) ρᵀ (I − γP_π)⁻¹  ⇔  (I − γP_π)ᵀ H = (1−γ) ρ
    let h = a
        .transpose()
        .lu()
        .solve(&(rho * (1.0 - mdp.gamma())))
        .ok_or_else(|| Error::Singular("(I − γP_π)ᵀ".into()))?;
    let total: f64 = h.sum();
    let h = h / total;
    Ok(DMatrix::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        h[s] * pi[(s, a)]
    }))
}

/// `V_θ` solving `(I − γP_π)V = r_π`.
pub fn exact_values<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
) -> Result<DVector<f64>> {
    values_from_pi(mdp, &policy_matrix(mdp, policy, theta)?)
}

/// `Q_θ(s, a) = r(s, a) + γ Σ_{s'} P(s'|s, a) V_θ(s')`.
pub fn exact_q<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
) -> Result<DMatrix<f64>> {
    Ok(q_from_values(mdp, &exact_values(mdp, policy, theta)?))
}

/// `A_θ = Q_θ − V_θ`.
pub fn exact_advantage<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
) -> Result<DMatrix<f64>> {
    let v = exact_values(mdp, policy, theta)?;
    let q = q_from_values(mdp, &v);
    Ok(DMatrix::from_fn(q.nrows(), q.ncols(), |s, a| q[(s, a)] - v[s]))
}

/// Discounted visitation `d_θ^ρ(s, a) = H(s) π_θ(a|s)`, summing to one.
pub fn exact_visitation<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
) -> Result<DMatrix<f64>> {
    visitation_from_pi(mdp, &policy_matrix(mdp, policy, theta)?)
}

/// `J(θ) = Σ_s ρ(s) V_θ(s)`.
pub fn exact_j<P: DiscretePolicy>(mdp: &TabularMdp, policy: &P, theta: &ParamVector) -> Result<f64> {
    let v = exact_values(mdp, policy, theta)?;
    Ok(mdp.init_dist().iter().zip(v.iter()).map(|(p, x)| p * x).sum())
}

/// `E_d[Q ψ]`, the expectation of the sampled gradient estimator
/// (`= (1 − γ)∇J`).
pub fn scaled_gradient<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
) -> Result<DVector<f64>> {
    let d = exact_visitation(mdp, policy, theta)?;
    let q = exact_q(mdp, policy, theta)?;
    let mut g = DVector::zeros(policy.dim());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let w = d[(s, a)] * q[(s, a)];
            if w != 0.0 {
                g += policy.score(theta, s, &a)?.grad * w;
            }
        }
    }
    Ok(g)
}

/// Central finite differences of `J` with step `h`.
pub fn finite_difference_gradient<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
    h: f64,
) -> Result<DVector<f64>> {
    let mut g = DVector::zeros(theta.dim());
    for i in 0..theta.dim() {
        let plus = exact_j(mdp, policy, &theta.with_coord(i, theta[i] + h)?)?;
        let minus = exact_j(mdp, policy, &theta.with_coord(i, theta[i] - h)?)?;
        g[i] = (plus - minus) / (2.0 * h);
    }
    Ok(g)
}

fn gate(analytic: &DVector<f64>, fd: &DVector<f64>) -> (bool, f64) {
    let diff = (analytic - fd).norm();
    let scale = fd.norm();
    let rel = if scale > 0.0 { diff / scale } else { diff };
    (diff <= FD_REL_TOL * scale + FD_ABS_FLOOR, rel)
}

/// `∇J(θ) = (1/(1−γ)) Σ d Q ψ`, validated against central finite differences
/// of `J` (step 1e-5, Richardson fallback at 1e-4). Failing both gates is an
/// error: it means the score and the policy disagree.
pub fn exact_gradient<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
) -> Result<DVector<f64>> {
    let analytic = scaled_gradient(mdp, policy, theta)? / (1.0 - mdp.gamma());
    let fd = finite_difference_gradient(mdp, policy, theta, FD_STEP)?;
    let (ok, _) = gate(&analytic, &fd);
    if ok {
        return Ok(analytic);
    }
    let coarse = finite_difference_gradient(mdp, policy, theta, FD_FALLBACK_STEP)?;
    let fine = finite_difference_gradient(mdp, policy, theta, FD_FALLBACK_STEP / 2.0)?;
    let richardson = (fine * 4.0 - coarse) / 3.0;
    let (ok, rel_err) = gate(&analytic, &richardson);
    if ok {
        Ok(analytic)
    } else {
        Err(Error::GradientValidation { rel_err })
    }
}

/// `K(θ) = Σ d(s, a) ψψᵀ`.
pub fn exact_fisher<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta: &ParamVector,
) -> Result<DMatrix<f64>> {
    let d = exact_visitation(mdp, policy, theta)?;
    let n = policy.dim();
    let mut k = DMatrix::zeros(n, n);
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            if d[(s, a)] > 0.0 {
                let psi = policy.score(theta, s, &a)?.grad;
                k += &psi * psi.transpose() * d[(s, a)];
            }
        }
    }
    Ok((&k + k.transpose()) * 0.5)
}

/// `ψ∞(θ) = E_d[‖ψ‖²]`.
pub fn psi_infty<P: DiscretePolicy>(mdp: &TabularMdp, policy: &P, theta: &ParamVector) -> Result<f64> {
    let d = exact_visitation(mdp, policy, theta)?;
    let mut total = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            if d[(s, a)] > 0.0 {
                total += d[(s, a)] * policy.score(theta, s, &a)?.grad.norm_squared();
            }
        }
    }
    Ok(total)
}

/// `sup_{s,a} ‖ψ_θ(s, a)‖²` over pairs with positive probability.
pub fn psi_sup_sq<P: DiscretePolicy>(mdp: &TabularMdp, policy: &P, theta: &ParamVector) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            sup = sup.max(policy.score(theta, s, &a)?.grad.norm_squared());
        }
    }
    Ok(sup)
}

/// Both sides of the performance-difference identity
/// `J(θ₁) − J(θ₂) = (1/(1−γ)) E_{d_θ₁}[A_θ₂]`, computed independently.
pub fn performance_difference<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta1: &ParamVector,
    theta2: &ParamVector,
) -> Result<(f64, f64)> {
    let lhs = exact_j(mdp, policy, theta1)? - exact_j(mdp, policy, theta2)?;
    let d1 = exact_visitation(mdp, policy, theta1)?;
    let adv2 = exact_advantage(mdp, policy, theta2)?;
    let rhs = d1.component_mul(&adv2).sum() / (1.0 - mdp.gamma());
    Ok((lhs, rhs))
}

/// Compatible-approximation error `E_d[(ψᵀ K† g − A)²]` at θ, with `g = E_d[Q ψ]`
/// the estimator-normalized gradient. Zero whenever the score features span the
/// advantage (e.g. the full tabular softmax).
pub fn compat_error<P: DiscretePolicy>(mdp: &TabularMdp, policy: &P, theta: &ParamVector) -> Result<f64> {
    let d = exact_visitation(mdp, policy, theta)?;
    let adv = exact_advantage(mdp, policy, theta)?;
    let k = exact_fisher(mdp, policy, theta)?;
    let g = scaled_gradient(mdp, policy, theta)?;
    let w = pseudo_inverse_apply(&k, &g, DEFAULT_RANK_TOL)?;
    let mut err = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            if d[(s, a)] > 0.0 {
                let fit = policy.score(theta, s, &a)?.grad.dot(&w);
                err += d[(s, a)] * (fit - adv[(s, a)]).powi(2);
            }
        }
    }
    Ok(err)
}

/// `1 + max_{s,a} d_θ₁(s, a) / d_θ₂(s, a)`; infinite on a support violation.
pub fn mismatch_coefficient<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta1: &ParamVector,
    theta2: &ParamVector,
) -> Result<f64> {
    let d1 = exact_visitation(mdp, policy, theta1)?;
    let d2 = exact_visitation(mdp, policy, theta2)?;
    Ok(1.0 + max_ratio(&d1, &d2))
}

pub(crate) fn max_ratio(d1: &DMatrix<f64>, d2: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (p, q) in d1.iter().zip(d2.iter()) {
        if *p > 0.0 {
            if *q <= 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max(p / q);
        }
    }
    worst
}

/// Everything the oracle knows at one θ.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub v: DVector<f64>,
    pub q: DMatrix<f64>,
    pub advantage: DMatrix<f64>,
    pub visitation: DMatrix<f64>,
    pub j_value: f64,
    pub grad_j: DVector<f64>,
    pub fisher: DMatrix<f64>,
    pub psi_infty: f64,
    pub e_pi: f64,
    /// `D_∞` term against a comparison parameter, when one is given.
    pub d_infty_pair: Option<f64>,
}

impl OracleReport {
    pub fn compute<P: DiscretePolicy>(
        mdp: &TabularMdp,
        policy: &P,
        theta: &ParamVector,
        compare_to: Option<&ParamVector>,
    ) -> Result<Self> {
        let v = exact_values(mdp, policy, theta)?;
        let q = q_from_values(mdp, &v);
        let advantage = DMatrix::from_fn(q.nrows(), q.ncols(), |s, a| q[(s, a)] - v[s]);
        let visitation = exact_visitation(mdp, policy, theta)?;
        let j_value = mdp.init_dist().iter().zip(v.iter()).map(|(p, x)| p * x).sum();
        Ok(Self {
            grad_j: exact_gradient(mdp, policy, theta)?,
            fisher: exact_fisher(mdp, policy, theta)?,
            psi_infty: psi_infty(mdp, policy, theta)?,
            e_pi: compat_error(mdp, policy, theta)?,
            d_infty_pair: compare_to
                .map(|other| mismatch_coefficient(mdp, policy, theta, other))
                .transpose()?,
            v,
            q,
            advantage,
            visitation,
            j_value,
        })
    }
}

/// Per-iteration exact tracking for [`crate::optim::run`].
pub struct TabularOracle<'a, P> {
    pub mdp: &'a TabularMdp,
    pub policy: &'a P,
}

impl<'a, P: DiscretePolicy> TabularOracle<'a, P> {
    pub fn new(mdp: &'a TabularMdp, policy: &'a P) -> Self {
        Self { mdp, policy }
    }
}

impl<P: DiscretePolicy> OracleTracker for TabularOracle<'_, P> {
    fn track(&self, theta: &ParamVector) -> Result<TrackedPoint> {
        Ok(TrackedPoint {
            grad_norm: exact_gradient(self.mdp, self.policy, theta)?.norm(),
            j_value: exact_j(self.mdp, self.policy, theta)?,
        })
    }
}
