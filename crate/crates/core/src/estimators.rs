//! Minibatch estimators: geometric-horizon Q samples, the policy-gradient
//! estimate, the Fisher-matrix estimate and the ridge-stabilized solve.
//!
//! Normalization: with `d_θ^ρ` a probability distribution,
//! `E[v·ψ] = E_{d_θ^ρ}[Q_θ ψ_θ] = (1 − γ)·∇J(θ)`. [`GradEstimate::mean`] is the
//! left-hand side; [`crate::oracle::exact_gradient`] returns `∇J(θ)` itself.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::env::{check_gamma, geom_draw, sample_visitation, Environment};
use crate::error::{Error, Result};
use crate::policy::{ParamVector, Policy};
use crate::rng::par_substreams;
use crate::stats::SummaryStats;

/// Relative asymmetry above which a matrix is rejected as non-symmetric.
const SYMMETRY_TOL: f64 = 1e-10;

/// Default relative eigenvalue cutoff for [`pseudo_inverse_apply`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// A visitation draw `(s, a) ∼ d_θ^ρ` with an unbiased estimate `v` of `Q_θ(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QSample<A> {
    pub state: usize,
    pub action: A,
    pub v: f64,
    /// Geometric index `j ∼ Geom(1 − γ)` of the visitation draw.
    pub horizon_j: u64,
    /// Tail length `h ∼ Geom(1 − √γ)`.
    pub tail_length: u64,
    /// Immediate reward `r_j` at the sampled pair.
    pub reward: f64,
}

/// Rolls `τ = j + h` steps and returns `(s_j, a_j)` with
/// `v = Σ_{u=j}^{τ} γ^{(u−j)/2} r_u`.
pub fn sample_q<E, P, R>(
    env: &E,
    policy: &P,
    theta: &ParamVector,
    gamma: f64,
    rng: &mut R,
) -> Result<QSample<E::Action>>
where
    E: Environment,
    P: Policy<Action = E::Action>,
    R: Rng + ?Sized,
{
    check_gamma(gamma)?;
    let j = geom_draw(1.0 - gamma, rng)?;
    let h = geom_draw(1.0 - gamma.sqrt(), rng)?;
    let tau = j + h;
    let half_discount = gamma.sqrt();

    let mut s = env.initial_state(rng);
    let mut picked = None;
    let mut v = 0.0;
    let mut weight = 1.0;
    for u in 0..=tau {
        let a = policy.sample_action(theta, s, rng)?;
        let (r, next) = env.step(s, &a, rng);
        if u >= j {
            if u == j {
                picked = Some((s, a, r));
            }
            v += weight * r;
            weight *= half_discount;
        }
        s = next;
    }
    let (state, action, reward) = picked.expect("u = j is visited since j ≤ τ");
    Ok(QSample {
        state,
        action,
        v,
        horizon_j: j,
        tail_length: h,
        reward,
    })
}

/// Minibatch estimate `(1/B) Σ v_i ψ_θ(s_i, a_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    pub mean: DVector<f64>,
    pub batch: usize,
    /// Statistics of `‖v_i ψ_i‖²` over the batch.
    pub per_sample_sq_norms: SummaryStats,
    /// `σ = 3α√ψ∞`, when `ψ∞` is supplied.
    pub sigma_bound: Option<f64>,
    /// Mean immediate reward `r_j` over the batch.
    pub reward_mean: f64,
    /// Number of samples whose score hit a non-differentiable point.
    pub kink_hits: usize,
}

impl GradEstimate {
    pub fn with_sigma_bound(mut self, alpha: f64, psi_infty: f64) -> Self {
        self.sigma_bound = Some(3.0 * alpha * psi_infty.sqrt());
        self
    }
}

/// `B` independent Q samples reduced in index order.
pub fn estimate_gradient<E, P, R>(
    env: &E,
    policy: &P,
    theta: &ParamVector,
    gamma: f64,
    batch: usize,
    rng: &mut R,
) -> Result<GradEstimate>
where
    E: Environment,
    P: Policy<Action = E::Action>,
    R: Rng + ?Sized,
{
    check_batch(batch)?;
    policy.check_dim(theta)?;
    let products = par_substreams(rng, batch, |_, sub| -> Result<_> {
        let q = sample_q(env, policy, theta, gamma, sub)?;
        let score = policy.score(theta, q.state, &q.action)?;
        Ok((score.grad * q.v, q.reward, score.at_kink))
    });

    let mut sum = DVector::zeros(policy.dim());
    let mut sq = SummaryStats::default();
    let mut reward_sum = 0.0;
    let mut kink_hits = 0;
    for item in products {
        let (g, r, kink) = item?;
        sq.push(g.norm_squared());
        sum += &g;
        reward_sum += r;
        kink_hits += usize::from(kink);
    }
    Ok(GradEstimate {
        mean: sum / batch as f64,
        batch,
        per_sample_sq_norms: sq,
        sigma_bound: None,
        reward_mean: reward_sum / batch as f64,
        kink_hits,
    })
}

/// Sampled Fisher matrix `K_t = (1/B) Σ ψψᵀ` with its ridge parameter ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherEstimate {
    pub matrix: DMatrix<f64>,
    pub batch: usize,
    pub xi: f64,
}

impl FisherEstimate {
    /// Smallest eigenvalue (PSD certificate up to roundoff).
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_symmetric(&self) -> bool {
        asymmetry(&self.matrix) == 0.0
    }
}

/// Draws a fresh visitation batch (independent of any gradient batch) and
/// averages the score outer products.
pub fn estimate_fisher<E, P, R>(
    env: &E,
    policy: &P,
    theta: &ParamVector,
    gamma: f64,
    batch: usize,
    xi: f64,
    rng: &mut R,
) -> Result<FisherEstimate>
where
    E: Environment,
    P: Policy<Action = E::Action>,
    R: Rng + ?Sized,
{
    check_batch(batch)?;
    check_xi(xi)?;
    policy.check_dim(theta)?;
    let scores = par_substreams(rng, batch, |_, sub| -> Result<_> {
        let draw = sample_visitation(env, policy, theta, gamma, sub)?;
        Ok(policy.score(theta, draw.state, &draw.action)?.grad)
    });
    let n = policy.dim();
    let mut k = DMatrix::zeros(n, n);
    for psi in scores {
        let psi = psi?;
        // Upper triangle only; mirrored below so symmetry is exact.
        for c in 0..n {
            for r in 0..=c {
                k[(r, c)] += psi[r] * psi[c];
            }
        }
    }
    k /= batch as f64;
    for c in 0..n {
        for r in 0..c {
            k[(c, r)] = k[(r, c)];
        }
    }
    Ok(FisherEstimate {
        matrix: k,
        batch,
        xi,
    })
}

/// Solves `(K + ξI) y = x` by Cholesky factorization of the shifted matrix.
pub fn ridge_solve(k: &DMatrix<f64>, xi: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    if !(xi > 0.0) {
        return Err(Error::OutOfRange {
            name: "xi",
            range: "(0,∞)",
            value: xi,
        });
    }
    check_square(k, x)?;
    check_symmetric(k)?;
    let shifted = k + DMatrix::identity(k.nrows(), k.ncols()) * xi;
    match shifted.clone().cholesky() {
        Some(ch) => {
            let y = ch.solve(x);
            // One step of iterative refinement keeps the residual at roundoff level.
            let residual = x - &shifted * &y;
            Ok(y + ch.solve(&residual))
        }
        None => shifted
            .lu()
            .solve(x)
            .ok_or_else(|| Error::Singular("K + ξI is singular".into())),
    }
}

/// `K†x` via a symmetric eigendecomposition, treating eigenvalues below
/// `rank_tol·λ_max` as zero.
pub fn pseudo_inverse_apply(k: &DMatrix<f64>, x: &DVector<f64>, rank_tol: f64) -> Result<DVector<f64>> {
    check_square(k, x)?;
    check_symmetric(k)?;
    let eig = SymmetricEigen::new(k.clone());
    let lambda_max = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let mut y = DVector::zeros(x.len());
    if lambda_max == 0.0 {
        return Ok(y);
    }
    let cutoff = rank_tol * lambda_max;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cutoff {
            let v = eig.eigenvectors.column(i);
            y += v * (v.dot(x) / lambda);
        }
    }
    Ok(y)
}

/// Smallest eigenvalue of `K` above `rank_tol·λ_max` (the ζ of the
/// ridge/pseudo-inverse gap bound); `None` for the zero matrix.
pub fn smallest_nonzero_eigenvalue(k: &DMatrix<f64>, rank_tol: f64) -> Option<f64> {
    let eig = SymmetricEigen::new(k.clone());
    let lambda_max = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    eig.eigenvalues
        .iter()
        .copied()
        .filter(|l| l.abs() > rank_tol * lambda_max && lambda_max > 0.0)
        .map(f64::abs)
        .reduce(f64::min)
}

fn asymmetry(k: &DMatrix<f64>) -> f64 {
    (k - k.transpose()).amax()
}

fn check_symmetric(k: &DMatrix<f64>) -> Result<()> {
    let asym = asymmetry(k);
    if asym > SYMMETRY_TOL * k.amax().max(1.0) {
        Err(Error::NotSymmetric(asym))
    } else {
        Ok(())
    }
}

fn check_square(k: &DMatrix<f64>, x: &DVector<f64>) -> Result<()> {
    if k.nrows() != k.ncols() || k.nrows() != x.len() {
        Err(Error::Dimension(format!(
            "matrix is {}×{}, vector has length {}",
            k.nrows(),
            k.ncols(),
            x.len()
        )))
    } else {
        Ok(())
    }
}

fn check_batch(batch: usize) -> Result<()> {
    if batch == 0 {
        Err(Error::OutOfRange {
            name: "batch",
            range: "[1,∞)",
            value: 0.0,
        })
    } else {
        Ok(())
    }
}

pub(crate) fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "xi",
            range: "(0,1]",
            value: xi,
        })
    }
}
