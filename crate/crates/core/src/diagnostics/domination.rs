use crate::env::TabularMdp;
use crate::error::Result;
use crate::oracle::{exact_gradient, exact_j};
use crate::policy::{DiscretePolicy, ParamVector};

/// Both sides of `J(θ*) − J(θ) ≤ (m/(1−γ)) ⟨θ* − θ, ∇J(θ)⟩` at one θ.
#[derive(Debug, Clone, PartialEq)]
pub struct DominationPoint {
    pub theta: ParamVector,
    pub gap: f64,
    pub inner: f64,
    /// `gap·(1−γ)/inner` when the inner product is positive.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub points: Vec<DominationPoint>,
    /// Largest finite ratio: the smallest `m` consistent with the grid.
    pub empirical_m: Option<f64>,
    /// Grid indices where `⟨θ* − θ, ∇J(θ)⟩ ≤ 0` away from `θ*`.
    pub violations: Vec<usize>,
}

/// Evaluates the gradient-domination ratio over `grid`. Points equal to `θ*`
/// are excluded; non-positive inner products are reported as violations.
pub fn probe_domination<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta_star: &ParamVector,
    grid: &[ParamVector],
) -> Result<DominationReport> {
    let j_star = exact_j(mdp, policy, theta_star)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut violations = Vec::new();
    let mut empirical_m: Option<f64> = None;
    for (i, theta) in grid.iter().enumerate() {
        let gap = j_star - exact_j(mdp, policy, theta)?;
        let delta = theta_star.as_vector() - theta.as_vector();
        let inner = delta.dot(&exact_gradient(mdp, policy, theta)?);
        let at_star = delta.norm() == 0.0;
        let ratio = (inner > 0.0).then(|| gap * (1.0 - mdp.gamma()) / inner);
        if !at_star {
            match ratio {
                Some(r) => empirical_m = Some(empirical_m.map_or(r, |m| m.max(r))),
                None => violations.push(i),
            }
        }
        points.push(DominationPoint {
            theta: theta.clone(),
            gap,
            inner,
            ratio: if at_star { None } else { ratio },
        });
    }
    Ok(DominationReport {
        points,
        empirical_m,
        violations,
    })
}

/// Plain exact-gradient ascent from `theta0`, used to locate a maximizer.
pub fn exact_ascent<P: DiscretePolicy>(
    mdp: &TabularMdp,
    policy: &P,
    theta0: &ParamVector,
    step: f64,
    iterations: usize,
) -> Result<ParamVector> {
    let mut theta = theta0.clone();
    for _ in 0..iterations {
        let g = exact_gradient(mdp, policy, &theta)?;
        theta = theta.perturbed(&g, step)?;
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::SoftmaxPolicy;

    fn bandit(r0: f64, r1: f64) -> TabularMdp {
        TabularMdp::from_nested(
            &[vec![vec![1.0], vec![1.0]]],
            &[vec![r0, r1]],
            0.5,
            vec![1.0],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn two_armed_bandit_ratios_positive() {
        let mdp = bandit(0.0, 1.0);
        let pol = SoftmaxPolicy::tabular(1, 2);
        let star = ParamVector::new(vec![-3.0, 3.0]).unwrap();
        let grid: Vec<ParamVector> = (-4..=4)
            .flat_map(|i| (-4..=4).map(move |k| ParamVector::new(vec![0.5 * i as f64, 0.5 * k as f64]).unwrap()))
            .collect();
        let r = probe_domination(&mdp, &pol, &star, &grid).unwrap();
        assert!(r.violations.is_empty());
        assert!(r.points.iter().all(|p| p.ratio.is_none_or(|x| x.is_finite() && x > 0.0)));
        assert!(r.empirical_m.is_some());
    }

    #[test]
    fn star_excluded() {
        let mdp = bandit(0.0, 1.0);
        let pol = SoftmaxPolicy::tabular(1, 2);
        let star = ParamVector::new(vec![0.0, 1.0]).unwrap();
        let r = probe_domination(&mdp, &pol, &star, &[star.clone()]).unwrap();
        assert_eq!(r.points[0].gap, 0.0);
        assert!(r.points[0].ratio.is_none());
        assert!(r.violations.is_empty());
    }

    #[test]
    fn non_maximizer_reference_flags_violation() {
        // Taking the worse arm as "θ*" makes ⟨θ* − θ, ∇J⟩ negative somewhere.
        let mdp = bandit(0.0, 1.0);
        let pol = SoftmaxPolicy::tabular(1, 2);
        let star = ParamVector::new(vec![2.0, -2.0]).unwrap();
        let r = probe_domination(&mdp, &pol, &star, &[ParamVector::zeros(2)]).unwrap();
        assert_eq!(r.violations, vec![0]);
    }

    #[test]
    fn ascent_increases_value() {
        let mdp = bandit(0.2, 0.9);
        let pol = SoftmaxPolicy::tabular(1, 2);
        let th = exact_ascent(&mdp, &pol, &ParamVector::zeros(2), 1.0, 200).unwrap();
        assert!(exact_j(&mdp, &pol, &th).unwrap() > exact_j(&mdp, &pol, &ParamVector::zeros(2)).unwrap());
    }
}
