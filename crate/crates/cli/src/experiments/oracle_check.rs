use anyhow::Result;
use holderpg::oracle::{
    compat_error, exact_fisher, exact_j, exact_q, exact_values, exact_visitation, finite_difference_gradient,
    performance_difference, policy_matrix, psi_infty, scaled_gradient, FD_STEP,
};
use holderpg::rng::seeded;
use holderpg::{ParamVector, Policy, PolicySpec, SoftmaxPolicy, TabularMdp};
use nalgebra::SymmetricEigen;
use rand::Rng;

use super::{softmax_policy, Outcome};
use crate::config::{ExperimentConfig, OracleCheckSection};
use crate::output::{fmt_f64, OutputDir, Status};

/// One identity: `violation` is a non-negative discrepancy that must not
/// exceed `tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub violation: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.violation <= self.tolerance
    }
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |m, x| m.max(x.abs()))
}

/// Exact-oracle identities at `theta` and over `pairs` random parameter pairs.
pub fn oracle_checks(
    mdp: &TabularMdp,
    policy: &SoftmaxPolicy,
    full_tabular: bool,
    theta: &ParamVector,
    pairs: &[(ParamVector, ParamVector)],
) -> Result<Vec<CheckRow>> {
    let (ns, na, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.gamma());
    let pi = policy_matrix(mdp, policy, theta)?;
    let v = exact_values(mdp, policy, theta)?;
    let q = exact_q(mdp, policy, theta)?;
    let d = exact_visitation(mdp, policy, theta)?;
    let backup = |s: usize, a: usize| {
        mdp.reward(s, a) + gamma * mdp.transition_row(s, a).iter().zip(v.iter()).map(|(p, x)| p * x).sum::<f64>()
    };
    let pi_q = |s: usize| (0..na).map(|a| pi[(s, a)] * q[(s, a)]).sum::<f64>();

    let mut rows = vec![
        CheckRow {
            name: "bellman_v",
            violation: max_abs((0..ns).map(|s| v[s] - (0..na).map(|a| pi[(s, a)] * backup(s, a)).sum::<f64>())),
            tolerance: 1e-9,
        },
        CheckRow {
            name: "bellman_q",
            violation: max_abs((0..ns).flat_map(|s| (0..na).map(move |a| (s, a))).map(|(s, a)| q[(s, a)] - backup(s, a))),
            tolerance: 1e-9,
        },
        CheckRow {
            name: "v_equals_policy_average_of_q",
            violation: max_abs((0..ns).map(|s| v[s] - pi_q(s))),
            tolerance: 1e-9,
        },
        CheckRow {
            name: "j_equals_rho_v",
            violation: (exact_j(mdp, policy, theta)? - mdp.init_dist().iter().zip(v.iter()).map(|(p, x)| p * x).sum::<f64>())
                .abs(),
            tolerance: 1e-12,
        },
        CheckRow {
            name: "visitation_normalized",
            violation: (d.sum() - 1.0).abs(),
            tolerance: 1e-12,
        },
        CheckRow {
            name: "visitation_nonnegative",
            violation: d.iter().fold(0.0f64, |m, x| m.max(-x)),
            tolerance: 0.0,
        },
    ];

    let scaled = scaled_gradient(mdp, policy, theta)?;
    let analytic = &scaled / (1.0 - gamma);
    let fd = finite_difference_gradient(mdp, policy, theta, FD_STEP)?;
    rows.push(CheckRow {
        name: "gradient_matches_finite_differences",
        violation: (&analytic - &fd).norm() / analytic.norm().max(1e-8),
        tolerance: 1e-4,
    });

    let k = exact_fisher(mdp, policy, theta)?;
    rows.push(CheckRow {
        name: "fisher_symmetric",
        violation: max_abs((&k - k.transpose()).iter().copied()),
        tolerance: 1e-12,
    });
    let min_eig = SymmetricEigen::new(k.clone()).eigenvalues.min();
    rows.push(CheckRow {
        name: "fisher_psd",
        violation: (-min_eig).max(0.0),
        tolerance: 1e-10,
    });
    rows.push(CheckRow {
        name: "fisher_trace_equals_psi_infty",
        violation: (k.trace() - psi_infty(mdp, policy, theta)?).abs(),
        tolerance: 1e-10,
    });
    let mut score_mean = 0.0f64;
    for s in 0..ns {
        let mut m = nalgebra::DVector::zeros(policy.dim());
        for a in 0..na {
            m += policy.score(theta, s, &a)?.grad * pi[(s, a)];
        }
        score_mean = score_mean.max(m.norm());
    }
    rows.push(CheckRow {
        name: "score_has_zero_mean",
        violation: score_mean,
        tolerance: 1e-12,
    });
    if full_tabular {
        rows.push(CheckRow {
            name: "compat_error_vanishes_for_full_softmax",
            violation: compat_error(mdp, policy, theta)?.abs(),
            tolerance: 1e-10,
        });
    }
    let mut pdl: f64 = 0.0;
    for (a, b) in pairs {
        let (lhs, rhs) = performance_difference(mdp, policy, a, b)?;
        pdl = pdl.max((lhs - rhs).abs());
    }
    if !pairs.is_empty() {
        rows.push(CheckRow {
            name: "performance_difference",
            violation: pdl,
            tolerance: 1e-10,
        });
    }
    Ok(rows)
}

pub(super) fn write_oracle_check(config: &ExperimentConfig, s: &OracleCheckSection, out: &mut OutputDir) -> Result<Outcome> {
    let mdp = config.mdp().expect("validated");
    let spec = config.policy.as_ref().expect("validated");
    let policy = softmax_policy(spec, mdp)?;
    let full = matches!(spec, PolicySpec::TabularSoftmax { features: None });
    let dim = policy.dim();
    let mut rng = seeded(config.seed);
    let draw = |rng: &mut holderpg::rng::SimRng| {
        ParamVector::new((0..dim).map(|_| rng.random_range(-s.theta_scale..s.theta_scale)).collect()).expect("finite")
    };
    let theta = match &s.theta {
        Some(t) => ParamVector::new(t.clone())?,
        None => draw(&mut rng),
    };
    let pairs: Vec<_> = (0..s.random_pairs).map(|_| (draw(&mut rng), draw(&mut rng))).collect();
    let rows = oracle_checks(mdp, &policy, full, &theta, &pairs)?;

    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.to_string(),
                fmt_f64(r.violation),
                fmt_f64(r.tolerance),
                if r.passed() { "PASS" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    out.write_csv("oracle_check.csv", &["check", "violation", "tolerance", "status"], &csv)?;
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let summary: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{} {:width$}  violation {:e} (tolerance {:e})",
                if r.passed() { "PASS" } else { "FAIL" },
                r.name,
                r.violation,
                r.tolerance
            )
        })
        .collect();
    let notes: Vec<String> = rows.iter().filter(|r| !r.passed()).map(|r| format!("check failed: {}", r.name)).collect();
    Ok(Outcome {
        status: if notes.is_empty() { Status::Ok } else { Status::CheckFailed },
        summary,
        notes,
    })
}
