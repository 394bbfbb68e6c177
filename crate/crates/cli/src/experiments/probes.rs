use anyhow::Result;
use holderpg::diagnostics::{
    default_radii, kink_grid, probe_ergodicity, probe_ergodicity_sampled, probe_grad_noise, probe_kl_smoothness,
    probe_score_smoothness, HolderFit, SmoothnessReport,
};
use holderpg::rng::seeded;
use holderpg::{DiscretePolicy, PolicySpec};
use nalgebra::DVector;
use rand::Rng;

use super::{gaussian_policy, softmax_policy, Outcome};
use crate::config::{ErgodicitySection, ExperimentConfig, NoiseSection, SmoothnessSection};
use crate::output::{fmt_f64, fmt_opt, OutputDir};

fn random_directions<R: Rng>(dim: usize, n: usize, rng: &mut R) -> Vec<DVector<f64>> {
    if dim == 1 {
        return vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)];
    }
    (0..n)
        .map(|_| loop {
            let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
            let norm = v.norm();
            if norm > 1e-3 && norm <= 1.0 {
                break v / norm;
            }
        })
        .collect()
}

fn describe(name: &str, fit: &HolderFit) -> String {
    format!(
        "fitted {name} = {} (SE {}, r2 {})",
        fmt_f64(fit.exponent),
        fmt_f64(fit.exponent_std_error),
        fmt_f64(fit.r2)
    )
}

pub(super) fn smoothness_probe(config: &ExperimentConfig, s: &SmoothnessSection, out: &mut OutputDir) -> Result<Outcome> {
    let theta = config.theta_or_zero(&s.theta);
    let radii = s.radii.clone().unwrap_or_else(default_radii);
    let mut rng = seeded(config.seed);
    let directions = random_directions(theta.dim(), s.n_directions, &mut rng);
    let spec = config.policy.as_ref().expect("validated");
    let report = match spec {
        PolicySpec::TabularSoftmax { .. } => {
            let mdp = config.mdp().expect("validated");
            let pol = softmax_policy(spec, mdp)?;
            let states: Vec<usize> = (0..mdp.n_states()).collect();
            let points: Vec<(usize, usize)> =
                states.iter().flat_map(|s| (0..pol.n_actions()).map(move |a| (*s, a))).collect();
            SmoothnessReport {
                kl: Some(probe_kl_smoothness(&pol, &theta, &directions, &radii, &states)?),
                score: Some(probe_score_smoothness(&pol, &theta, &directions, &radii, &points)?),
            }
        }
        _ => {
            let pol = gaussian_policy(spec)?;
            let n_states = match spec {
                PolicySpec::GeneralizedGaussian {
                    state_features: Some(f),
                    ..
                } => f.len(),
                _ => 1,
            };
            let states: Vec<usize> = (0..n_states).collect();
            let mut points = Vec::new();
            for st in &states {
                let center = pol.mean(&theta, *st)?;
                points.extend(kink_grid(center, 1e-5, 1.0, s.kink_points).into_iter().map(|a| (*st, a)));
            }
            SmoothnessReport {
                kl: Some(probe_kl_smoothness(&pol, &theta, &directions, &radii, &states)?),
                score: Some(probe_score_smoothness(&pol, &theta, &directions, &radii, &points)?),
            }
        }
    };
    let (kl, score) = (report.kl.as_ref().unwrap(), report.score.as_ref().unwrap());
    let rows: Vec<Vec<String>> = radii
        .iter()
        .enumerate()
        .map(|(i, r)| vec![fmt_f64(*r), fmt_f64(kl.values[i]), fmt_f64(score.values[i])])
        .collect();
    out.write_csv("smoothness.csv", &["radius", "kl", "score_diff"], &rows)?;
    let fits = [("beta1", kl), ("beta2", score)];
    let rows: Vec<Vec<String>> = fits
        .iter()
        .map(|(n, f)| vec![n.to_string(), fmt_f64(f.exponent), fmt_f64(f.exponent_std_error), fmt_f64(f.r2)])
        .collect();
    out.write_csv("smoothness_fit.csv", &["exponent", "value", "std_error", "r2"], &rows)?;
    Ok(Outcome::ok(fits.iter().map(|(n, f)| describe(n, f)).collect()))
}

pub(super) fn ergodicity_probe(config: &ExperimentConfig, s: &ErgodicitySection, out: &mut OutputDir) -> Result<Outcome> {
    let mdp = config.mdp().expect("validated");
    let pol = softmax_policy(config.policy.as_ref().expect("validated"), mdp)?;
    let theta = config.theta_or_zero(&s.theta);
    let report = match s.trials {
        None => probe_ergodicity(mdp, &pol, &theta, s.n_max)?,
        Some(trials) => probe_ergodicity_sampled(mdp, &pol, &theta, s.n_max, trials, s.floor, &mut seeded(config.seed))?,
    };
    let rows: Vec<Vec<String>> = report
        .steps
        .iter()
        .zip(&report.tv_to_limit)
        .map(|(n, tv)| vec![n.to_string(), fmt_f64(*tv)])
        .collect();
    out.write_csv("ergodicity.csv", &["n", "tv"], &rows)?;
    let rows = vec![vec![
        fmt_opt(report.fitted_log_decay),
        fmt_opt(report.fitted_c0),
        report.non_decaying.to_string(),
        report.trials.map(|t| t.to_string()).unwrap_or_default(),
    ]];
    out.write_csv("ergodicity_fit.csv", &["log_decay", "c0", "non_decaying", "trials"], &rows)?;
    let mut summary = vec![format!(
        "fitted log decay {} (delta {}), C0 {}",
        fmt_opt(report.fitted_log_decay),
        fmt_opt(report.fitted_log_decay.map(f64::exp)),
        fmt_opt(report.fitted_c0)
    )];
    if report.non_decaying {
        summary.push("TV does not decay: the chain looks reducible or periodic".into());
    }
    Ok(Outcome::ok(summary))
}

pub(super) fn noise_probe(config: &ExperimentConfig, s: &NoiseSection, out: &mut OutputDir) -> Result<Outcome> {
    let mdp = config.mdp().expect("validated");
    let pol = softmax_policy(config.policy.as_ref().expect("validated"), mdp)?;
    let theta = config.theta_or_zero(&s.theta);
    let mut rng = seeded(config.seed);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for b in &s.batches {
        let r = probe_grad_noise(mdp, &pol, &theta, *b, s.repeats, &mut rng)?;
        rows.push(vec![
            b.to_string(),
            fmt_f64(r.mean_sq_error),
            fmt_f64(r.std_error),
            fmt_f64(r.bound),
            fmt_f64(r.psi_infty),
            fmt_f64(r.sigma),
            r.within_bound().to_string(),
        ]);
        summary.push(format!(
            "B = {b}: E|e|^2 = {} (SE {}), bound {} -> {}",
            fmt_f64(r.mean_sq_error),
            fmt_f64(r.std_error),
            fmt_f64(r.bound),
            if r.within_bound() { "within" } else { "EXCEEDED" }
        ));
    }
    out.write_csv(
        "noise.csv",
        &["batch", "mean_sq_error", "std_error", "bound", "psi_infty", "sigma", "within_bound"],
        &rows,
    )?;
    Ok(Outcome::ok(summary))
}
