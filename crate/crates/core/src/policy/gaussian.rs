use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use super::{ParamVector, Policy, Score};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, Tolerance};

/// Generalized Gaussian (exponential power) policy on the real line:
/// `π_θ(a|s) = exp(−|a − ⟨φ(s), θ⟩|^κ) / (2Γ(1 + 1/κ))`, `κ ∈ (1, 2]`.
///
/// `κ = 2` is a Gaussian with variance 1/2; smaller κ gives heavier tails and a
/// score that is only `(κ − 1)`-Hölder in θ.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedGaussian {
    kappa: f64,
    /// `φ(s)` for each state.
    state_features: Vec<Vec<f64>>,
    log_norm: f64,
}

impl GeneralizedGaussian {
    /// 1-D location family `ν_θ(a) = −|a − θ|^κ`.
    pub fn location(kappa: f64) -> Result<Self> {
        Self::with_features(kappa, vec![vec![1.0]])
    }

    pub fn with_features(kappa: f64, state_features: Vec<Vec<f64>>) -> Result<Self> {
        Self::check_kappa(kappa)?;
        let dim = state_features.first().map_or(0, Vec::len);
        if dim == 0 || state_features.iter().any(|f| f.len() != dim) {
            return Err(Error::Dimension("state feature rows must share a positive length".into()));
        }
        Ok(Self {
            kappa,
            state_features,
            log_norm: Self::log_normalizer(kappa),
        })
    }

    pub(crate) fn check_kappa(kappa: f64) -> Result<()> {
        if kappa > 1.0 && kappa <= 2.0 {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                name: "kappa",
                range: "(1,2]",
                value: kappa,
            })
        }
    }

    /// `log(2Γ(1 + 1/κ)) = log ∫ exp(−|x|^κ) dx`.
    pub fn log_normalizer(kappa: f64) -> f64 {
        (2.0f64).ln() + ln_gamma(1.0 + 1.0 / kappa)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Location `⟨φ(s), θ⟩`.
    pub fn mean(&self, theta: &ParamVector, state: usize) -> Result<f64> {
        self.check_dim(theta)?;
        let phi = self
            .state_features
            .get(state)
            .ok_or_else(|| Error::Dimension(format!("state {state} out of range")))?;
        Ok(phi.iter().zip(theta.as_slice()).map(|(a, b)| a * b).sum())
    }

    pub fn density(&self, theta: &ParamVector, state: usize, action: f64) -> Result<f64> {
        self.log_density(theta, state, &action).map(f64::exp)
    }

    /// `π_θ(a ∈ [lo, hi] | s)` by adaptive quadrature; bounds may be infinite.
    pub fn region_probability(
        &self,
        theta: &ParamVector,
        state: usize,
        lo: f64,
        hi: f64,
    ) -> Result<f64> {
        let mu = self.mean(theta, state)?;
        let (kappa, log_norm) = (self.kappa, self.log_norm);
        let p = integrate_with_breaks(
            |a| (-(a - mu).abs().powf(kappa) - log_norm).exp(),
            lo,
            hi,
            &[mu],
            Tolerance {
                abs: 1e-15,
                rel: 1e-12,
                ..Tolerance::default()
            },
        )?;
        Ok(p.clamp(0.0, 1.0))
    }

    /// KL divergence `KL(π_θ(·|s) ‖ π_θ'(·|s))` by quadrature.
    pub fn kl(&self, theta: &ParamVector, other: &ParamVector, state: usize) -> Result<f64> {
        let mu = self.mean(theta, state)?;
        let nu = self.mean(other, state)?;
        if mu == nu {
            return Ok(0.0);
        }
        let (kappa, log_norm) = (self.kappa, self.log_norm);
        // Normalizers cancel: KL = E_θ[|a − ν|^κ − |a − μ|^κ].
        let v = integrate_with_breaks(
            |a| {
                let x = (a - mu).abs();
                let p = (-x.powf(kappa) - log_norm).exp();
                p * ((a - nu).abs().powf(kappa) - x.powf(kappa))
            },
            f64::NEG_INFINITY,
            f64::INFINITY,
            &[mu, nu],
            Tolerance {
                abs: 1e-16,
                rel: 1e-12,
                ..Tolerance::default()
            },
        )?;
        Ok(v.max(0.0))
    }
}

impl Policy for GeneralizedGaussian {
    type Action = f64;

    fn dim(&self) -> usize {
        self.state_features[0].len()
    }

    fn log_density(&self, theta: &ParamVector, state: usize, action: &f64) -> Result<f64> {
        let mu = self.mean(theta, state)?;
        Ok(-(action - mu).abs().powf(self.kappa) - self.log_norm)
    }

    fn score(&self, theta: &ParamVector, state: usize, action: &f64) -> Result<Score> {
        let mu = self.mean(theta, state)?;
        let x = action - mu;
        let phi = DVector::from_column_slice(&self.state_features[state]);
        if x == 0.0 {
            return Ok(Score {
                grad: DVector::zeros(phi.len()),
                at_kink: self.kappa < 2.0,
            });
        }
        // ∂/∂θ of −|a − ⟨φ, θ⟩|^κ
        let coef = self.kappa * x.abs().powf(self.kappa - 1.0) * x.signum();
        Ok(Score::smooth(phi * coef))
    }

    fn sample_action<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        state: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let mu = self.mean(theta, state)?;
        let g: f64 = Gamma::new(1.0 / self.kappa, 1.0)
            .expect("shape 1/κ is positive")
            .sample(rng);
        let magnitude = g.powf(1.0 / self.kappa);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        Ok(mu + sign * magnitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_with_breaks;
    use crate::rng::seeded;
    use crate::stats::SummaryStats;
    use approx::assert_relative_eq;
    use statrs::function::erf::erf;

    fn th(v: f64) -> ParamVector {
        ParamVector::new(vec![v]).unwrap()
    }

    #[test]
    fn gaussian_log_density_at_origin() {
        let p = GeneralizedGaussian::location(2.0).unwrap();
        assert_relative_eq!(
            p.log_density(&th(0.0), 0, &0.0).unwrap(),
            -std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn normalizer_matches_quadrature() {
        for kappa in [1.2, 1.5, 2.0] {
            let q = integrate_with_breaks(
                |x| (-x.abs().powf(kappa)).exp(),
                f64::NEG_INFINITY,
                f64::INFINITY,
                &[0.0],
                Tolerance::default(),
            )
            .unwrap();
            assert!((q - GeneralizedGaussian::log_normalizer(kappa).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn score_values() {
        let g = GeneralizedGaussian::location(2.0).unwrap();
        assert_relative_eq!(g.score(&th(0.0), 0, &1.0).unwrap().grad[0], 2.0);
        let g = GeneralizedGaussian::location(1.5).unwrap();
        let s = g.score(&th(0.0), 0, &4.0).unwrap().grad[0];
        assert_relative_eq!(s, 3.0, epsilon = 1e-12);
        let h = 1e-6;
        let fd = (g.log_density(&th(h), 0, &4.0).unwrap() - g.log_density(&th(-h), 0, &4.0).unwrap())
            / (2.0 * h);
        assert!((fd - s).abs() / s.abs() < 1e-5);
    }

    #[test]
    fn kink_flagged() {
        let g = GeneralizedGaussian::location(1.2).unwrap();
        let s = g.score(&th(0.5), 0, &0.5).unwrap();
        assert!(s.at_kink);
        assert_eq!(s.grad[0], 0.0);
        let g2 = GeneralizedGaussian::location(2.0).unwrap();
        assert!(!g2.score(&th(0.5), 0, &0.5).unwrap().at_kink);
    }

    #[test]
    fn region_probabilities() {
        let g2 = GeneralizedGaussian::location(2.0).unwrap();
        let g12 = GeneralizedGaussian::location(1.2).unwrap();
        let z = th(0.0);
        assert!((g2.region_probability(&z, 0, f64::NEG_INFINITY, f64::INFINITY).unwrap() - 1.0).abs() < 1e-8);
        assert!((g12.region_probability(&z, 0, f64::NEG_INFINITY, f64::INFINITY).unwrap() - 1.0).abs() < 1e-8);
        assert!((g2.region_probability(&z, 0, -1.0, 1.0).unwrap() - erf(1.0)).abs() < 1e-10);
        let p12 = g12.region_probability(&z, 0, 2.9, 4.9).unwrap();
        let p2 = g2.region_probability(&z, 0, 2.9, 4.9).unwrap();
        assert!(p12 > p2);
    }

    #[test]
    fn gaussian_sample_moments() {
        let g = GeneralizedGaussian::location(2.0).unwrap();
        let mut rng = seeded(5);
        let theta = th(1.3);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| g.sample_action(&theta, 0, &mut rng).unwrap()).collect();
        let s: SummaryStats = xs.iter().copied().collect();
        // Var(X) = 1/2 and Var((X−θ)²) = 2·(1/2)² = 1/2.
        assert!((s.mean - 1.3).abs() < 3.0 * (0.5f64 / n as f64).sqrt());
        let sq: SummaryStats = xs.iter().map(|x| (x - 1.3).powi(2)).collect();
        assert!((sq.mean - 0.5).abs() < 3.0 * (0.5f64 / n as f64).sqrt());
    }

    #[test]
    fn heavier_tails_for_small_kappa() {
        let mut rng = seeded(9);
        let n = 200_000;
        let frac = |kappa: f64, rng: &mut _| {
            let g = GeneralizedGaussian::location(kappa).unwrap();
            (0..n)
                .filter(|_| g.sample_action(&th(0.0), 0, rng).unwrap().abs() > 2.0)
                .count() as f64
                / n as f64
        };
        assert!(frac(1.2, &mut rng) > frac(2.0, &mut rng));
    }

    #[test]
    fn kappa_out_of_range() {
        assert!(GeneralizedGaussian::location(1.0).is_err());
        assert!(GeneralizedGaussian::location(2.1).is_err());
    }
}
