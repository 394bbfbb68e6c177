use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::RwLock;

use nalgebra::DVector;
use rand::Rng;

use super::{ParamVector, Policy, Score};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

/// Safe log-barrier policy `π_θ(a) ∝ ‖a − φ*‖^{−θ}` on the unit ball of `R^d`
/// (`d ∈ {1, 2}`), with scalar `θ ∈ [−1, 1]` and `‖φ*‖ ≤ 1`.
///
/// Negative θ pushes mass away from the avoided point `φ*`. The score
/// `ψ_θ(a) = −log‖a − φ*‖ + E_θ[log‖a' − φ*‖]` is unbounded near `φ*` yet
/// square integrable under the policy.
#[derive(Debug)]
pub struct SafeLogBarrier {
    phi_star: Vec<f64>,
    /// θ bits → (log Z_θ, E_θ[log‖a − φ*‖]).
    cache: RwLock<HashMap<u64, (f64, f64)>>,
}

impl Clone for SafeLogBarrier {
    fn clone(&self) -> Self {
        Self {
            phi_star: self.phi_star.clone(),
            cache: RwLock::new(self.cache.read().expect("cache lock").clone()),
        }
    }
}

impl SafeLogBarrier {
    pub fn new(phi_star: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&phi_star.len()) {
            return Err(Error::Dimension(
                "safe policy supports 1-D and 2-D action balls".into(),
            ));
        }
        let norm = phi_star.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm <= 1.0) {
            return Err(Error::OutOfRange {
                name: "‖phi_star‖",
                range: "[0,1]",
                value: norm,
            });
        }
        Ok(Self {
            phi_star,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn action_dim(&self) -> usize {
        self.phi_star.len()
    }

    pub fn phi_star(&self) -> &[f64] {
        &self.phi_star
    }

    fn theta_value(&self, theta: &ParamVector) -> Result<f64> {
        self.check_dim(theta)?;
        let t = theta[0];
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::OutOfRange {
                name: "safe-policy theta",
                range: "[-1,1]",
                value: t,
            });
        }
        let d = self.action_dim() as f64;
        if t >= d {
            return Err(Error::NonFiniteNormalizer(format!(
                "∫‖a − φ*‖^(−{t}) da diverges on the {}-D ball",
                self.action_dim()
            )));
        }
        Ok(t)
    }

    fn distance(&self, action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim() {
            return Err(Error::Dimension(format!(
                "action has dimension {}, expected {}",
                action.len(),
                self.action_dim()
            )));
        }
        Ok(action
            .iter()
            .zip(&self.phi_star)
            .map(|(a, c)| (a - c).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// `(log Z_θ, E_θ[log‖a − φ*‖])`, computed once per θ.
    ///
    /// In polar coordinates around `φ*` the radial integrals are closed-form,
    /// leaving a 1-D integral over directions: with `R(ω)` the distance from
    /// `φ*` to the sphere along `ω` and `m = d − θ`,
    /// `Z = ∫ R^m / m dω` and `∫ log r · r^{m−1} dr = R^m (log R / m − 1/m²)`.
    pub fn moments(&self, theta: &ParamVector) -> Result<(f64, f64)> {
        let t = self.theta_value(theta)?;
        let key = t.to_bits();
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let m = self.action_dim() as f64 - t;
        let radial = |r: f64| -> (f64, f64) {
            if r <= 0.0 {
                return (0.0, 0.0);
            }
            let rm = r.powf(m);
            (rm / m, rm * (r.ln() / m - 1.0 / (m * m)))
        };
        let (z, zl) = match self.phi_star.as_slice() {
            [c] => {
                let (z1, l1) = radial(1.0 - c);
                let (z2, l2) = radial(1.0 + c);
                (z1 + z2, l1 + l2)
            }
            [c1, c2] => {
                let c_sq = c1 * c1 + c2 * c2;
                let reach = |w: f64| {
                    let proj = c1 * w.cos() + c2 * w.sin();
                    (-proj + (proj * proj - c_sq + 1.0).max(0.0).sqrt()).max(0.0)
                };
                let tol = Tolerance {
                    abs: 1e-14,
                    rel: 1e-12,
                    ..Tolerance::default()
                };
                let z = integrate(|w| radial(reach(w)).0, 0.0, 2.0 * PI, tol)?;
                let zl = integrate(|w| radial(reach(w)).1, 0.0, 2.0 * PI, tol)?;
                (z, zl)
            }
            _ => unreachable!("dimension validated at construction"),
        };
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::NonFiniteNormalizer(format!("Z = {z} at θ = {t}")));
        }
        let v = (z.ln(), zl / z);
        self.cache.write().expect("cache lock").insert(key, v);
        Ok(v)
    }

    pub fn log_normalizer(&self, theta: &ParamVector) -> Result<f64> {
        self.moments(theta).map(|(lz, _)| lz)
    }
}

impl Policy for SafeLogBarrier {
    type Action = Vec<f64>;

    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: &ParamVector, _state: usize, action: &Vec<f64>) -> Result<f64> {
        let t = self.theta_value(theta)?;
        let r = self.distance(action)?;
        if action.iter().map(|x| x * x).sum::<f64>() > 1.0 + 1e-12 {
            return Ok(f64::NEG_INFINITY);
        }
        let (log_z, _) = self.moments(theta)?;
        Ok(-t * r.ln() - log_z)
    }

    fn score(&self, theta: &ParamVector, _state: usize, action: &Vec<f64>) -> Result<Score> {
        let r = self.distance(action)?;
        if r == 0.0 {
            return Ok(Score {
                grad: DVector::zeros(1),
                at_kink: true,
            });
        }
        let (_, mean_log) = self.moments(theta)?;
        Ok(Score::smooth(DVector::from_element(1, -r.ln() + mean_log)))
    }

    /// Exact rejection sampler: propose from the density `∝ ‖a − φ*‖^{−θ}` on
    /// the ball of radius 2 around `φ*` (which contains the unit ball) and keep
    /// proposals inside the unit ball.
    fn sample_action<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        _state: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let t = self.theta_value(theta)?;
        let m = self.action_dim() as f64 - t;
        loop {
            let u: f64 = rng.random();
            let r = 2.0 * u.powf(1.0 / m);
            let a: Vec<f64> = match self.phi_star.as_slice() {
                [c] => {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    vec![c + sign * r]
                }
                [c1, c2] => {
                    let w = 2.0 * PI * rng.random::<f64>();
                    vec![c1 + r * w.cos(), c2 + r * w.sin()]
                }
                _ => unreachable!("dimension validated at construction"),
            };
            if a.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                return Ok(a);
            }
        }
    }
}
