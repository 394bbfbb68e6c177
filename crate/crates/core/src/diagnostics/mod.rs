//! Empirical probes: Hölder exponents of the policy KL and score, score moments
//! (L2 vs sup), ergodicity decay, minibatch gradient noise, gradient domination
//! and convergence-rate fits.
//!
//! Every probe is deterministic for a fixed seed.

mod domination;
mod ergodicity;
mod moments;
mod noise;
mod rate;
mod smoothness;
mod tail;

pub use domination::{exact_ascent, probe_domination, DominationPoint, DominationReport};
pub use ergodicity::{
    probe_ergodicity, probe_ergodicity_sampled, stationary_distribution, ErgodicityReport,
};
pub use moments::{probe_moments, MomentReport};
pub use noise::{probe_grad_noise, NoiseReport};
pub use rate::{fit_rate, fit_rate_from_sq_norms, running_average, MIN_RATE_POINTS};
pub use smoothness::{
    default_radii, kink_grid, probe_kl_smoothness, probe_score_smoothness, HolderFit,
    KlDivergence, SmoothnessReport,
};
pub use tail::{probe_tail_scan, TailScan};
