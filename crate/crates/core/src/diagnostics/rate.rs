use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::optim::RunLog;
use crate::stats::{linear_fit, LinearFit};

/// Fewest horizons a rate fit accepts.
pub const MIN_RATE_POINTS: usize = 5;

/// `(1/T') Σ_{t≤T'} x_t` for `T' = 1..=len`.
pub fn running_average(xs: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            sum += x;
            sum / (i + 1) as f64
        })
        .collect()
}

/// OLS of `log((1/T') Σ_{t≤T'} g_t)` against `log T'` for `T'` in `window`
/// (1-based horizons).
pub fn fit_rate_from_sq_norms(sq_norms: &[f64], window: RangeInclusive<usize>) -> Result<LinearFit> {
    let lo = (*window.start()).max(1);
    let hi = (*window.end()).min(sq_norms.len());
    let got = (hi + 1).saturating_sub(lo);
    if got < MIN_RATE_POINTS {
        return Err(Error::WindowTooShort {
            got,
            need: MIN_RATE_POINTS,
        });
    }
    let avg = running_average(&sq_norms[..hi]);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..=hi)
        .map(|t| ((t as f64).ln(), avg[t - 1].ln()))
        .unzip();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Config("running average must stay positive for a log fit".into()));
    }
    linear_fit(&xs, &ys).ok_or_else(|| Error::Config("degenerate rate window".into()))
}

/// Rate fit on the exact squared gradient norms of an oracle-tracked run.
pub fn fit_rate(log: &RunLog, window: RangeInclusive<usize>) -> Result<LinearFit> {
    let sq = log
        .exact_sq_grad_norms()
        .ok_or_else(|| Error::Config("fit_rate needs a run with oracle_tracking = true".into()))?;
    fit_rate_from_sq_norms(&sq, window)
}
