//! Numerical primitives shared by the rest of the crate.

pub mod brownian;
pub mod quadrature;
pub mod rng;
pub mod spd;

pub use brownian::BrownianLadder;
pub use quadrature::{gauss_hermite, GaussHermite};
pub use rng::RngStream;
pub use spd::SpdMatrix;

/// `log Σ exp(w_i)`, shifted by the maximum so it never overflows for finite input.
///
/// Returns `-inf` when every entry is `-inf` (zero total mass). A `+inf` entry
/// yields `+inf`; NaN propagates.
pub fn log_sum_exp(weights: &[f64]) -> f64 {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = weights.iter().map(|w| (w - max).exp()).sum();
    max + sum.ln()
}

/// Overwrites `log_weights` with normalized softmax weights and returns the
/// log of the unnormalized total mass.
pub(crate) fn softmax_in_place(log_weights: &mut [f64]) -> f64 {
    let lse = log_sum_exp(log_weights);
    if lse.is_finite() {
        // shifting by the max keeps the exponent arguments exact
        let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for w in log_weights.iter_mut() {
            *w = (*w - m).exp();
            total += *w;
        }
        for w in log_weights.iter_mut() {
            *w /= total;
        }
    }
    lse
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}
