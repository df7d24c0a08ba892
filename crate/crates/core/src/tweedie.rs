//! Tweedie's formula with a normal baseline.
//!
//! For `z ~ N(mu, sigma^2)` the posterior mean of `mu` is
//! `z + sigma^2 l'(z)` and the posterior variance is
//! `sigma^2 (1 + sigma^2 l''(z))`, where `l` is the log marginal density of
//! `z`. Both derivatives come from a [`LindseyFit`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lindsey::{log_density_deriv, log_density_second_deriv, LindseyFit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionResult {
    pub raw_score: f64,
    /// `sigma^2 l'(z)`
    pub correction_term: f64,
    pub corrected_mean: f64,
    pub corrected_sd: f64,
    /// The posterior variance came out negative and was clamped to zero.
    pub variance_clamped: bool,
}

pub fn correct(z: f64, sigma: f64, fit: &LindseyFit) -> Result<CorrectionResult> {
    if !z.is_finite() {
        return Err(Error::domain(format!("score {z} is not finite")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let correction_term = s2 * log_density_deriv(fit, z);
    let var = s2 * (1.0 + s2 * log_density_second_deriv(fit, z));
    let variance_clamped = var < 0.0;
    Ok(CorrectionResult {
        raw_score: z,
        correction_term,
        corrected_mean: z + correction_term,
        corrected_sd: var.max(0.0).sqrt(),
        variance_clamped,
    })
}

/// Element-wise [`correct`], parallel over the input, output in input order.
pub fn correct_batch(scores: &[f64], sigma: f64, fit: &LindseyFit) -> Result<Vec<CorrectionResult>> {
    scores
        .par_iter()
        .enumerate()
        .map(|(index, &z)| {
            correct(z, sigma, fit).map_err(|e| Error::Element {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
