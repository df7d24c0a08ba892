//! Per-unit Gibbs sampler for `y_i = alpha + beta d_i + u_i`,
//! `u_i ~ N(0, sigma^2)`, under flat priors on `alpha`, `beta` and `log sigma`.
//!
//! Each sweep draws `sigma^2 | alpha, beta` from its inverse-gamma full
//! conditional and then `(alpha, beta) | sigma^2` jointly from the bivariate
//! normal centered at the least-squares solution. The marginal posterior of
//! `beta` is a location-scale t with `n - 2` degrees of freedom, which the
//! tests use as an oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::score::robust_sd_sorted;
use crate::special::{percentile, sorted_copy, Probability};

pub const DEFAULT_N_ITER: usize = 11_000;
pub const DEFAULT_BURN_IN: usize = 1_000;

const SSR_FLOOR: f64 = 1e-12;

/// Responses and binary state variable for one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitData {
    pub unit_id: u64,
    pub y: Vec<f64>,
    pub d: Vec<bool>,
}

impl UnitData {
    pub fn new(unit_id: u64, y: Vec<f64>, d: Vec<bool>) -> Result<Self> {
        let unit = UnitData { unit_id, y, d };
        unit.validate()?;
        Ok(unit)
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.len() != self.d.len() {
            return Err(Error::domain(format!(
                "unit {}: {} responses but {} state values",
                self.unit_id,
                self.y.len(),
                self.d.len()
            )));
        }
        if self.y.len() < 3 {
            return Err(Error::domain(format!(
                "unit {}: need at least 3 observations, got {}",
                self.unit_id,
                self.y.len()
            )));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("unit {}: non-finite response", self.unit_id)));
        }
        let treated = self.d.iter().filter(|&&d| d).count();
        if treated == 0 || treated == self.d.len() {
            return Err(Error::Unidentified {
                unit_id: self.unit_id,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Least-squares quantities for the `(1, d)` design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeastSquares {
    pub n: usize,
    pub n_treated: usize,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// Residual sum of squares at the least-squares solution.
    pub ssr: f64,
    /// `(X'X)^-1` entries.
    pub inv_aa: f64,
    pub inv_ab: f64,
    pub inv_bb: f64,
}

impl LeastSquares {
    pub fn new(data: &UnitData) -> Result<Self> {
        data.validate()?;
        let n = data.len();
        let (mut n1, mut s0, mut s1) = (0usize, 0.0, 0.0);
        for (&y, &d) in data.y.iter().zip(&data.d) {
            if d {
                n1 += 1;
                s1 += y;
            } else {
                s0 += y;
            }
        }
        let n0 = n - n1;
        let alpha_hat = s0 / n0 as f64;
        let beta_hat = s1 / n1 as f64 - alpha_hat;
        let ssr = data
            .y
            .iter()
            .zip(&data.d)
            .map(|(&y, &d)| {
                let fit = if d { alpha_hat + beta_hat } else { alpha_hat };
                (y - fit).powi(2)
            })
            .sum();
        let det = (n1 * n0) as f64;
        Ok(LeastSquares {
            n,
            n_treated: n1,
            alpha_hat,
            beta_hat,
            ssr,
            inv_aa: n1 as f64 / det,
            inv_ab: -(n1 as f64) / det,
            inv_bb: n as f64 / det,
        })
    }

    /// Residual sum of squares at `(alpha, beta)`.
    pub fn ssr_at(&self, alpha: f64, beta: f64) -> f64 {
        let da = alpha - self.alpha_hat;
        let db = beta - self.beta_hat;
        let n = self.n as f64;
        let n1 = self.n_treated as f64;
        self.ssr + n * da * da + 2.0 * n1 * da * db + n1 * db * db
    }

    /// Scale of the marginal t posterior of beta: `s * sqrt([(X'X)^-1]_22)`
    /// with `s^2 = SSR / (n - 2)`.
    pub fn beta_posterior_scale(&self) -> f64 {
        (self.ssr / (self.n - 2) as f64 * self.inv_bb).sqrt()
    }

    pub fn beta_posterior_df(&self) -> u32 {
        (self.n - 2) as u32
    }
}

/// Retained draws from one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsChain {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: Vec<f64>,
}

fn check_iters(n_iter: usize, burn_in: usize) -> Result<()> {
    if n_iter <= burn_in {
        return Err(Error::domain(format!(
            "n_iter ({n_iter}) must exceed burn_in ({burn_in})"
        )));
    }
    Ok(())
}

/// Run the sampler and return the `n_iter - burn_in` retained draws.
pub fn sample_chain(data: &UnitData, n_iter: usize, burn_in: usize, seed: u64) -> Result<GibbsChain> {
    check_iters(n_iter, burn_in)?;
    let ls = LeastSquares::new(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape_gamma =
        Gamma::new(0.5 * ls.n as f64, 1.0).map_err(|e| Error::domain(e.to_string()))?;

    // Cholesky factor of (X'X)^-1.
    let l11 = ls.inv_aa.sqrt();
    let l21 = ls.inv_ab / l11;
    let l22 = (ls.inv_bb - l21 * l21).sqrt();

    let kept = n_iter - burn_in;
    let mut chain = GibbsChain {
        alpha: Vec::with_capacity(kept),
        beta: Vec::with_capacity(kept),
        sigma2: Vec::with_capacity(kept),
    };
    let (mut alpha, mut beta) = (ls.alpha_hat, ls.beta_hat);
    for it in 0..n_iter {
        let ssr = ls.ssr_at(alpha, beta).max(SSR_FLOOR);
        let g: f64 = shape_gamma.sample(&mut rng);
        let sigma2 = 0.5 * ssr / g;
        let sigma = sigma2.sqrt();
        let e1: f64 = StandardNormal.sample(&mut rng);
        let e2: f64 = StandardNormal.sample(&mut rng);
        alpha = ls.alpha_hat + sigma * l11 * e1;
        beta = ls.beta_hat + sigma * (l21 * e1 + l22 * e2);
        if it >= burn_in {
            chain.alpha.push(alpha);
            chain.beta.push(beta);
            chain.sigma2.push(sigma2);
        }
    }
    Ok(chain)
}

/// Quantiles of the retained beta draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawQuantiles {
    pub q05: f64,
    pub q16: f64,
    pub q50: f64,
    pub q84: f64,
    pub q95: f64,
}

impl DrawQuantiles {
    pub const LEVELS: [f64; 5] = [0.05, 0.16, 0.5, 0.84, 0.95];

    pub fn from_sorted(sorted: &[f64]) -> Result<Self> {
        let q = |p: f64| percentile(sorted, Probability::new(p)?);
        Ok(DrawQuantiles {
            q05: q(0.05)?,
            q16: q(0.16)?,
            q50: q(0.5)?,
            q84: q(0.84)?,
            q95: q(0.95)?,
        })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.q05, self.q16, self.q50, self.q84, self.q95]
    }

    pub fn get(&self, level: f64) -> Option<f64> {
        Self::LEVELS
            .iter()
            .position(|&l| l == level)
            .map(|i| self.as_array()[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub unit_id: u64,
    pub beta_median: f64,
    pub beta_robust_sd: f64,
    /// Fraction of retained draws with beta > 0.
    pub p_positive: f64,
    pub n_draws: u64,
    pub quantiles: DrawQuantiles,
    pub seed: u64,
}

impl PosteriorSummary {
    pub fn from_draws(unit_id: u64, draws: &[f64], seed: u64) -> Result<Self> {
        let sorted = sorted_copy(draws)?;
        let quantiles = DrawQuantiles::from_sorted(&sorted)?;
        let beta_robust_sd = robust_sd_sorted(&sorted)?;
        let positive = sorted.iter().filter(|&&b| b > 0.0).count();
        Ok(PosteriorSummary {
            unit_id,
            beta_median: quantiles.q50,
            beta_robust_sd,
            p_positive: positive as f64 / sorted.len() as f64,
            n_draws: sorted.len() as u64,
            quantiles,
            seed,
        })
    }
}

pub fn gibbs_fit(data: &UnitData, n_iter: usize, burn_in: usize, seed: u64) -> Result<PosteriorSummary> {
    let chain = sample_chain(data, n_iter, burn_in, seed)?;
    PosteriorSummary::from_draws(data.unit_id, &chain.beta, seed)
}

/// Per-unit seed: `base_seed XOR unit_id`.
#[inline]
pub fn unit_seed(base_seed: u64, unit_id: u64) -> u64 {
    base_seed ^ unit_id
}

/// Result of fitting many units; failures don't stop the others.
#[derive(Debug)]
pub struct BatchFit {
    pub summaries: Vec<PosteriorSummary>,
    pub failures: Vec<(u64, Error)>,
}

impl BatchFit {
    pub fn into_result(self) -> Result<Vec<PosteriorSummary>> {
        if self.failures.is_empty() {
            Ok(self.summaries)
        } else {
            Err(Error::Batch(
                self.failures
                    .into_iter()
                    .map(|(id, e)| (id, Box::new(e)))
                    .collect(),
            ))
        }
    }
}

/// Fit every unit in parallel; output order follows input order.
pub fn batch_fit(units: &[UnitData], n_iter: usize, burn_in: usize, base_seed: u64) -> Result<BatchFit> {
    check_iters(n_iter, burn_in)?;
    let mut ids: Vec<u64> = units.iter().map(|u| u.unit_id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::domain(format!("duplicate unit_id {}", w[0])));
    }

    let results: Vec<Result<PosteriorSummary>> = units
        .par_iter()
        .map(|u| gibbs_fit(u, n_iter, burn_in, unit_seed(base_seed, u.unit_id)))
        .collect();

    let mut out = BatchFit {
        summaries: Vec::with_capacity(units.len()),
        failures: Vec::new(),
    };
    for (u, r) in units.iter().zip(results) {
        match r {
            Ok(s) => out.summaries.push(s),
            Err(e) => out.failures.push((u.unit_id, e)),
        }
    }
    Ok(out)
}
