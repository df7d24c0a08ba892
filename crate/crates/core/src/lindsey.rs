//! Marginal density estimation by Lindsey's method.
//!
//! Scores are binned into a fixed-width histogram and the bin counts are
//! treated as independent Poisson observations whose log-mean is a
//! polynomial of degree `J` in the (standardized) bin midpoint. The fitted
//! polynomial is the log marginal density up to an additive constant, so
//! its derivatives are exactly the quantities Tweedie's formula needs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_DEGREES: [usize; 2] = [2, 5];

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 50;
const MAX_STEP_HALVINGS: usize = 30;

/// Fixed-width histogram of scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    /// Left edge of the first bin.
    pub origin: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(bin_width: f64, origin: f64, counts: Vec<u64>) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::domain(format!("bin width must be positive, got {bin_width}")));
        }
        if !origin.is_finite() {
            return Err(Error::domain("histogram origin must be finite"));
        }
        if counts.is_empty() {
            return Err(Error::domain("histogram needs at least one bin"));
        }
        let total = counts.iter().sum();
        Ok(Histogram {
            bin_width,
            origin,
            counts,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn left_edge(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.bin_width
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        self.origin + (k as f64 + 0.5) * self.bin_width
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.midpoint(k))
    }

    /// Right edge of the last bin.
    pub fn upper(&self) -> f64 {
        self.left_edge(self.len())
    }
}

/// Bin `scores` into fixed-width bins.
///
/// Without an explicit `range` the first bin starts at the largest multiple
/// of `bin_width` not exceeding the minimum score, and bins extend until the
/// maximum score is covered. With `range = (lo, hi)` the bins tile `[lo, hi]`
/// and a score equal to `hi` lands in the last bin.
pub fn bin_scores(scores: &[f64], bin_width: f64, range: Option<(f64, f64)>) -> Result<Histogram> {
    if scores.is_empty() {
        return Err(Error::domain("cannot bin an empty score list"));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::domain(format!("bin width must be positive, got {bin_width}")));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::domain(format!("score {i} is not finite")));
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let (origin, n_bins) = match range {
        None => {
            let origin = bin_width * (min / bin_width).floor();
            let n = ((max - origin) / bin_width).floor() as usize + 1;
            (origin, n)
        }
        Some((lo, hi)) => {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::domain(format!("invalid histogram range ({lo}, {hi})")));
            }
            if min < lo || max > hi {
                return Err(Error::domain(format!(
                    "scores span [{min}, {max}], outside histogram range [{lo}, {hi}]"
                )));
            }
            let n = (((hi - lo) / bin_width).ceil() as usize).max(1);
            (lo, n)
        }
    };

    let mut counts = vec![0u64; n_bins];
    for &s in scores {
        let k = ((s - origin) / bin_width).floor();
        let k = if k < 0.0 { 0 } else { (k as usize).min(n_bins - 1) };
        counts[k] += 1;
    }
    Histogram::new(bin_width, origin, counts)
}

/// Polynomial log-density fitted by Poisson regression on bin counts.
///
/// The polynomial is in the standardized abscissa `(z - center) / scale`;
/// `coefficients[j]` multiplies its `j`-th power.
#[derive(Debug, Clone, PartialEq)]
pub struct LindseyFit {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub center: f64,
    pub scale: f64,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
}

impl LindseyFit {
    #[inline]
    pub fn standardize(&self, z: f64) -> f64 {
        (z - self.center) / self.scale
    }

    /// Fitted log mean count at `z`, i.e. the log-density up to a constant.
    pub fn log_density(&self, z: f64) -> f64 {
        let x = self.standardize(z);
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Fitted Poisson mean for a bin centered at `z`.
    pub fn fitted_mean(&self, z: f64) -> f64 {
        self.log_density(z).exp()
    }

    pub fn fitted_means(&self, hist: &Histogram) -> Vec<f64> {
        hist.midpoints().map(|m| self.fitted_mean(m)).collect()
    }
}

/// Fit a degree-`degree` Poisson regression to histogram counts by IRLS.
///
/// Zero-count bins are kept. Midpoints are standardized with the
/// count-weighted mean and SD before forming the polynomial basis. IRLS
/// starts from `eta_0 = ln(mean count + 0.1)` with the other coefficients at
/// zero, halves a step whenever it would increase the deviance, and stops
/// once the largest absolute coefficient update falls below `1e-8`. If that
/// doesn't happen within 50 iterations the fit comes back with
/// `converged = false`.
pub fn fit_lindsey(hist: &Histogram, degree: usize) -> Result<LindseyFit> {
    if degree < 1 {
        return Err(Error::domain("Lindsey degree must be at least 1"));
    }
    if hist.len() <= degree + 1 {
        return Err(Error::domain(format!(
            "{} bins cannot support a degree-{degree} fit (need more than {})",
            hist.len(),
            degree + 1
        )));
    }
    if hist.total == 0 {
        return Err(Error::domain("histogram is empty"));
    }

    let total = hist.total as f64;
    let mids: Vec<f64> = hist.midpoints().collect();
    let y: Vec<f64> = hist.counts.iter().map(|&c| c as f64).collect();
    let center = mids.iter().zip(&y).map(|(m, c)| m * c).sum::<f64>() / total;
    let var = mids
        .iter()
        .zip(&y)
        .map(|(m, c)| c * (m - center).powi(2))
        .sum::<f64>()
        / total;
    let scale = var.sqrt();
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::domain("all counts fall in a single bin, scale is zero"));
    }

    let p = degree + 1;
    let k = hist.len();
    let x = DMatrix::from_fn(k, p, |i, j| ((mids[i] - center) / scale).powi(j as i32));

    let mut beta = DVector::zeros(p);
    beta[0] = (total / k as f64 + 0.1).ln();
    let mut eta = &x * &beta;
    let mut dev = poisson_deviance(&y, eta.iter().map(|e| e.exp()));
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=IRLS_MAX_ITER {
        iterations = iter;
        let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        // Working response z = eta + (y - mu)/mu, weights w = mu.
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtwz = DVector::<f64>::zeros(p);
        for i in 0..k {
            let w = mu[i];
            let z = eta[i] + (y[i] - mu[i]) / mu[i];
            for a in 0..p {
                let xa = x[(i, a)] * w;
                xtwz[a] += xa * z;
                for b in a..p {
                    xtwx[(a, b)] += xa * x[(i, b)];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[(a, b)] = xtwx[(b, a)];
            }
        }
        let chol = xtwx.cholesky().ok_or(Error::SingularFit { iteration: iter })?;
        let target = chol.solve(&xtwz);
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularFit { iteration: iter });
        }

        let mut step = &target - &beta;
        let mut candidate = &beta + &step;
        let mut cand_eta = &x * &candidate;
        let mut cand_dev = poisson_deviance(&y, cand_eta.iter().map(|e| e.exp()));
        let mut halvings = 0;
        while !(cand_dev.is_finite() && cand_dev <= dev * (1.0 + 1e-12) + 1e-12)
            && halvings < MAX_STEP_HALVINGS
        {
            step *= 0.5;
            candidate = &beta + &step;
            cand_eta = &x * &candidate;
            cand_dev = poisson_deviance(&y, cand_eta.iter().map(|e| e.exp()));
            halvings += 1;
        }
        let max_update = step.amax();
        beta = candidate;
        eta = cand_eta;
        dev = cand_dev;
        if max_update < IRLS_TOL {
            converged = true;
            break;
        }
    }

    Ok(LindseyFit {
        degree,
        coefficients: beta.iter().copied().collect(),
        center,
        scale,
        converged,
        iterations,
        deviance: dev,
    })
}

/// Poisson deviance `2 Σ [y ln(y/mu) - (y - mu)]`.
pub fn poisson_deviance(y: &[f64], mu: impl IntoIterator<Item = f64>) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&yi, mi)| {
            let t = if yi > 0.0 { yi * (yi / mi).ln() } else { 0.0 };
            2.0 * (t - (yi - mi))
        })
        .sum()
}

/// First derivative of the fitted log-density at `z`, in raw score units.
pub fn log_density_deriv(fit: &LindseyFit, z: f64) -> f64 {
    let x = fit.standardize(z);
    let mut acc = 0.0;
    for (j, &c) in fit.coefficients.iter().enumerate().skip(1).rev() {
        acc = acc * x + j as f64 * c;
    }
    acc / fit.scale
}

/// Second derivative of the fitted log-density at `z`, in raw score units.
pub fn log_density_second_deriv(fit: &LindseyFit, z: f64) -> f64 {
    let x = fit.standardize(z);
    let mut acc = 0.0;
    for (j, &c) in fit.coefficients.iter().enumerate().skip(2).rev() {
        acc = acc * x + (j * (j - 1)) as f64 * c;
    }
    acc / (fit.scale * fit.scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_one_bin() {
        let h = bin_scores(&[0.1, 0.1, 0.1], 0.25, None).unwrap();
        assert_eq!(h.counts, vec![3]);
        assert_eq!(h.total, 3);
        assert_eq!(h.origin, 0.0);
    }

    #[test]
    fn hand_enumerated_bins() {
        let h = bin_scores(&[-0.3, 0.1, 0.6], 0.25, None).unwrap();
        assert_eq!(h.origin, -0.5);
        assert_eq!(h.counts, vec![1, 0, 1, 0, 1]);
    }

    #[test]
    fn bin_errors() {
        assert!(bin_scores(&[], 0.25, None).is_err());
        assert!(bin_scores(&[0.0, f64::NAN], 0.25, None).is_err());
        assert!(bin_scores(&[0.0, f64::INFINITY], 0.25, None).is_err());
        assert!(bin_scores(&[0.0], 0.0, None).is_err());
        assert!(bin_scores(&[0.0, 2.0], 0.25, Some((-1.0, 1.0))).is_err());
    }

    #[test]
    fn explicit_range() {
        let h = bin_scores(&[-1.0, 0.0, 1.0], 0.5, Some((-1.0, 1.0))).unwrap();
        assert_eq!(h.origin, -1.0);
        assert_eq!(h.counts, vec![1, 0, 1, 1]);
    }

    #[test]
    fn fit_preconditions() {
        let h = Histogram::new(1.0, 0.0, vec![1, 2, 3]).unwrap();
        assert!(fit_lindsey(&h, 0).is_err());
        assert!(fit_lindsey(&h, 2).is_err());
        let empty = Histogram::new(1.0, 0.0, vec![0, 0, 0, 0]).unwrap();
        assert!(fit_lindsey(&empty, 1).is_err());
        let spike = Histogram::new(1.0, 0.0, vec![0, 7, 0, 0]).unwrap();
        assert!(fit_lindsey(&spike, 1).is_err());
    }

    #[test]
    fn flat_histogram_has_no_slope() {
        let h = Histogram::new(0.5, -5.0, vec![40; 20]).unwrap();
        let fit = fit_lindsey(&h, 1).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[1].abs() < 1e-10);
        assert!((fit.coefficients[0] - 40f64.ln()).abs() < 1e-10);
        assert!(fit.deviance.abs() < 1e-9);
    }

    #[test]
    fn degree_one_has_zero_curvature() {
        let h = Histogram::new(0.5, -2.0, vec![1, 3, 4, 9, 12, 20]).unwrap();
        let fit = fit_lindsey(&h, 1).unwrap();
        for z in [-3.0, 0.0, 0.4, 8.0] {
            assert_eq!(log_density_second_deriv(&fit, z), 0.0);
        }
    }

    #[test]
    fn derivative_vanishes_at_center_without_linear_term() {
        let fit = LindseyFit {
            degree: 3,
            coefficients: vec![1.0, 0.0, -0.7, 0.2],
            center: 0.4,
            scale: 1.3,
            converged: true,
            iterations: 1,
            deviance: 0.0,
        };
        assert_eq!(log_density_deriv(&fit, 0.4), 0.0);
    }

    #[test]
    fn quadratic_fit_has_affine_derivative() {
        let fit = LindseyFit {
            degree: 2,
            coefficients: vec![0.3, 0.1, -0.8],
            center: -0.2,
            scale: 2.0,
            converged: true,
            iterations: 1,
            deviance: 0.0,
        };
        let slope = log_density_second_deriv(&fit, 0.0);
        assert!(slope < 0.0);
        for z in [-4.0, -1.0, 0.5, 3.0] {
            let lhs = log_density_deriv(&fit, z);
            let rhs = log_density_deriv(&fit, 0.0) + slope * z;
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }
}
