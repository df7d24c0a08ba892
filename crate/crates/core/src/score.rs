//! Transforms from t statistics, MCMC tail frequencies and posterior
//! medians onto the standard normal score scale.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::special::{percentile, sorted_copy, std_normal_quantile, student_t_cdf, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScoreSource {
    TTransform,
    ProbTransform,
    RobustRatio,
}

impl ScoreSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreSource::TTransform => "t_transform",
            ScoreSource::ProbTransform => "prob_transform",
            ScoreSource::RobustRatio => "robust_ratio",
        }
    }
}

impl fmt::Display for ScoreSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t_transform" => Ok(ScoreSource::TTransform),
            "prob_transform" => Ok(ScoreSource::ProbTransform),
            "robust_ratio" => Ok(ScoreSource::RobustRatio),
            other => Err(Error::domain(format!("unknown score source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRecord {
    pub unit_id: u64,
    pub score: f64,
    pub source: ScoreSource,
    /// Only ever set for [`ScoreSource::ProbTransform`].
    pub clamped: bool,
}

impl ScoreRecord {
    pub fn new(unit_id: u64, score: f64, source: ScoreSource, clamped: bool) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::domain(format!("unit {unit_id}: score {score} is not finite")));
        }
        if clamped && source != ScoreSource::ProbTransform {
            return Err(Error::domain(format!(
                "unit {unit_id}: clamped flag is only meaningful for prob_transform"
            )));
        }
        Ok(ScoreRecord {
            unit_id,
            score,
            source,
            clamped,
        })
    }
}

/// `Φ⁻¹(F_ν(t))`
pub fn t_to_z(t: f64, nu: u32) -> Result<f64> {
    // Evaluate through the lower tail to keep precision for large |t|.
    let lower = student_t_cdf(-t.abs(), nu)?;
    if lower.value() <= 0.0 {
        return Err(Error::domain(format!("t = {t} is beyond the representable tail")));
    }
    let z = std_normal_quantile(lower)?;
    Ok(if t > 0.0 { -z } else { z })
}

/// `Φ⁻¹(p)` for a frequency estimated from `draws` MCMC samples.
///
/// `p` is first clamped into `[1/(2A), 1 - 1/(2A)]` so that frequencies of
/// exactly 0 or 1 map to finite scores. The flag reports whether the clamp
/// changed `p`.
pub fn prob_to_z(p: Probability, draws: u64) -> Result<(f64, bool)> {
    if draws == 0 {
        return Err(Error::domain("MCMC draw count must be positive"));
    }
    let floor = 0.5 / draws as f64;
    let v = p.value();
    // Work on the smaller tail and reflect, so z(p) = -z(1 - p) holds exactly.
    let (lower, sign) = if v > 0.5 { (1.0 - v, -1.0) } else { (v, 1.0) };
    let clamped = lower < floor;
    let lower = lower.max(floor);
    let z = std_normal_quantile(Probability::new(lower)?)?;
    Ok((sign * z, clamped))
}

/// Half the distance between the 16th and 84th percentiles of `draws`.
pub fn robust_sd(draws: &[f64]) -> Result<f64> {
    let sorted = sorted_copy(draws)?;
    robust_sd_sorted(&sorted)
}

pub(crate) fn robust_sd_sorted(sorted: &[f64]) -> Result<f64> {
    if sorted.len() < 2 {
        return Err(Error::domain("robust SD needs at least two draws"));
    }
    let q16 = percentile(sorted, Probability::new(0.16)?)?;
    let q84 = percentile(sorted, Probability::new(0.84)?)?;
    let sr = 0.5 * (q84 - q16);
    if sr > 0.0 {
        Ok(sr)
    } else {
        Err(Error::DegenerateSpread)
    }
}

/// Posterior median divided by the robust SD.
pub fn posterior_score(median: f64, robust_sd: f64) -> Result<f64> {
    if robust_sd.is_nan() || robust_sd <= 0.0 {
        return Err(Error::domain(format!("robust SD must be positive, got {robust_sd}")));
    }
    Ok(median / robust_sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    #[test]
    fn t_to_z_reference_points() {
        assert_eq!(t_to_z(0.0, 7).unwrap(), 0.0);
        // Cauchy: F(1) = 0.75; Φ⁻¹(0.75) = 0.674489750196...
        assert!((t_to_z(1.0, 1).unwrap() - 0.674_489_750_196_081_7).abs() < 1e-10);
        // Φ⁻¹(F_200(3)) = 2.96335568994...; t_200 still has visibly heavier tails.
        let z = t_to_z(3.0, 200).unwrap();
        assert!((z - 2.963_355_689_943_6).abs() < 1e-9);
        assert!((z - 3.0).abs() < 0.04);
        assert!(t_to_z(1.0, 0).is_err());
    }

    #[test]
    fn t_to_z_is_odd() {
        for &(t, nu) in &[(0.3, 3), (2.5, 10), (12.0, 4)] {
            let a = t_to_z(t, nu).unwrap();
            let b = t_to_z(-t, nu).unwrap();
            assert!((a + b).abs() < 1e-12, "{t} {nu}: {a} {b}");
        }
    }

    #[test]
    fn prob_to_z_reference_points() {
        assert_eq!(prob_to_z(p(0.5), 10_000).unwrap(), (0.0, false));
        let (z, c) = prob_to_z(p(1e-4), 10_000).unwrap();
        assert!(!c);
        assert!((z + 3.719).abs() < 1e-3);
        let (z, c) = prob_to_z(p(0.0), 10_000).unwrap();
        assert!(c);
        // Φ⁻¹(5e-5) = -3.890591886...
        assert!((z + 3.890_591_886_413_1).abs() < 1e-8);
        let (z, c) = prob_to_z(p(1.0), 10_000).unwrap();
        assert!(c);
        assert!((z - 3.890_591_886_413_1).abs() < 1e-8);
        assert!(prob_to_z(p(0.3), 0).is_err());
    }

    #[test]
    fn robust_sd_two_point_mass() {
        let mut draws = vec![-1.0; 50];
        draws.extend(std::iter::repeat_n(1.0, 50));
        assert_eq!(robust_sd(&draws).unwrap(), 1.0);
    }

    #[test]
    fn robust_sd_degenerate() {
        assert!(matches!(robust_sd(&[2.0; 10]), Err(Error::DegenerateSpread)));
        assert!(robust_sd(&[1.0]).is_err());
    }

    #[test]
    fn robust_sd_affine_equivariance() {
        let draws: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 * 0.13).collect();
        let base = robust_sd(&draws).unwrap();
        let mapped: Vec<f64> = draws.iter().map(|x| -2.5 * x + 4.0).collect();
        assert!((robust_sd(&mapped).unwrap() - 2.5 * base).abs() < 1e-12);
    }

    #[test]
    fn posterior_score_arithmetic() {
        assert_eq!(posterior_score(0.0, 3.0).unwrap(), 0.0);
        assert!((posterior_score(1.2, 0.6).unwrap() - 2.0).abs() < 1e-15);
        assert!(posterior_score(1.0, 0.0).is_err());
        assert!(posterior_score(1.0, -1.0).is_err());
    }

    #[test]
    fn score_record_invariants() {
        assert!(ScoreRecord::new(1, f64::NAN, ScoreSource::RobustRatio, false).is_err());
        assert!(ScoreRecord::new(1, 0.0, ScoreSource::RobustRatio, true).is_err());
        assert!(ScoreRecord::new(1, 0.0, ScoreSource::ProbTransform, true).is_ok());
        for s in [ScoreSource::TTransform, ScoreSource::ProbTransform, ScoreSource::RobustRatio] {
            assert_eq!(s.as_str().parse::<ScoreSource>().unwrap(), s);
        }
    }
}
