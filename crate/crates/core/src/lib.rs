//! Local empirical Bayes correction of selection bias for large-scale
//! simultaneous estimation.
//!
//! Each unit is fitted with a small Bayesian linear model, its posterior is
//! condensed into a score on the standard normal scale, the marginal density
//! of all scores is estimated by Lindsey's method, and Tweedie's formula
//! turns the fitted log-density into a per-unit shrinkage correction.

pub mod config;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod lindsey;
pub mod pipeline;
pub mod score;
pub mod sim;
pub mod special;
pub mod stats;
pub mod svg;
pub mod tweedie;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use gibbs::{batch_fit, gibbs_fit, PosteriorSummary, UnitData};
pub use lindsey::{bin_scores, fit_lindsey, log_density_deriv, log_density_second_deriv, Histogram, LindseyFit};
pub use pipeline::{run_pipeline, PipelineReport};
pub use score::{posterior_score, prob_to_z, robust_sd, t_to_z, ScoreRecord, ScoreSource};
pub use sim::{generate, EffectLaw, Scenario};
pub use special::{percentile, std_normal_cdf, std_normal_quantile, student_t_cdf, Probability};
pub use tweedie::{correct, correct_batch, CorrectionResult};
