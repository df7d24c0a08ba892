//! File-based pipeline: simulate → fit → score → density → correct → report.
//!
//! Every stage reads its inputs from and writes its outputs to the
//! configured output directory, so running the stages one by one produces
//! the same artifacts as [`run_pipeline`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::gibbs::{batch_fit, sample_chain, unit_seed, PosteriorSummary};
use crate::io::{self, UnitRecord};
use crate::lindsey::{bin_scores, fit_lindsey, Histogram, LindseyFit};
use crate::score::{posterior_score, prob_to_z, ScoreRecord, ScoreSource};
use crate::sim::generate;
use crate::special::Probability;
use crate::stats::{ks_two_sample, mean, sd, variance};
use crate::svg::{Bars, Chart, Line};
use crate::tweedie::{correct_batch, CorrectionResult};

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";
const CURVE_POINTS: usize = 201;

fn dir(cfg: &PipelineConfig) -> &Path {
    &cfg.output_dir
}

/// Generate the scenario and write `units.csv`.
pub fn simulate(cfg: &PipelineConfig) -> Result<Vec<UnitRecord>> {
    let run = || -> Result<Vec<UnitRecord>> {
        let units: Vec<UnitRecord> = generate(&cfg.scenario)?
            .into_iter()
            .map(UnitRecord::from)
            .collect();
        fs::create_dir_all(dir(cfg))?;
        io::write_units(&io::units_path(dir(cfg)), &units)?;
        Ok(units)
    };
    run().map_err(|e| e.in_stage("simulate"))
}

/// Run the Gibbs sampler on every unit of `units.csv`, writing
/// `summaries.csv`. With `dump_draws` each unit's retained slope draws also
/// go to `draws/unit_{id}.csv`.
pub fn fit(cfg: &PipelineConfig, dump_draws: bool) -> Result<Vec<PosteriorSummary>> {
    let run = || -> Result<Vec<PosteriorSummary>> {
        let units = io::read_units(&io::units_path(dir(cfg)))?;
        let data: Vec<_> = units.into_iter().map(|u| u.data).collect();
        let seed = cfg.scenario.seed;
        let summaries = if dump_draws {
            let draws_dir = dir(cfg).join("draws");
            fs::create_dir_all(&draws_dir)?;
            data.par_iter()
                .map(|u| {
                    let s = unit_seed(seed, u.unit_id);
                    let chain = sample_chain(u, cfg.n_iter, cfg.burn_in, s)?;
                    io::write_draws(&draws_dir.join(format!("unit_{}.csv", u.unit_id)), &chain.beta)?;
                    PosteriorSummary::from_draws(u.unit_id, &chain.beta, s)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            batch_fit(&data, cfg.n_iter, cfg.burn_in, seed)?.into_result()?
        };
        io::write_summaries(&io::summaries_path(dir(cfg)), &summaries)?;
        Ok(summaries)
    };
    run().map_err(|e| e.in_stage("fit"))
}

/// Turn posterior summaries into scores; writes `scores.csv` with all
/// robust-ratio rows followed by all probability-transform rows.
pub fn score(cfg: &PipelineConfig) -> Result<Vec<ScoreRecord>> {
    let run = || -> Result<Vec<ScoreRecord>> {
        let summaries = io::read_summaries(&io::summaries_path(dir(cfg)))?;
        let records = scores_from_summaries(&summaries)?;
        io::write_scores(&io::scores_path(dir(cfg)), &records)?;
        Ok(records)
    };
    run().map_err(|e| e.in_stage("score"))
}

pub fn scores_from_summaries(summaries: &[PosteriorSummary]) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::with_capacity(2 * summaries.len());
    for s in summaries {
        let z = posterior_score(s.beta_median, s.beta_robust_sd)?;
        out.push(ScoreRecord::new(s.unit_id, z, ScoreSource::RobustRatio, false)?);
    }
    for s in summaries {
        let (z, clamped) = prob_to_z(Probability::new(s.p_positive)?, s.n_draws)?;
        out.push(ScoreRecord::new(s.unit_id, z, ScoreSource::ProbTransform, clamped)?);
    }
    Ok(out)
}

fn robust_scores(records: &[ScoreRecord]) -> (Vec<u64>, Vec<f64>) {
    records
        .iter()
        .filter(|r| r.source == ScoreSource::RobustRatio)
        .map(|r| (r.unit_id, r.score))
        .unzip()
}

/// Bin the robust-ratio scores and fit each configured degree; writes
/// `histogram_d{J}.csv` and `fit_d{J}.csv`.
pub fn density(cfg: &PipelineConfig) -> Result<Vec<(Histogram, LindseyFit)>> {
    let run = || -> Result<Vec<(Histogram, LindseyFit)>> {
        let records = io::read_scores(&io::scores_path(dir(cfg)))?;
        let (_, scores) = robust_scores(&records);
        let hist = bin_scores(&scores, cfg.histogram_width, None)?;
        let mut out = Vec::with_capacity(cfg.lindsey_degrees.len());
        for &degree in &cfg.lindsey_degrees {
            let fit = fit_lindsey(&hist, degree)?;
            io::write_histogram(&io::histogram_path(dir(cfg), degree), &hist, Some(&fit))?;
            io::write_fit(&io::fit_path(dir(cfg), degree), &fit)?;
            out.push((hist.clone(), fit));
        }
        Ok(out)
    };
    run().map_err(|e| e.in_stage("density"))
}

/// Apply Tweedie's formula with each fitted density; writes
/// `corrections_d{J}.csv`.
pub fn correct(cfg: &PipelineConfig) -> Result<Vec<Vec<CorrectionResult>>> {
    let run = || -> Result<Vec<Vec<CorrectionResult>>> {
        let records = io::read_scores(&io::scores_path(dir(cfg)))?;
        let (ids, scores) = robust_scores(&records);
        let mut out = Vec::with_capacity(cfg.lindsey_degrees.len());
        for &degree in &cfg.lindsey_degrees {
            let fit = io::read_fit(&io::fit_path(dir(cfg), degree))?;
            let results = correct_batch(&scores, cfg.sigma, &fit)?;
            io::write_corrections(&io::corrections_path(dir(cfg), degree), &ids, &results)?;
            out.push(results);
        }
        Ok(out)
    };
    run().map_err(|e| e.in_stage("correct"))
}

/// Per-degree summary.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeReport {
    pub degree: usize,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    pub n_bins: usize,
    pub raw_variance: f64,
    pub corrected_variance: f64,
    pub variance_clamped_fraction: f64,
    pub null_raw_mean: Option<f64>,
    pub null_corrected_mean: Option<f64>,
    pub nonnull_raw_mean: Option<f64>,
    pub nonnull_corrected_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub n_units: usize,
    pub n_null: usize,
    pub n_nonnull: usize,
    pub robust_score_mean: f64,
    pub robust_score_sd: f64,
    pub prob_score_mean: f64,
    pub prob_score_sd: f64,
    pub prob_clamped_fraction: f64,
    /// KS distance between robust-ratio and probability-transform scores.
    pub ks_robust_vs_prob: f64,
    pub degrees: Vec<DegreeReport>,
}

impl PipelineReport {
    pub fn degree(&self, degree: usize) -> Option<&DegreeReport> {
        self.degrees.iter().find(|d| d.degree == degree)
    }

    pub fn render(&self, cfg: &PipelineConfig) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
        let mut s = String::new();
        let _ = writeln!(s, "# configuration");
        // output_dir is omitted so reports from different directories compare equal.
        for line in cfg.to_text().lines().filter(|l| !l.starts_with("output_dir")) {
            let _ = writeln!(s, "{line}");
        }
        let _ = writeln!(s, "\n# units");
        let _ = writeln!(s, "units            {}", self.n_units);
        let _ = writeln!(s, "null             {}", self.n_null);
        let _ = writeln!(s, "non-null         {}", self.n_nonnull);
        let _ = writeln!(s, "\n# scores");
        let _ = writeln!(
            s,
            "robust_ratio     mean {:.6}  sd {:.6}",
            self.robust_score_mean, self.robust_score_sd
        );
        let _ = writeln!(
            s,
            "prob_transform   mean {:.6}  sd {:.6}  clamped {:.6}",
            self.prob_score_mean, self.prob_score_sd, self.prob_clamped_fraction
        );
        let _ = writeln!(s, "ks(robust, prob) {:.6}", self.ks_robust_vs_prob);
        for d in &self.degrees {
            let _ = writeln!(s, "\n# degree {}", d.degree);
            let _ = writeln!(s, "converged        {} ({} iterations)", d.converged, d.iterations);
            let _ = writeln!(s, "deviance         {:.6} on {} bins", d.deviance, d.n_bins);
            let _ = writeln!(s, "raw variance     {:.6}", d.raw_variance);
            let _ = writeln!(s, "corrected var.   {:.6}", d.corrected_variance);
            let _ = writeln!(s, "sd clamped       {:.6}", d.variance_clamped_fraction);
            let _ = writeln!(
                s,
                "null mean        raw {}  corrected {}",
                opt(d.null_raw_mean),
                opt(d.null_corrected_mean)
            );
            let _ = writeln!(
                s,
                "non-null mean    raw {}  corrected {}",
                opt(d.nonnull_raw_mean),
                opt(d.nonnull_corrected_mean)
            );
        }
        s
    }
}

fn group_mean(values: &[f64], mask: &[bool]) -> Option<f64> {
    let picked: Vec<f64> = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    (!picked.is_empty()).then(|| mean(&picked))
}

/// Summarize existing artifacts into `report.txt` and `figures/`.
pub fn report(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let run = || -> Result<PipelineReport> {
        let d = dir(cfg);
        let units = io::read_units(&io::units_path(d))?;
        io::read_summaries(&io::summaries_path(d))?;
        let records = io::read_scores(&io::scores_path(d))?;
        let (_, robust) = robust_scores(&records);
        let prob: Vec<&ScoreRecord> = records
            .iter()
            .filter(|r| r.source == ScoreSource::ProbTransform)
            .collect();
        let prob_scores: Vec<f64> = prob.iter().map(|r| r.score).collect();

        let truth: std::collections::HashMap<u64, Option<f64>> =
            units.iter().map(|u| (u.data.unit_id, u.beta_true)).collect();
        let figures = d.join("figures");
        fs::create_dir_all(&figures)?;
        write_score_comparison(&figures, cfg.histogram_width, &robust, &prob_scores)?;

        let mut degrees = Vec::new();
        for &degree in &cfg.lindsey_degrees {
            let hist = io::read_histogram(&io::histogram_path(d, degree))?;
            let fit = io::read_fit(&io::fit_path(d, degree))?;
            let corr = io::read_corrections(&io::corrections_path(d, degree))?;
            let raw: Vec<f64> = corr.iter().map(|c| c.1.raw_score).collect();
            let corrected: Vec<f64> = corr.iter().map(|c| c.1.corrected_mean).collect();
            let is_null: Vec<bool> = corr
                .iter()
                .map(|c| truth.get(&c.0).copied().flatten() == Some(0.0))
                .collect();
            let is_nonnull: Vec<bool> = corr
                .iter()
                .map(|c| matches!(truth.get(&c.0).copied().flatten(), Some(b) if b != 0.0))
                .collect();
            let clamped = corr.iter().filter(|c| c.1.variance_clamped).count();

            write_density_figure(&figures, degree, &hist, &fit)?;
            write_correction_curve(&figures, degree, &hist, &fit, cfg.sigma)?;
            write_before_after(&figures, degree, cfg.histogram_width, &raw, &corrected)?;

            degrees.push(DegreeReport {
                degree,
                converged: fit.converged,
                iterations: fit.iterations,
                deviance: fit.deviance,
                n_bins: hist.len(),
                raw_variance: variance(&raw),
                corrected_variance: variance(&corrected),
                variance_clamped_fraction: clamped as f64 / corr.len().max(1) as f64,
                null_raw_mean: group_mean(&raw, &is_null),
                null_corrected_mean: group_mean(&corrected, &is_null),
                nonnull_raw_mean: group_mean(&raw, &is_nonnull),
                nonnull_corrected_mean: group_mean(&corrected, &is_nonnull),
            });
        }

        let report = PipelineReport {
            n_units: units.len(),
            n_null: units.iter().filter(|u| u.beta_true == Some(0.0)).count(),
            n_nonnull: units
                .iter()
                .filter(|u| matches!(u.beta_true, Some(b) if b != 0.0))
                .count(),
            robust_score_mean: mean(&robust),
            robust_score_sd: sd(&robust),
            prob_score_mean: mean(&prob_scores),
            prob_score_sd: sd(&prob_scores),
            prob_clamped_fraction: prob.iter().filter(|r| r.clamped).count() as f64
                / prob.len().max(1) as f64,
            ks_robust_vs_prob: ks_two_sample(&robust, &prob_scores),
            degrees,
        };
        fs::write(d.join("report.txt"), report.render(cfg))?;
        Ok(report)
    };
    run().map_err(|e| e.in_stage("report"))
}

/// Histograms of two samples on a shared bin grid.
fn shared_histograms(width: f64, a: &[f64], b: &[f64]) -> Result<(Histogram, Histogram)> {
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let grid = bin_scores(&all, width, None)?;
    let range = Some((grid.origin, grid.upper()));
    Ok((bin_scores(a, width, range)?, bin_scores(b, width, range)?))
}

fn write_score_comparison(figures: &Path, width: f64, robust: &[f64], prob: &[f64]) -> Result<()> {
    if robust.is_empty() || prob.is_empty() {
        return Ok(());
    }
    let (hr, hp) = shared_histograms(width, robust, prob)?;
    io::write_csv(
        &figures.join("scores_compare.csv"),
        &["left_edge", "robust_ratio_count", "prob_transform_count"],
        (0..hr.len()).map(|k| {
            vec![
                io::fmt_f64(hr.left_edge(k)),
                hr.counts[k].to_string(),
                hp.counts[k].to_string(),
            ]
        }),
    )?;
    let mut c = Chart::new("Posterior scores by transform", "score", "count");
    c.bars.push(bars(&hp, "#c8c8c8", 1.0, "probability transform"));
    c.bars.push(bars(&hr, "#1f4e79", 0.55, "median / robust SD"));
    fs::write(figures.join("scores.svg"), c.render())?;
    Ok(())
}

fn bars(h: &Histogram, fill: &'static str, opacity: f64, label: &str) -> Bars {
    Bars {
        left: (0..h.len()).map(|k| h.left_edge(k)).collect(),
        width: h.bin_width,
        value: h.counts.iter().map(|&c| c as f64).collect(),
        fill,
        opacity,
        label: label.to_string(),
    }
}

fn grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..CURVE_POINTS).map(move |i| lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64)
}

fn write_density_figure(figures: &Path, degree: usize, hist: &Histogram, fit: &LindseyFit) -> Result<()> {
    let xs: Vec<f64> = grid(hist.origin, hist.upper()).collect();
    let ys: Vec<f64> = xs.iter().map(|&z| fit.fitted_mean(z)).collect();
    let mut c = Chart::new(
        format!("Score histogram with degree-{degree} Poisson fit"),
        "score",
        "count",
    );
    c.bars.push(bars(hist, "#c8c8c8", 1.0, "scores"));
    c.lines.push(Line {
        x: xs,
        y: ys,
        stroke: "black",
        label: format!("degree {degree} fit"),
    });
    fs::write(figures.join(format!("density_d{degree}.svg")), c.render())?;
    Ok(())
}

fn write_correction_curve(
    figures: &Path,
    degree: usize,
    hist: &Histogram,
    fit: &LindseyFit,
    sigma: f64,
) -> Result<()> {
    let zs: Vec<f64> = grid(hist.origin, hist.upper()).collect();
    let curve = correct_batch(&zs, sigma, fit)?;
    io::write_csv(
        &figures.join(format!("correction_curve_d{degree}.csv")),
        &["z", "correction_term", "corrected_mean", "corrected_sd", "variance_clamped"],
        curve.iter().map(|r| {
            vec![
                io::fmt_f64(r.raw_score),
                io::fmt_f64(r.correction_term),
                io::fmt_f64(r.corrected_mean),
                io::fmt_f64(r.corrected_sd),
                r.variance_clamped.to_string(),
            ]
        }),
    )?;
    let mut c = Chart::new(format!("Correction term, degree {degree}"), "score z", "correction");
    c.lines.push(Line {
        x: zs,
        y: curve.iter().map(|r| r.correction_term).collect(),
        stroke: "black",
        label: "sigma^2 l'(z)".into(),
    });
    fs::write(figures.join(format!("correction_d{degree}.svg")), c.render())?;
    Ok(())
}

fn write_before_after(figures: &Path, degree: usize, width: f64, raw: &[f64], corrected: &[f64]) -> Result<()> {
    if raw.is_empty() {
        return Ok(());
    }
    let (before, after) = shared_histograms(width, raw, corrected)?;
    io::write_csv(
        &figures.join(format!("before_after_d{degree}.csv")),
        &["left_edge", "before_count", "after_count"],
        (0..before.len()).map(|k| {
            vec![
                io::fmt_f64(before.left_edge(k)),
                before.counts[k].to_string(),
                after.counts[k].to_string(),
            ]
        }),
    )?;
    let mut c = Chart::new(
        format!("Scores before and after correction, degree {degree}"),
        "score",
        "count",
    );
    c.bars.push(bars(&before, "#c8c8c8", 1.0, "before"));
    c.bars.push(bars(&after, "black", 0.7, "after"));
    fs::write(figures.join(format!("before_after_d{degree}.svg")), c.render())?;
    Ok(())
}

/// Run every stage in order. On failure an `INCOMPLETE` marker naming the
/// failing stage is left in the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    fs::create_dir_all(dir(cfg))?;
    let marker: PathBuf = dir(cfg).join(INCOMPLETE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let result = (|| {
        simulate(cfg)?;
        fit(cfg, false)?;
        score(cfg)?;
        density(cfg)?;
        correct(cfg)?;
        report(cfg)
    })();
    if let Err(e) = &result {
        fs::write(&marker, format!("{e}\n"))?;
    }
    result
}
