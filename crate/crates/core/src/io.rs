//! CSV artifacts exchanged between pipeline stages.
//!
//! Every float is written with 17 significant digits so that reading a file
//! back reproduces the exact `f64` values.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gibbs::{DrawQuantiles, PosteriorSummary, UnitData};
use crate::lindsey::{Histogram, LindseyFit};
use crate::score::{ScoreRecord, ScoreSource};
use crate::sim::SimulatedUnit;
use crate::tweedie::CorrectionResult;

pub const UNITS_HEADER: &[&str] = &["unit_id", "obs", "d", "y", "beta_true"];
pub const SUMMARIES_HEADER: &[&str] = &[
    "unit_id",
    "beta_median",
    "beta_robust_sd",
    "p_positive",
    "n_draws",
    "q05",
    "q16",
    "q50",
    "q84",
    "q95",
    "seed",
];
pub const SCORES_HEADER: &[&str] = &["unit_id", "score", "source", "clamped"];
pub const HISTOGRAM_HEADER: &[&str] = &["left_edge", "midpoint", "count", "fitted_mean"];
pub const CORRECTIONS_HEADER: &[&str] = &[
    "unit_id",
    "raw_score",
    "correction_term",
    "corrected_mean",
    "corrected_sd",
    "variance_clamped",
];

/// 17 significant digits, scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn units_path(dir: &Path) -> PathBuf {
    dir.join("units.csv")
}
pub fn summaries_path(dir: &Path) -> PathBuf {
    dir.join("summaries.csv")
}
pub fn scores_path(dir: &Path) -> PathBuf {
    dir.join("scores.csv")
}
pub fn histogram_path(dir: &Path, degree: usize) -> PathBuf {
    dir.join(format!("histogram_d{degree}.csv"))
}
pub fn fit_path(dir: &Path, degree: usize) -> PathBuf {
    dir.join(format!("fit_d{degree}.csv"))
}
pub fn corrections_path(dir: &Path, degree: usize) -> PathBuf {
    dir.join(format!("corrections_d{degree}.csv"))
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a CSV file whose header must equal `header`; returns the data rows.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(artifact(path, format!("header {got:?}, expected {header:?}")));
    }
    r.records().map(|rec| rec.map_err(Error::from)).collect()
}

fn artifact(path: &Path, msg: impl Into<String>) -> Error {
    Error::Artifact {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

struct Row<'a> {
    path: &'a Path,
    line: usize,
    rec: &'a csv::StringRecord,
}

impl Row<'_> {
    fn str(&self, i: usize) -> Result<&str> {
        self.rec
            .get(i)
            .ok_or_else(|| artifact(self.path, format!("row {}: missing column {i}", self.line)))
    }

    fn parse<T: std::str::FromStr>(&self, i: usize) -> Result<T> {
        let s = self.str(i)?;
        s.parse()
            .map_err(|_| artifact(self.path, format!("row {}: cannot parse {s:?}", self.line)))
    }

    fn bool(&self, i: usize) -> Result<bool> {
        match self.str(i)? {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            s => Err(artifact(self.path, format!("row {}: bad boolean {s:?}", self.line))),
        }
    }
}

fn rows<'a>(path: &'a Path, recs: &'a [csv::StringRecord]) -> impl Iterator<Item = Row<'a>> {
    recs.iter()
        .enumerate()
        .map(move |(i, rec)| Row { path, line: i + 2, rec })
}

// --- units -----------------------------------------------------------------

/// A unit read from disk; `beta_true` is absent for real data.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord {
    pub data: UnitData,
    pub beta_true: Option<f64>,
}

impl From<SimulatedUnit> for UnitRecord {
    fn from(u: SimulatedUnit) -> Self {
        UnitRecord {
            data: u.data,
            beta_true: Some(u.beta_true),
        }
    }
}

pub fn write_units(path: &Path, units: &[UnitRecord]) -> Result<()> {
    let rows = units.iter().flat_map(|u| {
        let beta = u.beta_true.map(fmt_f64).unwrap_or_default();
        u.data
            .y
            .iter()
            .zip(&u.data.d)
            .enumerate()
            .map(move |(i, (&y, &d))| {
                vec![
                    u.data.unit_id.to_string(),
                    i.to_string(),
                    u8::from(d).to_string(),
                    fmt_f64(y),
                    beta.clone(),
                ]
            })
    });
    write_csv(path, UNITS_HEADER, rows)
}

/// (obs index, d, y) of one observation row.
type Obs = (usize, bool, f64);

/// Units in order of first appearance; observation rows may be interleaved.
pub fn read_units(path: &Path) -> Result<Vec<UnitRecord>> {
    let recs = read_csv(path, UNITS_HEADER)?;
    let mut order: Vec<u64> = Vec::new();
    let mut acc: HashMap<u64, (Vec<Obs>, Option<f64>)> = HashMap::new();
    for row in rows(path, &recs) {
        let id: u64 = row.parse(0)?;
        let obs: usize = row.parse(1)?;
        let d = row.bool(2)?;
        let y: f64 = row.parse(3)?;
        let beta = match row.str(4)? {
            "" => None,
            _ => Some(row.parse::<f64>(4)?),
        };
        let entry = acc.entry(id).or_insert_with(|| {
            order.push(id);
            (Vec::new(), beta)
        });
        entry.0.push((obs, d, y));
    }
    order
        .into_iter()
        .map(|id| {
            let (mut obs, beta_true) = acc.remove(&id).expect("id recorded");
            obs.sort_by_key(|o| o.0);
            let data = UnitData::new(
                id,
                obs.iter().map(|o| o.2).collect(),
                obs.iter().map(|o| o.1).collect(),
            )
            .map_err(|e| artifact(path, e.to_string()))?;
            Ok(UnitRecord { data, beta_true })
        })
        .collect()
}

// --- summaries -------------------------------------------------------------

pub fn write_summaries(path: &Path, summaries: &[PosteriorSummary]) -> Result<()> {
    let rows = summaries.iter().map(|s| {
        let mut r = vec![
            s.unit_id.to_string(),
            fmt_f64(s.beta_median),
            fmt_f64(s.beta_robust_sd),
            fmt_f64(s.p_positive),
            s.n_draws.to_string(),
        ];
        r.extend(s.quantiles.as_array().iter().map(|&q| fmt_f64(q)));
        r.push(s.seed.to_string());
        r
    });
    write_csv(path, SUMMARIES_HEADER, rows)
}

pub fn read_summaries(path: &Path) -> Result<Vec<PosteriorSummary>> {
    let recs = read_csv(path, SUMMARIES_HEADER)?;
    rows(path, &recs)
        .map(|row| {
            Ok(PosteriorSummary {
                unit_id: row.parse(0)?,
                beta_median: row.parse(1)?,
                beta_robust_sd: row.parse(2)?,
                p_positive: row.parse(3)?,
                n_draws: row.parse(4)?,
                quantiles: DrawQuantiles {
                    q05: row.parse(5)?,
                    q16: row.parse(6)?,
                    q50: row.parse(7)?,
                    q84: row.parse(8)?,
                    q95: row.parse(9)?,
                },
                seed: row.parse(10)?,
            })
        })
        .collect()
}

/// One column of retained draws.
pub fn write_draws(path: &Path, draws: &[f64]) -> Result<()> {
    write_csv(path, &["beta"], draws.iter().map(|&b| vec![fmt_f64(b)]))
}

// --- scores ----------------------------------------------------------------

pub fn write_scores(path: &Path, scores: &[ScoreRecord]) -> Result<()> {
    let rows = scores.iter().map(|s| {
        vec![
            s.unit_id.to_string(),
            fmt_f64(s.score),
            s.source.to_string(),
            s.clamped.to_string(),
        ]
    });
    write_csv(path, SCORES_HEADER, rows)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let recs = read_csv(path, SCORES_HEADER)?;
    rows(path, &recs)
        .map(|row| {
            let source: ScoreSource = row
                .str(2)?
                .parse()
                .map_err(|e: Error| artifact(path, e.to_string()))?;
            ScoreRecord::new(row.parse(0)?, row.parse(1)?, source, row.bool(3)?)
                .map_err(|e| artifact(path, e.to_string()))
        })
        .collect()
}

// --- histogram and fit -----------------------------------------------------

pub fn write_histogram(path: &Path, hist: &Histogram, fit: Option<&LindseyFit>) -> Result<()> {
    let rows = (0..hist.len()).map(|k| {
        let mid = hist.midpoint(k);
        vec![
            fmt_f64(hist.left_edge(k)),
            fmt_f64(mid),
            hist.counts[k].to_string(),
            fit.map(|f| fmt_f64(f.fitted_mean(mid))).unwrap_or_default(),
        ]
    });
    write_csv(path, HISTOGRAM_HEADER, rows)
}

/// Read a histogram; the bin width is recovered from the first bin.
pub fn read_histogram(path: &Path) -> Result<Histogram> {
    let recs = read_csv(path, HISTOGRAM_HEADER)?;
    let mut origin = None;
    let mut width = None;
    let mut counts = Vec::with_capacity(recs.len());
    for row in rows(path, &recs) {
        let left: f64 = row.parse(0)?;
        let mid: f64 = row.parse(1)?;
        if origin.is_none() {
            origin = Some(left);
            width = Some(2.0 * (mid - left));
        }
        counts.push(row.parse::<u64>(2)?);
    }
    let (Some(origin), Some(width)) = (origin, width) else {
        return Err(artifact(path, "histogram has no bins"));
    };
    Histogram::new(width, origin, counts).map_err(|e| artifact(path, e.to_string()))
}

fn fit_header(degree: usize) -> Vec<String> {
    let mut h = vec!["degree".to_string(), "center".into(), "scale".into()];
    h.extend((0..=degree).map(|j| format!("eta_{j}")));
    h.extend(["converged".into(), "iterations".into(), "deviance".into()]);
    h
}

pub fn write_fit(path: &Path, fit: &LindseyFit) -> Result<()> {
    let header = fit_header(fit.degree);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut row = vec![
        fit.degree.to_string(),
        fmt_f64(fit.center),
        fmt_f64(fit.scale),
    ];
    row.extend(fit.coefficients.iter().map(|&c| fmt_f64(c)));
    row.extend([
        fit.converged.to_string(),
        fit.iterations.to_string(),
        fmt_f64(fit.deviance),
    ]);
    write_csv(path, &header, [row])
}

pub fn read_fit(path: &Path) -> Result<LindseyFit> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let degree = header
        .len()
        .checked_sub(7)
        .ok_or_else(|| artifact(path, "too few columns"))?;
    let want = fit_header(degree);
    if header.iter().ne(want.iter().map(String::as_str)) {
        return Err(artifact(path, format!("unexpected header {header:?}")));
    }
    let recs: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
    if recs.len() != 1 {
        return Err(artifact(path, format!("expected one row, found {}", recs.len())));
    }
    let row = Row {
        path,
        line: 2,
        rec: &recs[0],
    };
    let stated: usize = row.parse(0)?;
    if stated != degree {
        return Err(artifact(path, format!("degree {stated} but {} coefficients", degree + 1)));
    }
    let fit = LindseyFit {
        degree,
        center: row.parse(1)?,
        scale: row.parse(2)?,
        coefficients: (0..=degree).map(|j| row.parse(3 + j)).collect::<Result<_>>()?,
        converged: row.bool(4 + degree)?,
        iterations: row.parse(5 + degree)?,
        deviance: row.parse(6 + degree)?,
    };
    if fit.scale.is_nan() || fit.scale <= 0.0 {
        return Err(artifact(path, "scale must be positive"));
    }
    Ok(fit)
}

// --- corrections -----------------------------------------------------------

pub fn write_corrections(path: &Path, unit_ids: &[u64], results: &[CorrectionResult]) -> Result<()> {
    let rows = unit_ids.iter().zip(results).map(|(id, r)| {
        vec![
            id.to_string(),
            fmt_f64(r.raw_score),
            fmt_f64(r.correction_term),
            fmt_f64(r.corrected_mean),
            fmt_f64(r.corrected_sd),
            r.variance_clamped.to_string(),
        ]
    });
    write_csv(path, CORRECTIONS_HEADER, rows)
}

pub fn read_corrections(path: &Path) -> Result<Vec<(u64, CorrectionResult)>> {
    let recs = read_csv(path, CORRECTIONS_HEADER)?;
    rows(path, &recs)
        .map(|row| {
            Ok((
                row.parse(0)?,
                CorrectionResult {
                    raw_score: row.parse(1)?,
                    correction_term: row.parse(2)?,
                    corrected_mean: row.parse(3)?,
                    corrected_sd: row.parse(4)?,
                    variance_clamped: row.bool(5)?,
                },
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, -0.0, 1.0 / 3.0, 1e-300, -2.5e17, f64::MIN_POSITIVE, 0.1 + 0.2] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn missing_file_is_missing_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("units.csv");
        assert!(matches!(read_units(&p), Err(Error::MissingInput(q)) if q == p));
        assert!(matches!(read_fit(&dir.path().join("fit_d2.csv")), Err(Error::MissingInput(_))));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.csv");
        std::fs::write(&p, "unit_id,score\n1,0.5\n").unwrap();
        assert!(matches!(read_scores(&p), Err(Error::Artifact { .. })));
    }

    #[test]
    fn fit_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fit_d3.csv");
        let fit = LindseyFit {
            degree: 3,
            coefficients: vec![4.1, -0.2, -0.5, 0.01],
            center: 0.125,
            scale: 1.0625,
            converged: true,
            iterations: 7,
            deviance: 31.5,
        };
        write_fit(&p, &fit).unwrap();
        assert_eq!(read_fit(&p).unwrap(), fit);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("degree,center,scale,eta_0,eta_1,eta_2,eta_3,converged"));
    }

    #[test]
    fn units_round_trip_with_and_without_truth() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("units.csv");
        let units = vec![
            UnitRecord {
                data: UnitData::new(3, vec![0.1, 0.2, 1.3], vec![false, true, true]).unwrap(),
                beta_true: Some(1.0),
            },
            UnitRecord {
                data: UnitData::new(1, vec![-0.5, 0.7, 0.0, 2.0], vec![false, false, true, true])
                    .unwrap(),
                beta_true: None,
            },
        ];
        write_units(&p, &units).unwrap();
        assert_eq!(read_units(&p).unwrap(), units);
    }

    #[test]
    fn histogram_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let h = Histogram::new(0.25, -1.5, vec![0, 3, 9, 4, 0, 1]).unwrap();
        write_histogram(&p, &h, None).unwrap();
        let back = read_histogram(&p).unwrap();
        assert_eq!(back.counts, h.counts);
        assert_eq!(back.origin, h.origin);
        assert_eq!(back.bin_width, h.bin_width);
    }
}
