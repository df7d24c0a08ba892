//! Pipeline configuration and its `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! scenario = 2
//! seed = 7
//! lindsey_degrees = 2, 5
//! output_dir = out/scenario2
//! ```
//!
//! Unknown keys are rejected. Relative `output_dir` paths resolve against
//! the working directory of the process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gibbs::{DEFAULT_BURN_IN, DEFAULT_N_ITER};
use crate::sim::{EffectLaw, Scenario};

/// Every recognised key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("scenario", "1", "simulation scenario id, 1-6"),
    ("null_count", "900", "units with zero effect"),
    ("nonnull_count", "100", "units with an effect drawn from effect_law"),
    ("n_per_unit", "30", "observations per unit"),
    ("treated_per_unit", "15", "observations with state variable 1 (the last ones)"),
    (
        "effect_law",
        "table",
        "non-null effect law: table | constant:C | normal:MEAN,SD | exponential:RATE",
    ),
    ("noise_sd", "1", "residual standard deviation"),
    ("seed", "1", "single source of all randomness"),
    ("n_iter", "11000", "Gibbs iterations per unit"),
    ("burn_in", "1000", "initial Gibbs iterations discarded"),
    ("histogram_width", "0.25", "bin width for Lindsey's method"),
    ("lindsey_degrees", "2,5", "comma-separated polynomial degrees"),
    ("sigma", "1", "sampling SD of scores in Tweedie's formula"),
    ("output_dir", "out", "directory for all artifacts"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scenario: Scenario,
    pub n_iter: usize,
    pub burn_in: usize,
    pub histogram_width: f64,
    pub lindsey_degrees: Vec<usize>,
    pub sigma: f64,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scenario: Scenario::standard(1, 1).expect("scenario 1 exists"),
            n_iter: DEFAULT_N_ITER,
            burn_in: DEFAULT_BURN_IN,
            histogram_width: 0.25,
            lindsey_degrees: vec![2, 5],
            sigma: 1.0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.n_iter <= self.burn_in {
            return Err(Error::Config(format!(
                "n_iter ({}) must exceed burn_in ({})",
                self.n_iter, self.burn_in
            )));
        }
        if !(self.histogram_width > 0.0 && self.histogram_width.is_finite()) {
            return Err(Error::Config("histogram_width must be positive".into()));
        }
        if self.lindsey_degrees.is_empty() || self.lindsey_degrees.contains(&0) {
            return Err(Error::Config(
                "lindsey_degrees must be a non-empty list of degrees >= 1".into(),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        Ok(())
    }

    /// Parse config text, then apply `key=value` overrides in order.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(&pairs)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut scenario_id = 1u32;
        let mut law: Option<EffectLaw> = None;
        let mut cfg = PipelineConfig::default();
        let s = &mut cfg.scenario;
        for (k, v) in pairs {
            match k.as_str() {
                "scenario" => scenario_id = num(k, v)?,
                "null_count" => s.null_count = num(k, v)?,
                "nonnull_count" => s.nonnull_count = num(k, v)?,
                "n_per_unit" => s.n_per_unit = num(k, v)?,
                "treated_per_unit" => s.treated_per_unit = num(k, v)?,
                "effect_law" => law = if v == "table" { None } else { Some(v.parse()?) },
                "noise_sd" => s.noise_sd = num(k, v)?,
                "seed" => s.seed = num(k, v)?,
                "n_iter" => cfg.n_iter = num(k, v)?,
                "burn_in" => cfg.burn_in = num(k, v)?,
                "histogram_width" => cfg.histogram_width = num(k, v)?,
                "lindsey_degrees" => {
                    cfg.lindsey_degrees = v
                        .split(',')
                        .map(|d| num::<usize>(k, d.trim()))
                        .collect::<Result<_>>()?
                }
                "sigma" => cfg.sigma = num(k, v)?,
                "output_dir" => cfg.output_dir = PathBuf::from(v),
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            }
        }
        cfg.scenario.id = scenario_id;
        cfg.scenario.effect_law = match law {
            Some(l) => l,
            None => Scenario::table_law(scenario_id).map_err(|e| Error::Config(e.to_string()))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; parsing it back gives an equal config.
    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let law = if Scenario::table_law(s.id).ok() == Some(s.effect_law) {
            "table".to_string()
        } else {
            s.effect_law.to_string()
        };
        let degrees: Vec<String> = self.lindsey_degrees.iter().map(|d| d.to_string()).collect();
        let mut out = String::new();
        let _ = writeln!(out, "scenario = {}", s.id);
        let _ = writeln!(out, "null_count = {}", s.null_count);
        let _ = writeln!(out, "nonnull_count = {}", s.nonnull_count);
        let _ = writeln!(out, "n_per_unit = {}", s.n_per_unit);
        let _ = writeln!(out, "treated_per_unit = {}", s.treated_per_unit);
        let _ = writeln!(out, "effect_law = {law}");
        let _ = writeln!(out, "noise_sd = {}", s.noise_sd);
        let _ = writeln!(out, "seed = {}", s.seed);
        let _ = writeln!(out, "n_iter = {}", self.n_iter);
        let _ = writeln!(out, "burn_in = {}", self.burn_in);
        let _ = writeln!(out, "histogram_width = {}", self.histogram_width);
        let _ = writeln!(out, "lindsey_degrees = {}", degrees.join(","));
        let _ = writeln!(out, "sigma = {}", self.sigma);
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        out
    }

    /// Human-readable listing of keys and defaults.
    pub fn keys_help() -> String {
        let mut out = String::from("Config keys (key = value, '#' starts a comment):\n");
        for (k, d, desc) in KEYS {
            let _ = writeln!(out, "  {k:<18} default {d:<8} {desc}");
        }
        out
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = PipelineConfig::parse("", &[]).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn defaults_table_matches_default_config() {
        let pairs: Vec<(String, String)> = KEYS
            .iter()
            .map(|(k, d, _)| (k.to_string(), d.to_string()))
            .collect();
        assert_eq!(PipelineConfig::from_pairs(&pairs).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn overrides_apply_after_file() {
        let cfg = PipelineConfig::parse(
            "scenario = 6 # exp\nseed=3\n\nlindsey_degrees = 5",
            &["seed=4".into(), "n_iter=200".into(), "burn_in=20".into()],
        )
        .unwrap();
        assert_eq!(cfg.scenario.id, 6);
        assert_eq!(cfg.scenario.effect_law, EffectLaw::Exponential { rate: 1.0 / 3.0 });
        assert_eq!(cfg.scenario.seed, 4);
        assert_eq!(cfg.n_iter, 200);
        assert_eq!(cfg.lindsey_degrees, vec![5]);
    }

    #[test]
    fn explicit_effect_law() {
        let cfg = PipelineConfig::parse("effect_law = normal:2,0.5", &[]).unwrap();
        assert_eq!(cfg.scenario.effect_law, EffectLaw::Normal { mean: 2.0, sd: 0.5 });
    }

    #[test]
    fn rejects_bad_config() {
        for text in [
            "bogus = 1",
            "seed",
            "seed = x",
            "scenario = 9",
            "burn_in = 20000",
            "lindsey_degrees = 0,2",
            "histogram_width = -1",
            "treated_per_unit = 30",
        ] {
            assert!(
                matches!(PipelineConfig::parse(text, &[]), Err(Error::Config(_))),
                "{text}"
            );
        }
        assert!(PipelineConfig::parse("", &["nokey".into()]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let cfg = PipelineConfig::parse(
            "scenario=3\neffect_law=exponential:2\nhistogram_width=0.05\nsigma=1.5",
            &[],
        )
        .unwrap();
        assert_eq!(PipelineConfig::parse(&cfg.to_text(), &[]).unwrap(), cfg);
        let d = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&d.to_text(), &[]).unwrap(), d);
    }

    #[test]
    fn help_lists_every_key() {
        let help = PipelineConfig::keys_help();
        for (k, d, _) in KEYS {
            assert!(help.contains(k) && help.contains(d));
        }
    }
}
