//! Simulation scenarios: many small two-group datasets, most with no effect.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::gibbs::UnitData;

/// Distribution of the slope for non-null units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectLaw {
    Constant(f64),
    Normal { mean: f64, sd: f64 },
    /// Density `rate * exp(-rate * x)`, mean `1 / rate`.
    Exponential { rate: f64 },
}

impl EffectLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            EffectLaw::Constant(c) => c,
            EffectLaw::Normal { mean, .. } => mean,
            EffectLaw::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            EffectLaw::Constant(_) => 0.0,
            EffectLaw::Normal { sd, .. } => sd,
            EffectLaw::Exponential { rate } => 1.0 / rate,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            EffectLaw::Constant(c) => c.is_finite(),
            EffectLaw::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            EffectLaw::Exponential { rate } => rate.is_finite() && rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid effect law {self}")))
        }
    }
}

impl fmt::Display for EffectLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectLaw::Constant(c) => write!(f, "constant:{c}"),
            EffectLaw::Normal { mean, sd } => write!(f, "normal:{mean},{sd}"),
            EffectLaw::Exponential { rate } => write!(f, "exponential:{rate}"),
        }
    }
}

impl FromStr for EffectLaw {
    type Err = Error;

    /// `constant:C`, `normal:MEAN,SD` or `exponential:RATE`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse effect law {s:?}"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let law = match (kind.trim(), nums.as_slice()) {
            ("constant", [c]) => EffectLaw::Constant(*c),
            ("normal", [mean, sd]) => EffectLaw::Normal { mean: *mean, sd: *sd },
            ("exponential", [rate]) => EffectLaw::Exponential { rate: *rate },
            _ => return Err(bad()),
        };
        law.validate().map_err(|_| bad())?;
        Ok(law)
    }
}

/// One simulation design.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: u32,
    pub null_count: usize,
    pub nonnull_count: usize,
    pub n_per_unit: usize,
    pub treated_per_unit: usize,
    pub effect_law: EffectLaw,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Scenario {
    /// Non-null effect law for the six standard scenarios.
    pub fn table_law(id: u32) -> Result<EffectLaw> {
        Ok(match id {
            1 => EffectLaw::Constant(1.0),
            2 => EffectLaw::Constant(3.0),
            3 => EffectLaw::Normal { mean: 1.0, sd: 1.0 },
            4 => EffectLaw::Normal { mean: 3.0, sd: 1.0 },
            5 => EffectLaw::Exponential { rate: 1.0 },
            6 => EffectLaw::Exponential { rate: 1.0 / 3.0 },
            other => return Err(Error::domain(format!("scenario id {other} not in 1..=6"))),
        })
    }

    /// Standard scenario: 900 null and 100 non-null units of 30
    /// observations, 15 of them treated, unit noise.
    pub fn standard(id: u32, seed: u64) -> Result<Self> {
        Ok(Scenario {
            id,
            null_count: 900,
            nonnull_count: 100,
            n_per_unit: 30,
            treated_per_unit: 15,
            effect_law: Self::table_law(id)?,
            noise_sd: 1.0,
            seed,
        })
    }

    pub fn total_units(&self) -> usize {
        self.null_count + self.nonnull_count
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.id) {
            return Err(Error::domain(format!("scenario id {} not in 1..=6", self.id)));
        }
        if self.total_units() == 0 {
            return Err(Error::domain("scenario has no units"));
        }
        if self.n_per_unit < 3 {
            return Err(Error::domain("n_per_unit must be at least 3"));
        }
        if self.treated_per_unit == 0 || self.treated_per_unit >= self.n_per_unit {
            return Err(Error::domain(format!(
                "treated_per_unit must be in 1..{}, got {}",
                self.n_per_unit, self.treated_per_unit
            )));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::domain(format!("noise_sd must be positive, got {}", self.noise_sd)));
        }
        self.effect_law.validate()
    }
}

/// A generated unit together with its true slope.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedUnit {
    pub data: UnitData,
    pub beta_true: f64,
}

/// Generate all units of a scenario.
///
/// Null units get ids `0..null_count`, non-null units follow. Every unit
/// uses the same design: the first `n - treated` observations are controls.
/// Draws come from a ChaCha8 stream 1 keyed by the scenario seed (the Gibbs
/// sampler uses stream 0), per unit the slope first and then the noise.
pub fn generate(scenario: &Scenario) -> Result<Vec<SimulatedUnit>> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(1);
    let noise = Normal::new(0.0, scenario.noise_sd).map_err(|e| Error::domain(e.to_string()))?;
    let n = scenario.n_per_unit;
    let n_control = n - scenario.treated_per_unit;
    let d: Vec<bool> = (0..n).map(|i| i >= n_control).collect();

    let mut units = Vec::with_capacity(scenario.total_units());
    for j in 0..scenario.total_units() {
        let beta = if j < scenario.null_count {
            0.0
        } else {
            draw_effect(&scenario.effect_law, &mut rng)?
        };
        let y = d
            .iter()
            .map(|&t| {
                let u: f64 = noise.sample(&mut rng);
                if t {
                    beta + u
                } else {
                    u
                }
            })
            .collect();
        units.push(SimulatedUnit {
            data: UnitData::new(j as u64, y, d.clone())?,
            beta_true: beta,
        });
    }
    Ok(units)
}

fn draw_effect(law: &EffectLaw, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(match *law {
        EffectLaw::Constant(c) => c,
        EffectLaw::Normal { mean, sd } => Normal::new(mean, sd)
            .map_err(|e| Error::domain(e.to_string()))?
            .sample(rng),
        EffectLaw::Exponential { rate } => Exp::new(rate)
            .map_err(|e| Error::domain(e.to_string()))?
            .sample(rng),
    })
}
