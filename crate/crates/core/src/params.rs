//! Data-generating truth: price paths, the skill-accumulation tensor, the shock
//! law, switching costs and amenity trends.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{TimeFrame, Year};

/// Mean annual log-skill change indexed by (age group, previous occupation,
/// current occupation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTensor {
    n_age_groups: usize,
    n_occupations: usize,
    values: Vec<f64>,
}

impl GammaTensor {
    pub fn zeros(n_age_groups: usize, n_occupations: usize) -> Self {
        Self {
            n_age_groups,
            n_occupations,
            values: vec![0.0; n_age_groups * n_occupations * n_occupations],
        }
    }

    pub fn n_age_groups(&self) -> usize {
        self.n_age_groups
    }

    pub fn n_occupations(&self) -> usize {
        self.n_occupations
    }

    fn offset(&self, a: usize, from: usize, to: usize) -> usize {
        (a * self.n_occupations + from) * self.n_occupations + to
    }

    pub fn get(&self, a: usize, from: usize, to: usize) -> f64 {
        self.values[self.offset(a, from, to)]
    }

    pub fn set(&mut self, a: usize, from: usize, to: usize, value: f64) {
        let i = self.offset(a, from, to);
        self.values[i] = value;
    }

    /// Row of accumulation rates into every occupation for origin `from`.
    pub fn row(&self, a: usize, from: usize) -> &[f64] {
        let start = self.offset(a, from, 0);
        &self.values[start..start + self.n_occupations]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A possibly incomplete table of accumulation values, indexed like
/// [`GammaTensor`]. Cells are `None` when the source does not report them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTable {
    pub n_age_groups: usize,
    pub n_occupations: usize,
    /// Row-major `[age_group][from][to]`.
    pub cells: Vec<Option<f64>>,
}

impl GammaTable {
    pub fn get(&self, a: usize, from: usize, to: usize) -> Option<f64> {
        self.cells[(a * self.n_occupations + from) * self.n_occupations + to]
    }
}

/// Stayer and switcher accumulation rates used as the data-generating truth
/// for the four broad occupation groups, as `[from][to][age group]`.
/// Off-diagonal entries are the scaled-down values used in the default
/// experiments (one third of the empirical source values).
pub const DEFAULT_GAMMA: [[[f64; 3]; 4]; 4] = [
    [
        [0.048, 0.016, 0.003],
        [0.063, 0.009, -0.010],
        [0.023, -0.011, -0.022],
        [-0.008, -0.036, -0.004],
    ],
    [
        [0.088, 0.027, 0.009],
        [0.044, 0.016, 0.001],
        [0.056, 0.019, -0.008],
        [0.010, -0.034, -0.024],
    ],
    [
        [0.075, 0.042, 0.021],
        [0.036, 0.022, 0.000],
        [0.020, 0.008, -0.007],
        [-0.017, -0.014, -0.009],
    ],
    [
        [0.099, 0.063, 0.041],
        [0.090, 0.048, 0.015],
        [0.106, 0.075, 0.037],
        [0.019, 0.005, -0.011],
    ],
];

/// Cross-accumulation scale applied to [`source_gamma_table`] in the default
/// experiments.
pub const DEFAULT_CROSS_SCALE: f64 = 1.0 / 3.0;

/// Full-strength empirical accumulation table: diagonal cells as in
/// [`DEFAULT_GAMMA`], off-diagonal cells three times larger.
pub fn source_gamma_table() -> GammaTable {
    let (l, k) = (3, 4);
    let mut cells = vec![None; l * k * k];
    for a in 0..l {
        for from in 0..k {
            for to in 0..k {
                let v = DEFAULT_GAMMA[from][to][a];
                let v = if from == to { v } else { v / DEFAULT_CROSS_SCALE };
                cells[(a * k + from) * k + to] = Some(v);
            }
        }
    }
    GammaTable {
        n_age_groups: l,
        n_occupations: k,
        cells,
    }
}

/// Build the accumulation tensor from a source table: diagonal cells copied,
/// off-diagonal cells multiplied by `cross_scale`.
pub fn gamma_from_table(source: &GammaTable, cross_scale: f64) -> Result<GammaTensor> {
    if !cross_scale.is_finite() || cross_scale < 0.0 {
        return Err(Error::Config(format!("cross scale must be >= 0, got {cross_scale}")));
    }
    let mut g = GammaTensor::zeros(source.n_age_groups, source.n_occupations);
    for a in 0..source.n_age_groups {
        for from in 0..source.n_occupations {
            for to in 0..source.n_occupations {
                let v = source.get(a, from, to).ok_or(Error::MissingCell {
                    age_group: a,
                    from,
                    to,
                })?;
                g.set(a, from, to, if from == to { v } else { cross_scale * v });
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShockFamily {
    None,
    Gaussian,
    Empirical,
}

/// Idiosyncratic skill shocks `u_t = rho * u_{t-1} + eta_t`, with innovations
/// of standard deviation `sigma_multiplier * sigma_ref`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockLaw {
    pub family: ShockFamily,
    pub sigma_multiplier: f64,
    /// Reference dispersion of annual log wage growth.
    #[serde(default = "default_sigma_ref")]
    pub sigma_ref: f64,
    #[serde(default)]
    pub rho: f64,
    /// Draws resampled (after centering and rescaling) for the empirical family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_sample: Option<Vec<f64>>,
}

pub const DEFAULT_SIGMA_REF: f64 = 0.15;

fn default_sigma_ref() -> f64 {
    DEFAULT_SIGMA_REF
}

impl ShockLaw {
    pub fn none() -> Self {
        Self {
            family: ShockFamily::None,
            sigma_multiplier: 0.0,
            sigma_ref: DEFAULT_SIGMA_REF,
            rho: 0.0,
            empirical_sample: None,
        }
    }

    pub fn gaussian(sigma_multiplier: f64, rho: f64) -> Self {
        Self {
            family: ShockFamily::Gaussian,
            sigma_multiplier,
            sigma_ref: DEFAULT_SIGMA_REF,
            rho,
            empirical_sample: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_multiplier >= 0.0 && self.sigma_multiplier.is_finite()) {
            return Err(Error::Config(format!(
                "sigma multiplier must be >= 0, got {}",
                self.sigma_multiplier
            )));
        }
        if !(self.sigma_ref >= 0.0 && self.sigma_ref.is_finite()) {
            return Err(Error::Config(format!("sigma_ref must be >= 0, got {}", self.sigma_ref)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.family == ShockFamily::Empirical {
            match &self.empirical_sample {
                Some(s) if s.len() >= 2 && s.iter().all(|v| v.is_finite()) => {}
                _ => {
                    return Err(Error::Config(
                        "empirical shocks need at least two finite sample draws".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Innovation standard deviation; zero for the `none` family.
    pub fn innovation_sd(&self) -> f64 {
        match self.family {
            ShockFamily::None => 0.0,
            _ => self.sigma_multiplier * self.sigma_ref,
        }
    }

    pub fn sampler(&self) -> Result<ShockSampler> {
        self.validate()?;
        let sd = self.innovation_sd();
        let standardized = match (self.family, &self.empirical_sample) {
            (ShockFamily::Empirical, Some(sample)) => {
                let n = sample.len() as f64;
                let mean = sample.iter().sum::<f64>() / n;
                let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                if var <= 0.0 {
                    return Err(Error::Config("empirical shock sample has zero variance".into()));
                }
                let s = var.sqrt();
                Some(sample.iter().map(|v| (v - mean) / s).collect())
            }
            _ => None,
        };
        Ok(ShockSampler {
            sd,
            rho: self.rho,
            standardized,
        })
    }
}

/// Prepared innovation sampler.
#[derive(Debug, Clone)]
pub struct ShockSampler {
    sd: f64,
    rho: f64,
    standardized: Option<Vec<f64>>,
}

impl ShockSampler {
    pub fn is_degenerate(&self) -> bool {
        self.sd == 0.0
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return 0.0;
        }
        let z: f64 = match &self.standardized {
            Some(draws) => draws[rng.random_range(0..draws.len())],
            None => StandardNormal.sample(rng),
        };
        self.sd * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SwitchCostForm {
    /// Switchers value an occupation at `(1 - c) * U`.
    #[default]
    Multiplicative,
    /// Switchers value an occupation at `U - c`.
    Additive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub frame: TimeFrame,
    /// Log skill prices `[year index][occupation]`.
    pub prices: Vec<Vec<f64>>,
    pub gamma: GammaTensor,
    pub shock_law: ShockLaw,
    pub switch_cost: f64,
    pub switch_cost_form: SwitchCostForm,
    /// Per-year amenity change for each occupation after the base period.
    pub amenity_trend: Vec<f64>,
    /// Standard deviation of idiosyncratic amenity draws (per worker-year).
    pub amenity_dispersion: f64,
    pub reference_index: usize,
    /// Scale of the truncated normal for initial latent skills.
    pub initial_skill_scale: f64,
}

impl ParameterSet {
    pub fn n_occupations(&self) -> usize {
        self.gamma.n_occupations()
    }

    /// Prices flat at `levels` through the base period, then linear drifts.
    pub fn price_path(frame: &TimeFrame, levels: &[f64], drifts: &[f64]) -> Vec<Vec<f64>> {
        frame
            .years()
            .map(|y| {
                let steps = (y - frame.base_end).max(0) as f64;
                levels
                    .iter()
                    .zip(drifts)
                    .map(|(l, d)| l + d * steps)
                    .collect()
            })
            .collect()
    }

    pub fn price(&self, year: Year, k: usize) -> f64 {
        self.prices[self.frame.year_index(year)][k]
    }

    pub fn prices_at(&self, year: Year) -> &[f64] {
        &self.prices[self.frame.year_index(year)]
    }

    /// True price change between `year - 1` and `year`.
    pub fn dpi(&self, year: Year, k: usize) -> f64 {
        self.price(year, k) - self.price(year - 1, k)
    }

    /// True price relative to the last base-period year.
    pub fn pi_cum(&self, year: Year, k: usize) -> f64 {
        self.price(year, k) - self.price(self.frame.base_end, k)
    }

    /// Amenity level of occupation `k` in `year`; zero through the base period.
    pub fn amenity(&self, year: Year, k: usize) -> f64 {
        let steps = (year - self.frame.base_end).max(0) as f64;
        self.amenity_trend[k] * steps
    }

    /// Two-year average amenity relative to the reference occupation.
    pub fn amenity_avg_relative(&self, year: Year, k: usize) -> f64 {
        let avg = |kk: usize| 0.5 * (self.amenity(year - 1, kk) + self.amenity(year, kk));
        avg(k) - avg(self.reference_index)
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        let k = self.n_occupations();
        if self.prices.len() != self.frame.n_years() || self.prices.iter().any(|r| r.len() != k) {
            return Err(Error::Config("price matrix does not match frame and occupations".into()));
        }
        if self.prices.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::Config("prices must be finite".into()));
        }
        if !self.gamma.is_finite() {
            return Err(Error::Config("gamma must be finite".into()));
        }
        self.shock_law.validate()?;
        if !(self.switch_cost >= 0.0 && self.switch_cost.is_finite()) {
            return Err(Error::Config(format!(
                "switch cost must be >= 0, got {}",
                self.switch_cost
            )));
        }
        if self.switch_cost_form == SwitchCostForm::Multiplicative && self.switch_cost >= 1.0 {
            return Err(Error::Config("multiplicative switch cost must be below 1".into()));
        }
        if self.amenity_trend.len() != k {
            return Err(Error::Config(format!(
                "amenity trend has {} entries for {k} occupations",
                self.amenity_trend.len()
            )));
        }
        if self.reference_index >= k {
            return Err(Error::Config("reference occupation out of range".into()));
        }
        if self.amenity_trend[self.reference_index] != 0.0 {
            return Err(Error::Config(
                "the reference occupation's amenity trend must be zero".into(),
            ));
        }
        if !(self.amenity_dispersion >= 0.0 && self.amenity_dispersion.is_finite()) {
            return Err(Error::Config("amenity dispersion must be >= 0".into()));
        }
        if !(self.initial_skill_scale > 0.0 && self.initial_skill_scale.is_finite()) {
            return Err(Error::Config("initial skill scale must be > 0".into()));
        }
        let base = self.frame.year_index(self.frame.base_end);
        if self.prices[..=base].windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Config("prices must be constant during the base period".into()));
        }
        Ok(())
    }
}
