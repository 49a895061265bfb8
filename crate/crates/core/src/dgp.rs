//! Synthetic seed population and forward simulation of careers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{age_group, AgeGrouping, Career, TimeFrame, Year, YearRecord};
use crate::params::{ParameterSet, SwitchCostForm};
use crate::truncnorm::UpperTruncatedNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CohortScheme {
    /// A first-year cross-section with ages uniform over the working life,
    /// followed by one cohort of entry-age workers in every later year.
    #[default]
    CrossSectionPlusCohorts,
    /// Every worker enters at the entry age in a uniformly drawn year.
    UniformEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedConfig {
    /// Size of the initial cross-section; later cohorts are scaled so the
    /// panel keeps roughly this many workers each year.
    pub n_workers: usize,
    pub shares: Vec<f64>,
    pub wage_means: Vec<f64>,
    pub wage_sds: Vec<f64>,
    #[serde(default)]
    pub scheme: CohortScheme,
    #[serde(default)]
    pub seed: u64,
}

impl SeedConfig {
    pub fn with_defaults(n_workers: usize, seed: u64) -> Self {
        Self {
            n_workers,
            shares: vec![0.25, 0.30, 0.32, 0.13],
            wage_means: vec![4.5, 4.3, 4.2, 4.0],
            wage_sds: vec![0.35; 4],
            scheme: CohortScheme::default(),
            seed,
        }
    }

    pub fn validate(&self, n_occupations: usize) -> Result<()> {
        if self.n_workers == 0 {
            return Err(Error::Config("n_workers must be >= 1".into()));
        }
        for (name, v) in [
            ("shares", &self.shares),
            ("wage_means", &self.wage_means),
            ("wage_sds", &self.wage_sds),
        ] {
            if v.len() != n_occupations {
                return Err(Error::Config(format!(
                    "{name} has {} entries for {n_occupations} occupations",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if self.shares.iter().any(|s| *s < 0.0) || (self.shares.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("occupation shares must be >= 0 and sum to 1".into()));
        }
        if self.wage_sds.iter().any(|s| *s < 0.0) {
            return Err(Error::Config("initial wage dispersion must be >= 0".into()));
        }
        Ok(())
    }
}

/// Amenity levels by year, zero through the base period.
#[derive(Debug, Clone, PartialEq)]
pub struct AmenityState {
    pub frame: TimeFrame,
    /// `[year index][occupation]`
    pub levels: Vec<Vec<f64>>,
    pub dispersion: f64,
}

impl AmenityState {
    pub fn from_params(params: &ParameterSet) -> Self {
        let k = params.n_occupations();
        let levels = params
            .frame
            .years()
            .map(|y| (0..k).map(|kk| params.amenity(y, kk)).collect())
            .collect();
        Self {
            frame: params.frame,
            levels,
            dispersion: params.amenity_dispersion,
        }
    }

    pub fn level(&self, year: Year, k: usize) -> f64 {
        self.levels[self.frame.year_index(year)][k]
    }
}

/// Skill implied by an observed initial wage.
pub fn decompose_initial_wage(w0: f64, k0: usize, year: Year, params: &ParameterSet) -> f64 {
    w0 - params.price(year, k0)
}

/// Skills in every occupation other than `k0`, each drawn below the bound
/// that keeps `k0` the wage-maximizing choice. Entry `k0` of the result is `s_k0`.
pub fn draw_latent_skills<R: Rng + ?Sized>(
    s_k0: f64,
    k0: usize,
    prices: &[f64],
    scale: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w0 = s_k0 + prices[k0];
    let mut skills = vec![0.0; prices.len()];
    for (k, p) in prices.iter().enumerate() {
        if k == k0 {
            skills[k] = s_k0;
            continue;
        }
        let d = UpperTruncatedNormal::new(w0, scale, w0 - p)?;
        skills[k] = d.sample(rng);
    }
    Ok(skills)
}

/// Seed for repetition `r` of an experiment.
pub fn rep_seed(base_seed: u64, r: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(r.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent, schedule-free RNG for one worker.
pub fn worker_rng(seed: u64, worker_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker_id);
    rng
}

#[derive(Debug, Clone, Copy)]
struct Entrant {
    worker_id: u64,
    year: Year,
    /// `None` when the age is drawn from the worker's own stream.
    age: Option<u32>,
}

fn entrants(seed: &SeedConfig, frame: &TimeFrame, grouping: &AgeGrouping) -> Vec<Entrant> {
    let n = seed.n_workers;
    match seed.scheme {
        CohortScheme::CrossSectionPlusCohorts => {
            let span = (grouping.exit_age() - grouping.entry_age() + 1) as f64;
            let cohort = ((n as f64) / span).round() as usize;
            let mut out: Vec<Entrant> = (0..n)
                .map(|i| Entrant {
                    worker_id: i as u64,
                    year: frame.first_year,
                    age: None,
                })
                .collect();
            for year in frame.first_year + 1..=frame.last_year {
                for _ in 0..cohort {
                    out.push(Entrant {
                        worker_id: out.len() as u64,
                        year,
                        age: Some(grouping.entry_age()),
                    });
                }
            }
            out
        }
        CohortScheme::UniformEntry => (0..n)
            .map(|i| {
                let span = frame.n_years() as u64;
                let mut r = worker_rng(seed.seed ^ 0xa5a5_a5a5, i as u64);
                Entrant {
                    worker_id: i as u64,
                    year: frame.first_year + r.random_range(0..span) as Year,
                    age: Some(grouping.entry_age()),
                }
            })
            .collect(),
    }
}

fn categorical<R: Rng + ?Sized>(shares: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, s) in shares.iter().enumerate() {
        acc += s;
        if u < acc {
            return k;
        }
    }
    shares.iter().rposition(|s| *s > 0.0).unwrap_or(0)
}

/// Occupation maximizing the decision value; ties go to `k_prev`, then to the
/// lowest index.
pub fn choose(values: &[f64], k_prev: usize) -> usize {
    let mut best = k_prev;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Decision values for a worker coming from `k_prev`.
pub fn decision_values(
    wages: &[f64],
    amenities: &[f64],
    k_prev: usize,
    cost: f64,
    form: SwitchCostForm,
) -> Vec<f64> {
    wages
        .iter()
        .zip(amenities)
        .enumerate()
        .map(|(k, (w, a))| {
            let u = w + a;
            if k == k_prev || cost == 0.0 {
                u
            } else {
                match form {
                    SwitchCostForm::Multiplicative => (1.0 - cost) * u,
                    SwitchCostForm::Additive => u - cost,
                }
            }
        })
        .collect()
}

fn simulate_one(
    entrant: Entrant,
    seed: &SeedConfig,
    params: &ParameterSet,
    amenities: &AmenityState,
    grouping: &AgeGrouping,
) -> Result<Career> {
    let frame = &params.frame;
    let k_n = params.n_occupations();
    let sampler = params.shock_law.sampler()?;
    let mut rng = worker_rng(seed.seed, entrant.worker_id);

    let age0 = entrant
        .age
        .unwrap_or_else(|| rng.random_range(grouping.entry_age()..=grouping.exit_age()));
    let t0 = entrant.year;
    let k0 = categorical(&seed.shares, &mut rng);
    let z: f64 = StandardNormal.sample(&mut rng);
    let w0 = seed.wage_means[k0] + seed.wage_sds[k0] * z;
    let s_k0 = decompose_initial_wage(w0, k0, t0, params);
    let mut skills = draw_latent_skills(
        s_k0,
        k0,
        params.prices_at(t0),
        params.initial_skill_scale,
        &mut rng,
    )?;
    let mut shocks = vec![0.0; k_n];
    let amenity_noise = if amenities.dispersion > 0.0 {
        Some(Normal::new(0.0, amenities.dispersion).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };

    let mut records = Vec::new();
    records.push(YearRecord {
        year: t0,
        age: age0,
        occupation: k0,
        skills: skills.clone(),
        shocks: shocks.clone(),
        amenity: amenities.level(t0, k0),
        log_wage: params.price(t0, k0) + skills[k0],
    });

    let last = frame
        .last_year
        .min(t0 + (grouping.exit_age() - age0) as Year);
    let mut k_prev = k0;
    let mut age = age0;
    let mut wages = vec![0.0; k_n];
    let mut amen = vec![0.0; k_n];
    for year in t0 + 1..=last {
        let a = age_group(age, grouping)?;
        let gamma_row = params.gamma.row(a, k_prev);
        for k in 0..k_n {
            shocks[k] = sampler.rho() * shocks[k] + sampler.innovation(&mut rng);
            skills[k] += gamma_row[k] + shocks[k];
        }
        let prices = params.prices_at(year);
        for k in 0..k_n {
            wages[k] = prices[k] + skills[k];
            amen[k] = amenities.level(year, k)
                + amenity_noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        }
        let values = decision_values(
            &wages,
            &amen,
            k_prev,
            params.switch_cost,
            params.switch_cost_form,
        );
        let k = choose(&values, k_prev);
        age += 1;
        records.push(YearRecord {
            year,
            age,
            occupation: k,
            skills: skills.clone(),
            shocks: shocks.clone(),
            amenity: amen[k],
            log_wage: wages[k],
        });
        k_prev = k;
    }

    Ok(Career {
        worker_id: entrant.worker_id,
        entry_year: t0,
        entry_age: age0,
        records,
    })
}

/// Simulate every worker of the seed population forward through the frame.
/// Output order and content do not depend on the thread pool size.
pub fn simulate_careers(
    seed: &SeedConfig,
    params: &ParameterSet,
    grouping: &AgeGrouping,
) -> Result<Vec<Career>> {
    params.validate()?;
    seed.validate(params.n_occupations())?;
    if params.gamma.n_age_groups() != grouping.len() {
        return Err(Error::Config(format!(
            "gamma has {} age groups, grouping has {}",
            params.gamma.n_age_groups(),
            grouping.len()
        )));
    }
    let amenities = AmenityState::from_params(params);
    entrants(seed, &params.frame, grouping)
        .into_par_iter()
        .map(|e| simulate_one(e, seed, params, &amenities, grouping))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{gamma_from_table, source_gamma_table, GammaTensor, ShockLaw};

    pub(crate) fn base_params(frame: TimeFrame) -> ParameterSet {
        ParameterSet {
            frame,
            prices: ParameterSet::price_path(&frame, &[0.0; 4], &[0.0; 4]),
            gamma: GammaTensor::zeros(3, 4),
            shock_law: ShockLaw::none(),
            switch_cost: 0.0,
            switch_cost_form: SwitchCostForm::Multiplicative,
            amenity_trend: vec![0.0; 4],
            amenity_dispersion: 0.0,
            reference_index: 2,
            initial_skill_scale: 3.0,
        }
    }

    #[test]
    fn decomposition_round_trip() {
        let frame = TimeFrame::default();
        let mut p = base_params(frame);
        p.prices = ParameterSet::price_path(&frame, &[0.7, 0.0, 0.0, 0.0], &[0.0; 4]);
        let s = decompose_initial_wage(3.2, 0, 1975, &p);
        assert!((s - 2.5).abs() < 1e-12);
        assert_eq!(p.price(1975, 0) + s, 3.2);
        assert_eq!(decompose_initial_wage(0.0, 1, 1975, &p), 0.0);
    }

    #[test]
    fn latent_skills_keep_initial_choice_optimal() {
        let prices = [0.3, -0.2, 0.0, 0.5];
        let mut rng = worker_rng(1, 0);
        for _ in 0..2000 {
            let s = draw_latent_skills(4.0, 1, &prices, 3.0, &mut rng).unwrap();
            let w: Vec<f64> = prices.iter().zip(&s).map(|(p, s)| p + s).collect();
            for k in 0..4 {
                assert!(w[k] <= w[1] + 1e-12);
            }
        }
    }

    #[test]
    fn ties_prefer_incumbent_then_lowest_index() {
        assert_eq!(choose(&[1.0, 1.0, 1.0], 2), 2);
        assert_eq!(choose(&[1.0, 2.0, 2.0], 0), 1);
        assert_eq!(choose(&[3.0, 2.0, 2.0], 1), 0);
    }

    #[test]
    fn static_world_never_switches() {
        let frame = TimeFrame::default();
        let p = base_params(frame);
        let seed = SeedConfig::with_defaults(300, 4);
        let careers = simulate_careers(&seed, &p, &AgeGrouping::default()).unwrap();
        for c in &careers {
            assert_eq!(c.switches(), 0);
            let w0 = c.records[0].log_wage;
            assert!(c.records.iter().all(|r| r.log_wage == w0));
        }
    }

    #[test]
    fn wage_identity_and_choice_optimality() {
        let frame = TimeFrame::default();
        let mut p = base_params(frame);
        p.gamma = gamma_from_table(&source_gamma_table(), 1.0 / 3.0).unwrap();
        p.shock_law = ShockLaw::gaussian(0.5, 0.0);
        p.prices = ParameterSet::price_path(&frame, &[0.0; 4], &[0.01, 0.0, -0.01, 0.0]);
        p.switch_cost = 0.05;
        let seed = SeedConfig::with_defaults(200, 11);
        let careers = simulate_careers(&seed, &p, &AgeGrouping::default()).unwrap();
        for c in &careers {
            for w in c.records.windows(2) {
                let r = &w[1];
                let wages: Vec<f64> = (0..4).map(|k| p.price(r.year, k) + r.skills[k]).collect();
                assert_eq!(r.log_wage, wages[r.occupation]);
                let v = decision_values(&wages, &[0.0; 4], w[0].occupation, 0.05, p.switch_cost_form);
                let best = v.iter().cloned().fold(f64::MIN, f64::max);
                assert_eq!(v[r.occupation], best);
            }
        }
    }

    #[test]
    fn careers_end_at_exit_age_or_last_year() {
        let frame = TimeFrame::default();
        let g = AgeGrouping::default();
        let careers = simulate_careers(&SeedConfig::with_defaults(100, 2), &base_params(frame), &g).unwrap();
        for c in &careers {
            let last = c.records.last().unwrap();
            assert!(last.age == g.exit_age() || last.year == frame.last_year);
        }
        // 100 in the cross-section plus round(100/30) = 3 per later year
        assert_eq!(careers.len(), 100 + 3 * 35);
    }

    #[test]
    fn rep_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|r| rep_seed(7, r)).collect();
        assert_eq!(s.len(), 1000);
    }
}
