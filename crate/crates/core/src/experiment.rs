//! Config-driven Monte Carlo runs: simulate, estimate, aggregate, report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::descriptives::Descriptives;
use crate::dgp::{rep_seed, simulate_careers, CohortScheme, SeedConfig};
use crate::error::{Error, Result};
use crate::estimators::{aggregate, estimate, EstimateSet, MCAggregate, Method};
use crate::panel::{flatten, AgeGrouping, OccupationSet, PanelDataset, TimeFrame};
use crate::params::{
    gamma_from_table, source_gamma_table, GammaTable, ParameterSet, ShockFamily, ShockLaw,
    SwitchCostForm, DEFAULT_CROSS_SCALE,
};

/// Everything about the simulated economy that the builtin scenarios share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub occupations: Vec<String>,
    pub reference_index: usize,
    pub age_groups: Vec<(u32, u32)>,
    pub entry_age: u32,
    pub exit_age: u32,
    pub first_year: i32,
    pub base_end: i32,
    pub last_year: i32,
    /// Log price levels during the base period.
    pub price_levels: Vec<f64>,
    /// Annual log price change after the base period.
    pub price_drifts: Vec<f64>,
    pub initial_skill_scale: f64,
    pub seed_shares: Vec<f64>,
    pub seed_wage_means: Vec<f64>,
    pub seed_wage_sds: Vec<f64>,
    pub cohort_scheme: CohortScheme,
    /// Full-strength accumulation table `[age group][from][to]`; the builtin
    /// table is used when absent.
    pub gamma_table: Option<Vec<Vec<Vec<f64>>>>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let occ = OccupationSet::default();
        let g = AgeGrouping::default();
        let f = TimeFrame::default();
        let seed = SeedConfig::with_defaults(1, 0);
        Self {
            occupations: occ.labels().to_vec(),
            reference_index: occ.reference_index(),
            age_groups: g.bounds().to_vec(),
            entry_age: g.entry_age(),
            exit_age: g.exit_age(),
            first_year: f.first_year,
            base_end: f.base_end,
            last_year: f.last_year,
            price_levels: vec![0.0; 4],
            price_drifts: vec![0.008, 0.002, -0.004, -0.006],
            initial_skill_scale: 3.0,
            seed_shares: seed.shares,
            seed_wage_means: seed.wage_means,
            seed_wage_sds: seed.wage_sds,
            cohort_scheme: CohortScheme::default(),
            gamma_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default = "default_n")]
    pub n_workers: usize,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    pub shocks: ShockLaw,
    #[serde(default = "default_cross")]
    pub cross_scale: f64,
    #[serde(default)]
    pub switch_cost: f64,
    #[serde(default)]
    pub switch_cost_form: SwitchCostForm,
    #[serde(default = "zeros4")]
    pub amenity_trend: Vec<f64>,
    #[serde(default)]
    pub amenity_dispersion: f64,
    pub estimators: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub world: WorldConfig,
}

fn default_n() -> usize {
    Profile::Desk.n_workers()
}
fn default_reps() -> usize {
    Profile::Desk.repetitions()
}
fn default_seed() -> u64 {
    20_240_601
}
fn default_cross() -> f64 {
    DEFAULT_CROSS_SCALE
}
fn zeros4() -> Vec<f64> {
    vec![0.0; 4]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }

    pub fn n_workers(self) -> usize {
        match self {
            Profile::Desk => 5_000,
            Profile::Paper => 50_000,
        }
    }

    pub fn repetitions(self) -> usize {
        match self {
            Profile::Desk => 20,
            Profile::Paper => 100,
        }
    }
}

impl ExperimentConfig {
    fn builtin(name: &str, shocks: ShockLaw, estimators: &[&str]) -> Self {
        Self {
            scenario: name.to_string(),
            n_workers: default_n(),
            repetitions: default_reps(),
            base_seed: default_seed(),
            shocks,
            cross_scale: DEFAULT_CROSS_SCALE,
            switch_cost: 0.0,
            switch_cost_form: SwitchCostForm::Multiplicative,
            amenity_trend: zeros4(),
            amenity_dispersion: 0.0,
            estimators: estimators.iter().map(|s| s.to_string()).collect(),
            out_dir: None,
            world: WorldConfig::default(),
        }
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.n_workers = profile.n_workers();
        self.repetitions = profile.repetitions();
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Apply dotted-path `key=value` overrides. Values are parsed as JSON
    /// when possible and taken as strings otherwise; unknown keys are errors.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            let value: Value =
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut v, key, value)?;
        }
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for s in &self.estimators {
            let m = Method::parse(s)?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }

    pub fn occupations(&self) -> Result<OccupationSet> {
        OccupationSet::new(self.world.occupations.clone(), self.world.reference_index)
    }

    pub fn grouping(&self) -> Result<AgeGrouping> {
        AgeGrouping::new(self.world.age_groups.clone(), self.world.entry_age, self.world.exit_age)
    }

    pub fn frame(&self) -> Result<TimeFrame> {
        TimeFrame::new(self.world.first_year, self.world.base_end, self.world.last_year)
    }

    fn gamma_table(&self, k: usize, l: usize) -> Result<GammaTable> {
        match &self.world.gamma_table {
            None => {
                let t = source_gamma_table();
                if t.n_occupations != k || t.n_age_groups != l {
                    return Err(Error::Config(
                        "the builtin accumulation table covers 4 occupations and 3 age groups; \
                         supply world.gamma_table"
                            .into(),
                    ));
                }
                Ok(t)
            }
            Some(t) => {
                if t.len() != l || t.iter().any(|a| a.len() != k || a.iter().any(|r| r.len() != k)) {
                    return Err(Error::Config("world.gamma_table has the wrong shape".into()));
                }
                Ok(GammaTable {
                    n_age_groups: l,
                    n_occupations: k,
                    cells: t.iter().flatten().flatten().map(|v| Some(*v)).collect(),
                })
            }
        }
    }

    pub fn params(&self) -> Result<ParameterSet> {
        let occ = self.occupations()?;
        let grouping = self.grouping()?;
        let frame = self.frame()?;
        let k = occ.len();
        if self.world.price_levels.len() != k || self.world.price_drifts.len() != k {
            return Err(Error::Config("price levels and drifts need one entry per occupation".into()));
        }
        let mut shock_law = self.shocks.clone();
        if shock_law.family == ShockFamily::None {
            shock_law.sigma_multiplier = 0.0;
        }
        let p = ParameterSet {
            frame,
            prices: ParameterSet::price_path(&frame, &self.world.price_levels, &self.world.price_drifts),
            gamma: gamma_from_table(&self.gamma_table(k, grouping.len())?, self.cross_scale)?,
            shock_law,
            switch_cost: self.switch_cost,
            switch_cost_form: self.switch_cost_form,
            amenity_trend: self.amenity_trend.clone(),
            amenity_dispersion: self.amenity_dispersion,
            reference_index: occ.reference_index(),
            initial_skill_scale: self.world.initial_skill_scale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn seed_config(&self, rep: usize) -> SeedConfig {
        SeedConfig {
            n_workers: self.n_workers,
            shares: self.world.seed_shares.clone(),
            wage_means: self.world.seed_wage_means.clone(),
            wage_sds: self.world.seed_wage_sds.clone(),
            scheme: self.world.cohort_scheme,
            seed: rep_seed(self.base_seed, rep as u64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.trim().is_empty() {
            return Err(Error::Config("scenario name is empty".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators configured".into()));
        }
        self.methods()?;
        self.params()?;
        self.seed_config(0).validate(self.world.occupations.len())?;
        Ok(())
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if !map.contains_key(*part) {
                    return Err(Error::Config(format!("unknown config key '{key}'")));
                }
                map.get_mut(*part).unwrap()
            }
            Value::Array(arr) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("unknown config key '{key}'")))?;
                arr.get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index out of range in '{key}'")))?
            }
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    Ok(())
}

/// The eight named scenarios of the Monte Carlo study, at desk scale.
pub fn builtin_scenarios() -> Vec<ExperimentConfig> {
    let g = |m: f64, rho: f64| ShockLaw::gaussian(m, rho);
    let mut out = vec![
        ExperimentConfig::builtin("no-shocks", ShockLaw::none(), &["ols", "fe", "fe-nobase"]),
        ExperimentConfig::builtin("moderate-shocks", g(0.5, 0.0), &["ols", "iv", "fe"]),
        ExperimentConfig::builtin("vlarge-shocks", g(1.5, 0.0), &["ols", "iv", "fe"]),
        ExperimentConfig::builtin("persistent-shocks", g(0.5, 0.3), &["ols", "iv"]),
    ];
    let mut c = ExperimentConfig::builtin("switch-costs-no-shocks", ShockLaw::none(), &["ols"]);
    c.cross_scale = 1.0;
    c.switch_cost = 0.05;
    out.push(c);
    let mut c = ExperimentConfig::builtin("moderate-switch-costs", g(0.5, 0.0), &["ols", "iv"]);
    c.switch_cost = 0.05;
    out.push(c);
    let mut c = ExperimentConfig::builtin("high-switch-costs", g(1.5, 0.0), &["ols", "iv"]);
    c.switch_cost = 0.2;
    out.push(c);
    let mut c = ExperimentConfig::builtin("trends-amenities", g(0.5, 0.0), &["ols", "amenity"]);
    c.amenity_trend = vec![0.02, 0.0, 0.0, 0.0];
    out.push(c);
    out
}

/// Scenarios outside the builtin list that are still addressable by name.
pub fn extra_scenarios() -> Vec<ExperimentConfig> {
    let mut c = ExperimentConfig::builtin(
        "moderate-switch-costs-c075",
        ShockLaw::gaussian(0.5, 0.0),
        &["ols", "iv"],
    );
    c.switch_cost = 0.075;
    vec![c]
}

pub fn find_scenario(name: &str) -> Option<ExperimentConfig> {
    builtin_scenarios()
        .into_iter()
        .chain(extra_scenarios())
        .find(|c| c.scenario == name)
}

/// One repetition's simulated panel.
pub fn simulate_panel(cfg: &ExperimentConfig, params: &ParameterSet, rep: usize) -> Result<PanelDataset> {
    let careers = simulate_careers(&cfg.seed_config(rep), params, &cfg.grouping()?)?;
    flatten(&careers, &params.frame)
}

#[derive(Debug, Clone, Serialize)]
pub struct RepFailure {
    pub rep: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorSummary {
    pub price_mae: Option<f64>,
    pub price_max_error: Option<f64>,
    pub final_price_error: Vec<Option<f64>>,
    pub diag_gamma_bias: Option<Vec<Vec<Option<f64>>>>,
    pub cross_gamma_overshoot: Option<f64>,
    pub dropped_columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport {
    pub method: Method,
    pub n_success: usize,
    pub failures: Vec<RepFailure>,
    pub summary: Option<EstimatorSummary>,
    pub aggregate: Option<MCAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub config: ExperimentConfig,
    pub estimators: BTreeMap<String, EstimatorReport>,
    /// Switches per repetition.
    pub switch_counts: Vec<usize>,
    pub n_rows: Vec<usize>,
    /// Descriptive panels of repetition 1.
    pub descriptives: Option<Descriptives>,
    pub wall_clock_secs: f64,
    pub threads: usize,
}

impl ExperimentReport {
    pub fn aggregate(&self, method: Method) -> Option<&MCAggregate> {
        self.estimators.get(method.tag())?.aggregate.as_ref()
    }

    pub fn mean_switches(&self) -> f64 {
        self.switch_counts.iter().sum::<usize>() as f64 / self.switch_counts.len().max(1) as f64
    }

    /// Write `<dir>/<scenario>/...`: per-estimator CSVs, descriptives and
    /// `report.json`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let root = dir.join(&self.scenario);
        for (tag, er) in &self.estimators {
            if let Some(agg) = &er.aggregate {
                agg.write_all(&root.join(tag))?;
            }
        }
        if let Some(d) = &self.descriptives {
            d.write_all(&root.join("descriptives"))?;
        }
        let path = root.join("report.json");
        crate::panel::write_text(&path, &serde_json::to_string_pretty(self)?)?;
        Ok(root)
    }
}

struct RepOutcome {
    estimates: Vec<(Method, std::result::Result<EstimateSet, String>)>,
    switches: usize,
    rows: usize,
    descriptives: Option<Descriptives>,
}

fn run_rep(cfg: &ExperimentConfig, params: &ParameterSet, methods: &[Method], rep: usize) -> Result<RepOutcome> {
    let grouping = cfg.grouping()?;
    let panel = simulate_panel(cfg, params, rep)?;
    let k = params.n_occupations();
    let estimates = methods
        .iter()
        .map(|&m| {
            let r = estimate(m, &panel, &params.frame, &grouping, k, params.reference_index)
                .map_err(|e| e.to_string());
            (m, r)
        })
        .collect();
    let descriptives = if rep == 0 {
        Some(Descriptives::compute(&panel, k, params.frame.years(), None)?)
    } else {
        None
    };
    Ok(RepOutcome {
        estimates,
        switches: panel.switch_count(),
        rows: panel.deltas.len(),
        descriptives,
    })
}

/// Run every repetition (in parallel on the current rayon pool), aggregate,
/// and return the report. A failing estimator on one repetition is recorded
/// and the batch continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let params = cfg.params()?;
    let methods = cfg.methods()?;
    let outcomes: Vec<Result<RepOutcome>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| run_rep(cfg, &params, &methods, r))
        .collect();

    let mut per_method: BTreeMap<Method, (Vec<EstimateSet>, Vec<RepFailure>)> = BTreeMap::new();
    for m in &methods {
        per_method.insert(*m, (Vec::new(), Vec::new()));
    }
    let mut switch_counts = Vec::new();
    let mut n_rows = Vec::new();
    let mut descriptives = None;
    for (rep, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                switch_counts.push(o.switches);
                n_rows.push(o.rows);
                if o.descriptives.is_some() {
                    descriptives = o.descriptives;
                }
                for (m, r) in o.estimates {
                    let slot = per_method.get_mut(&m).unwrap();
                    match r {
                        Ok(e) => slot.0.push(e),
                        Err(error) => slot.1.push(RepFailure { rep: rep + 1, error }),
                    }
                }
            }
            Err(e) => {
                for slot in per_method.values_mut() {
                    slot.1.push(RepFailure {
                        rep: rep + 1,
                        error: e.to_string(),
                    });
                }
            }
        }
    }

    let mut estimators = BTreeMap::new();
    for (m, (ests, failures)) in per_method {
        let mut report = EstimatorReport {
            method: m,
            n_success: ests.len(),
            failures,
            summary: None,
            aggregate: None,
            error: None,
        };
        match aggregate(&ests, Some(&params)) {
            Ok(agg) => {
                let mut dropped: Vec<String> = ests.iter().flat_map(|e| e.dropped.clone()).collect();
                dropped.sort();
                dropped.dedup();
                report.summary = Some(EstimatorSummary {
                    price_mae: agg.price_mae(),
                    price_max_error: agg.price_max_error(),
                    final_price_error: (0..agg.n_occupations).map(|k| agg.final_price_error(k)).collect(),
                    diag_gamma_bias: agg.diag_gamma_bias(),
                    cross_gamma_overshoot: agg.cross_gamma_overshoot(),
                    dropped_columns: dropped,
                });
                report.aggregate = Some(agg);
            }
            Err(e) => report.error = Some(e.to_string()),
        }
        estimators.insert(m.tag().to_string(), report);
    }

    Ok(ExperimentReport {
        scenario: cfg.scenario.clone(),
        config: cfg.clone(),
        estimators,
        switch_counts,
        n_rows,
        descriptives,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    })
}
