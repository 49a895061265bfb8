//! Command-line front end: `simulate`, `estimate`, `experiment`, `describe`
//! and `scenarios`. Every subcommand writes under `--out`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::descriptives::Descriptives;
use crate::estimators::{aggregate, estimate, Method};
use crate::experiment::{
    builtin_scenarios, extra_scenarios, find_scenario, run_experiment, simulate_panel, ExperimentConfig,
    Profile,
};
use crate::panel::{write_text, PanelDataset};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "roylab", version, about = "Roy-model Monte Carlo laboratory")]
pub struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "ROYLAB_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one repetition and write its panel.
    Simulate(ConfigArgs),
    /// Estimate one method on a panel read from CSV.
    Estimate(PanelArgs),
    /// Run a full Monte Carlo experiment.
    Experiment(ConfigArgs),
    /// Switcher flows, wage-growth histogram and quantile paths of a panel.
    Describe(PanelArgs),
    /// List the builtin scenarios.
    Scenarios(ScenarioArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    /// Builtin scenario name (see `scenarios`).
    #[arg(long)]
    pub scenario: Option<String>,
    /// Dotted-path override, e.g. `--set shocks.sigma_multiplier=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = ["desk", "paper"])]
    pub profile: Option<String>,
    /// Restrict to these estimators (repeatable).
    #[arg(long = "method")]
    pub methods: Vec<String>,
    /// Repetition index to simulate (`simulate` only).
    #[arg(long, default_value_t = 0)]
    pub rep: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    /// First-difference CSV written by `simulate`.
    #[arg(long)]
    pub panel: PathBuf,
    /// Levels CSV (required by the fixed-effects methods).
    #[arg(long)]
    pub levels: Option<PathBuf>,
    /// Config supplying the world (years, age groups, occupations).
    #[arg(long, conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, default_value = "ols")]
    pub method: String,
    /// Restrict switcher flows to one year (`describe` only).
    #[arg(long)]
    pub year: Option<i32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Print the full configs as JSON instead of names.
    #[arg(long)]
    pub json: bool,
    /// Also list extra scenarios beyond the builtin eight.
    #[arg(long)]
    pub all: bool,
    /// Write one `<name>.json` per scenario into this directory.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

/// Parse `argv`, run, and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Estimate(a) => estimate_cmd(&a),
        Command::Experiment(a) => experiment(&a),
        Command::Describe(a) => describe(&a),
        Command::Scenarios(a) => scenarios(&a),
    })
}

fn base_config(config: &Option<PathBuf>, scenario: &Option<String>) -> Result<ExperimentConfig> {
    match (config, scenario) {
        (Some(p), _) => ExperimentConfig::load(p),
        (None, Some(name)) => find_scenario(name).ok_or_else(|| Error::Config(format!("unknown scenario '{name}'"))),
        (None, None) => Ok(find_scenario("no-shocks").expect("builtin")),
    }
}

fn resolve(a: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = base_config(&a.config, &a.scenario)?;
    if let Some(p) = &a.profile {
        cfg = cfg.with_profile(Profile::parse(p)?);
    }
    let mut cfg = cfg.with_overrides(&a.overrides)?;
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if !a.methods.is_empty() {
        let ms = a.methods.iter().map(|m| Method::parse(m)).collect::<Result<Vec<_>>>()?;
        cfg.estimators = ms.iter().map(|m| m.cli_name().to_string()).collect();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(a: &ConfigArgs) -> Result<()> {
    let cfg = resolve(a)?;
    let params = cfg.params()?;
    let panel = simulate_panel(&cfg, &params, a.rep)?;
    panel.write_deltas_csv(&a.out.join("panel.csv"))?;
    panel.write_levels_csv(&a.out.join("levels.csv"))?;
    write_text(&a.out.join("config.json"), &cfg.to_json()?)?;
    println!(
        "{} rows, {} switches -> {}",
        panel.deltas.len(),
        panel.switch_count(),
        a.out.display()
    );
    Ok(())
}

fn experiment(a: &ConfigArgs) -> Result<()> {
    let cfg = resolve(a)?;
    let report = run_experiment(&cfg)?;
    let dir = report.write(&a.out)?;
    for (tag, er) in &report.estimators {
        let mae = er.summary.as_ref().and_then(|s| s.price_mae);
        match mae {
            Some(m) => println!("{tag:<12} price MAE {m:.5} ({} reps)", er.n_success),
            None => println!("{tag:<12} no estimate ({} failures)", er.failures.len()),
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn read_panel(a: &PanelArgs) -> Result<(ExperimentConfig, PanelDataset)> {
    let cfg = base_config(&a.config, &a.scenario)?.with_overrides(&a.overrides)?;
    let panel = PanelDataset::read_csv(&a.panel, a.levels.as_deref(), &cfg.frame()?, &cfg.grouping()?)?;
    Ok((cfg, panel))
}

fn estimate_cmd(a: &PanelArgs) -> Result<()> {
    let method = Method::parse(&a.method)?;
    let (cfg, panel) = read_panel(a)?;
    let occ = cfg.occupations()?;
    let est = estimate(
        method,
        &panel,
        &cfg.frame()?,
        &cfg.grouping()?,
        occ.len(),
        occ.reference_index(),
    )?;
    let agg = aggregate(std::slice::from_ref(&est), None)?;
    let dir = a.out.join(method.tag());
    agg.write_all(&dir)?;
    if !est.dropped.is_empty() {
        eprintln!("dropped columns: {}", est.dropped.join(", "));
    }
    println!("{} rows -> {}", est.n_obs, dir.display());
    Ok(())
}

fn describe(a: &PanelArgs) -> Result<()> {
    let (cfg, panel) = read_panel(a)?;
    let d = Descriptives::compute(&panel, cfg.occupations()?.len(), cfg.frame()?.years(), a.year)?;
    d.write_all(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn scenarios(a: &ScenarioArgs) -> Result<()> {
    let mut list = builtin_scenarios();
    if a.all {
        list.extend(extra_scenarios());
    }
    if let Some(dir) = &a.dump {
        for c in &list {
            write_text(&dir.join(format!("{}.json", c.scenario)), &c.to_json()?)?;
        }
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&list)?);
    } else {
        for c in &list {
            println!("{}", c.scenario);
        }
    }
    Ok(())
}
