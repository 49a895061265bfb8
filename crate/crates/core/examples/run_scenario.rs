//! Run a builtin scenario end to end and write its CSVs.
//!
//! `cargo run --release --example run_scenario -- moderate-shocks 20 runs/`

use std::path::PathBuf;

use roylab::estimators::Method;
use roylab::experiment::{find_scenario, run_experiment};

pub fn run_with(name: &str, reps: usize, n_workers: usize, out: Option<PathBuf>) -> roylab::Result<()> {
    let mut cfg = find_scenario(name).ok_or_else(|| roylab::Error::Config(format!("unknown scenario {name}")))?;
    cfg.repetitions = reps;
    cfg.n_workers = n_workers;
    let report = run_experiment(&cfg)?;
    println!(
        "{name}: {reps} reps, {:.0} switches per rep, {:.1}s",
        report.mean_switches(),
        report.wall_clock_secs
    );
    for m in Method::ALL {
        if let Some(a) = report.aggregate(m) {
            let fin: Vec<String> = (0..4)
                .map(|k| a.final_price_error(k).map_or("-".into(), |e| format!("{e:+.4}")))
                .collect();
            println!(
                "  {m:<12} price MAE {:.5}  final errors {}",
                a.price_mae().unwrap_or(f64::NAN),
                fin.join(" ")
            );
        }
    }
    if let Some(dir) = out {
        println!("wrote {}", report.write(&dir)?.display());
    }
    Ok(())
}

pub fn run() -> roylab::Result<()> {
    run_with("moderate-shocks", 2, 1000, None)
}

fn main() -> roylab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first() {
        None => run(),
        Some(name) => {
            let reps = args.get(1).map_or(Ok(20), |s| s.parse()).map_err(|e| roylab::Error::Config(format!("{e}")))?;
            run_with(name, reps, 5000, args.get(2).map(PathBuf::from))
        }
    }
}
