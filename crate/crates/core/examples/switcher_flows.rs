//! Descriptive panels: who enters each occupation, the wage-growth
//! histogram, and wage-quantile paths.

use roylab::descriptives::{Descriptives, Normalization};
use roylab::experiment::{find_scenario, simulate_panel};

pub fn run() -> roylab::Result<()> {
    let cfg = find_scenario("moderate-shocks").unwrap().with_overrides(&["n_workers=2000".into()])?;
    let params = cfg.params()?;
    let panel = simulate_panel(&cfg, &params, 0)?;
    let occ = cfg.occupations()?;
    let d = Descriptives::compute(&panel, occ.len(), params.frame.years(), None)?;

    let shares = d.entrants.normalized(Normalization::SharesOfDestination);
    println!("rows: origin, columns: destination share of entrants (last row: labour-market joiners)");
    for (i, row) in shares.iter().enumerate() {
        let name = if i < occ.len() { occ.label(i) } else { "joiners" };
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("  {name:<16} {}", cells.join(" "));
    }
    println!("wage growth: mean {:.4}, sd {:.4}, {} obs", d.hist.mean, d.hist.sd, d.hist.n);
    for q in d.quantiles.iter().filter(|q| q.year == params.frame.last_year) {
        println!("  {} p{:02.0}: {:.3}", q.year, q.prob * 100.0, q.value.unwrap_or(f64::NAN));
    }
    Ok(())
}

fn main() -> roylab::Result<()> {
    run()
}
