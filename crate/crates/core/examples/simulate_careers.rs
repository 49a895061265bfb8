//! Simulate one repetition of the moderate-shock world and look at a few careers.

use roylab::dgp::simulate_careers;
use roylab::experiment::find_scenario;
use roylab::panel::flatten;

pub fn run() -> roylab::Result<()> {
    let cfg = find_scenario("moderate-shocks").unwrap().with_overrides(&["n_workers=1000".into()])?;
    let params = cfg.params()?;
    let careers = simulate_careers(&cfg.seed_config(0), &params, &cfg.grouping()?)?;

    let occ = cfg.occupations()?;
    for c in careers.iter().filter(|c| c.switches() > 0).take(3) {
        println!("worker {} enters {} at age {}:", c.worker_id, c.entry_year, c.entry_age);
        for r in &c.records {
            println!("  {} age {:2} {:<16} log wage {:.3}", r.year, r.age, occ.label(r.occupation), r.log_wage);
        }
    }

    let panel = flatten(&careers, &params.frame)?;
    println!(
        "{} workers, {} first-difference rows, {} switches",
        careers.len(),
        panel.deltas.len(),
        panel.switch_count()
    );
    Ok(())
}

fn main() -> roylab::Result<()> {
    run()
}
