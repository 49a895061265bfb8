//! Saturated first-difference OLS on a shock-free panel recovers the true
//! cumulative price paths up to the midpoint approximation.

use roylab::estimators::{estimate, Method};
use roylab::experiment::{find_scenario, simulate_panel};

pub fn run() -> roylab::Result<()> {
    let cfg = find_scenario("no-shocks").unwrap().with_overrides(&["n_workers=2000".into()])?;
    let params = cfg.params()?;
    let panel = simulate_panel(&cfg, &params, 0)?;
    let occ = cfg.occupations()?;
    let frame = params.frame;

    let est = estimate(Method::Ols, &panel, &frame, &cfg.grouping()?, occ.len(), occ.reference_index())?;
    println!("{:<16} {:>9} {:>9}", "occupation", "pi_hat", "truth");
    for k in 0..occ.len() {
        let y = frame.last_year;
        println!(
            "{:<16} {:>9.4} {:>9.4}",
            occ.label(k),
            est.pi_cum_at(y, k).unwrap_or(f64::NAN),
            params.pi_cum(y, k)
        );
    }
    for a in 0..cfg.grouping()?.len() {
        let row: Vec<String> = (0..occ.len())
            .map(|k| format!("{:.4}/{:.4}", est.gamma(a, k, k).unwrap_or(f64::NAN), params.gamma.get(a, k, k)))
            .collect();
        println!("diag gamma, age group {a}: {}", row.join("  "));
    }
    Ok(())
}

fn main() -> roylab::Result<()> {
    run()
}
