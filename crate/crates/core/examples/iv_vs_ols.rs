//! With large skill shocks, stayers are positively selected and OLS
//! overstates own-occupation accumulation; lagged choices as instruments
//! pull the diagonal back toward the truth.

use roylab::estimators::{estimate, Method};
use roylab::experiment::{find_scenario, simulate_panel};

pub fn run() -> roylab::Result<()> {
    let cfg = find_scenario("vlarge-shocks").unwrap().with_overrides(&["n_workers=3000".into()])?;
    let params = cfg.params()?;
    let panel = simulate_panel(&cfg, &params, 0)?;
    let occ = cfg.occupations()?;
    let g = cfg.grouping()?;

    let ols = estimate(Method::Ols, &panel, &params.frame, &g, occ.len(), occ.reference_index())?;
    let iv = estimate(Method::Iv, &panel, &params.frame, &g, occ.len(), occ.reference_index())?;
    println!("{:<6} {:<16} {:>8} {:>8} {:>8}", "age", "occupation", "truth", "ols", "iv");
    for a in 0..g.len() {
        for k in 0..occ.len() {
            println!(
                "{:<6} {:<16} {:>8.4} {:>8.4} {:>8.4}",
                g.label(a),
                occ.label(k),
                params.gamma.get(a, k, k),
                ols.gamma(a, k, k).unwrap_or(f64::NAN),
                iv.gamma(a, k, k).unwrap_or(f64::NAN)
            );
        }
    }
    let y = params.frame.last_year;
    for k in 0..occ.len() {
        println!(
            "{:<16} final price error: ols {:+.4}  iv {:+.4}",
            occ.label(k),
            ols.pi_cum_at(y, k).unwrap_or(f64::NAN) - params.pi_cum(y, k),
            iv.pi_cum_at(y, k).unwrap_or(f64::NAN) - params.pi_cum(y, k)
        );
    }
    Ok(())
}

fn main() -> roylab::Result<()> {
    run()
}
