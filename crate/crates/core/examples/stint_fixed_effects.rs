//! Occupation-stint fixed effects on wage levels, with and without a
//! base period of constant prices.

use roylab::estimators::{estimate, Method};
use roylab::experiment::{find_scenario, simulate_panel};

pub fn run() -> roylab::Result<()> {
    for scenario in ["no-shocks", "moderate-shocks"] {
        let cfg = find_scenario(scenario).unwrap().with_overrides(&["n_workers=2000".into()])?;
        let params = cfg.params()?;
        let panel = simulate_panel(&cfg, &params, 0)?;
        let occ = cfg.occupations()?;
        let g = cfg.grouping()?;
        let y = params.frame.last_year;
        println!("{scenario}: {} level rows", panel.levels.len());
        for m in [Method::FeStint, Method::FeNobase] {
            let est = estimate(m, &panel, &params.frame, &g, occ.len(), occ.reference_index())?;
            let errs: Vec<String> = (0..occ.len())
                .map(|k| format!("{:+.4}", est.pi_cum_at(y, k).unwrap_or(f64::NAN) - params.pi_cum(y, k)))
                .collect();
            println!("  {m:<10} final price errors {}", errs.join(" "));
        }
    }
    Ok(())
}

fn main() -> roylab::Result<()> {
    run()
}
