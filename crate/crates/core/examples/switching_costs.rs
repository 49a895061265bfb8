//! Switching costs keep workers in place: fewer switches on the same seeds,
//! and OLS cross-accumulation overshoots because only large shocks move people.

use roylab::estimators::{estimate, Method};
use roylab::experiment::{find_scenario, simulate_panel};

pub fn run() -> roylab::Result<()> {
    let base = find_scenario("moderate-shocks").unwrap();
    for c in [0.0, 0.02, 0.05, 0.1] {
        let cfg = base.with_overrides(&["n_workers=2000".into(), format!("switch_cost={c}")])?;
        let params = cfg.params()?;
        let panel = simulate_panel(&cfg, &params, 0)?;
        let occ = cfg.occupations()?;
        let g = cfg.grouping()?;
        let est = estimate(Method::Ols, &panel, &params.frame, &g, occ.len(), occ.reference_index())?;
        let (mut sum, mut n) = (0.0, 0);
        for a in 0..g.len() {
            for f in 0..occ.len() {
                for t in (0..occ.len()).filter(|&t| t != f) {
                    if let Some(v) = est.gamma(a, f, t) {
                        sum += v - params.gamma.get(a, f, t);
                        n += 1;
                    }
                }
            }
        }
        println!(
            "c = {c:<4} switches {:>6}  mean cross-gamma overshoot {:+.4}",
            panel.switch_count(),
            sum / n.max(1) as f64
        );
    }
    Ok(())
}

fn main() -> roylab::Result<()> {
    run()
}
