//! A rising amenity in one occupation is confounded with its skill price in
//! plain OLS; adding switch-direction columns separates the two.

use roylab::estimators::{estimate, ols_slope, Method};
use roylab::experiment::{find_scenario, simulate_panel};

pub fn run() -> roylab::Result<()> {
    let cfg = find_scenario("trends-amenities").unwrap().with_overrides(&["n_workers=3000".into()])?;
    let params = cfg.params()?;
    let panel = simulate_panel(&cfg, &params, 0)?;
    let occ = cfg.occupations()?;
    let g = cfg.grouping()?;
    let frame = params.frame;

    let ols = estimate(Method::Ols, &panel, &frame, &g, occ.len(), occ.reference_index())?;
    let adj = estimate(Method::OlsAmenity, &panel, &frame, &g, occ.len(), occ.reference_index())?;
    let y = frame.last_year;
    for k in 0..occ.len() {
        println!(
            "{:<16} truth {:+.4}  ols {:+.4}  corrected {:+.4}",
            occ.label(k),
            params.pi_cum(y, k),
            ols.pi_cum_at(y, k).unwrap_or(f64::NAN),
            adj.pi_cum_at(y, k).unwrap_or(f64::NAN)
        );
    }

    // average amenity path of occupation 0 across age groups
    let path: Vec<(f64, f64)> = frame
        .analysis_years()
        .filter_map(|year| {
            let v: Vec<f64> = (0..g.len()).filter_map(|a| adj.psi(a, year, 0)).collect();
            (!v.is_empty()).then(|| (year as f64, v.iter().sum::<f64>() / v.len() as f64))
        })
        .collect();
    println!(
        "estimated amenity trend of {}: {:.4} per year (truth {:.4})",
        occ.label(0),
        ols_slope(&path).unwrap_or(f64::NAN),
        params.amenity_trend[0]
    );
    Ok(())
}

fn main() -> roylab::Result<()> {
    run()
}
