// Every example doubles as a smoke test of the capability it demonstrates.

#[allow(dead_code)]
#[path = "../examples/simulate_careers.rs"]
mod simulate_careers;

#[test]
fn simulate_careers_runs() {
    simulate_careers::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/ols_price_paths.rs"]
mod ols_price_paths;

#[test]
fn ols_price_paths_runs() {
    ols_price_paths::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/iv_vs_ols.rs"]
mod iv_vs_ols;

#[test]
fn iv_vs_ols_runs() {
    iv_vs_ols::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/amenity_correction.rs"]
mod amenity_correction;

#[test]
fn amenity_correction_runs() {
    amenity_correction::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/stint_fixed_effects.rs"]
mod stint_fixed_effects;

#[test]
fn stint_fixed_effects_runs() {
    stint_fixed_effects::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/switcher_flows.rs"]
mod switcher_flows;

#[test]
fn switcher_flows_runs() {
    switcher_flows::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/run_scenario.rs"]
mod run_scenario;

#[test]
fn run_scenario_runs() {
    run_scenario::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/truncated_normal.rs"]
mod truncated_normal;

#[test]
fn truncated_normal_runs() {
    truncated_normal::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/switching_costs.rs"]
mod switching_costs;

#[test]
fn switching_costs_runs() {
    switching_costs::run().unwrap();
}
