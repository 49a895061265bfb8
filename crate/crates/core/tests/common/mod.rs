#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use roylab::estimators::EstimateSet;
use roylab::panel::{age_group, AgeGrouping, PanelDataset, TimeFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Coef {
    Price(i32, usize),
    Gamma(usize, usize, usize),
}

/// Regressor values of one first-difference observation, written out from
/// the wage-growth equation rather than taken from the design builder.
fn regressors(year: i32, a: usize, kp: usize, kc: usize, frame: &TimeFrame, k: usize) -> Vec<(Coef, f64)> {
    let mut x = Vec::new();
    if year > frame.base_end {
        for kk in 0..k {
            let v = 0.5 * ((kp == kk) as u8 as f64 + (kc == kk) as u8 as f64);
            if v != 0.0 {
                x.push((Coef::Price(year, kk), v));
            }
        }
    }
    if kp == kc {
        x.push((Coef::Gamma(a, kp, kp), 1.0));
    } else {
        x.push((Coef::Gamma(a, kp, kp), 0.5));
        x.push((Coef::Gamma(a, kp, kc), 0.5));
    }
    x
}

/// Brute-force saturated regression: average the response within each
/// (year, age group, previous, current) cell, then solve the count-weighted
/// regression of cell means directly. Only coefficients the solver
/// reports are compared; returns the largest absolute discrepancy and the
/// number of coefficients compared.
pub fn cell_mean_discrepancy(
    panel: &PanelDataset,
    frame: &TimeFrame,
    grouping: &AgeGrouping,
    k: usize,
    est: &EstimateSet,
) -> (f64, usize) {
    let mut cells: BTreeMap<(i32, usize, usize, usize), (f64, f64)> = BTreeMap::new();
    for r in &panel.deltas {
        let a = age_group(r.age_prev, grouping).unwrap();
        let e = cells.entry((r.year, a, r.k_prev, r.k_curr)).or_insert((0.0, 0.0));
        e.0 += r.dlogw;
        e.1 += 1.0;
    }
    let reported = |c: &Coef| match *c {
        Coef::Price(y, kk) => est.dpi_at(y, kk),
        Coef::Gamma(a, f, t) => est.gamma(a, f, t),
    };
    let mut index: BTreeMap<Coef, usize> = BTreeMap::new();
    let rows: Vec<(Vec<(Coef, f64)>, f64, f64)> = cells
        .iter()
        .map(|(&(y, a, kp, kc), &(s, n))| (regressors(y, a, kp, kc, frame, k), s / n, n))
        .collect();
    for (x, _, _) in &rows {
        for (c, _) in x {
            if reported(c).is_some() {
                let next = index.len();
                index.entry(*c).or_insert(next);
            }
        }
    }
    let p = index.len();
    let mut xm = DMatrix::<f64>::zeros(rows.len(), p);
    let mut yv = DVector::<f64>::zeros(rows.len());
    for (i, (x, ybar, n)) in rows.iter().enumerate() {
        let w = n.sqrt();
        for (c, v) in x {
            if let Some(&j) = index.get(c) {
                xm[(i, j)] = w * v;
            }
        }
        yv[i] = w * ybar;
    }
    // Normal equations: the kept columns are well conditioned, and the
    // Cholesky route stays independent of the solver's Householder QR.
    let xtx = xm.transpose() * &xm;
    let beta = xtx
        .cholesky()
        .expect("kept columns must have full rank")
        .solve(&(xm.transpose() * &yv));
    let mut worst: f64 = 0.0;
    for (c, &j) in &index {
        worst = worst.max((beta[j] - reported(c).unwrap()).abs());
    }
    (worst, p)
}

/// Sample moments of a slice: mean, variance, fourth central moment.
pub fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, v, m4)
}

/// Every regular file under `dir` with its bytes, keyed by relative path.
pub fn read_tree(dir: &std::path::Path, skip: &[&str]) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !skip.iter().any(|s| p.file_name().unwrap() == *s) {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
