//! Regressor construction for every estimator.
//!
//! Column blocks, in order:
//! - prices: one column per (year after the base period, occupation), valued
//!   `½·[1{k(t−1)=k} + 1{k(t)=k}]` in first differences and `1{k(t)=k}` in levels
//! - stayer accumulation (age group, k): `½·1{k(t−1)=k}·(1 + 1{k(t)=k})`
//! - cross accumulation (age group, k', k≠k'): `½·1{k(t−1)=k', k(t)=k}`
//! - amenity changes (age group, year, k≠ref): `1{a}·(1{k(t)=k} − 1{k(t−1)=k})`
//!
//! Ages index the previous period. Base-period price columns are left out,
//! which pins price changes there to zero.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::SparseRow;
use crate::panel::{age_group, AgeGrouping, PanelDataset, TimeFrame, Year};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ParamKey {
    /// Price change (first differences) or level relative to the base (levels).
    Price { year: Year, k: usize },
    Gamma { age_group: usize, from: usize, to: usize },
    /// Two-year average amenity value relative to the reference occupation.
    Amenity { age_group: usize, year: Year, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub key: ParamKey,
    pub name: String,
}

impl Column {
    fn new(key: ParamKey) -> Self {
        let name = match key {
            ParamKey::Price { year, k } => format!("price[{year},{k}]"),
            ParamKey::Gamma { age_group, from, to } if from == to => {
                format!("gamma_diag[{age_group},{from}]")
            }
            ParamKey::Gamma { age_group, from, to } => {
                format!("gamma_cross[{age_group},{from},{to}]")
            }
            ParamKey::Amenity { age_group, year, k } => format!("psi[{age_group},{year},{k}]"),
        };
        Self { key, name }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Ols,
    Iv,
    Amenity,
    FixedEffects { with_base_period: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruments {
    pub names: Vec<String>,
    pub rows: Vec<SparseRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub kind: DesignKind,
    pub frame: TimeFrame,
    pub n_age_groups: usize,
    pub n_occupations: usize,
    pub columns: Vec<Column>,
    pub rows: Vec<SparseRow>,
    pub response: Vec<f64>,
    /// Index of each row in the panel view it was built from.
    pub obs_index: Vec<usize>,
    pub endogenous: Vec<bool>,
    pub instruments: Option<Instruments>,
    /// Fixed-effect group (stint) of each row, for within estimation.
    pub groups: Option<Vec<u64>>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, key: ParamKey) -> Option<usize> {
        self.columns.iter().position(|c| c.key == key)
    }

    /// Dense copy of one row, mostly for tests and debugging.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols()];
        for &(j, v) in &self.rows[i] {
            out[j] = v;
        }
        out
    }

    /// Sparse triplet dump `row,col_name,value`.
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        let mut w = crate::panel::csv_writer(path)?;
        w.write_record(["row", "col_name", "value"])
            .map_err(|e| Error::csv(path, e))?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                w.write_record([i.to_string(), self.columns[j].name.clone(), v.to_string()])
                    .map_err(|e| Error::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

struct Layout {
    frame: TimeFrame,
    l: usize,
    k: usize,
    columns: Vec<Column>,
    price_first_year: Year,
    price_start: usize,
    diag_start: usize,
    cross_start: usize,
}

impl Layout {
    fn new(frame: &TimeFrame, l: usize, k: usize, price_first_year: Year, with_cross: bool) -> Self {
        let mut columns = Vec::new();
        let price_start = 0;
        for year in price_first_year..=frame.last_year {
            for kk in 0..k {
                columns.push(Column::new(ParamKey::Price { year, k: kk }));
            }
        }
        let diag_start = columns.len();
        for a in 0..l {
            for kk in 0..k {
                columns.push(Column::new(ParamKey::Gamma { age_group: a, from: kk, to: kk }));
            }
        }
        let cross_start = columns.len();
        if with_cross {
            for a in 0..l {
                for from in 0..k {
                    for to in 0..k {
                        if from != to {
                            columns.push(Column::new(ParamKey::Gamma { age_group: a, from, to }));
                        }
                    }
                }
            }
        }
        Self {
            frame: *frame,
            l,
            k,
            columns,
            price_first_year,
            price_start,
            diag_start,
            cross_start,
        }
    }

    fn price(&self, year: Year, k: usize) -> Option<usize> {
        (year >= self.price_first_year && year <= self.frame.last_year)
            .then(|| self.price_start + (year - self.price_first_year) as usize * self.k + k)
    }

    fn diag(&self, a: usize, k: usize) -> usize {
        self.diag_start + a * self.k + k
    }

    fn cross(&self, a: usize, from: usize, to: usize) -> usize {
        debug_assert_ne!(from, to);
        let off = if to > from { to - 1 } else { to };
        self.cross_start + (a * self.k + from) * (self.k - 1) + off
    }

    /// Structural first-difference row.
    fn fd_row(&self, year: Year, a: usize, kp: usize, kc: usize) -> SparseRow {
        let mut row: SparseRow = Vec::with_capacity(4);
        if let Some(pp) = self.price(year, kp) {
            if kp == kc {
                row.push((pp, 1.0));
            } else {
                let pc = self.price(year, kc).expect("same year");
                row.push((pp, 0.5));
                row.push((pc, 0.5));
            }
        }
        if kp == kc {
            row.push((self.diag(a, kp), 1.0));
        } else {
            row.push((self.diag(a, kp), 0.5));
            row.push((self.cross(a, kp, kc), 0.5));
        }
        row.sort_by_key(|e| e.0);
        row
    }
}

fn check_panel(panel: &PanelDataset, k: usize, frame: &TimeFrame) -> Result<()> {
    if k < 2 {
        return Err(Error::Config("need at least two occupations".into()));
    }
    for r in &panel.deltas {
        if r.k_prev >= k || r.k_curr >= k {
            return Err(Error::ShapeMismatch(format!(
                "occupation index out of range for worker {}",
                r.worker_id
            )));
        }
        if !frame.contains(r.year) || !frame.contains(r.year - 1) {
            return Err(Error::ShapeMismatch(format!("year {} outside frame", r.year)));
        }
    }
    Ok(())
}

/// Saturated first-difference design: prices, stayer and cross accumulation.
pub fn build_ols_design(
    panel: &PanelDataset,
    frame: &TimeFrame,
    grouping: &AgeGrouping,
    k: usize,
) -> Result<DesignMatrix> {
    check_panel(panel, k, frame)?;
    if panel.deltas.is_empty() {
        return Err(Error::NoIdentifyingVariation("panel has no first-difference rows".into()));
    }
    let layout = Layout::new(frame, grouping.len(), k, frame.base_end + 1, true);
    let mut rows = Vec::with_capacity(panel.deltas.len());
    let mut response = Vec::with_capacity(panel.deltas.len());
    for r in &panel.deltas {
        let a = age_group(r.age_prev, grouping)?;
        rows.push(layout.fd_row(r.year, a, r.k_prev, r.k_curr));
        response.push(r.dlogw);
    }
    let n = rows.len();
    let ncols = layout.columns.len();
    Ok(DesignMatrix {
        kind: DesignKind::Ols,
        frame: *frame,
        n_age_groups: layout.l,
        n_occupations: k,
        columns: layout.columns,
        rows,
        response,
        obs_index: (0..n).collect(),
        endogenous: vec![false; ncols],
        instruments: None,
        groups: None,
    })
}

/// Number of instrument columns the IV design declares before empty ones are
/// dropped: one per (analysis year, k) plus two lagged-transition blocks.
pub fn iv_instrument_count(frame: &TimeFrame, k: usize, l: usize) -> usize {
    frame.n_analysis_years() * k + 2 * k * k * l
}

/// Lag-instrumented design. The structural columns are those of the OLS
/// design, all treated as endogenous because each involves the current
/// choice. Instruments are the predetermined price indicators `1{k(t−1)=k}`
/// per analysis year and the age-group interacted transitions
/// `(k(t−2), k(t−1))` and `(k(t−3), k(t−2))`.
pub fn build_iv_design(
    panel: &PanelDataset,
    frame: &TimeFrame,
    grouping: &AgeGrouping,
    k: usize,
) -> Result<DesignMatrix> {
    check_panel(panel, k, frame)?;
    let l = grouping.len();
    let layout = Layout::new(frame, l, k, frame.base_end + 1, true);

    let mut names = Vec::with_capacity(iv_instrument_count(frame, k, l));
    for year in frame.analysis_years() {
        for kk in 0..k {
            names.push(format!("z_prev[{year},{kk}]"));
        }
    }
    let lag1_start = names.len();
    for a in 0..l {
        for k2 in 0..k {
            for k1 in 0..k {
                names.push(format!("z_lag21[{a},{k2},{k1}]"));
            }
        }
    }
    let lag2_start = names.len();
    for a in 0..l {
        for k3 in 0..k {
            for k2 in 0..k {
                names.push(format!("z_lag32[{a},{k3},{k2}]"));
            }
        }
    }
    debug_assert_eq!(names.len(), iv_instrument_count(frame, k, l));

    let mut rows = Vec::new();
    let mut zrows = Vec::new();
    let mut response = Vec::new();
    let mut obs_index = Vec::new();
    for (i, r) in panel.deltas.iter().enumerate() {
        let (Some(k2), Some(k3)) = (r.k_lag2, r.k_lag3) else {
            continue;
        };
        if k2 >= k || k3 >= k {
            return Err(Error::ShapeMismatch("lagged occupation out of range".into()));
        }
        let a = age_group(r.age_prev, grouping)?;
        rows.push(layout.fd_row(r.year, a, r.k_prev, r.k_curr));
        let mut z: SparseRow = Vec::with_capacity(3);
        if frame.is_analysis(r.year) {
            let yi = (r.year - frame.base_end - 1) as usize;
            z.push((yi * k + r.k_prev, 1.0));
        }
        z.push((lag1_start + (a * k + k2) * k + r.k_prev, 1.0));
        z.push((lag2_start + (a * k + k3) * k + k2, 1.0));
        zrows.push(z);
        response.push(r.dlogw);
        obs_index.push(i);
    }
    if rows.is_empty() {
        return Err(Error::InsufficientLags(
            "no observation has choices observed in t-2 and t-3".into(),
        ));
    }
    let ncols = layout.columns.len();
    Ok(DesignMatrix {
        kind: DesignKind::Iv,
        frame: *frame,
        n_age_groups: l,
        n_occupations: k,
        columns: layout.columns,
        rows,
        response,
        obs_index,
        endogenous: vec![true; ncols],
        instruments: Some(Instruments { names, rows: zrows }),
        groups: None,
    })
}

/// OLS design plus age-group-by-year amenity change columns for every
/// occupation except the reference.
pub fn build_amenity_design(
    panel: &PanelDataset,
    frame: &TimeFrame,
    grouping: &AgeGrouping,
    k: usize,
    reference: usize,
) -> Result<DesignMatrix> {
    if reference >= k {
        return Err(Error::Config("reference occupation out of range".into()));
    }
    let mut d = build_ols_design(panel, frame, grouping, k)?;
    let l = grouping.len();
    let psi_start = d.columns.len();
    let others: Vec<usize> = (0..k).filter(|&kk| kk != reference).collect();
    for a in 0..l {
        for year in frame.analysis_years() {
            for &kk in &others {
                d.columns.push(Column::new(ParamKey::Amenity { age_group: a, year, k: kk }));
            }
        }
    }
    let per_a = frame.n_analysis_years() * others.len();
    let slot = |kk: usize| others.iter().position(|&o| o == kk);
    for (row, r) in d.rows.iter_mut().zip(&panel.deltas) {
        if !r.is_switch() || !frame.is_analysis(r.year) {
            continue;
        }
        let a = age_group(r.age_prev, grouping)?;
        let base = psi_start + a * per_a + (r.year - frame.base_end - 1) as usize * others.len();
        if let Some(s) = slot(r.k_curr) {
            row.push((base + s, 1.0));
        }
        if let Some(s) = slot(r.k_prev) {
            row.push((base + s, -1.0));
        }
        row.sort_by_key(|e| e.0);
    }
    d.kind = DesignKind::Amenity;
    d.endogenous = vec![false; d.columns.len()];
    Ok(d)
}

/// Levels design for the stint fixed-effects estimator. Stint intercepts are
/// not materialized; `groups` carries the stint of each row and the solver
/// sweeps them out.
///
/// Slopes: for a stint in occupation k, column (a, k) counts the stint years
/// accrued while the worker's previous-year age fell in group a, so stayer
/// accumulation at age-specific rates is matched exactly.
///
/// Without a base period, price columns start in the second sample year and
/// the oldest age group's slope is pinned to zero for every occupation.
pub fn build_fe_design(
    panel: &PanelDataset,
    frame: &TimeFrame,
    grouping: &AgeGrouping,
    k: usize,
    with_base_period: bool,
) -> Result<DesignMatrix> {
    if k < 2 {
        return Err(Error::Config("need at least two occupations".into()));
    }
    if panel.levels.is_empty() {
        return Err(Error::NoIdentifyingVariation("panel has no levels rows".into()));
    }
    let l = grouping.len();
    let first_price = if with_base_period {
        frame.base_end + 1
    } else {
        frame.first_year + 1
    };
    let mut layout = Layout::new(frame, l, k, first_price, false);
    // Pinned slopes keep their slot but are never filled, then removed below.
    let pinned: Vec<usize> = if with_base_period {
        Vec::new()
    } else {
        (0..k).map(|kk| layout.diag(l - 1, kk)).collect()
    };

    let mut rows = Vec::with_capacity(panel.levels.len());
    let mut response = Vec::with_capacity(panel.levels.len());
    let mut groups = Vec::with_capacity(panel.levels.len());
    let mut obs_index = Vec::with_capacity(panel.levels.len());
    let mut exp = vec![0u32; l];
    let mut prev: Option<(u64, u32)> = None;
    for (i, r) in panel.levels.iter().enumerate() {
        if r.k >= k || !frame.contains(r.year) {
            return Err(Error::ShapeMismatch(format!(
                "levels row for worker {} out of range",
                r.worker_id
            )));
        }
        match prev {
            Some((stint, age)) if stint == r.stint_id => {
                exp[age_group(age, grouping)?] += 1;
            }
            _ => exp.iter_mut().for_each(|e| *e = 0),
        }
        prev = Some((r.stint_id, r.age));
        let mut row: SparseRow = Vec::with_capacity(1 + l);
        if let Some(p) = layout.price(r.year, r.k) {
            row.push((p, 1.0));
        }
        for (a, &e) in exp.iter().enumerate() {
            let c = layout.diag(a, r.k);
            if e > 0 && !pinned.contains(&c) {
                row.push((c, e as f64));
            }
        }
        rows.push(row);
        response.push(r.logw);
        groups.push(r.stint_id);
        obs_index.push(i);
    }

    if !pinned.is_empty() {
        let keep: Vec<usize> = (0..layout.columns.len()).filter(|c| !pinned.contains(c)).collect();
        let mut remap = vec![usize::MAX; layout.columns.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        for row in &mut rows {
            for e in row.iter_mut() {
                e.0 = remap[e.0];
            }
        }
        layout.columns = keep.iter().map(|&c| layout.columns[c].clone()).collect();
    }

    let ncols = layout.columns.len();
    Ok(DesignMatrix {
        kind: DesignKind::FixedEffects { with_base_period },
        frame: *frame,
        n_age_groups: l,
        n_occupations: k,
        columns: layout.columns,
        rows,
        response,
        obs_index,
        endogenous: vec![false; ncols],
        instruments: None,
        groups: Some(groups),
    })
}
