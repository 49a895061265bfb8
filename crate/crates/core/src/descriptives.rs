//! Descriptive panels: switcher composition, wage-growth distribution and
//! the evolution of wage quantiles.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{csv_writer, PanelDataset, Year};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    /// Where this year's workers in each occupation came from.
    Entrants,
    /// Where last year's workers in each occupation went.
    Leavers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Counts,
    /// Each destination occupation sums to one.
    SharesOfDestination,
    /// Each origin occupation sums to one.
    SharesOfOrigin,
}

/// Flow counts between occupations plus the sample margin.
///
/// `counts[from][to]` for occupations `0..K`; the extra row `K` (entrants
/// mode: joiners) or extra column `K` (leavers mode: exiters) holds workers
/// entering or leaving the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowMatrix {
    pub direction: FlowDirection,
    pub n_occupations: usize,
    pub year: Option<Year>,
    pub counts: Vec<Vec<u64>>,
}

impl FlowMatrix {
    fn new(direction: FlowDirection, k: usize, year: Option<Year>) -> Self {
        Self {
            direction,
            n_occupations: k,
            year,
            counts: vec![vec![0; k + 1]; k + 1],
        }
    }

    /// Switches only (origin differs from destination, both occupations).
    pub fn off_diagonal(&self) -> Vec<(usize, usize, u64)> {
        let k = self.n_occupations;
        let mut out = Vec::new();
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    out.push((i, j, self.counts[i][j]));
                }
            }
        }
        out
    }

    /// Total inflow into each destination occupation (including joiners).
    pub fn destination_totals(&self) -> Vec<u64> {
        (0..self.n_occupations)
            .map(|j| (0..=self.n_occupations).map(|i| self.counts[i][j]).sum())
            .collect()
    }

    /// Total outflow from each origin occupation (including exits).
    pub fn origin_totals(&self) -> Vec<u64> {
        (0..self.n_occupations)
            .map(|i| self.counts[i].iter().sum())
            .collect()
    }

    pub fn normalized(&self, mode: Normalization) -> Vec<Vec<f64>> {
        let k1 = self.n_occupations + 1;
        let mut out = vec![vec![0.0; k1]; k1];
        for i in 0..k1 {
            for j in 0..k1 {
                let c = self.counts[i][j] as f64;
                let denom = match mode {
                    Normalization::Counts => 1.0,
                    Normalization::SharesOfDestination => {
                        (0..k1).map(|r| self.counts[r][j]).sum::<u64>() as f64
                    }
                    Normalization::SharesOfOrigin => self.counts[i].iter().sum::<u64>() as f64,
                };
                out[i][j] = if denom > 0.0 { c / denom } else { 0.0 };
            }
        }
        out
    }
}

/// Tabulate flows between consecutive years, pooled over all years unless
/// `year` picks the pair ending (entrants) or starting (leavers) in it.
pub fn switcher_flows(
    panel: &PanelDataset,
    k: usize,
    direction: FlowDirection,
    year: Option<Year>,
) -> FlowMatrix {
    let mut m = FlowMatrix::new(direction, k, year);
    for r in &panel.deltas {
        let keep = match (direction, year) {
            (_, None) => true,
            (FlowDirection::Entrants, Some(y)) => r.year == y,
            (FlowDirection::Leavers, Some(y)) => r.year - 1 == y,
        };
        if keep {
            m.counts[r.k_prev][r.k_curr] += 1;
        }
    }
    for r in &panel.levels {
        match direction {
            FlowDirection::Entrants if r.joiner && year.is_none_or(|y| y == r.year) => {
                m.counts[k][r.k] += 1;
            }
            FlowDirection::Leavers if r.exiter && year.is_none_or(|y| y == r.year) => {
                m.counts[r.k][k] += 1;
            }
            _ => {}
        }
    }
    m
}

/// Binned annual log-wage growth. Bins are centred on multiples of the bin
/// width across [-1, 1]; mass beyond sits in two open tail bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `(lo, hi, count)`, tails with infinite bounds.
    pub bins: Vec<(f64, f64, u64)>,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

pub fn wage_growth_hist(panel: &PanelDataset, bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Config("bin width must be > 0".into()));
    }
    if panel.deltas.is_empty() {
        return Err(Error::NoIdentifyingVariation("no wage growth rows".into()));
    }
    let half = (1.0 / bin_width).round() as i64;
    let n_inner = (2 * half + 1) as usize;
    let mut counts = vec![0u64; n_inner + 2];
    for r in &panel.deltas {
        let j = (r.dlogw / bin_width + 0.5).floor() as i64;
        let slot = if j < -half {
            0
        } else if j > half {
            n_inner + 1
        } else {
            (j + half) as usize + 1
        };
        counts[slot] += 1;
    }
    let edge = |j: i64| (j as f64 - 0.5) * bin_width;
    let mut bins = Vec::with_capacity(counts.len());
    bins.push((f64::NEG_INFINITY, edge(-half), counts[0]));
    for j in -half..=half {
        bins.push((edge(j), edge(j + 1), counts[(j + half) as usize + 1]));
    }
    bins.push((edge(half + 1), f64::INFINITY, counts[n_inner + 1]));

    let n = panel.deltas.len();
    let mean = panel.deltas.iter().map(|r| r.dlogw).sum::<f64>() / n as f64;
    let var = panel.deltas.iter().map(|r| (r.dlogw - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(Histogram {
        bin_width,
        bins,
        n,
        mean,
        sd: var.sqrt(),
    })
}

pub const DEFAULT_PROBS: [f64; 3] = [0.10, 0.50, 0.90];

/// Quantile with linear interpolation between order statistics, inclusive of
/// the sample minimum and maximum. `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileRow {
    pub year: Year,
    pub prob: f64,
    /// `None` marks a year without observations.
    pub value: Option<f64>,
}

/// Per-year log-wage quantiles over `years`.
pub fn quantile_paths(
    panel: &PanelDataset,
    years: impl IntoIterator<Item = Year>,
    probs: &[f64],
) -> Result<Vec<QuantileRow>> {
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Config("quantile probabilities must lie in [0, 1]".into()));
    }
    let mut by_year: BTreeMap<Year, Vec<f64>> = BTreeMap::new();
    for r in &panel.levels {
        by_year.entry(r.year).or_default().push(r.logw);
    }
    let mut out = Vec::new();
    for y in years {
        let mut v = by_year.remove(&y).unwrap_or_default();
        v.sort_by(f64::total_cmp);
        for &p in probs {
            out.push(QuantileRow {
                year: y,
                prob: p,
                value: quantile_sorted(&v, p),
            });
        }
    }
    Ok(out)
}

/// The full descriptive bundle for one panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Descriptives {
    pub entrants: FlowMatrix,
    pub leavers: FlowMatrix,
    pub hist: Histogram,
    pub quantiles: Vec<QuantileRow>,
}

impl Descriptives {
    pub fn compute(
        panel: &PanelDataset,
        k: usize,
        years: impl IntoIterator<Item = Year>,
        year_filter: Option<Year>,
    ) -> Result<Self> {
        Ok(Self {
            entrants: switcher_flows(panel, k, FlowDirection::Entrants, year_filter),
            leavers: switcher_flows(panel, k, FlowDirection::Leavers, year_filter),
            hist: wage_growth_hist(panel, 0.01)?,
            quantiles: quantile_paths(panel, years, &DEFAULT_PROBS)?,
        })
    }

    /// `flows_entrants.csv`, `flows_leavers.csv`, `hist.csv`, `quantiles.csv`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        write_flows(&self.entrants, &dir.join("flows_entrants.csv"))?;
        write_flows(&self.leavers, &dir.join("flows_leavers.csv"))?;
        write_hist(&self.hist, &dir.join("hist.csv"))?;
        write_quantiles(&self.quantiles, &dir.join("quantiles.csv"))
    }
}

pub fn write_flows(m: &FlowMatrix, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["year_pair", "k_from", "k_to", "count"]).map_err(err)?;
    let pair = match (m.year, m.direction) {
        (None, _) => "pooled".to_string(),
        (Some(y), FlowDirection::Entrants) => format!("{}-{}", y - 1, y),
        (Some(y), FlowDirection::Leavers) => format!("{}-{}", y, y + 1),
    };
    let k = m.n_occupations;
    let label = |i: usize| {
        if i < k {
            i.to_string()
        } else if m.direction == FlowDirection::Entrants {
            "joiner".to_string()
        } else {
            "exiter".to_string()
        }
    };
    for i in 0..=k {
        for j in 0..=k {
            let margin_cell = match m.direction {
                FlowDirection::Entrants => j == k,
                FlowDirection::Leavers => i == k,
            };
            if margin_cell {
                continue;
            }
            w.write_record([pair.clone(), label(i), label(j), m.counts[i][j].to_string()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_hist(h: &Histogram, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["bin_lo", "bin_hi", "count"]).map_err(err)?;
    for (lo, hi, c) in &h.bins {
        w.write_record([format!("{lo:.6}"), format!("{hi:.6}"), c.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_quantiles(rows: &[QuantileRow], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| Error::csv(path, e);
    w.write_record(["year", "prob", "value"]).map_err(err)?;
    for r in rows {
        w.write_record([
            r.year.to_string(),
            r.prob.to_string(),
            r.value.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{DeltaRow, LevelRow};

    fn d(year: Year, kp: usize, kc: usize, dw: f64) -> DeltaRow {
        DeltaRow {
            worker_id: 0,
            year,
            age_prev: 30,
            k_prev: kp,
            k_curr: kc,
            dlogw: dw,
            k_lag2: None,
            k_lag3: None,
        }
    }

    fn lv(year: Year, k: usize, logw: f64) -> LevelRow {
        LevelRow {
            worker_id: 0,
            year,
            age: 30,
            k,
            logw,
            stint_id: 0,
            tenure: 0,
            joiner: false,
            exiter: false,
        }
    }

    #[test]
    fn single_value_fills_one_bin() {
        let p = PanelDataset {
            deltas: vec![d(1990, 0, 0, 0.01); 5],
            levels: vec![],
        };
        let h = wage_growth_hist(&p, 0.01).unwrap();
        let occupied: Vec<_> = h.bins.iter().filter(|b| b.2 > 0).collect();
        assert_eq!(occupied.len(), 1);
        assert!(occupied[0].0 < 0.01 && occupied[0].1 > 0.01);
        assert_eq!(h.bins.iter().map(|b| b.2).sum::<u64>(), 5);
    }

    #[test]
    fn tails_are_aggregated() {
        let p = PanelDataset {
            deltas: vec![d(1990, 0, 0, -3.0), d(1990, 0, 0, 2.0), d(1990, 0, 0, 0.0)],
            levels: vec![],
        };
        let h = wage_growth_hist(&p, 0.01).unwrap();
        assert_eq!(h.bins.first().unwrap().2, 1);
        assert_eq!(h.bins.last().unwrap().2, 1);
    }

    #[test]
    fn empty_panel_is_an_error() {
        assert!(wage_growth_hist(&PanelDataset::default(), 0.01).is_err());
    }

    #[test]
    fn interpolated_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), Some(1.0));
        assert_eq!(quantile_sorted(&v, 1.0), Some(4.0));
        assert!((quantile_sorted(&v, 0.5).unwrap() - 2.5).abs() < 1e-12);
        assert!((quantile_sorted(&v, 0.1).unwrap() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn constant_wages_give_flat_lines_and_gaps_are_marked() {
        let p = PanelDataset {
            deltas: vec![],
            levels: vec![lv(1990, 0, 4.0), lv(1990, 1, 4.0), lv(1992, 0, 4.0)],
        };
        let q = quantile_paths(&p, 1990..=1992, &DEFAULT_PROBS).unwrap();
        assert!(q.iter().filter(|r| r.year != 1991).all(|r| r.value == Some(4.0)));
        assert!(q.iter().filter(|r| r.year == 1991).all(|r| r.value.is_none()));
    }

    #[test]
    fn flows_and_shares() {
        let mut levels = vec![lv(1991, 2, 4.0)];
        levels[0].joiner = true;
        let p = PanelDataset {
            deltas: vec![d(1991, 0, 1, 0.0), d(1991, 1, 1, 0.0), d(1991, 1, 1, 0.0)],
            levels,
        };
        let m = switcher_flows(&p, 4, FlowDirection::Entrants, None);
        assert_eq!(m.counts[0][1], 1);
        assert_eq!(m.counts[4][2], 1);
        assert_eq!(m.destination_totals(), vec![0, 3, 1, 0]);
        let s = m.normalized(Normalization::SharesOfDestination);
        assert!((s[1][1] - 2.0 / 3.0).abs() < 1e-12);
        let l = switcher_flows(&p, 4, FlowDirection::Leavers, None);
        assert_eq!(l.off_diagonal(), m.off_diagonal());
    }
}
