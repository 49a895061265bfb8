//! Least-squares solvers and the estimate containers built from them.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::design::{
    build_amenity_design, build_fe_design, build_iv_design, build_ols_design, DesignKind,
    DesignMatrix, ParamKey,
};
use crate::error::{Error, Result};
use crate::linalg::{self, CholeskyDrop, DenseMatrix, HouseholderQr, SparseRow, SymMatrix};
use crate::panel::{csv_writer, AgeGrouping, PanelDataset, TimeFrame, Year};
use crate::params::ParameterSet;

/// Relative tolerance for declaring a column collinear.
pub const RANK_TOL: f64 = 1e-10;
/// Relative pivot tolerance on the (squared-scale) normal equations.
const CHOL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ols,
    Iv,
    OlsAmenity,
    FeStint,
    FeNobase,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ols,
        Method::Iv,
        Method::OlsAmenity,
        Method::FeStint,
        Method::FeNobase,
    ];

    /// Tag used in reports and output directories.
    pub fn tag(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Iv => "iv",
            Method::OlsAmenity => "ols_amenity",
            Method::FeStint => "fe_stint",
            Method::FeNobase => "fe_nobase",
        }
    }

    /// Short name accepted on the command line and in configs.
    pub fn cli_name(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Iv => "iv",
            Method::OlsAmenity => "amenity",
            Method::FeStint => "fe",
            Method::FeNobase => "fe-nobase",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.cli_name() == s || m.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator '{s}'")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Recovered parameters from one panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSet {
    pub method: Method,
    pub frame: TimeFrame,
    pub n_age_groups: usize,
    pub n_occupations: usize,
    /// `[analysis year][k]` price changes.
    pub dpi: Vec<Vec<Option<f64>>>,
    /// `[year - base_end][k]`, first row is the zero anchor.
    pub pi_cum: Vec<Vec<Option<f64>>>,
    /// `[a][from][to]`, flattened.
    pub gamma_hat: Vec<Option<f64>>,
    /// `[a][analysis year][k]`, flattened; amenity method only.
    pub psi_hat: Option<Vec<Option<f64>>>,
    pub n_obs: usize,
    pub dropped: Vec<String>,
    pub rss: f64,
    /// Uncentered first-stage R² of each structural column (IV only).
    pub first_stage_r2: Vec<(String, f64)>,
}

impl EstimateSet {
    fn empty(method: Method, d: &DesignMatrix) -> Self {
        let (l, k) = (d.n_age_groups, d.n_occupations);
        let na = d.frame.n_analysis_years();
        Self {
            method,
            frame: d.frame,
            n_age_groups: l,
            n_occupations: k,
            dpi: vec![vec![None; k]; na],
            pi_cum: vec![vec![None; k]; na + 1],
            gamma_hat: vec![None; l * k * k],
            psi_hat: None,
            n_obs: d.n_rows(),
            dropped: Vec::new(),
            rss: 0.0,
            first_stage_r2: Vec::new(),
        }
    }

    fn year_slot(&self, year: Year) -> Option<usize> {
        self.frame
            .is_analysis(year)
            .then(|| (year - self.frame.base_end - 1) as usize)
    }

    pub fn dpi_at(&self, year: Year, k: usize) -> Option<f64> {
        self.year_slot(year).and_then(|i| self.dpi[i][k])
    }

    pub fn pi_cum_at(&self, year: Year, k: usize) -> Option<f64> {
        if year < self.frame.base_end || year > self.frame.last_year {
            return None;
        }
        self.pi_cum[(year - self.frame.base_end) as usize][k]
    }

    pub fn gamma(&self, a: usize, from: usize, to: usize) -> Option<f64> {
        self.gamma_hat[(a * self.n_occupations + from) * self.n_occupations + to]
    }

    pub fn psi(&self, a: usize, year: Year, k: usize) -> Option<f64> {
        let i = self.year_slot(year)?;
        let na = self.frame.n_analysis_years();
        self.psi_hat
            .as_ref()
            .and_then(|p| p[(a * na + i) * self.n_occupations + k])
    }

    /// Assign coefficients of a first-difference design.
    fn fill_fd(&mut self, d: &DesignMatrix, coef: &[Option<f64>]) {
        let k = self.n_occupations;
        let na = self.frame.n_analysis_years();
        for (c, b) in d.columns.iter().zip(coef) {
            match c.key {
                ParamKey::Price { year, k: kk } => {
                    if let Some(i) = self.year_slot(year) {
                        self.dpi[i][kk] = *b;
                    }
                }
                ParamKey::Gamma { age_group, from, to } => {
                    self.gamma_hat[(age_group * k + from) * k + to] = *b;
                }
                ParamKey::Amenity { age_group, year, k: kk } => {
                    let i = (year - self.frame.base_end - 1) as usize;
                    let psi = self.psi_hat.get_or_insert_with(|| vec![None; self.n_age_groups * na * k]);
                    // a switch into k lowers wage growth by the full two-year
                    // average amenity gap, so the coefficient is −Ψ̄
                    psi[(age_group * na + i) * k + kk] = b.map(|v| -v);
                }
            }
        }
        self.pi_cum = cumulate_prices(&self.dpi);
    }
}

/// Running sums of price changes, anchored at zero in the last base year.
pub fn cumulate_prices(dpi: &[Vec<Option<f64>>]) -> Vec<Vec<Option<f64>>> {
    let k = dpi.first().map_or(0, |r| r.len());
    let mut out = Vec::with_capacity(dpi.len() + 1);
    let mut acc: Vec<Option<f64>> = vec![Some(0.0); k];
    out.push(acc.clone());
    for row in dpi {
        for (a, d) in acc.iter_mut().zip(row) {
            *a = match (*a, d) {
                (Some(x), Some(y)) => Some(x + y),
                _ => None,
            };
        }
        out.push(acc.clone());
    }
    out
}

fn row_key(row: &SparseRow) -> Vec<(usize, u64)> {
    row.iter().map(|&(j, v)| (j, v.to_bits())).collect()
}

fn sparse_dot(row: &SparseRow, beta: &[Option<f64>]) -> f64 {
    row.iter().map(|&(j, v)| v * beta[j].unwrap_or(0.0)).sum()
}

fn dropped_names(d: &DesignMatrix, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&j| d.columns[j].name.clone()).collect()
}

/// Least squares on a first-difference design (OLS or amenity-augmented).
pub fn solve_ols(d: &DesignMatrix) -> Result<EstimateSet> {
    let method = match d.kind {
        DesignKind::Ols => Method::Ols,
        DesignKind::Amenity => Method::OlsAmenity,
        _ => return Err(Error::Estimation("solve_ols needs an OLS or amenity design".into())),
    };
    if d.n_rows() == 0 {
        return Err(Error::NoIdentifyingVariation("design has no rows".into()));
    }
    let comp = linalg::compress(
        d.rows
            .iter()
            .zip(&d.response)
            .map(|(r, y)| (row_key(r), *y)),
    );
    let w = comp.weights();
    let rows: Vec<SparseRow> = comp
        .keys
        .iter()
        .map(|k| k.iter().map(|&(j, b)| (j, f64::from_bits(b))).collect())
        .collect();
    let x = linalg::weighted_dense(&rows, &w, d.n_cols());
    let y: Vec<f64> = comp.ybar.iter().zip(&w).map(|(y, w)| y * w).collect();
    let sol = linalg::lstsq(&x, &y, RANK_TOL);
    let mut est = EstimateSet::empty(method, d);
    est.fill_fd(d, &sol.coef);
    est.dropped = dropped_names(d, &sol.dropped);
    est.rss = sol.rss + comp.within_ss;
    Ok(est)
}

/// Two-stage least squares: project every endogenous column on the
/// instrument space (exogenous columns instrument themselves), then regress
/// the response on the projections.
pub fn solve_iv(d: &DesignMatrix) -> Result<EstimateSet> {
    let z = d
        .instruments
        .as_ref()
        .ok_or_else(|| Error::Estimation("IV design without instruments".into()))?;
    if d.n_rows() == 0 {
        return Err(Error::InsufficientLags("design has no rows".into()));
    }
    let comp = linalg::compress(
        d.rows
            .iter()
            .zip(&z.rows)
            .zip(&d.response)
            .map(|((x, zr), y)| ((row_key(x), row_key(zr)), *y)),
    );
    let w = comp.weights();
    let unpack = |k: &Vec<(usize, u64)>| -> SparseRow {
        k.iter().map(|&(j, b)| (j, f64::from_bits(b))).collect()
    };
    let xrows: Vec<SparseRow> = comp.keys.iter().map(|(x, _)| unpack(x)).collect();
    let zrows: Vec<SparseRow> = comp.keys.iter().map(|(_, zr)| unpack(zr)).collect();

    // instrument matrix: declared instruments plus exogenous structural columns
    let exo: Vec<usize> = (0..d.n_cols()).filter(|&j| !d.endogenous[j]).collect();
    let nz = z.names.len();
    let mut zfull_rows = zrows.clone();
    for (zr, xr) in zfull_rows.iter_mut().zip(&xrows) {
        for &(j, v) in xr {
            if let Some(p) = exo.iter().position(|&e| e == j) {
                zr.push((nz + p, v));
            }
        }
    }
    let zmat = linalg::weighted_dense(&zfull_rows, &w, nz + exo.len());
    let mut dropped = Vec::new();
    for j in 0..nz {
        if zmat.col(j).iter().all(|v| *v == 0.0) {
            dropped.push(format!("{} (empty instrument)", z.names[j]));
        }
    }
    let zqr = HouseholderQr::new(&zmat, RANK_TOL);
    if zqr.rank() == 0 {
        return Err(Error::NoIdentifyingVariation("instrument matrix has rank zero".into()));
    }

    let x = linalg::weighted_dense(&xrows, &w, d.n_cols());
    let mut xhat = DenseMatrix::zeros(x.nrows(), x.ncols());
    let mut r2 = Vec::new();
    for j in 0..d.n_cols() {
        let col = xhat.col_mut(j);
        col.copy_from_slice(x.col(j));
        let total: f64 = col.iter().map(|v| v * v).sum();
        if d.endogenous[j] {
            zqr.project(col);
            let fitted: f64 = col.iter().map(|v| v * v).sum();
            if total > 0.0 {
                r2.push((d.columns[j].name.clone(), fitted / total));
            }
        }
    }
    let y: Vec<f64> = comp.ybar.iter().zip(&w).map(|(y, w)| y * w).collect();
    let sol = linalg::lstsq(&xhat, &y, RANK_TOL);

    let mut est = EstimateSet::empty(Method::Iv, d);
    est.fill_fd(d, &sol.coef);
    dropped.extend(dropped_names(d, &sol.dropped));
    est.dropped = dropped;
    est.first_stage_r2 = r2;
    est.rss = xrows
        .iter()
        .zip(&comp.ybar)
        .zip(&comp.counts)
        .map(|((r, yb), &n)| n as f64 * (yb - sparse_dot(r, &sol.coef)).powi(2))
        .sum::<f64>()
        + comp.within_ss;
    Ok(est)
}

/// Within-stint least squares on a levels design.
pub fn solve_fe(d: &DesignMatrix) -> Result<EstimateSet> {
    let DesignKind::FixedEffects { with_base_period } = d.kind else {
        return Err(Error::Estimation("solve_fe needs a fixed-effects design".into()));
    };
    let groups = d
        .groups
        .as_ref()
        .ok_or_else(|| Error::Estimation("fixed-effects design without groups".into()))?;

    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<u64, usize> = HashMap::new();
    for (i, g) in groups.iter().enumerate() {
        let s = *slot.entry(*g).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[s].push(i);
    }

    let p = d.n_cols();
    let mut xtx = SymMatrix::zeros(p);
    let mut xty = vec![0.0; p];
    let mut rss_total = 0.0;
    let mut n_obs = 0;
    let mut sums = vec![0.0; p];
    let mut touched: Vec<usize> = Vec::new();
    for rows in members.iter().filter(|m| m.len() >= 2) {
        n_obs += rows.len();
        let n = rows.len() as f64;
        let ybar = rows.iter().map(|&i| d.response[i]).sum::<f64>() / n;
        for &i in rows {
            let yc = d.response[i] - ybar;
            rss_total += yc * yc;
            for (a, &(j, v)) in d.rows[i].iter().enumerate() {
                xty[j] += v * yc;
                if sums[j] == 0.0 && !touched.contains(&j) {
                    touched.push(j);
                }
                sums[j] += v;
                for &(jj, vv) in &d.rows[i][..=a] {
                    xtx.add_sym(j, jj, v * vv);
                }
            }
        }
        for (a, &j) in touched.iter().enumerate() {
            for &jj in &touched[..=a] {
                xtx.add_sym(j, jj, -sums[j] * sums[jj] / n);
            }
        }
        for &j in &touched {
            sums[j] = 0.0;
        }
        touched.clear();
    }
    if n_obs == 0 {
        return Err(Error::NoIdentifyingVariation(
            "every stint is a singleton; nothing is left after demeaning".into(),
        ));
    }

    let chol = CholeskyDrop::new(&xtx, CHOL_TOL);
    let kept = chol.kept();
    let (mut b, ok) = linalg::pcg(&xtx, &xty, kept, 1e-13, 20 * p.max(10));
    if !ok {
        b = chol.solve(&xty);
    }
    let mut coef = vec![None; p];
    for (&j, v) in kept.iter().zip(&b) {
        coef[j] = Some(*v);
    }
    let explained: f64 = kept.iter().zip(&b).map(|(&j, v)| v * xty[j]).sum();

    let method = if with_base_period {
        Method::FeStint
    } else {
        Method::FeNobase
    };
    let mut est = EstimateSet::empty(method, d);
    est.n_obs = n_obs;
    est.rss = (rss_total - explained).max(0.0);
    est.dropped = dropped_names(d, chol.dropped());

    // price levels relative to the first priced year's predecessor
    let frame = d.frame;
    let k = d.n_occupations;
    let mut level: HashMap<(Year, usize), Option<f64>> = HashMap::new();
    for (c, v) in d.columns.iter().zip(&coef) {
        match c.key {
            ParamKey::Price { year, k: kk } => {
                level.insert((year, kk), *v);
            }
            ParamKey::Gamma { age_group, from, to } => {
                est.gamma_hat[(age_group * k + from) * k + to] = *v;
            }
            ParamKey::Amenity { .. } => {}
        }
    }
    if !with_base_period {
        let l = d.n_age_groups;
        for kk in 0..k {
            est.gamma_hat[((l - 1) * k + kk) * k + kk] = Some(0.0);
        }
    }
    let lvl = |year: Year, kk: usize| -> Option<f64> {
        if year <= frame.first_year || (with_base_period && year <= frame.base_end) {
            Some(0.0)
        } else {
            level.get(&(year, kk)).copied().flatten()
        }
    };
    for (i, year) in frame.analysis_years().enumerate() {
        for kk in 0..k {
            est.dpi[i][kk] = match (lvl(year, kk), lvl(year - 1, kk)) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            };
        }
    }
    est.pi_cum = cumulate_prices(&est.dpi);
    Ok(est)
}

/// Build the design for `method` from a panel and solve it.
pub fn estimate(
    method: Method,
    panel: &PanelDataset,
    frame: &TimeFrame,
    grouping: &AgeGrouping,
    k: usize,
    reference: usize,
) -> Result<EstimateSet> {
    match method {
        Method::Ols => solve_ols(&build_ols_design(panel, frame, grouping, k)?),
        Method::OlsAmenity => solve_ols(&build_amenity_design(panel, frame, grouping, k, reference)?),
        Method::Iv => solve_iv(&build_iv_design(panel, frame, grouping, k)?),
        Method::FeStint => solve_fe(&build_fe_design(panel, frame, grouping, k, true)?),
        Method::FeNobase => solve_fe(&build_fe_design(panel, frame, grouping, k, false)?),
    }
}

/// Mean and population standard deviation over the repetitions reporting a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
}

impl Moments {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return Self { mean: None, sd: None, n: 0 };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean: Some(mean),
            sd: Some(var.sqrt()),
            n: v.len(),
        }
    }
}

/// True values aligned with an [`EstimateSet`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub dpi: Vec<Vec<f64>>,
    pub pi_cum: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub psi: Vec<f64>,
}

impl Truth {
    pub fn from_params(p: &ParameterSet) -> Self {
        let f = p.frame;
        let k = p.n_occupations();
        let l = p.gamma.n_age_groups();
        let dpi = f.analysis_years().map(|y| (0..k).map(|kk| p.dpi(y, kk)).collect()).collect();
        let pi_cum = (f.base_end..=f.last_year)
            .map(|y| (0..k).map(|kk| p.pi_cum(y, kk)).collect())
            .collect();
        let mut gamma = Vec::with_capacity(l * k * k);
        for a in 0..l {
            for from in 0..k {
                for to in 0..k {
                    gamma.push(p.gamma.get(a, from, to));
                }
            }
        }
        let mut psi = Vec::new();
        for _a in 0..l {
            for y in f.analysis_years() {
                for kk in 0..k {
                    psi.push(p.amenity_avg_relative(y, kk));
                }
            }
        }
        Self { dpi, pi_cum, gamma, psi }
    }
}

/// Across-repetition summary of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCAggregate {
    pub method: Method,
    pub frame: TimeFrame,
    pub n_age_groups: usize,
    pub n_occupations: usize,
    pub n_reps: usize,
    pub dpi: Vec<Vec<Moments>>,
    pub pi_cum: Vec<Vec<Moments>>,
    pub gamma: Vec<Moments>,
    pub psi: Option<Vec<Moments>>,
    pub truth: Option<Truth>,
    /// Mean cumulative price paths of each repetition, kept for plotting.
    #[serde(skip)]
    pub rep_pi_cum: Vec<Vec<Vec<Option<f64>>>>,
}

/// Summarize repetitions of the same estimator.
pub fn aggregate(estimates: &[EstimateSet], truth: Option<&ParameterSet>) -> Result<MCAggregate> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no estimates to aggregate".into()))?;
    for e in estimates {
        if e.method != first.method
            || e.frame != first.frame
            || e.n_occupations != first.n_occupations
            || e.n_age_groups != first.n_age_groups
            || e.psi_hat.as_ref().map(|p| p.len()) != first.psi_hat.as_ref().map(|p| p.len())
        {
            return Err(Error::ShapeMismatch("estimates differ in shape or method".into()));
        }
    }
    let grid = |get: &dyn Fn(&EstimateSet) -> &Vec<Vec<Option<f64>>>| -> Vec<Vec<Moments>> {
        let g0 = get(first);
        (0..g0.len())
            .map(|i| {
                (0..g0[i].len())
                    .map(|k| Moments::of(estimates.iter().map(|e| get(e)[i][k])))
                    .collect()
            })
            .collect()
    };
    let dpi = grid(&|e| &e.dpi);
    let pi_cum = grid(&|e| &e.pi_cum);
    let gamma = (0..first.gamma_hat.len())
        .map(|i| Moments::of(estimates.iter().map(|e| e.gamma_hat[i])))
        .collect();
    let psi = first.psi_hat.as_ref().map(|p0| {
        (0..p0.len())
            .map(|i| Moments::of(estimates.iter().map(|e| e.psi_hat.as_ref().unwrap()[i])))
            .collect()
    });
    let truth = match truth {
        Some(p) => {
            if p.n_occupations() != first.n_occupations
                || p.gamma.n_age_groups() != first.n_age_groups
                || p.frame != first.frame
            {
                return Err(Error::ShapeMismatch("truth does not match estimates".into()));
            }
            Some(Truth::from_params(p))
        }
        None => None,
    };
    Ok(MCAggregate {
        method: first.method,
        frame: first.frame,
        n_age_groups: first.n_age_groups,
        n_occupations: first.n_occupations,
        n_reps: estimates.len(),
        dpi,
        pi_cum,
        gamma,
        psi,
        truth,
        rep_pi_cum: estimates.iter().map(|e| e.pi_cum.clone()).collect(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MCAggregate {
    pub fn gamma_index(&self, a: usize, from: usize, to: usize) -> usize {
        (a * self.n_occupations + from) * self.n_occupations + to
    }

    pub fn mean_gamma(&self, a: usize, from: usize, to: usize) -> Option<f64> {
        self.gamma[self.gamma_index(a, from, to)].mean
    }

    pub fn mean_pi_cum(&self, year: Year, k: usize) -> Option<f64> {
        self.pi_cum[(year - self.frame.base_end) as usize][k].mean
    }

    /// Mean over analysis years and occupations of the absolute gap between
    /// the mean cumulative price path and the truth.
    pub fn price_mae(&self) -> Option<f64> {
        let t = self.truth.as_ref()?;
        let mut s = 0.0;
        let mut n = 0;
        for (row, trow) in self.pi_cum.iter().zip(&t.pi_cum).skip(1) {
            for (m, tv) in row.iter().zip(trow) {
                s += (m.mean? - tv).abs();
                n += 1;
            }
        }
        Some(s / n as f64)
    }

    /// Same as [`price_mae`](Self::price_mae) for one occupation.
    pub fn price_mae_for(&self, k: usize) -> Option<f64> {
        let t = self.truth.as_ref()?;
        let mut s = 0.0;
        let mut n = 0;
        for (row, trow) in self.pi_cum.iter().zip(&t.pi_cum).skip(1) {
            s += (row[k].mean? - trow[k]).abs();
            n += 1;
        }
        Some(s / n as f64)
    }

    /// Largest absolute gap of the mean cumulative price path.
    pub fn price_max_error(&self) -> Option<f64> {
        let t = self.truth.as_ref()?;
        let mut worst: f64 = 0.0;
        for (row, trow) in self.pi_cum.iter().zip(&t.pi_cum) {
            for (m, tv) in row.iter().zip(trow) {
                worst = worst.max((m.mean? - tv).abs());
            }
        }
        Some(worst)
    }

    /// Signed final-year error of the mean cumulative price of `k`.
    pub fn final_price_error(&self, k: usize) -> Option<f64> {
        let t = self.truth.as_ref()?;
        Some(self.pi_cum.last()?[k].mean? - t.pi_cum.last()?[k])
    }

    /// Mean gap to the truth of each stayer accumulation cell, `[a][k]`.
    pub fn diag_gamma_bias(&self) -> Option<Vec<Vec<Option<f64>>>> {
        let t = self.truth.as_ref()?;
        Some(
            (0..self.n_age_groups)
                .map(|a| {
                    (0..self.n_occupations)
                        .map(|k| {
                            let i = self.gamma_index(a, k, k);
                            self.gamma[i].mean.map(|m| m - t.gamma[i])
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Mean signed gap of all cross accumulation cells with an estimate.
    pub fn cross_gamma_overshoot(&self) -> Option<f64> {
        let t = self.truth.as_ref()?;
        let mut s = 0.0;
        let mut n = 0;
        for a in 0..self.n_age_groups {
            for from in 0..self.n_occupations {
                for to in 0..self.n_occupations {
                    if from == to {
                        continue;
                    }
                    let i = self.gamma_index(a, from, to);
                    if let Some(m) = self.gamma[i].mean {
                        s += m - t.gamma[i];
                        n += 1;
                    }
                }
            }
        }
        (n > 0).then(|| s / n as f64)
    }

    pub fn write_prices_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let err = |e| Error::csv(path, e);
        w.write_record(["year", "k", "dpi", "pi_cum", "truth_dpi", "truth_pi"])
            .map_err(err)?;
        for (i, year) in (self.frame.base_end..=self.frame.last_year).enumerate() {
            for k in 0..self.n_occupations {
                let dpi = if i == 0 { None } else { self.dpi[i - 1][k].mean };
                let (tdpi, tpi) = match &self.truth {
                    Some(t) if i == 0 => (Some(0.0), Some(t.pi_cum[0][k])),
                    Some(t) => (Some(t.dpi[i - 1][k]), Some(t.pi_cum[i][k])),
                    None => (None, None),
                };
                w.write_record([
                    year.to_string(),
                    k.to_string(),
                    opt(dpi),
                    opt(self.pi_cum[i][k].mean),
                    opt(tdpi),
                    opt(tpi),
                ])
                .map_err(err)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Per-repetition cumulative price paths: `rep,year,k,pi_cum`.
    pub fn write_rep_prices_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let err = |e| Error::csv(path, e);
        w.write_record(["rep", "year", "k", "pi_cum"]).map_err(err)?;
        for (r, path_r) in self.rep_pi_cum.iter().enumerate() {
            for (i, year) in (self.frame.base_end..=self.frame.last_year).enumerate() {
                for k in 0..self.n_occupations {
                    w.write_record([
                        (r + 1).to_string(),
                        year.to_string(),
                        k.to_string(),
                        opt(path_r[i][k]),
                    ])
                    .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_gammas_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let err = |e| Error::csv(path, e);
        w.write_record(["age_group", "k_prev", "k_curr", "gamma_hat", "gamma_true", "sigma_gamma"])
            .map_err(err)?;
        for a in 0..self.n_age_groups {
            for from in 0..self.n_occupations {
                for to in 0..self.n_occupations {
                    let i = self.gamma_index(a, from, to);
                    let m = self.gamma[i];
                    let t = self.truth.as_ref().map(|t| t.gamma[i]);
                    let sd = if self.n_reps >= 2 { m.sd } else { None };
                    w.write_record([
                        a.to_string(),
                        from.to_string(),
                        to.to_string(),
                        opt(m.mean),
                        opt(t),
                        opt(sd),
                    ])
                    .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Amenity estimates `age_group,year,k,psi_hat,psi_true,sigma_psi`.
    pub fn write_psi_csv(&self, path: &Path) -> Result<()> {
        let Some(psi) = &self.psi else {
            return Ok(());
        };
        let mut w = csv_writer(path)?;
        let err = |e| Error::csv(path, e);
        w.write_record(["age_group", "year", "k", "psi_hat", "psi_true", "sigma_psi"])
            .map_err(err)?;
        let na = self.frame.n_analysis_years();
        let k = self.n_occupations;
        for a in 0..self.n_age_groups {
            for (i, year) in self.frame.analysis_years().enumerate() {
                for kk in 0..k {
                    let idx = (a * na + i) * k + kk;
                    let sd = if self.n_reps >= 2 { psi[idx].sd } else { None };
                    w.write_record([
                        a.to_string(),
                        year.to_string(),
                        kk.to_string(),
                        opt(psi[idx].mean),
                        opt(self.truth.as_ref().map(|t| t.psi[idx])),
                        opt(sd),
                    ])
                    .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Mean amenity path of occupation `k` averaged over age groups.
    pub fn mean_psi_path(&self, k: usize) -> Option<Vec<(Year, f64)>> {
        let psi = self.psi.as_ref()?;
        let na = self.frame.n_analysis_years();
        let kn = self.n_occupations;
        let mut out = Vec::with_capacity(na);
        for (i, year) in self.frame.analysis_years().enumerate() {
            let v: Vec<f64> = (0..self.n_age_groups)
                .filter_map(|a| psi[(a * na + i) * kn + k].mean)
                .collect();
            if v.is_empty() {
                continue;
            }
            out.push((year, v.iter().sum::<f64>() / v.len() as f64));
        }
        Some(out)
    }

    /// Write prices, gammas and (if present) amenity CSVs into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        self.write_prices_csv(&dir.join("prices.csv"))?;
        self.write_gammas_csv(&dir.join("gammas.csv"))?;
        if self.n_reps >= 2 {
            self.write_rep_prices_csv(&dir.join("prices_reps.csv"))?;
        }
        if self.psi.is_some() {
            self.write_psi_csv(&dir.join("psi.csv"))?;
        }
        Ok(())
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulate_zero_and_constant() {
        let z = cumulate_prices(&vec![vec![Some(0.0); 2]; 26]);
        assert!(z.iter().flatten().all(|v| *v == Some(0.0)));
        let c = cumulate_prices(&vec![vec![Some(0.01)]; 26]);
        assert_eq!(c.len(), 27);
        assert!((c[26][0].unwrap() - 0.26).abs() < 1e-12);
        for i in 1..27 {
            assert!((c[i][0].unwrap() - c[i - 1][0].unwrap() - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_change_breaks_the_path() {
        let c = cumulate_prices(&[vec![Some(0.1)], vec![None], vec![Some(0.1)]]);
        assert_eq!(c[1][0], Some(0.1));
        assert_eq!(c[2][0], None);
        assert_eq!(c[3][0], None);
    }

    #[test]
    fn moments_population_sd() {
        let m = Moments::of([Some(0.04), Some(0.06)]);
        assert!((m.mean.unwrap() - 0.05).abs() < 1e-15);
        assert!((m.sd.unwrap() - 0.01).abs() < 1e-15);
        let m = Moments::of([Some(0.3), Some(0.3), None]);
        assert_eq!((m.sd, m.n), (Some(0.0), 2));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.cli_name()).unwrap(), m);
            assert_eq!(Method::parse(m.tag()).unwrap(), m);
        }
        assert!(Method::parse("gmm").is_err());
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 0.5 + 0.02 * i as f64)).collect();
        assert!((ols_slope(&pts).unwrap() - 0.02).abs() < 1e-12);
    }
}
