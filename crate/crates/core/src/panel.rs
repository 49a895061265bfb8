//! Shared domain types: occupations, age groups, the calendar frame, simulated
//! careers, and the stacked panel that estimators consume.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calendar year.
pub type Year = i32;

/// Ordered occupation labels plus the occupation whose amenity value is
/// normalized to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationSet {
    labels: Vec<String>,
    reference_index: usize,
}

impl OccupationSet {
    pub fn new(labels: Vec<String>, reference_index: usize) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Config(format!(
                "need at least two occupations, got {}",
                labels.len()
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::Config(format!("duplicate occupation label {label:?}")));
            }
        }
        if reference_index >= labels.len() {
            return Err(Error::Config(format!(
                "reference index {reference_index} out of range for {} occupations",
                labels.len()
            )));
        }
        Ok(Self {
            labels,
            reference_index,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }
}

impl Default for OccupationSet {
    fn default() -> Self {
        Self {
            labels: ["Mgr-Prof-Tech", "Sales-Office", "Prod-Op-Crafts", "Srvc-Care"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            reference_index: 2,
        }
    }
}

/// Inclusive age intervals that partition `[entry_age, exit_age]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeGrouping {
    bounds: Vec<(u32, u32)>,
    entry_age: u32,
    exit_age: u32,
}

impl AgeGrouping {
    pub fn new(bounds: Vec<(u32, u32)>, entry_age: u32, exit_age: u32) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Config("age grouping needs at least one interval".into()));
        }
        if entry_age > exit_age {
            return Err(Error::Config(format!(
                "entry age {entry_age} exceeds exit age {exit_age}"
            )));
        }
        let mut expected = entry_age;
        for &(lo, hi) in &bounds {
            if lo != expected || hi < lo {
                return Err(Error::Config(format!(
                    "age intervals must partition [{entry_age}, {exit_age}]; bad interval [{lo}, {hi}]"
                )));
            }
            expected = hi + 1;
        }
        if expected != exit_age + 1 {
            return Err(Error::Config(format!(
                "age intervals end at {} but exit age is {exit_age}",
                expected - 1
            )));
        }
        Ok(Self {
            bounds,
            entry_age,
            exit_age,
        })
    }

    pub fn bounds(&self) -> &[(u32, u32)] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn entry_age(&self) -> u32 {
        self.entry_age
    }

    pub fn exit_age(&self) -> u32 {
        self.exit_age
    }

    pub fn label(&self, group: usize) -> String {
        let (lo, hi) = self.bounds[group];
        format!("[{lo}, {hi}]")
    }
}

impl Default for AgeGrouping {
    fn default() -> Self {
        Self {
            bounds: vec![(25, 34), (35, 44), (45, 54)],
            entry_age: 25,
            exit_age: 54,
        }
    }
}

/// Index of the age interval containing `age`.
pub fn age_group(age: u32, grouping: &AgeGrouping) -> Result<usize> {
    grouping
        .bounds
        .iter()
        .position(|&(lo, hi)| lo <= age && age <= hi)
        .ok_or(Error::AgeOutOfRange {
            age,
            entry: grouping.entry_age,
            exit: grouping.exit_age,
        })
}

/// Sample years. Prices are flat through `base_end`; the analysis period is
/// `base_end + 1 ..= last_year`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeFrame {
    pub first_year: Year,
    pub base_end: Year,
    pub last_year: Year,
}

impl TimeFrame {
    pub fn new(first_year: Year, base_end: Year, last_year: Year) -> Result<Self> {
        let frame = Self {
            first_year,
            base_end,
            last_year,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.first_year <= self.base_end && self.base_end < self.last_year) {
            return Err(Error::Config(format!(
                "time frame needs first_year <= base_end < last_year, got {}/{}/{}",
                self.first_year, self.base_end, self.last_year
            )));
        }
        Ok(())
    }

    pub fn n_years(&self) -> usize {
        (self.last_year - self.first_year + 1) as usize
    }

    pub fn year_index(&self, year: Year) -> usize {
        debug_assert!(self.contains(year));
        (year - self.first_year) as usize
    }

    pub fn contains(&self, year: Year) -> bool {
        self.first_year <= year && year <= self.last_year
    }

    pub fn years(&self) -> impl Iterator<Item = Year> {
        self.first_year..=self.last_year
    }

    pub fn analysis_years(&self) -> impl Iterator<Item = Year> {
        self.base_end + 1..=self.last_year
    }

    pub fn n_analysis_years(&self) -> usize {
        (self.last_year - self.base_end) as usize
    }

    pub fn is_analysis(&self, year: Year) -> bool {
        year > self.base_end
    }
}

impl Default for TimeFrame {
    fn default() -> Self {
        Self {
            first_year: 1975,
            base_end: 1984,
            last_year: 2010,
        }
    }
}

/// One simulated worker-year.
#[derive(Debug, Clone, PartialEq)]
pub struct YearRecord {
    pub year: Year,
    pub age: u32,
    pub occupation: usize,
    /// Latent log skills in every occupation.
    pub skills: Vec<f64>,
    /// Skill shocks drawn this year (zero in the entry year).
    pub shocks: Vec<f64>,
    /// Amenity value of the chosen occupation that entered the decision.
    pub amenity: f64,
    pub log_wage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Career {
    pub worker_id: u64,
    pub entry_year: Year,
    pub entry_age: u32,
    pub records: Vec<YearRecord>,
}

impl Career {
    pub fn last_year(&self) -> Option<Year> {
        self.records.last().map(|r| r.year)
    }

    /// Number of year-to-year occupation changes.
    pub fn switches(&self) -> usize {
        self.records
            .windows(2)
            .filter(|w| w[0].occupation != w[1].occupation)
            .count()
    }
}

/// First-difference observation for the year pair `(year - 1, year)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaRow {
    pub worker_id: u64,
    pub year: Year,
    /// Age in `year - 1`; accumulation is indexed by the previous period's age.
    pub age_prev: u32,
    pub k_prev: usize,
    pub k_curr: usize,
    pub dlogw: f64,
    /// Choice in `year - 2`, when observed.
    pub k_lag2: Option<usize>,
    /// Choice in `year - 3`, when observed.
    pub k_lag3: Option<usize>,
}

impl DeltaRow {
    pub fn is_switch(&self) -> bool {
        self.k_prev != self.k_curr
    }
}

/// Levels observation for one worker-year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRow {
    pub worker_id: u64,
    pub year: Year,
    pub age: u32,
    pub k: usize,
    pub logw: f64,
    pub stint_id: u64,
    /// Years since the current occupation stint began.
    pub tenure: u32,
    /// First year of a career that starts after the sample opens.
    pub joiner: bool,
    /// Last year of a career that ends before the sample closes.
    pub exiter: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelDataset {
    pub deltas: Vec<DeltaRow>,
    pub levels: Vec<LevelRow>,
}

/// Stack careers into first-difference and levels views.
pub fn flatten(careers: &[Career], frame: &TimeFrame) -> Result<PanelDataset> {
    let mut panel = PanelDataset::default();
    let mut next_stint = 0u64;
    for career in careers {
        let malformed = |reason: String| Error::MalformedCareer {
            worker_id: career.worker_id,
            reason,
        };
        let Some(first) = career.records.first() else {
            return Err(malformed("career has no years".into()));
        };
        if first.year != career.entry_year {
            return Err(malformed(format!(
                "first record year {} differs from entry year {}",
                first.year, career.entry_year
            )));
        }
        let n = career.records.len();
        let mut stint_start = 0usize;
        for (i, rec) in career.records.iter().enumerate() {
            if !frame.contains(rec.year) {
                return Err(malformed(format!("year {} outside the sample frame", rec.year)));
            }
            if i > 0 {
                let prev = &career.records[i - 1];
                if rec.year != prev.year + 1 {
                    return Err(malformed(format!(
                        "non-consecutive years {} -> {}",
                        prev.year, rec.year
                    )));
                }
                if rec.age != prev.age + 1 {
                    return Err(malformed(format!(
                        "age does not advance by one ({} -> {})",
                        prev.age, rec.age
                    )));
                }
                if rec.occupation != prev.occupation {
                    next_stint += 1;
                    stint_start = i;
                }
                panel.deltas.push(DeltaRow {
                    worker_id: career.worker_id,
                    year: rec.year,
                    age_prev: prev.age,
                    k_prev: prev.occupation,
                    k_curr: rec.occupation,
                    dlogw: rec.log_wage - prev.log_wage,
                    k_lag2: i.checked_sub(2).map(|j| career.records[j].occupation),
                    k_lag3: i.checked_sub(3).map(|j| career.records[j].occupation),
                });
            }
            panel.levels.push(LevelRow {
                worker_id: career.worker_id,
                year: rec.year,
                age: rec.age,
                k: rec.occupation,
                logw: rec.log_wage,
                stint_id: next_stint,
                tenure: (i - stint_start) as u32,
                joiner: i == 0 && rec.year > frame.first_year,
                exiter: i + 1 == n && rec.year < frame.last_year,
            });
        }
        next_stint += 1;
    }
    Ok(panel)
}

/// Observed path of one worker as read back from the levels view.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedPath {
    pub worker_id: u64,
    pub years: Vec<Year>,
    pub ages: Vec<u32>,
    pub occupations: Vec<usize>,
    pub log_wages: Vec<f64>,
}

impl PanelDataset {
    pub fn n_workers(&self) -> usize {
        let mut ids: Vec<u64> = self.levels.iter().map(|r| r.worker_id).collect();
        if ids.is_empty() {
            ids = self.deltas.iter().map(|r| r.worker_id).collect();
        }
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn switch_count(&self) -> usize {
        self.deltas.iter().filter(|r| r.is_switch()).count()
    }

    /// Per-worker observed paths in worker order, rebuilt from the levels view.
    pub fn observed_paths(&self) -> Vec<ObservedPath> {
        let mut paths: BTreeMap<u64, ObservedPath> = BTreeMap::new();
        for r in &self.levels {
            let p = paths.entry(r.worker_id).or_insert_with(|| ObservedPath {
                worker_id: r.worker_id,
                years: Vec::new(),
                ages: Vec::new(),
                occupations: Vec::new(),
                log_wages: Vec::new(),
            });
            p.years.push(r.year);
            p.ages.push(r.age);
            p.occupations.push(r.k);
            p.log_wages.push(r.logw);
        }
        paths.into_values().collect()
    }

    /// Write the first-difference view as `worker_id,year,age,k_prev,k_curr,dlogw`.
    /// `age` is the age in the previous year.
    pub fn write_deltas_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["worker_id", "year", "age", "k_prev", "k_curr", "dlogw"])
            .map_err(|e| Error::csv(path, e))?;
        for r in &self.deltas {
            w.write_record([
                r.worker_id.to_string(),
                r.year.to_string(),
                r.age_prev.to_string(),
                r.k_prev.to_string(),
                r.k_curr.to_string(),
                r.dlogw.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Write the levels view as `worker_id,year,k,logw,stint_id,tenure`.
    pub fn write_levels_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["worker_id", "year", "k", "logw", "stint_id", "tenure"])
            .map_err(|e| Error::csv(path, e))?;
        for r in &self.levels {
            w.write_record([
                r.worker_id.to_string(),
                r.year.to_string(),
                r.k.to_string(),
                r.logw.to_string(),
                r.stint_id.to_string(),
                r.tenure.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a panel back from its CSV files.
    ///
    /// Lagged choices are rebuilt from each worker's consecutive first-difference
    /// rows. Level-row ages come from the first-difference file; a worker with a
    /// single observed year has no such row and is assigned the entry age.
    /// Joiner/exiter flags are derived from `frame`.
    pub fn read_csv(
        deltas_path: &Path,
        levels_path: Option<&Path>,
        frame: &TimeFrame,
        grouping: &AgeGrouping,
    ) -> Result<Self> {
        #[derive(Deserialize)]
        struct DeltaCsv {
            worker_id: u64,
            year: Year,
            age: u32,
            k_prev: usize,
            k_curr: usize,
            dlogw: f64,
        }
        #[derive(Deserialize)]
        struct LevelCsv {
            worker_id: u64,
            year: Year,
            k: usize,
            logw: f64,
            stint_id: u64,
            tenure: u32,
        }

        let mut rdr = csv::Reader::from_path(deltas_path).map_err(|e| Error::csv(deltas_path, e))?;
        let mut raw: Vec<DeltaCsv> = Vec::new();
        for rec in rdr.deserialize() {
            raw.push(rec.map_err(|e| Error::csv(deltas_path, e))?);
        }
        raw.sort_by_key(|r| (r.worker_id, r.year));

        let mut deltas = Vec::with_capacity(raw.len());
        let mut ages: BTreeMap<(u64, Year), u32> = BTreeMap::new();
        for (i, r) in raw.iter().enumerate() {
            let lag = |back: usize| -> Option<usize> {
                let j = i.checked_sub(back)?;
                let p = &raw[j];
                (p.worker_id == r.worker_id && p.year == r.year - back as Year).then_some(p.k_prev)
            };
            deltas.push(DeltaRow {
                worker_id: r.worker_id,
                year: r.year,
                age_prev: r.age,
                k_prev: r.k_prev,
                k_curr: r.k_curr,
                dlogw: r.dlogw,
                k_lag2: lag(1),
                k_lag3: lag(2),
            });
            ages.insert((r.worker_id, r.year - 1), r.age);
            ages.insert((r.worker_id, r.year), r.age + 1);
        }

        let mut levels = Vec::new();
        if let Some(lp) = levels_path {
            let mut rdr = csv::Reader::from_path(lp).map_err(|e| Error::csv(lp, e))?;
            let mut raw_levels: Vec<LevelCsv> = Vec::new();
            for rec in rdr.deserialize() {
                raw_levels.push(rec.map_err(|e| Error::csv(lp, e))?);
            }
            raw_levels.sort_by_key(|r| (r.worker_id, r.year));
            let n = raw_levels.len();
            for (i, r) in raw_levels.iter().enumerate() {
                let first = i == 0 || raw_levels[i - 1].worker_id != r.worker_id;
                let last = i + 1 == n || raw_levels[i + 1].worker_id != r.worker_id;
                levels.push(LevelRow {
                    worker_id: r.worker_id,
                    year: r.year,
                    age: ages
                        .get(&(r.worker_id, r.year))
                        .copied()
                        .unwrap_or(grouping.entry_age()),
                    k: r.k,
                    logw: r.logw,
                    stint_id: r.stint_id,
                    tenure: r.tenure,
                    joiner: first && r.year > frame.first_year,
                    exiter: last && r.year < frame.last_year,
                });
            }
        }
        Ok(Self { deltas, levels })
    }
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(year: Year, age: u32, k: usize, w: f64) -> YearRecord {
        YearRecord {
            year,
            age,
            occupation: k,
            skills: vec![w; 4],
            shocks: vec![0.0; 4],
            amenity: 0.0,
            log_wage: w,
        }
    }

    fn career(id: u64, start: Year, ks: &[usize]) -> Career {
        Career {
            worker_id: id,
            entry_year: start,
            entry_age: 30,
            records: ks
                .iter()
                .enumerate()
                .map(|(i, &k)| record(start + i as Year, 30 + i as u32, k, 1.0 + 0.1 * i as f64))
                .collect(),
        }
    }

    #[test]
    fn stayer_has_one_stint() {
        let p = flatten(&[career(0, 1980, &[1, 1, 1])], &TimeFrame::default()).unwrap();
        assert_eq!(p.deltas.len(), 2);
        assert_eq!(p.levels.len(), 3);
        let stints: Vec<u64> = p.levels.iter().map(|r| r.stint_id).collect();
        assert_eq!(stints, vec![0, 0, 0]);
        let tenure: Vec<u32> = p.levels.iter().map(|r| r.tenure).collect();
        assert_eq!(tenure, vec![0, 1, 2]);
    }

    #[test]
    fn switching_every_year_gives_new_stints() {
        let p = flatten(&[career(0, 1980, &[0, 1, 2])], &TimeFrame::default()).unwrap();
        assert_eq!(p.deltas.len(), 2);
        let mut stints: Vec<u64> = p.levels.iter().map(|r| r.stint_id).collect();
        stints.dedup();
        assert_eq!(stints.len(), 3);
        assert!(p.levels.iter().all(|r| r.tenure == 0));
    }

    #[test]
    fn reentry_gets_fresh_stint() {
        let p = flatten(&[career(0, 1980, &[0, 0, 1, 0, 0])], &TimeFrame::default()).unwrap();
        let s: Vec<u64> = p.levels.iter().map(|r| r.stint_id).collect();
        assert_eq!(s[0], s[1]);
        assert_ne!(s[1], s[3]);
        assert_ne!(s[2], s[3]);
        assert_eq!(s[3], s[4]);
        assert_eq!(p.levels[4].tenure, 1);
    }

    #[test]
    fn stints_are_unique_across_workers() {
        let p = flatten(
            &[career(0, 1980, &[0, 0]), career(1, 1980, &[0, 0])],
            &TimeFrame::default(),
        )
        .unwrap();
        assert_ne!(p.levels[0].stint_id, p.levels[2].stint_id);
    }

    #[test]
    fn lags_and_flags() {
        let frame = TimeFrame::default();
        let p = flatten(&[career(7, 1980, &[0, 1, 2, 3])], &frame).unwrap();
        let last = p.deltas.last().unwrap();
        assert_eq!(last.k_lag2, Some(1));
        assert_eq!(last.k_lag3, Some(0));
        assert_eq!(p.deltas[0].k_lag2, None);
        assert_eq!(p.deltas[0].age_prev, 30);
        assert!(p.levels[0].joiner);
        assert!(p.levels[3].exiter);
        let from_start = flatten(&[career(8, 1975, &[0, 0])], &frame).unwrap();
        assert!(!from_start.levels[0].joiner);
    }

    #[test]
    fn gap_in_years_is_rejected() {
        let mut c = career(3, 1980, &[0, 0, 0]);
        c.records[2].year += 1;
        let err = flatten(&[c], &TimeFrame::default()).unwrap_err();
        assert!(matches!(err, Error::MalformedCareer { worker_id: 3, .. }));
    }

    #[test]
    fn age_groups() {
        let g = AgeGrouping::default();
        assert_eq!(age_group(25, &g).unwrap(), 0);
        assert_eq!(age_group(34, &g).unwrap(), 0);
        assert_eq!(age_group(44, &g).unwrap(), 1);
        assert_eq!(age_group(54, &g).unwrap(), 2);
        assert!(matches!(age_group(24, &g), Err(Error::AgeOutOfRange { .. })));
        assert!(age_group(55, &g).is_err());
    }

    #[test]
    fn grouping_must_partition() {
        assert!(AgeGrouping::new(vec![(25, 34), (36, 54)], 25, 54).is_err());
        assert!(AgeGrouping::new(vec![(25, 34), (35, 50)], 25, 54).is_err());
        assert!(AgeGrouping::new(vec![(25, 54)], 25, 54).is_ok());
    }

    #[test]
    fn occupation_set_validation() {
        let occ = OccupationSet::default();
        assert_eq!(occ.len(), 4);
        assert_eq!(occ.label(occ.reference_index()), "Prod-Op-Crafts");
        assert!(OccupationSet::new(vec!["a".into()], 0).is_err());
        assert!(OccupationSet::new(vec!["a".into(), "a".into()], 0).is_err());
        assert!(OccupationSet::new(vec!["a".into(), "b".into()], 2).is_err());
    }

    #[test]
    fn frame_validation() {
        assert!(TimeFrame::new(1975, 1984, 2010).is_ok());
        assert!(TimeFrame::new(1975, 2010, 2010).is_err());
        assert!(TimeFrame::new(1985, 1984, 2010).is_err());
        assert_eq!(TimeFrame::default().n_analysis_years(), 26);
    }

    #[test]
    fn csv_round_trip_rebuilds_lags() {
        let dir = tempfile::tempdir().unwrap();
        let frame = TimeFrame::default();
        let p = flatten(
            &[career(0, 1980, &[0, 1, 1, 2, 2]), career(1, 1990, &[3])],
            &frame,
        )
        .unwrap();
        let dp = dir.path().join("panel.csv");
        let lp = dir.path().join("levels.csv");
        p.write_deltas_csv(&dp).unwrap();
        p.write_levels_csv(&lp).unwrap();
        let text = std::fs::read_to_string(&dp).unwrap();
        assert!(text.starts_with("worker_id,year,age,k_prev,k_curr,dlogw\n"));
        assert!(!text.contains('\r'));
        let back = PanelDataset::read_csv(&dp, Some(&lp), &frame, &AgeGrouping::default()).unwrap();
        assert_eq!(back.deltas.len(), p.deltas.len());
        for (a, b) in back.deltas.iter().zip(&p.deltas) {
            assert_eq!(a.k_lag2, b.k_lag2);
            assert_eq!(a.k_lag3, b.k_lag3);
            assert_eq!(a.dlogw, b.dlogw);
        }
        for (a, b) in back.levels.iter().zip(&p.levels) {
            assert_eq!(a.stint_id, b.stint_id);
            assert_eq!(a.joiner, b.joiner);
            assert_eq!(a.exiter, b.exiter);
            if a.worker_id == 0 {
                assert_eq!(a.age, b.age);
            }
        }
    }
}
