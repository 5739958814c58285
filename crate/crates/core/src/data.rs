//! Core data model and file formats.
//!
//! Datasets and risk scores are CSV with a header row. Probability grids and
//! calibrated surfaces are single JSON documents. Every floating point value
//! is written with Rust's shortest round-trip formatting, so a save followed
//! by a load reproduces the in-memory values bit for bit.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that probability rows are non-increasing.
pub const GRID_MONOTONE_TOL: f64 = 1e-12;

/// Tolerance used when checking calibrated surfaces for monotonicity.
pub const SURFACE_MONOTONE_TOL: f64 = 1e-8;

/// Default floor applied to survival and censoring probabilities.
pub const DEFAULT_CLIP_FLOOR: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Right-censored observations `(X, Y, delta)` keyed by subject id.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    ids: Vec<String>,
    time: Vec<f64>,
    event: Vec<bool>,
    covariate_names: Vec<String>,
    /// Row-major `n x p`; empty when `p == 0`.
    covariates: Vec<f64>,
}

impl SurvivalDataset {
    /// Builds a dataset, validating every invariant.
    ///
    /// `covariates` is row-major with one row per subject and
    /// `covariate_names.len()` columns; pass empty vectors for a dataset
    /// without covariates.
    pub fn new(
        ids: Vec<String>,
        time: Vec<f64>,
        event: Vec<bool>,
        covariate_names: Vec<String>,
        covariates: Vec<f64>,
    ) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Validation("dataset has no rows".into()));
        }
        if time.len() != n || event.len() != n {
            return Err(Error::Validation(format!(
                "column lengths differ: {} ids, {} times, {} events",
                n,
                time.len(),
                event.len()
            )));
        }
        if covariates.len() != n * covariate_names.len() {
            return Err(Error::Validation(format!(
                "covariate matrix has {} values, expected {} x {}",
                covariates.len(),
                n,
                covariate_names.len()
            )));
        }
        for (i, t) in time.iter().enumerate() {
            if !t.is_finite() || *t < 0.0 {
                return Err(Error::Validation(format!(
                    "row {} (id {}): observed time {} must be finite and >= 0",
                    i + 1,
                    ids[i],
                    t
                )));
            }
        }
        if let Some(i) = covariates.iter().position(|v| !v.is_finite()) {
            let p = covariate_names.len();
            return Err(Error::Validation(format!(
                "row {}: covariate {} is not finite",
                i / p + 1,
                covariate_names[i % p]
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate subject id {id:?}")));
            }
        }
        Ok(Self {
            ids,
            time,
            event,
            covariate_names,
            covariates,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn times(&self) -> &[f64] {
        &self.time
    }

    pub fn events(&self) -> &[bool] {
        &self.event
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn has_covariates(&self) -> bool {
        !self.covariate_names.is_empty()
    }

    /// Covariates of subject `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_covariates();
        &self.covariates[i * p..(i + 1) * p]
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|e| **e).count()
    }

    /// Largest observed time.
    pub fn max_time(&self) -> f64 {
        self.time.iter().copied().fold(0.0, f64::max)
    }

    /// Copy with the event indicator complemented (events become censorings).
    pub fn with_complemented_events(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.event {
            *e = !*e;
        }
        out
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let p = self.n_covariates();
        Self::new(
            self.ids[range.clone()].to_vec(),
            self.time[range.clone()].to_vec(),
            self.event[range.clone()].to_vec(),
            self.covariate_names.clone(),
            self.covariates[range.start * p..range.end * p].to_vec(),
        )
    }

    /// Position of every subject id.
    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string(), schema)
    }

    /// Parses dataset CSV text. `origin` names the source in error messages.
    pub fn parse_csv(text: &str, origin: &str, schema: &CsvSchema) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| parse_err(origin, 0, e.to_string()))?
            .clone();
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse_err(origin, 0, format!("missing required column {name:?}")))
        };
        let id_col = find(&schema.id)?;
        let time_col = find(&schema.time)?;
        let event_col = find(&schema.event)?;
        let cov_cols: Vec<usize> = match &schema.covariates {
            Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
            None => (0..headers.len())
                .filter(|c| *c != id_col && *c != time_col && *c != event_col)
                .collect(),
        };
        let covariate_names: Vec<String> =
            cov_cols.iter().map(|c| headers[*c].to_string()).collect();

        let mut ids = Vec::new();
        let mut time = Vec::new();
        let mut event = Vec::new();
        let mut covariates = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let row = r + 1;
            let record = record.map_err(|e| parse_err(origin, row, e.to_string()))?;
            let field = |c: usize, what: &str| -> Result<&str> {
                match record.get(c) {
                    Some(s) if !s.is_empty() => Ok(s),
                    _ => Err(parse_err(origin, row, format!("missing {what}"))),
                }
            };
            ids.push(field(id_col, "id")?.to_string());
            let t = parse_f64(field(time_col, "time")?)
                .map_err(|m| parse_err(origin, row, format!("time: {m}")))?;
            if t < 0.0 {
                return Err(Error::Validation(format!(
                    "{origin}: row {row}: negative observed time {t}"
                )));
            }
            time.push(t);
            event.push(
                parse_event(field(event_col, "event")?).map_err(|m| parse_err(origin, row, m))?,
            );
            for (c, name) in cov_cols.iter().zip(&covariate_names) {
                let v = parse_f64(field(*c, name)?)
                    .map_err(|m| parse_err(origin, row, format!("{name}: {m}")))?;
                covariates.push(v);
            }
        }
        Self::new(ids, time, event, covariate_names, covariates)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("id,time,event");
        for name in &self.covariate_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&self.ids[i]);
            out.push(',');
            out.push_str(&fmt_f64(self.time[i]));
            out.push_str(if self.event[i] { ",1" } else { ",0" });
            for v in self.row(i) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), self.to_csv_string().as_bytes())
    }
}

/// Column mapping for dataset CSV files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub id: String,
    pub time: String,
    pub event: String,
    /// Covariate columns in order; `None` takes every other column.
    pub covariates: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            time: "time".into(),
            event: "event".into(),
            covariates: None,
        }
    }
}

fn parse_err(origin: &str, row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_string(),
        row,
        message: message.into(),
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v = f64::from_str(s).map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn parse_event(s: &str) -> std::result::Result<bool, String> {
    match s {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(format!("event {other:?} must be 0/1 or true/false")),
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

// ---------------------------------------------------------------------------
// Time grid
// ---------------------------------------------------------------------------

/// Strictly increasing positive evaluation times; the origin `t = 0` is
/// implicit and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Validation("time grid is empty".into()));
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite() || **t <= 0.0) {
            return Err(Error::Validation(format!(
                "time grid value {t} must be finite and > 0"
            )));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "time grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().expect("grid is non-empty")
    }

    /// Index of a grid time equal to `t` (exact comparison).
    pub fn position(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|g| g.total_cmp(&t)).ok()
    }

    /// Number of grid times `<= t`.
    pub fn count_le(&self, t: f64) -> usize {
        self.times.partition_point(|g| *g <= t)
    }
}

// ---------------------------------------------------------------------------
// Risk scores
// ---------------------------------------------------------------------------

/// One log-relative-hazard score per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskScores {
    ids: Vec<String>,
    risk: Vec<f64>,
}

impl RiskScores {
    pub fn new(ids: Vec<String>, risk: Vec<f64>) -> Result<Self> {
        if ids.len() != risk.len() {
            return Err(Error::Validation(format!(
                "{} ids but {} risk scores",
                ids.len(),
                risk.len()
            )));
        }
        if let Some(i) = risk.iter().position(|r| !r.is_finite()) {
            return Err(Error::Validation(format!(
                "risk score for {} is not finite",
                ids[i]
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate risk id {id:?}")));
            }
        }
        Ok(Self { ids, risk })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &[f64] {
        &self.risk
    }

    pub fn len(&self) -> usize {
        self.risk.len()
    }

    pub fn is_empty(&self) -> bool {
        self.risk.is_empty()
    }

    /// Scores reordered to follow `data`'s subject order.
    pub fn aligned_to(&self, data: &SurvivalDataset) -> Result<Vec<f64>> {
        let index: HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        data.ids()
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|i| self.risk[*i])
                    .ok_or_else(|| Error::Alignment(format!("no risk score for subject {id:?}")))
            })
            .collect()
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let origin = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| parse_err(&origin, 0, e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse_err(&origin, 0, format!("missing required column {name:?}")))
        };
        let (id_col, risk_col) = (col("id")?, col("risk")?);
        let mut ids = Vec::new();
        let mut risk = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| parse_err(&origin, r + 1, e.to_string()))?;
            let id = record
                .get(id_col)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| parse_err(&origin, r + 1, "missing id"))?;
            let v = record
                .get(risk_col)
                .ok_or_else(|| parse_err(&origin, r + 1, "missing risk"))
                .and_then(|s| parse_f64(s).map_err(|m| parse_err(&origin, r + 1, m)))?;
            ids.push(id.to_string());
            risk.push(v);
        }
        Self::new(ids, risk)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("id,risk\n");
        for (id, r) in self.ids.iter().zip(&self.risk) {
            out.push_str(id);
            out.push(',');
            out.push_str(&fmt_f64(*r));
            out.push('\n');
        }
        write_file(path.as_ref(), out.as_bytes())
    }
}

// ---------------------------------------------------------------------------
// Cumulative hazard
// ---------------------------------------------------------------------------

/// Right-continuous step cumulative hazard, zero at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCumulativeHazard {
    jump_times: Vec<f64>,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepCumulativeHazard {
    pub fn new(jump_times: Vec<f64>, increments: Vec<f64>) -> Result<Self> {
        if jump_times.len() != increments.len() {
            return Err(Error::Validation(
                "jump times and increments differ in length".into(),
            ));
        }
        if jump_times.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::Validation(
                "jump times must be finite and > 0".into(),
            ));
        }
        if jump_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "jump times must be strictly increasing".into(),
            ));
        }
        if increments.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::Validation(
                "hazard increments must be finite and >= 0".into(),
            ));
        }
        let cumulative = increments
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            jump_times,
            increments,
            cumulative,
        })
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Cumulative hazard right after each jump.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Sum of increments with jump time `<= t`.
    pub fn value(&self, t: f64) -> f64 {
        match self.jump_times.partition_point(|j| *j <= t) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }

    /// Values at ascending `times`, in one merge pass.
    pub fn values_sorted(&self, times: &[f64], out: &mut [f64]) {
        let mut k = 0;
        for (t, o) in times.iter().zip(out.iter_mut()) {
            while k < self.jump_times.len() && self.jump_times[k] <= *t {
                k += 1;
            }
            *o = if k == 0 { 0.0 } else { self.cumulative[k - 1] };
        }
    }
}

// ---------------------------------------------------------------------------
// Probability curves
// ---------------------------------------------------------------------------

/// Per-subject survival-type curves `P(. > t | X_i)` that can be queried at
/// arbitrary times.
///
/// Implemented by tabulated grids, fitted Cox models and the simulation
/// oracles, so calibration and evaluation never care where a curve came from.
pub trait CurveSource: Sync {
    fn n_subjects(&self) -> usize;

    /// Writes the curve of `subject` at ascending `times` into `out`.
    fn fill(&self, subject: usize, times: &[f64], out: &mut [f64]);

    /// `true` when the curve is known exactly at any time; `false` when it
    /// is a table whose values between stored times are step-interpolated.
    fn exact_off_grid(&self) -> bool {
        true
    }

    fn value(&self, subject: usize, t: f64) -> f64 {
        let mut out = [0.0];
        self.fill(subject, &[t], &mut out);
        out[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityRole {
    Survival,
    Censoring,
}

/// Tabulated per-subject probabilities over a time grid (the survival or
/// censoring nuisance).
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalProbabilityGrid {
    role: ProbabilityRole,
    grid: TimeGrid,
    subjects: Vec<String>,
    /// Row-major `n x K`.
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridDoc {
    role: ProbabilityRole,
    times: Vec<f64>,
    subjects: Vec<String>,
    probs: Vec<Vec<f64>>,
}

impl SurvivalProbabilityGrid {
    pub fn new(
        role: ProbabilityRole,
        grid: TimeGrid,
        subjects: Vec<String>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let k = grid.len();
        if probs.len() != subjects.len() * k {
            return Err(Error::Validation(format!(
                "probability table has {} values, expected {} x {}",
                probs.len(),
                subjects.len(),
                k
            )));
        }
        for (i, row) in probs.chunks(k).enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Validation(format!(
                    "subject {}: probability {v} outside [0, 1]",
                    subjects[i]
                )));
            }
            if let Some(j) = row.windows(2).position(|w| w[1] > w[0] + GRID_MONOTONE_TOL) {
                return Err(Error::Validation(format!(
                    "subject {}: probabilities increase between t={} and t={}",
                    subjects[i],
                    grid.times()[j],
                    grid.times()[j + 1]
                )));
            }
        }
        let mut seen = HashSet::with_capacity(subjects.len());
        for s in &subjects {
            if !seen.insert(s.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate subject {s:?} in grid"
                )));
            }
        }
        Ok(Self {
            role,
            grid,
            subjects,
            probs,
        })
    }

    /// Tabulates `source` for `subjects` on `grid`.
    pub fn tabulate(
        role: ProbabilityRole,
        grid: TimeGrid,
        subjects: Vec<String>,
        source: &dyn CurveSource,
    ) -> Result<Self> {
        if subjects.len() != source.n_subjects() {
            return Err(Error::Alignment(format!(
                "{} subject ids for a source with {} curves",
                subjects.len(),
                source.n_subjects()
            )));
        }
        let k = grid.len();
        let mut probs = vec![0.0; subjects.len() * k];
        for (i, row) in probs.chunks_mut(k).enumerate() {
            source.fill(i, grid.times(), row);
        }
        Self::new(role, grid, subjects, probs)
    }

    pub fn role(&self) -> ProbabilityRole {
        self.role
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.grid.len();
        &self.probs[i * k..(i + 1) * k]
    }

    /// Rows reordered to follow `data`'s subject order.
    pub fn aligned_to(&self, data: &SurvivalDataset) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .subjects
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let k = self.grid.len();
        let mut probs = Vec::with_capacity(data.len() * k);
        for id in data.ids() {
            let i = index.get(id.as_str()).ok_or_else(|| {
                Error::Alignment(format!("probability grid has no row for subject {id:?}"))
            })?;
            probs.extend_from_slice(self.row(*i));
        }
        Ok(Self {
            role: self.role,
            grid: self.grid.clone(),
            subjects: data.ids().to_vec(),
            probs,
        })
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let doc: GridDoc = read_json(path)?;
        let k = doc.times.len();
        if let Some(i) = doc.probs.iter().position(|r| r.len() != k) {
            return Err(Error::Validation(format!(
                "{}: row {} has {} entries, expected {}",
                path.display(),
                i,
                doc.probs[i].len(),
                k
            )));
        }
        if doc.probs.len() != doc.subjects.len() {
            return Err(Error::Validation(format!(
                "{}: {} subjects but {} probability rows",
                path.display(),
                doc.subjects.len(),
                doc.probs.len()
            )));
        }
        let grid = TimeGrid::new(doc.times)?;
        Self::new(doc.role, grid, doc.subjects, doc.probs.concat())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let k = self.grid.len();
        let doc = GridDoc {
            role: self.role,
            times: self.grid.times().to_vec(),
            subjects: self.subjects.clone(),
            probs: self.probs.chunks(k).map(|r| r.to_vec()).collect(),
        };
        write_json(path.as_ref(), &doc)
    }
}

impl CurveSource for SurvivalProbabilityGrid {
    fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// Step interpolation: the value at the last grid time `<= t`, one before
    /// the first grid time.
    fn fill(&self, subject: usize, times: &[f64], out: &mut [f64]) {
        let row = self.row(subject);
        let grid = self.grid.times();
        let mut k = 0;
        for (t, o) in times.iter().zip(out.iter_mut()) {
            if k > 0 && grid[k - 1] > *t {
                k = grid.partition_point(|g| *g <= *t);
            }
            while k < grid.len() && grid[k] <= *t {
                k += 1;
            }
            *o = if k == 0 { 1.0 } else { row[k - 1] };
        }
    }

    fn exact_off_grid(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Pseudo-outcomes and calibrated surfaces
// ---------------------------------------------------------------------------

/// Calibration estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RW")]
    Rw,
    #[serde(rename = "RW+")]
    RwPlus,
    #[serde(rename = "HT")]
    Ht,
    #[serde(rename = "HT+")]
    HtPlus,
    #[serde(rename = "DR")]
    Dr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Rw,
        Method::RwPlus,
        Method::Ht,
        Method::HtPlus,
        Method::Dr,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Rw => "RW",
            Method::RwPlus => "RW+",
            Method::Ht => "HT",
            Method::HtPlus => "HT+",
            Method::Dr => "DR",
        }
    }

    pub fn needs_survival_model(self) -> bool {
        self == Method::Dr
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rw" => Ok(Method::Rw),
            "rw+" | "rwplus" | "rw-plus" => Ok(Method::RwPlus),
            "ht" => Ok(Method::Ht),
            "ht+" | "htplus" | "ht-plus" => Ok(Method::HtPlus),
            "dr" => Ok(Method::Dr),
            other => Err(Error::Usage(format!(
                "unknown calibration method {other:?}"
            ))),
        }
    }
}

/// Pointwise survival estimates before projection. Stored subject-major:
/// `values[j * K + i]` is subject `j` at grid time `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOutcomeMatrix {
    pub grid: TimeGrid,
    pub method: Method,
    pub n_subjects: usize,
    pub values: Vec<f64>,
}

impl PseudoOutcomeMatrix {
    pub fn get(&self, time_index: usize, subject: usize) -> f64 {
        self.values[subject * self.grid.len() + time_index]
    }

    pub fn subject_row(&self, subject: usize) -> &[f64] {
        let k = self.grid.len();
        &self.values[subject * k..(subject + 1) * k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Step,
    #[default]
    Bilinear,
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(Interpolation::Step),
            "bilinear" | "linear" => Ok(Interpolation::Bilinear),
            other => Err(Error::Usage(format!("unknown interpolation {other:?}"))),
        }
    }
}

/// Calibrated survival surface: rows are calibration subjects in
/// non-decreasing risk order, columns are grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedSurface {
    pub(crate) sorted_risks: Vec<f64>,
    pub(crate) grid: TimeGrid,
    /// Row-major `n x K`.
    pub(crate) surface: Vec<f64>,
    pub(crate) method: Method,
    pub(crate) interpolation: Interpolation,
}

#[derive(Serialize, Deserialize)]
struct SurfaceDoc {
    method: Method,
    risks: Vec<f64>,
    times: Vec<f64>,
    surface: Vec<Vec<f64>>,
    interpolation: Interpolation,
}

impl CalibratedSurface {
    pub fn new(
        sorted_risks: Vec<f64>,
        grid: TimeGrid,
        surface: Vec<f64>,
        method: Method,
        interpolation: Interpolation,
    ) -> Result<Self> {
        let s = Self {
            sorted_risks,
            grid,
            surface,
            method,
            interpolation,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sorted_risks.len();
        let k = self.grid.len();
        if n == 0 {
            return Err(Error::Validation("surface has no risk rows".into()));
        }
        if self.surface.len() != n * k {
            return Err(Error::Validation(format!(
                "surface has {} entries, expected {n} x {k}",
                self.surface.len()
            )));
        }
        if self.sorted_risks.iter().any(|r| !r.is_finite()) {
            return Err(Error::Validation("surface risks must be finite".into()));
        }
        if let Some(w) = self.sorted_risks.windows(2).find(|w| w[1] < w[0]) {
            return Err(Error::Validation(format!(
                "surface risks not sorted: {} before {}",
                w[0], w[1]
            )));
        }
        for (i, row) in self.surface.chunks(k).enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Validation(format!(
                    "surface row {i}: value {v} outside [0, 1]"
                )));
            }
            if let Some(j) = row
                .windows(2)
                .position(|w| w[1] > w[0] + SURFACE_MONOTONE_TOL)
            {
                return Err(Error::Validation(format!(
                    "surface row {i} increases in time at t={}",
                    self.grid.times()[j + 1]
                )));
            }
        }
        for i in 1..n {
            let (prev, cur) = (self.row(i - 1), self.row(i));
            if let Some(j) = (0..k).find(|j| cur[*j] > prev[*j] + SURFACE_MONOTONE_TOL) {
                return Err(Error::Validation(format!(
                    "surface increases with risk between rows {} and {i} at t={}",
                    i - 1,
                    self.grid.times()[j]
                )));
            }
        }
        Ok(())
    }

    pub fn sorted_risks(&self) -> &[f64] {
        &self.sorted_risks
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.sorted_risks.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.grid.len();
        &self.surface[i * k..(i + 1) * k]
    }

    /// Stored entry for calibration row `i` at grid index `j`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.surface[i * self.grid.len() + j]
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let doc: SurfaceDoc = read_json(path)?;
        let k = doc.times.len();
        if doc.surface.len() != doc.risks.len() || doc.surface.iter().any(|r| r.len() != k) {
            return Err(Error::Validation(format!(
                "{}: surface must be {} rows of {} entries",
                path.display(),
                doc.risks.len(),
                k
            )));
        }
        let grid = TimeGrid::new(doc.times)?;
        Self::new(
            doc.risks,
            grid,
            doc.surface.concat(),
            doc.method,
            doc.interpolation,
        )
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let k = self.grid.len();
        let doc = SurfaceDoc {
            method: self.method,
            risks: self.sorted_risks.clone(),
            times: self.grid.times().to_vec(),
            surface: self.surface.chunks(k).map(|r| r.to_vec()).collect(),
            interpolation: self.interpolation,
        };
        let mut bytes = serde_json::to_vec(&doc).expect("surface serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_json_bytes())
    }
}
