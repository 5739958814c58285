//! Evaluation metrics for survival predictions under right censoring.
//!
//! Predicted curves are step functions of time on their knots (value one
//! before the first knot), so the Brier and quantile integrals below are
//! computed exactly segment by segment.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coxfit::CoxModel;
use crate::data::{fmt_f64, CalibratedSurface, CurveSource, SurvivalDataset};
use crate::error::{Error, Result};

/// Quantile levels reported by default (10%, 20%, ..., 90%).
pub const DEFAULT_TAUS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    /// Observed data reweighted by a censoring model.
    Ipcw,
    /// True event times from a simulation; no censoring.
    Oracle,
    /// Uncensored subjects only, unweighted.
    Naive,
}

impl MetricMode {
    pub fn tag(self) -> &'static str {
        match self {
            MetricMode::Ipcw => "ipcw",
            MetricMode::Oracle => "oracle",
            MetricMode::Naive => "naive",
        }
    }
}

impl fmt::Display for MetricMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for MetricMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ipcw" => Ok(MetricMode::Ipcw),
            "oracle" => Ok(MetricMode::Oracle),
            "naive" => Ok(MetricMode::Naive),
            other => Err(Error::Usage(format!("unknown metric mode {other:?}"))),
        }
    }
}

/// A survival model evaluated on a fixed list of subjects.
pub trait SurvivalPredictor: Sync {
    fn n_subjects(&self) -> usize;
    /// Ascending times at which the curves may change.
    fn knots(&self) -> &[f64];
    /// Score used for ranking; higher means earlier events.
    fn risk(&self, subject: usize) -> f64;
    /// Curve values at every knot.
    fn fill(&self, subject: usize, out: &mut [f64]);
}

/// A calibrated surface queried at test-subject risks.
pub struct SurfacePredictor<'a> {
    surface: &'a CalibratedSurface,
    risks: Vec<f64>,
}

impl<'a> SurfacePredictor<'a> {
    pub fn new(surface: &'a CalibratedSurface, risks: Vec<f64>) -> Self {
        Self { surface, risks }
    }
}

impl SurvivalPredictor for SurfacePredictor<'_> {
    fn n_subjects(&self) -> usize {
        self.risks.len()
    }

    fn knots(&self) -> &[f64] {
        self.surface.grid().times()
    }

    fn risk(&self, subject: usize) -> f64 {
        self.risks[subject]
    }

    fn fill(&self, subject: usize, out: &mut [f64]) {
        self.surface.curve_at_grid(self.risks[subject], out);
    }
}

/// Uncalibrated Cox curves; knots are the baseline jump times.
pub struct CoxPredictor {
    knots: Vec<f64>,
    cumulative: Vec<f64>,
    risks: Vec<f64>,
}

impl CoxPredictor {
    pub fn new(model: &CoxModel, data: &SurvivalDataset) -> Result<Self> {
        let risks = model.risk_scores(data)?.values().to_vec();
        Ok(Self::from_parts(model, risks))
    }

    pub fn from_parts(model: &CoxModel, risks: Vec<f64>) -> Self {
        Self {
            knots: model.baseline.jump_times().to_vec(),
            cumulative: model.baseline.cumulative().to_vec(),
            risks,
        }
    }
}

impl SurvivalPredictor for CoxPredictor {
    fn n_subjects(&self) -> usize {
        self.risks.len()
    }

    fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn risk(&self, subject: usize) -> f64 {
        self.risks[subject]
    }

    fn fill(&self, subject: usize, out: &mut [f64]) {
        let scale = self.risks[subject].exp();
        for (o, h) in out.iter_mut().zip(&self.cumulative) {
            *o = (-h * scale).exp();
        }
    }
}

/// Right-continuous step function equal to one before its first knot.
#[derive(Clone, Copy)]
struct Step<'a> {
    knots: &'a [f64],
    values: &'a [f64],
}

impl Step<'_> {
    const ONE: Step<'static> = Step {
        knots: &[],
        values: &[],
    };

    fn at(&self, t: f64) -> f64 {
        match self.knots[..self.values.len()].partition_point(|k| *k <= t) {
            0 => 1.0,
            i => self.values[i - 1],
        }
    }
}

/// `int_a^b f(s(t), g(t)) dt` for step functions `s` and `g`.
fn integrate(a: f64, b: f64, s: Step, g: Step, f: impl Fn(f64, f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (sk, gk) = (&s.knots[..s.values.len()], &g.knots[..g.values.len()]);
    let mut i = sk.partition_point(|k| *k <= a);
    let mut j = gk.partition_point(|k| *k <= a);
    let mut cur = a;
    let mut total = 0.0;
    loop {
        let next = sk
            .get(i)
            .copied()
            .unwrap_or(f64::INFINITY)
            .min(gk.get(j).copied().unwrap_or(f64::INFINITY))
            .min(b);
        let sv = if i == 0 { 1.0 } else { s.values[i - 1] };
        let gv = if j == 0 { 1.0 } else { g.values[j - 1] };
        total += (next - cur) * f(sv, gv);
        if next >= b {
            return total;
        }
        while i < sk.len() && sk[i] <= next {
            i += 1;
        }
        while j < gk.len() && gk[j] <= next {
            j += 1;
        }
        cur = next;
    }
}

/// Test subjects and outcome information for one evaluation mode.
pub struct EvaluationSet<'a> {
    pub mode: MetricMode,
    pub t_max: f64,
    /// Indices into the predictors' subject lists.
    subjects: Vec<usize>,
    times: Vec<f64>,
    events: Vec<bool>,
    censoring: Option<Censoring<'a>>,
}

struct Censoring<'a> {
    source: &'a dyn CurveSource,
    knots: Vec<f64>,
    clip_floor: f64,
}

/// Per-subject quantities shared by all metrics.
struct SubjectView {
    y: f64,
    event: bool,
    /// `G(Y | X)`, clipped.
    g_y: f64,
    g_knots_used: usize,
    g_values: Vec<f64>,
}

impl<'a> EvaluationSet<'a> {
    /// IPCW evaluation on observed data. `g_knots` are the times at which
    /// the censoring curve is tabulated for the integrals (typically the
    /// calibration grid); `G(Y | X)` is read from the source directly.
    pub fn ipcw(
        test: &SurvivalDataset,
        censoring: &'a dyn CurveSource,
        g_knots: &[f64],
        t_max: f64,
        clip_floor: f64,
    ) -> Result<Self> {
        if censoring.n_subjects() != test.len() {
            return Err(Error::Alignment(format!(
                "censoring model covers {} subjects, test set has {}",
                censoring.n_subjects(),
                test.len()
            )));
        }
        Self::check_t_max(t_max)?;
        Ok(Self {
            mode: MetricMode::Ipcw,
            t_max,
            subjects: (0..test.len()).collect(),
            times: test.times().to_vec(),
            events: test.events().to_vec(),
            censoring: Some(Censoring {
                source: censoring,
                knots: g_knots.to_vec(),
                clip_floor,
            }),
        })
    }

    /// Oracle evaluation against true (uncensored) event times.
    pub fn oracle(true_times: &[f64], t_max: f64) -> Result<Self> {
        Self::check_t_max(t_max)?;
        Ok(Self {
            mode: MetricMode::Oracle,
            t_max,
            subjects: (0..true_times.len()).collect(),
            times: true_times.to_vec(),
            events: vec![true; true_times.len()],
            censoring: None,
        })
    }

    /// Uncensored test subjects only, treated as if censoring were absent.
    pub fn naive(test: &SurvivalDataset, t_max: f64) -> Result<Self> {
        Self::check_t_max(t_max)?;
        let subjects: Vec<usize> = (0..test.len()).filter(|i| test.events()[*i]).collect();
        Ok(Self {
            mode: MetricMode::Naive,
            t_max,
            times: subjects.iter().map(|i| test.times()[*i]).collect(),
            events: vec![true; subjects.len()],
            subjects,
            censoring: None,
        })
    }

    fn check_t_max(t_max: f64) -> Result<()> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::Validation(format!("t_max {t_max} must be positive")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    fn check_predictor(&self, predictor: &dyn SurvivalPredictor) -> Result<()> {
        let needed = self.subjects.iter().max().map_or(0, |m| m + 1);
        if predictor.n_subjects() < needed {
            return Err(Error::Alignment(format!(
                "predictor covers {} subjects, evaluation needs {needed}",
                predictor.n_subjects()
            )));
        }
        Ok(())
    }

    /// Censoring curve on `[0, min(Y, t_max)]` plus `G(Y)`.
    fn view(&self, e: usize) -> SubjectView {
        let y = self.times[e];
        let event = self.events[e];
        match &self.censoring {
            None => SubjectView {
                y,
                event,
                g_y: 1.0,
                g_knots_used: 0,
                g_values: Vec::new(),
            },
            Some(c) => {
                let subject = self.subjects[e];
                let end = y.min(self.t_max);
                let used = c.knots.partition_point(|k| *k <= end);
                let mut g_values = vec![0.0; used];
                c.source.fill(subject, &c.knots[..used], &mut g_values);
                for g in &mut g_values {
                    *g = g.max(c.clip_floor);
                }
                let g_y = c.source.value(subject, y).max(c.clip_floor);
                SubjectView {
                    y,
                    event,
                    g_y,
                    g_knots_used: used,
                    g_values,
                }
            }
        }
    }

    fn g_step<'s>(&'s self, v: &'s SubjectView) -> Step<'s> {
        match &self.censoring {
            None => Step::ONE,
            Some(c) => Step {
                knots: &c.knots[..v.g_knots_used],
                values: &v.g_values,
            },
        }
    }

    /// Runs `f` over every evaluated subject in parallel and returns the
    /// results in subject order.
    fn map_subjects<T: Send>(
        &self,
        predictor: &dyn SurvivalPredictor,
        f: impl Fn(&SubjectView, Step, Step) -> T + Sync,
    ) -> Vec<T> {
        let knots = predictor.knots();
        (0..self.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; knots.len()],
                |curve, e| {
                    predictor.fill(self.subjects[e], curve);
                    let view = self.view(e);
                    let s = Step {
                        knots,
                        values: curve,
                    };
                    f(&view, s, self.g_step(&view))
                },
            )
            .collect()
    }
}

/// Harrell's concordance index. Pairs `(i, j)` with `delta_i = 1` and
/// `Y_i < Y_j` are comparable; ties in risk count one half.
pub fn c_index(risks: &[f64], times: &[f64], events: &[bool]) -> Result<f64> {
    let n = risks.len();
    if times.len() != n || events.len() != n {
        return Err(Error::Validation("c-index inputs differ in length".into()));
    }
    // Fenwick tree over risk ranks of subjects with strictly later times.
    let mut ranks: Vec<f64> = risks.to_vec();
    ranks.sort_by(f64::total_cmp);
    ranks.dedup();
    let rank = |r: f64| ranks.partition_point(|v| *v < r);
    let mut tree = vec![0u64; ranks.len() + 1];
    let add = |tree: &mut Vec<u64>, mut i: usize| {
        i += 1;
        while i < tree.len() {
            tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    };
    let below = |tree: &Vec<u64>, mut i: usize| -> u64 {
        let mut s = 0;
        while i > 0 {
            s += tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| times[*b].total_cmp(&times[*a]));

    let (mut concordant, mut tied, mut comparable) = (0u64, 0u64, 0u64);
    let mut inserted = 0u64;
    let mut start = 0;
    while start < n {
        let t = times[order[start]];
        let mut end = start;
        while end < n && times[order[end]] == t {
            end += 1;
        }
        for &i in &order[start..end] {
            if events[i] {
                let r = rank(risks[i]);
                let less = below(&tree, r);
                let less_eq = below(&tree, r + 1);
                concordant += less;
                tied += less_eq - less;
                comparable += inserted;
            }
        }
        for &i in &order[start..end] {
            add(&mut tree, rank(risks[i]));
            inserted += 1;
        }
        start = end;
    }
    if comparable == 0 {
        return Err(Error::UndefinedMetric(
            "no comparable pairs for the C-index".into(),
        ));
    }
    Ok((concordant as f64 + 0.5 * tied as f64) / comparable as f64)
}

/// `int_0^1 |F(u) - u| du` for the weighted empirical CDF of `values`.
pub fn area_to_uniform(values: &[f64], weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if values.is_empty() || !(total > 0.0) {
        return Err(Error::UndefinedMetric("no PIT mass to evaluate".into()));
    }
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .map(|v| v.clamp(0.0, 1.0))
        .zip(weights.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Area between the constant level c and the diagonal over [a, b].
    let piece = |a: f64, b: f64, c: f64| -> f64 {
        if c <= a {
            ((b - c).powi(2) - (a - c).powi(2)) / 2.0
        } else if c >= b {
            ((c - a).powi(2) - (c - b).powi(2)) / 2.0
        } else {
            ((c - a).powi(2) + (b - c).powi(2)) / 2.0
        }
    };
    let mut area = 0.0;
    let mut level = 0.0;
    let mut cum = 0.0;
    let mut left = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let x = pairs[i].0;
        area += piece(left, x, level);
        while i < pairs.len() && pairs[i].0 == x {
            cum += pairs[i].1;
            i += 1;
        }
        level = cum / total;
        left = x;
    }
    area += piece(left, 1.0, level);
    Ok(area)
}

/// PIT values `1 - S(Y | X)` and their masses for the subjects counted in
/// the mode: uncensored subjects only, weighted by `1 / G(Y | X)` for IPCW.
pub fn pit_values(
    predictor: &dyn SurvivalPredictor,
    eval: &EvaluationSet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    eval.check_predictor(predictor)?;
    let pairs = eval.map_subjects(predictor, |v, s, _| {
        if v.event {
            Some((1.0 - s.at(v.y), 1.0 / v.g_y))
        } else {
            None
        }
    });
    Ok(pairs.into_iter().flatten().unzip())
}

pub fn aupit(predictor: &dyn SurvivalPredictor, eval: &EvaluationSet) -> Result<f64> {
    let (pit, w) = pit_values(predictor, eval)?;
    if pit.is_empty() {
        return Err(Error::UndefinedMetric(
            "AUPIT needs at least one uncensored subject".into(),
        ));
    }
    area_to_uniform(&pit, &w)
}

/// Integrated Brier score on `[0, t_max]`, normalized by `t_max`.
pub fn ibs(predictor: &dyn SurvivalPredictor, eval: &EvaluationSet) -> Result<f64> {
    eval.check_predictor(predictor)?;
    if eval.is_empty() {
        return Err(Error::UndefinedMetric("no subjects to evaluate".into()));
    }
    let t_max = eval.t_max;
    let terms = eval.map_subjects(predictor, |v, s, g| {
        let end = v.y.min(t_max);
        let alive = integrate(0.0, end, s, g, |sv, gv| (1.0 - sv).powi(2) / gv);
        let dead = if v.event && v.y < t_max {
            integrate(v.y, t_max, s, Step::ONE, |sv, _| sv * sv) / v.g_y
        } else {
            0.0
        };
        alive + dead
    });
    Ok(terms.iter().sum::<f64>() / (eval.len() as f64 * t_max))
}

/// Smallest knot `<= t_max` where the curve is at or below `1 - tau`;
/// `None` when the curve does not get there.
pub fn predicted_quantiles(
    predictor: &dyn SurvivalPredictor,
    eval: &EvaluationSet,
    tau: f64,
) -> Result<Vec<Option<f64>>> {
    check_tau(tau)?;
    eval.check_predictor(predictor)?;
    let t_max = eval.t_max;
    let level = 1.0 - tau;
    Ok(eval.map_subjects(predictor, |_, s, _| {
        s.values
            .iter()
            .position(|v| *v <= level)
            .map(|m| s.knots[m])
            .filter(|q| *q <= t_max)
    }))
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Validation(format!(
            "quantile level {tau} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// IPCW pinball loss over the subjects in `mask`, given their predicted
/// quantiles.
pub fn quantile_score_masked(
    eval: &EvaluationSet,
    quantiles: &[Option<f64>],
    mask: &[bool],
    tau: f64,
) -> Result<f64> {
    check_tau(tau)?;
    let t_max = eval.t_max;
    let terms: Vec<Option<f64>> = (0..eval.len())
        .into_par_iter()
        .map(|e| {
            if !mask[e] {
                return None;
            }
            let q = quantiles[e]?;
            let v = eval.view(e);
            let over = if v.event && v.y < q {
                (q - v.y) / v.g_y
            } else {
                0.0
            };
            let under = integrate(q, v.y.min(t_max), Step::ONE, eval.g_step(&v), |_, gv| {
                1.0 / gv
            });
            Some((1.0 - tau) * over + tau * under)
        })
        .collect();
    let included: Vec<f64> = terms.into_iter().flatten().collect();
    if included.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "no subject has a defined {tau} quantile"
        )));
    }
    Ok(included.iter().sum::<f64>() / included.len() as f64)
}

/// Quantile score of a single predictor with its own inclusion mask.
pub fn quantile_score(
    predictor: &dyn SurvivalPredictor,
    eval: &EvaluationSet,
    tau: f64,
) -> Result<(f64, Vec<bool>)> {
    let q = predicted_quantiles(predictor, eval, tau)?;
    let mask: Vec<bool> = q.iter().map(Option::is_some).collect();
    let score = quantile_score_masked(eval, &q, &mask, tau)?;
    Ok((score, mask))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEntry {
    pub tau: f64,
    pub score: Option<f64>,
    pub n_included: usize,
    pub n_excluded: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub seed: Option<u64>,
    pub method: String,
    pub mode: MetricMode,
    pub n_subjects: usize,
    pub t_max: f64,
    pub c_index: Option<f64>,
    pub aupit: Option<f64>,
    pub ibs: Option<f64>,
    pub quantile_scores: Vec<QuantileEntry>,
    /// Reasons for metrics reported as null.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl MetricReport {
    pub fn quantile(&self, tau: f64) -> Option<&QuantileEntry> {
        self.quantile_scores
            .iter()
            .find(|q| (q.tau - tau).abs() < 1e-12)
    }

    pub fn csv_header(taus: &[f64]) -> String {
        let mut cols = vec![
            "dataset", "seed", "method", "mode", "n", "c_index", "aupit", "ibs",
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        for tau in taus {
            let pct = (tau * 100.0).round();
            cols.push(format!("qs_{pct}"));
            cols.push(format!("included_{pct}"));
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let mut cols = vec![
            self.dataset.clone(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.method.clone(),
            self.mode.to_string(),
            self.n_subjects.to_string(),
            opt(self.c_index),
            opt(self.aupit),
            opt(self.ibs),
        ];
        for q in &self.quantile_scores {
            cols.push(opt(q.score));
            cols.push(q.n_included.to_string());
        }
        cols.join(",")
    }
}

/// Per-predictor results computed before quantile masks are joined, so a
/// predictor (and its surface) can be dropped as soon as it is summarized.
#[derive(Debug, Clone)]
pub struct PredictorSummary {
    pub name: String,
    pub c_index: Option<f64>,
    pub aupit: Option<f64>,
    pub ibs: Option<f64>,
    /// Predicted quantile per level, per evaluated subject.
    pub quantiles: Vec<Vec<Option<f64>>>,
    pub notes: Vec<String>,
}

pub fn summarize(
    name: &str,
    predictor: &dyn SurvivalPredictor,
    eval: &EvaluationSet,
    taus: &[f64],
) -> Result<PredictorSummary> {
    eval.check_predictor(predictor)?;
    let mut notes = Vec::new();
    let mut keep = |r: Result<f64>, what: &str| -> Result<Option<f64>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::UndefinedMetric(msg)) => {
                notes.push(format!("{what}: {msg}"));
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    let risks: Vec<f64> = eval.subjects.iter().map(|s| predictor.risk(*s)).collect();
    let c = keep(c_index(&risks, &eval.times, &eval.events), "c_index")?;
    let a = keep(aupit(predictor, eval), "aupit")?;
    let b = keep(ibs(predictor, eval), "ibs")?;
    let quantiles = taus
        .iter()
        .map(|tau| predicted_quantiles(predictor, eval, *tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictorSummary {
        name: name.to_string(),
        c_index: c,
        aupit: a,
        ibs: b,
        quantiles,
        notes,
    })
}

/// Builds reports from summaries of predictors evaluated on the same
/// subjects. A subject enters a quantile score only if every predictor's
/// curve reaches that level by `t_max`.
pub fn joint_reports(
    summaries: &[PredictorSummary],
    eval: &EvaluationSet,
    taus: &[f64],
    dataset: &str,
    seed: Option<u64>,
) -> Result<Vec<MetricReport>> {
    for tau in taus {
        check_tau(*tau)?;
    }
    let masks: Vec<Vec<bool>> = (0..taus.len())
        .map(|ti| {
            (0..eval.len())
                .map(|e| summaries.iter().all(|s| s.quantiles[ti][e].is_some()))
                .collect()
        })
        .collect();
    let mut reports = Vec::with_capacity(summaries.len());
    for s in summaries {
        let mut entries = Vec::with_capacity(taus.len());
        for (ti, tau) in taus.iter().enumerate() {
            let n_included = masks[ti].iter().filter(|m| **m).count();
            let (score, reason) =
                match quantile_score_masked(eval, &s.quantiles[ti], &masks[ti], *tau) {
                    Ok(v) => (Some(v), None),
                    Err(Error::UndefinedMetric(msg)) => (None, Some(msg)),
                    Err(e) => return Err(e),
                };
            entries.push(QuantileEntry {
                tau: *tau,
                score,
                n_included,
                n_excluded: eval.len() - n_included,
                reason,
            });
        }
        reports.push(MetricReport {
            dataset: dataset.to_string(),
            seed,
            method: s.name.clone(),
            mode: eval.mode,
            n_subjects: eval.len(),
            t_max: eval.t_max,
            c_index: s.c_index,
            aupit: s.aupit,
            ibs: s.ibs,
            quantile_scores: entries,
            notes: s.notes.clone(),
        });
    }
    Ok(reports)
}

/// Summarizes and joins several predictors in one call.
pub fn evaluate(
    predictors: &[(&str, &dyn SurvivalPredictor)],
    eval: &EvaluationSet,
    taus: &[f64],
    dataset: &str,
    seed: Option<u64>,
) -> Result<Vec<MetricReport>> {
    let summaries = predictors
        .iter()
        .map(|(name, p)| summarize(name, *p, eval, taus))
        .collect::<Result<Vec<_>>>()?;
    joint_reports(&summaries, eval, taus, dataset, seed)
}
