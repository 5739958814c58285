//! Pseudo-outcomes, isotonic fits and prediction for calibrated survival
//! surfaces.
//!
//! Five estimators share one pipeline: build a (subject x time) target
//! matrix, order subjects by risk, and fit a surface that is non-increasing
//! in both risk and time. RW fits weighted PAVA per time with fixed
//! weights; RW+ does the same with time-varying weights and then repairs
//! the time direction; HT, HT+ and DR project pointwise pseudo-outcomes onto
//! the doubly monotone cone.

use std::time::Instant;

use rayon::prelude::*;

use crate::data::{
    CalibratedSurface, CurveSource, Interpolation, Method, PseudoOutcomeMatrix, RiskScores,
    SurvivalDataset, TimeGrid, DEFAULT_CLIP_FLOOR,
};
use crate::error::{Error, Result};
use crate::isotonic::{project_doubly_monotone_weighted, Pava, ProjectionConfig};

pub const DEFAULT_GRID_DENSITY: usize = 10_000;

/// Tolerance for the time monotonicity RW surfaces must satisfy before the
/// final clean-up.
const RW_TIME_TOL: f64 = 1e-9;

/// Everything the calibrators need about the calibration split.
pub struct CalibrationInputs<'a> {
    pub cal: &'a SurvivalDataset,
    /// Risk score of each calibration subject, in dataset order.
    pub risks: Vec<f64>,
    /// Event survival model; required by DR only.
    pub s_hat: Option<&'a dyn CurveSource>,
    /// Censoring survival model.
    pub g_hat: &'a dyn CurveSource,
    pub grid: TimeGrid,
    pub clip_floor: f64,
}

impl<'a> CalibrationInputs<'a> {
    pub fn new(
        cal: &'a SurvivalDataset,
        risks: &RiskScores,
        s_hat: Option<&'a dyn CurveSource>,
        g_hat: &'a dyn CurveSource,
        grid: TimeGrid,
    ) -> Result<Self> {
        let risks = risks.aligned_to(cal)?;
        let inputs = Self {
            cal,
            risks,
            s_hat,
            g_hat,
            grid,
            clip_floor: DEFAULT_CLIP_FLOOR,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_clip_floor(mut self, clip_floor: f64) -> Self {
        self.clip_floor = clip_floor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cal.len();
        if n == 0 {
            return Err(Error::Validation("calibration set is empty".into()));
        }
        if self.risks.len() != n {
            return Err(Error::Alignment(format!(
                "{} risk scores for {n} calibration subjects",
                self.risks.len()
            )));
        }
        if let Some(r) = self.risks.iter().find(|r| !r.is_finite()) {
            return Err(Error::Validation(format!("non-finite risk score {r}")));
        }
        if self.g_hat.n_subjects() != n {
            return Err(Error::Alignment(format!(
                "censoring model covers {} subjects, calibration set has {n}",
                self.g_hat.n_subjects()
            )));
        }
        if let Some(s) = self.s_hat {
            if s.n_subjects() != n {
                return Err(Error::Alignment(format!(
                    "survival model covers {} subjects, calibration set has {n}",
                    s.n_subjects()
                )));
            }
        }
        if !(self.clip_floor > 0.0 && self.clip_floor < 1.0) {
            return Err(Error::Validation(format!(
                "clip floor {} must lie in (0, 1)",
                self.clip_floor
            )));
        }
        Ok(())
    }

    fn s_hat(&self) -> Result<&'a dyn CurveSource> {
        self.s_hat.ok_or_else(|| {
            Error::Usage("the DR estimator needs an event survival model (S_hat)".into())
        })
    }

    /// `G(Y_j | X_j)` clipped at the floor.
    fn g_at_observed(&self, j: usize) -> f64 {
        let y = self.cal.times()[j];
        self.g_hat.value(j, y).max(self.clip_floor)
    }
}

/// Settings shared by every estimator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CalibrationConfig {
    pub interpolation: Interpolation,
    pub projection: ProjectionConfig,
}

/// Dense lattice on `(0, t_max_cal]` merged with every observed time.
pub fn build_time_grid(
    train: &SurvivalDataset,
    cal: &SurvivalDataset,
    n_dense: usize,
) -> Result<TimeGrid> {
    if train.is_empty() || cal.is_empty() {
        return Err(Error::Validation(
            "time grid needs non-empty datasets".into(),
        ));
    }
    if n_dense == 0 {
        return Err(Error::Validation("grid density must be positive".into()));
    }
    let t_max = cal.max_time();
    if t_max <= 0.0 {
        return Err(Error::Degenerate(
            "largest calibration time is 0; cannot build a time grid".into(),
        ));
    }
    let mut times: Vec<f64> = (1..n_dense)
        .map(|k| k as f64 * t_max / n_dense as f64)
        .collect();
    times.push(t_max);
    times.extend(
        train
            .times()
            .iter()
            .chain(cal.times())
            .filter(|t| **t > 0.0),
    );
    times.sort_by(f64::total_cmp);
    times.dedup();
    TimeGrid::new(times)
}

/// `delta_i / max(G(Y_i | X_i), floor)`.
pub fn rw_weights(inputs: &CalibrationInputs) -> Vec<f64> {
    (0..inputs.cal.len())
        .map(|j| {
            if inputs.cal.events()[j] {
                1.0 / inputs.g_at_observed(j)
            } else {
                0.0
            }
        })
        .collect()
}

/// `1[Y > t] / G(t | X) + delta 1[Y <= t] / G(Y | X)` for every subject at
/// grid time index `i`.
pub fn rw_plus_weights(inputs: &CalibrationInputs, i: usize) -> Vec<f64> {
    let t = inputs.grid.times()[i];
    (0..inputs.cal.len())
        .map(|j| rw_plus_weight(inputs, j, t, None))
        .collect()
}

fn rw_plus_weight(inputs: &CalibrationInputs, j: usize, t: f64, g_obs: Option<f64>) -> f64 {
    let y = inputs.cal.times()[j];
    if y > t {
        1.0 / inputs.g_hat.value(j, t).max(inputs.clip_floor)
    } else if inputs.cal.events()[j] {
        1.0 / g_obs.unwrap_or_else(|| inputs.g_at_observed(j))
    } else {
        0.0
    }
}

/// Doubly robust pointwise survival estimates.
///
/// When both nuisance curves are exact at arbitrary times, observed times
/// off the grid are added as extra integration points so the event jump
/// lands where it happened. With tabulated nuisances an uncensored time off
/// the grid is an alignment error.
pub fn dr_pseudo_outcomes(inputs: &CalibrationInputs) -> Result<PseudoOutcomeMatrix> {
    let s_hat = inputs.s_hat()?;
    let exact = s_hat.exact_off_grid() && inputs.g_hat.exact_off_grid();
    let grid = inputs.grid.times();
    if !exact {
        for (j, (&y, &d)) in inputs
            .cal
            .times()
            .iter()
            .zip(inputs.cal.events())
            .enumerate()
        {
            if d && y > 0.0 && inputs.grid.position(y).is_none() {
                return Err(Error::Alignment(format!(
                    "observed event time {y} of subject {} is not on the time grid",
                    inputs.cal.ids()[j]
                )));
            }
        }
    }
    let k = grid.len();
    let n = inputs.cal.len();
    let mut values = vec![0.0; n * k];
    values
        .par_chunks_mut(k)
        .enumerate()
        .for_each_init(DrScratch::default, |scratch, (j, out)| {
            scratch.row(inputs, s_hat, exact, j, out);
        });
    Ok(PseudoOutcomeMatrix {
        grid: inputs.grid.clone(),
        method: Method::Dr,
        n_subjects: n,
        values,
    })
}

#[derive(Default)]
struct DrScratch {
    points: Vec<f64>,
    on_grid: Vec<bool>,
    s: Vec<f64>,
    g: Vec<f64>,
}

impl DrScratch {
    fn row(
        &mut self,
        inputs: &CalibrationInputs,
        s_hat: &dyn CurveSource,
        exact: bool,
        j: usize,
        out: &mut [f64],
    ) {
        let grid = inputs.grid.times();
        let y = inputs.cal.times()[j];
        let event = inputs.cal.events()[j];
        let floor = inputs.clip_floor;

        self.points.clear();
        self.on_grid.clear();
        let insert = exact && y > 0.0 && inputs.grid.position(y).is_none();
        let cut = if insert {
            inputs.grid.count_le(y)
        } else {
            grid.len()
        };
        self.points.extend_from_slice(&grid[..cut]);
        self.on_grid.resize(cut, true);
        if insert {
            self.points.push(y);
            self.on_grid.push(false);
            self.points.extend_from_slice(&grid[cut..]);
            self.on_grid.resize(self.points.len(), true);
        }
        self.s.resize(self.points.len(), 0.0);
        self.g.resize(self.points.len(), 0.0);
        s_hat.fill(j, &self.points, &mut self.s);
        inputs.g_hat.fill(j, &self.points, &mut self.g);

        // Event at time 0 (before the grid): full jump with S = G = 1.
        let mut acc = if event && y <= 0.0 { 1.0 } else { 0.0 };
        let mut s_prev = 1.0;
        let mut out_idx = 0;
        for p in 0..self.points.len() {
            let t = self.points[p];
            let s = self.s[p].max(floor);
            if t <= y {
                let g = self.g[p].max(floor);
                let d_lambda = 1.0 - s / s_prev;
                let jump = if event && t == y { 1.0 } else { 0.0 };
                acc += (jump - d_lambda) / (s * g);
            }
            s_prev = s;
            if self.on_grid[p] {
                out[out_idx] = s * (1.0 - acc);
                out_idx += 1;
            }
        }
    }
}

/// Horvitz-Thompson pseudo-outcomes `delta 1[Y > t] / G(Y | X)`.
pub fn ht_pseudo_outcomes(inputs: &CalibrationInputs) -> Result<PseudoOutcomeMatrix> {
    let grid = inputs.grid.times();
    let k = grid.len();
    let n = inputs.cal.len();
    let mut values = vec![0.0; n * k];
    values.par_chunks_mut(k).enumerate().for_each(|(j, out)| {
        if inputs.cal.events()[j] {
            let w = 1.0 / inputs.g_at_observed(j);
            let y = inputs.cal.times()[j];
            for (o, t) in out.iter_mut().zip(grid) {
                *o = if y > *t { w } else { 0.0 };
            }
        }
    });
    Ok(PseudoOutcomeMatrix {
        grid: inputs.grid.clone(),
        method: Method::Ht,
        n_subjects: n,
        values,
    })
}

/// `1[Y > t] / G(t | X)`.
pub fn ht_plus_pseudo_outcomes(inputs: &CalibrationInputs) -> Result<PseudoOutcomeMatrix> {
    let grid = inputs.grid.times();
    let k = grid.len();
    let n = inputs.cal.len();
    let mut values = vec![0.0; n * k];
    values.par_chunks_mut(k).enumerate().for_each(|(j, out)| {
        let y = inputs.cal.times()[j];
        let alive = grid.partition_point(|t| *t < y);
        inputs.g_hat.fill(j, &grid[..alive], &mut out[..alive]);
        for o in &mut out[..alive] {
            *o = 1.0 / o.max(inputs.clip_floor);
        }
    });
    Ok(PseudoOutcomeMatrix {
        grid: inputs.grid.clone(),
        method: Method::HtPlus,
        n_subjects: n,
        values,
    })
}

pub fn pseudo_outcomes(inputs: &CalibrationInputs, method: Method) -> Result<PseudoOutcomeMatrix> {
    match method {
        Method::Ht => ht_pseudo_outcomes(inputs),
        Method::HtPlus => ht_plus_pseudo_outcomes(inputs),
        Method::Dr => dr_pseudo_outcomes(inputs),
        Method::Rw | Method::RwPlus => Err(Error::Usage(format!(
            "{method} is a weighted estimator and has no pseudo-outcomes"
        ))),
    }
}

/// Calibration subjects grouped by risk: `order` sorts subjects by
/// ascending risk, `groups[g]` is the range of `order` sharing one risk.
struct RiskGroups {
    order: Vec<usize>,
    groups: Vec<std::ops::Range<usize>>,
    sorted_risks: Vec<f64>,
}

impl RiskGroups {
    fn new(risks: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..risks.len()).collect();
        order.sort_by(|a, b| risks[*a].total_cmp(&risks[*b]).then(a.cmp(b)));
        let sorted_risks: Vec<f64> = order.iter().map(|i| risks[*i]).collect();
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=order.len() {
            if i == order.len() || sorted_risks[i] != sorted_risks[start] {
                groups.push(start..i);
                start = i;
            }
        }
        Self {
            order,
            groups,
            sorted_risks,
        }
    }

    /// Copies one row per group into a full `n x k` surface in sorted order.
    fn expand(&self, grouped: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.order.len() * k];
        for (g, range) in self.groups.iter().enumerate() {
            let src = &grouped[g * k..(g + 1) * k];
            for r in range.clone() {
                out[r * k..(r + 1) * k].copy_from_slice(src);
            }
        }
        out
    }
}

/// Indices of columns that differ from their left neighbour in any row of
/// the subject-major matrix; column 0 always starts a run.
fn column_runs(values: &[f64], n: usize, k: usize) -> Vec<usize> {
    let mut starts_run = vec![false; k];
    starts_run[0] = true;
    for row in values.chunks(k).take(n) {
        for c in 1..k {
            if !starts_run[c] && row[c] != row[c - 1] {
                starts_run[c] = true;
            }
        }
    }
    (0..k).filter(|c| starts_run[*c]).collect()
}

/// Projects a subject-major target matrix onto valid surfaces, pooling tied
/// risks and identical adjacent columns into weighted rows and columns.
fn project_targets(
    values: &[f64],
    groups: &RiskGroups,
    k: usize,
    config: &ProjectionConfig,
) -> Result<(Vec<f64>, usize)> {
    let n = groups.order.len();
    let runs = column_runs(values, n, k);
    let kc = runs.len();
    let mut col_weights: Vec<f64> = runs.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    col_weights.push((k - runs[kc - 1]) as f64);

    let g = groups.groups.len();
    let mut compact = vec![0.0; g * kc];
    let mut row_weights = Vec::with_capacity(g);
    for (gi, range) in groups.groups.iter().enumerate() {
        let dst = &mut compact[gi * kc..(gi + 1) * kc];
        for &subject in &groups.order[range.clone()] {
            let row = &values[subject * k..(subject + 1) * k];
            for (d, &c) in dst.iter_mut().zip(&runs) {
                *d += row[c];
            }
        }
        let m = range.len() as f64;
        for d in dst.iter_mut() {
            *d /= m;
        }
        row_weights.push(m);
    }
    tracing::debug!(rows = g, columns = kc, "projection problem after pooling");
    let outcome = project_doubly_monotone_weighted(&compact, &row_weights, &col_weights, config)?;

    let mut grouped = vec![0.0; g * k];
    for gi in 0..g {
        let src = &outcome.matrix[gi * kc..(gi + 1) * kc];
        let dst = &mut grouped[gi * k..(gi + 1) * k];
        for (ci, &c) in runs.iter().enumerate() {
            let end = runs.get(ci + 1).copied().unwrap_or(k);
            dst[c..end].fill(src[ci]);
        }
    }
    Ok((grouped, outcome.iterations))
}

/// Clamps to [0, 1] and removes rounding-level monotonicity violations left
/// by the solver, so the stored rows are exactly non-increasing in both
/// directions.
fn finalize_surface(values: &mut [f64], k: usize) {
    for row in values.chunks_mut(k) {
        let mut floor = 1.0f64;
        for v in row {
            floor = floor.min(v.clamp(0.0, 1.0));
            *v = floor;
        }
    }
    for i in 1..values.len() / k {
        let (prev, cur) = values.split_at_mut(i * k);
        for (c, p) in cur[..k].iter_mut().zip(&prev[(i - 1) * k..]) {
            *c = c.min(*p);
        }
    }
}

/// Weighted isotonic fits per grid time (RW and RW+).
pub fn fit_rw_isr(
    inputs: &CalibrationInputs,
    variant: Method,
    config: &CalibrationConfig,
) -> Result<CalibratedSurface> {
    inputs.validate()?;
    let started = Instant::now();
    let plus = match variant {
        Method::Rw => false,
        Method::RwPlus => true,
        other => {
            return Err(Error::Usage(format!(
                "{other} is not a reweighted estimator"
            )))
        }
    };
    let groups = RiskGroups::new(&inputs.risks);
    let grid = inputs.grid.times();
    let k = grid.len();
    let g = groups.groups.len();
    let y = inputs.cal.times();
    let g_obs: Vec<f64> = (0..inputs.cal.len())
        .map(|j| inputs.g_at_observed(j))
        .collect();
    let rw = rw_weights(inputs);

    // Per-group target/weight for one time: weights summed, targets pooled.
    let column = |t: f64, pava: &mut Pava, target: &mut Vec<f64>, weight: &mut Vec<f64>| {
        target.clear();
        weight.clear();
        for range in &groups.groups {
            let (mut ws, mut w) = (0.0, 0.0);
            for &j in &groups.order[range.clone()] {
                let wj = if plus {
                    rw_plus_weight(inputs, j, t, Some(g_obs[j]))
                } else {
                    rw[j]
                };
                w += wj;
                if y[j] > t {
                    ws += wj;
                }
            }
            weight.push(w);
            target.push(if w > 0.0 { ws / w } else { 0.0 });
        }
        if weight.iter().all(|w| *w == 0.0) {
            return Err(Error::DegenerateTime { time: t });
        }
        pava.solve_unchecked(target, weight);
        Ok(())
    };

    // For RW the targets only change at observed times, so each fit is
    // reused until the next one.
    let mut columns = vec![0.0; k * g];
    if plus {
        columns.par_chunks_mut(g).enumerate().try_for_each_init(
            || (Pava::default(), Vec::new(), Vec::new()),
            |(pava, target, weight), (i, col)| {
                column(grid[i], pava, target, weight)?;
                col.copy_from_slice(target);
                Ok::<_, Error>(())
            },
        )?;
    } else {
        let mut sorted_y: Vec<f64> = y.to_vec();
        sorted_y.sort_by(f64::total_cmp);
        let mut pava = Pava::default();
        let (mut target, mut weight) = (Vec::new(), Vec::new());
        let mut last_count = usize::MAX;
        for i in 0..k {
            let count = sorted_y.partition_point(|v| *v <= grid[i]);
            if count != last_count {
                column(grid[i], &mut pava, &mut target, &mut weight)?;
                last_count = count;
            }
            columns[i * g..(i + 1) * g].copy_from_slice(&target);
        }
    }

    let mut grouped = vec![0.0; g * k];
    for i in 0..k {
        for gi in 0..g {
            grouped[gi * k + i] = columns[i * g + gi];
        }
    }
    drop(columns);

    let iterations = if plus {
        let (projected, iterations) =
            project_targets_grouped(&grouped, g, &groups, k, &config.projection)?;
        grouped = projected;
        iterations
    } else {
        for (gi, row) in grouped.chunks_mut(k).enumerate() {
            for c in 1..k {
                if row[c] > row[c - 1] + RW_TIME_TOL {
                    return Err(Error::Degenerate(format!(
                        "RW fit increases in time at row {gi}, grid time {}",
                        grid[c]
                    )));
                }
                if row[c] > row[c - 1] {
                    row[c] = row[c - 1];
                }
            }
        }
        0
    };
    finalize_surface(&mut grouped, k);
    let surface = groups.expand(&grouped, k);
    tracing::info!(
        method = %variant,
        grid = k,
        rows = g,
        iterations,
        seconds = started.elapsed().as_secs_f64(),
        "calibrated surface"
    );
    CalibratedSurface::new(
        groups.sorted_risks.clone(),
        inputs.grid.clone(),
        surface,
        variant,
        config.interpolation,
    )
}

/// Projection of a matrix that already has one row per risk group.
fn project_targets_grouped(
    grouped: &[f64],
    g: usize,
    groups: &RiskGroups,
    k: usize,
    config: &ProjectionConfig,
) -> Result<(Vec<f64>, usize)> {
    let runs = column_runs(grouped, g, k);
    let kc = runs.len();
    let mut col_weights: Vec<f64> = runs.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    col_weights.push((k - runs[kc - 1]) as f64);
    let row_weights: Vec<f64> = groups.groups.iter().map(|r| r.len() as f64).collect();
    let mut compact = vec![0.0; g * kc];
    for gi in 0..g {
        for (ci, &c) in runs.iter().enumerate() {
            compact[gi * kc + ci] = grouped[gi * k + c];
        }
    }
    let outcome = project_doubly_monotone_weighted(&compact, &row_weights, &col_weights, config)?;
    let mut out = vec![0.0; g * k];
    for gi in 0..g {
        for (ci, &c) in runs.iter().enumerate() {
            let end = runs.get(ci + 1).copied().unwrap_or(k);
            out[gi * k + c..gi * k + end].fill(outcome.matrix[gi * kc + ci]);
        }
    }
    Ok((out, outcome.iterations))
}

/// Projection of pseudo-outcomes (HT, HT+ and DR).
pub fn fit_pseudo_isr(
    inputs: &CalibrationInputs,
    variant: Method,
    config: &CalibrationConfig,
) -> Result<CalibratedSurface> {
    inputs.validate()?;
    let started = Instant::now();
    let pseudo = pseudo_outcomes(inputs, variant)?;
    let surface = surface_from_pseudo(&pseudo, &inputs.risks, config)?;
    tracing::info!(
        method = %variant,
        grid = inputs.grid.len(),
        seconds = started.elapsed().as_secs_f64(),
        "calibrated surface"
    );
    Ok(surface)
}

/// Projects an arbitrary pseudo-outcome matrix given the subjects' risks.
pub fn surface_from_pseudo(
    pseudo: &PseudoOutcomeMatrix,
    risks: &[f64],
    config: &CalibrationConfig,
) -> Result<CalibratedSurface> {
    let k = pseudo.grid.len();
    if pseudo.values.len() != pseudo.n_subjects * k || risks.len() != pseudo.n_subjects {
        return Err(Error::Alignment(format!(
            "pseudo-outcome matrix for {} subjects does not match {} risks",
            pseudo.n_subjects,
            risks.len()
        )));
    }
    if pseudo.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "pseudo-outcomes contain non-finite values".into(),
        ));
    }
    let groups = RiskGroups::new(risks);
    let (mut grouped, iterations) =
        project_targets(&pseudo.values, &groups, k, &config.projection)?;
    tracing::debug!(iterations, "pseudo-outcome projection");
    finalize_surface(&mut grouped, k);
    let surface = groups.expand(&grouped, k);
    CalibratedSurface::new(
        groups.sorted_risks,
        pseudo.grid.clone(),
        surface,
        pseudo.method,
        config.interpolation,
    )
}

/// Dispatches to the estimator family of `method`.
pub fn fit_surface(
    inputs: &CalibrationInputs,
    method: Method,
    config: &CalibrationConfig,
) -> Result<CalibratedSurface> {
    match method {
        Method::Rw | Method::RwPlus => fit_rw_isr(inputs, method, config),
        _ => fit_pseudo_isr(inputs, method, config),
    }
}

/// Position of `risk` among the surface rows: `(lower, upper, weight of
/// upper)` after clamping to the calibration range.
fn risk_bracket(risks: &[f64], risk: f64, interpolation: Interpolation) -> (usize, usize, f64) {
    let n = risks.len();
    let above = risks.partition_point(|r| *r <= risk);
    match interpolation {
        Interpolation::Step => {
            let i = above.saturating_sub(1);
            (i, i, 0.0)
        }
        Interpolation::Bilinear => {
            if above == 0 {
                (0, 0, 0.0)
            } else if above == n {
                (n - 1, n - 1, 0.0)
            } else {
                let (lo, hi) = (above - 1, above);
                let span = risks[hi] - risks[lo];
                let w = if span > 0.0 {
                    (risk - risks[lo]) / span
                } else {
                    0.0
                };
                (lo, hi, w)
            }
        }
    }
}

/// `(1 - w) a + w b` for `a >= b`, written so that the result is
/// non-increasing in `w` under rounding and never leaves `[b, a]`.
fn blend(a: f64, b: f64, w: f64) -> f64 {
    (a - w * (a - b)).max(b)
}

impl CalibratedSurface {
    /// Curve of a subject with the given risk at the grid times, using the
    /// surface's risk interpolation.
    pub fn curve_at_grid(&self, risk: f64, out: &mut [f64]) {
        let (lo, hi, w) = risk_bracket(&self.sorted_risks, risk, self.interpolation);
        let a = self.row(lo);
        if w == 0.0 {
            out.copy_from_slice(a);
        } else {
            let b = self.row(hi);
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o = blend(*x, *y, w);
            }
        }
    }

    /// Calibrated survival probability at `(risk, t)`.
    pub fn predict(&self, risk: f64, t: f64) -> f64 {
        let times = self.grid.times();
        if t <= 0.0 {
            return 1.0;
        }
        let (lo, hi, w) = risk_bracket(&self.sorted_risks, risk, self.interpolation);
        let at = |c: usize| -> f64 {
            let a = self.entry(lo, c);
            if w == 0.0 {
                a
            } else {
                blend(a, self.entry(hi, c), w)
            }
        };
        let after = times.partition_point(|g| *g <= t);
        let value = match self.interpolation {
            Interpolation::Step => {
                if after == 0 {
                    1.0
                } else {
                    at(after - 1)
                }
            }
            Interpolation::Bilinear => {
                if after == times.len() {
                    at(times.len() - 1)
                } else if after > 0 && times[after - 1] == t {
                    at(after - 1)
                } else {
                    let (t0, v0) = if after == 0 {
                        (0.0, 1.0)
                    } else {
                        (times[after - 1], at(after - 1))
                    };
                    let (t1, v1) = (times[after], at(after));
                    let u = (t - t0) / (t1 - t0);
                    v0 + u * (v1 - v0)
                }
            }
        };
        value.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ProbabilityRole;
    use crate::data::SurvivalProbabilityGrid;

    fn dataset(times: &[f64], events: &[bool]) -> SurvivalDataset {
        let ids = (0..times.len()).map(|i| format!("c{i}")).collect();
        SurvivalDataset::new(ids, times.to_vec(), events.to_vec(), vec![], vec![]).unwrap()
    }

    fn constant_grid(
        role: ProbabilityRole,
        grid: &TimeGrid,
        data: &SurvivalDataset,
        value: f64,
    ) -> SurvivalProbabilityGrid {
        SurvivalProbabilityGrid::new(
            role,
            grid.clone(),
            data.ids().to_vec(),
            vec![value; grid.len() * data.len()],
        )
        .unwrap()
    }

    #[test]
    fn grid_merges_lattice_and_observed_times() {
        let cal = dataset(&[1.0, 2.0], &[true, false]);
        let train = dataset(&[1.5], &[true]);
        let grid = build_time_grid(&train, &cal, 4).unwrap();
        assert_eq!(grid.times(), &[0.5, 1.0, 1.5, 2.0]);
        let grid = build_time_grid(&train, &cal, 1).unwrap();
        assert_eq!(grid.times(), &[1.0, 1.5, 2.0]);
        let zero = dataset(&[0.0], &[true]);
        assert!(matches!(
            build_time_grid(&train, &zero, 10),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn weights_follow_formulas() {
        let cal = dataset(&[1.0, 2.0, 3.0], &[false, true, true]);
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        let g = SurvivalProbabilityGrid::new(
            ProbabilityRole::Censoring,
            grid.clone(),
            cal.ids().to_vec(),
            vec![0.9, 0.8, 0.7, 0.9, 0.5, 0.4, 0.9, 0.8, 1e-6],
        )
        .unwrap();
        let risks = RiskScores::new(cal.ids().to_vec(), vec![0.0, 1.0, 2.0]).unwrap();
        let inputs = CalibrationInputs::new(&cal, &risks, None, &g, grid).unwrap();
        assert_eq!(rw_weights(&inputs), vec![0.0, 2.0, 1e4]);
        let w = rw_plus_weights(&inputs, 0);
        assert_eq!(w, vec![0.0, 1.0 / 0.9, 1.0 / 0.9]);
        let w = rw_plus_weights(&inputs, 1);
        assert_eq!(w, vec![0.0, 2.0, 1.0 / 0.8]);
    }

    #[test]
    fn ht_pseudo_outcomes_flip_at_observed_time() {
        let cal = dataset(&[5.0, 4.0], &[true, false]);
        let grid = TimeGrid::new(vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let g = constant_grid(ProbabilityRole::Censoring, &grid, &cal, 0.8);
        let risks = RiskScores::new(cal.ids().to_vec(), vec![0.0, 1.0]).unwrap();
        let inputs = CalibrationInputs::new(&cal, &risks, None, &g, grid).unwrap();
        let ht = ht_pseudo_outcomes(&inputs).unwrap();
        assert_eq!(ht.subject_row(0), &[1.25, 1.25, 0.0, 0.0]);
        assert_eq!(ht.subject_row(1), &[0.0; 4]);
        let htp = ht_plus_pseudo_outcomes(&inputs).unwrap();
        assert_eq!(htp.subject_row(0), &[1.25, 1.25, 0.0, 0.0]);
        assert_eq!(htp.subject_row(1), &[1.25, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dr_with_flat_nuisances() {
        let cal = dataset(&[2.0, 3.0], &[true, false]);
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = constant_grid(ProbabilityRole::Survival, &grid, &cal, 1.0);
        let g = constant_grid(ProbabilityRole::Censoring, &grid, &cal, 1.0);
        let risks = RiskScores::new(cal.ids().to_vec(), vec![0.0, 1.0]).unwrap();
        let inputs = CalibrationInputs::new(&cal, &risks, Some(&s), &g, grid).unwrap();
        let dr = dr_pseudo_outcomes(&inputs).unwrap();
        assert_eq!(dr.subject_row(0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(dr.subject_row(1), &[1.0; 4]);
    }

    #[test]
    fn dr_rejects_off_grid_event_with_tabulated_nuisances() {
        let cal = dataset(&[2.5], &[true]);
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        let s = constant_grid(ProbabilityRole::Survival, &grid, &cal, 1.0);
        let g = constant_grid(ProbabilityRole::Censoring, &grid, &cal, 1.0);
        let risks = RiskScores::new(cal.ids().to_vec(), vec![0.0]).unwrap();
        let inputs = CalibrationInputs::new(&cal, &risks, Some(&s), &g, grid).unwrap();
        assert!(matches!(
            dr_pseudo_outcomes(&inputs),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn rw_single_subject() {
        let cal = dataset(&[2.0], &[true]);
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        let g = constant_grid(ProbabilityRole::Censoring, &grid, &cal, 1.0);
        let risks = RiskScores::new(cal.ids().to_vec(), vec![0.3]).unwrap();
        let inputs = CalibrationInputs::new(&cal, &risks, None, &g, grid).unwrap();
        let s = fit_rw_isr(&inputs, Method::Rw, &CalibrationConfig::default()).unwrap();
        assert_eq!(s.row(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn rw_without_events_is_degenerate() {
        let cal = dataset(&[2.0, 3.0], &[false, false]);
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        let g = constant_grid(ProbabilityRole::Censoring, &grid, &cal, 1.0);
        let risks = RiskScores::new(cal.ids().to_vec(), vec![0.3, 0.4]).unwrap();
        let inputs = CalibrationInputs::new(&cal, &risks, None, &g, grid).unwrap();
        let err = fit_rw_isr(&inputs, Method::Rw, &CalibrationConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateTime { time } if time == 1.0));
    }

    #[test]
    fn tied_risks_get_identical_rows() {
        let cal = dataset(&[1.0, 3.0, 2.0], &[true, true, true]);
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        let s = constant_grid(ProbabilityRole::Survival, &grid, &cal, 1.0);
        let g = constant_grid(ProbabilityRole::Censoring, &grid, &cal, 1.0);
        let risks = RiskScores::new(cal.ids().to_vec(), vec![0.5, 0.5, 0.1]).unwrap();
        let inputs = CalibrationInputs::new(&cal, &risks, Some(&s), &g, grid).unwrap();
        for method in Method::ALL {
            let surface = fit_surface(&inputs, method, &CalibrationConfig::default()).unwrap();
            assert_eq!(surface.row(1), surface.row(2), "{method}");
        }
    }

    #[test]
    fn predict_interpolation_rules() {
        let grid = TimeGrid::new(vec![1.0, 2.0]).unwrap();
        let s = CalibratedSurface::new(
            vec![0.0, 1.0],
            grid,
            vec![0.8, 0.6, 0.4, 0.2],
            Method::Dr,
            Interpolation::Bilinear,
        )
        .unwrap();
        assert_eq!(s.predict(0.5, 0.0), 1.0);
        assert_eq!(s.predict(1.0, 1.0), 0.4);
        assert!((s.predict(0.5, 1.0) - 0.6).abs() < 1e-12);
        assert!((s.predict(0.0, 0.5) - 0.9).abs() < 1e-12);
        assert_eq!(s.predict(-5.0, 99.0), 0.6);
        assert_eq!(s.predict(5.0, 99.0), 0.2);
        let s = s.with_interpolation(Interpolation::Step);
        assert_eq!(s.predict(0.5, 1.5), 0.8);
        assert_eq!(s.predict(0.5, 0.5), 1.0);
        assert_eq!(s.predict(-1.0, 2.0), 0.6);
    }
}
