//! Linear Cox proportional-hazards models: Newton-Raphson on the Breslow
//! partial likelihood, the Breslow baseline hazard, and survival curves.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{CurveSource, RiskScores, StepCumulativeHazard, SurvivalDataset, TimeGrid};
use crate::error::{Error, Result};

/// Coefficients larger than this in magnitude are treated as separation.
pub const SEPARATION_LIMIT: f64 = 50.0;

/// A converged coefficient beyond this magnitude whose standard error
/// exceeds `DRIFT_SE_RATIO` times its size is also reported as separation.
const DRIFT_LIMIT: f64 = 10.0;
const DRIFT_SE_RATIO: f64 = 10.0;
const DECREMENT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxConfig {
    pub max_iter: usize,
    /// Convergence threshold on the infinity norm of the gradient.
    pub tol: f64,
    /// Penalty `ridge * ||theta||^2` subtracted from the log-likelihood.
    pub ridge: f64,
}

impl Default for CoxConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-8,
            ridge: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Penalized partial log-likelihood at the returned coefficients.
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// From the inverse of the observed (penalized) information.
    pub standard_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxModel {
    pub coefficients: Vec<f64>,
    pub baseline: StepCumulativeHazard,
    pub ridge: f64,
    pub diagnostics: FitDiagnostics,
    /// Log-likelihood after every accepted Newton step, starting at zero
    /// coefficients.
    pub trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    coef: Vec<f64>,
    baseline_times: Vec<f64>,
    baseline_increments: Vec<f64>,
    ridge: f64,
    diagnostics: FitDiagnostics,
    #[serde(default)]
    trace: Vec<f64>,
}

impl CoxModel {
    /// `theta' x` for one covariate row.
    pub fn risk(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum()
    }

    pub fn risk_scores(&self, data: &SurvivalDataset) -> Result<RiskScores> {
        if data.n_covariates() != self.coefficients.len() {
            return Err(Error::Validation(format!(
                "model has {} coefficients but data has {} covariates",
                self.coefficients.len(),
                data.n_covariates()
            )));
        }
        let risks = (0..data.len()).map(|i| self.risk(data.row(i))).collect();
        RiskScores::new(data.ids().to_vec(), risks)
    }

    /// `S(t) = exp(-Lambda0(t) e^risk)` at ascending `times`, floored at
    /// `clip_floor`.
    pub fn survival_into(&self, risk: f64, times: &[f64], clip_floor: f64, out: &mut [f64]) {
        self.baseline.values_sorted(times, out);
        let scale = risk.exp();
        for v in out.iter_mut() {
            *v = (-*v * scale).exp().max(clip_floor);
        }
    }

    pub fn predict_survival(&self, risk: f64, grid: &TimeGrid, clip_floor: f64) -> Vec<f64> {
        let mut out = vec![0.0; grid.len()];
        self.survival_into(risk, grid.times(), clip_floor, &mut out);
        out
    }

    /// Curves for every subject of `data`.
    pub fn curves(&self, data: &SurvivalDataset, clip_floor: f64) -> Result<CoxCurves> {
        let risks = self.risk_scores(data)?;
        Ok(CoxCurves::new(
            self.baseline.clone(),
            risks.values().to_vec(),
            clip_floor,
        ))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ModelDoc = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if doc.coef.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation(format!(
                "{}: coefficients must be finite",
                path.display()
            )));
        }
        Ok(Self {
            coefficients: doc.coef,
            baseline: StepCumulativeHazard::new(doc.baseline_times, doc.baseline_increments)?,
            ridge: doc.ridge,
            diagnostics: doc.diagnostics,
            trace: doc.trace,
        })
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let doc = ModelDoc {
            coef: self.coefficients.clone(),
            baseline_times: self.baseline.jump_times().to_vec(),
            baseline_increments: self.baseline.increments().to_vec(),
            ridge: self.ridge,
            diagnostics: self.diagnostics.clone(),
            trace: self.trace.clone(),
        };
        let mut bytes = serde_json::to_vec(&doc).expect("model serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::data::write_file(path.as_ref(), &self.to_json_bytes())
    }
}

/// Cox survival curves `exp(-Lambda0(t) e^{r_i})` for a fixed set of subjects.
#[derive(Debug, Clone)]
pub struct CoxCurves {
    baseline: StepCumulativeHazard,
    risks: Vec<f64>,
    clip_floor: f64,
}

impl CoxCurves {
    pub fn new(baseline: StepCumulativeHazard, risks: Vec<f64>, clip_floor: f64) -> Self {
        Self {
            baseline,
            risks,
            clip_floor,
        }
    }

    pub fn risks(&self) -> &[f64] {
        &self.risks
    }
}

impl CurveSource for CoxCurves {
    fn n_subjects(&self) -> usize {
        self.risks.len()
    }

    fn fill(&self, subject: usize, times: &[f64], out: &mut [f64]) {
        self.baseline.values_sorted(times, out);
        let scale = self.risks[subject].exp();
        for v in out.iter_mut() {
            *v = (-*v * scale).exp().max(self.clip_floor);
        }
    }
}

/// Penalized Breslow partial log-likelihood with its gradient and Hessian.
struct Objective<'a> {
    /// Subject indices sorted by descending observed time.
    order: Vec<usize>,
    times: &'a [f64],
    events: &'a [bool],
    /// Column-centred covariates, row-major.
    x: Vec<f64>,
    p: usize,
    ridge: f64,
}

struct Evaluation {
    loglik: f64,
    gradient: Vec<f64>,
    /// Negative Hessian (observed information), row-major `p x p`.
    information: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(data: &'a SurvivalDataset, events: &'a [bool], ridge: f64) -> Self {
        let n = data.len();
        let p = data.n_covariates();
        let mut means = vec![0.0; p];
        for i in 0..n {
            for (m, v) in means.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut x = Vec::with_capacity(n * p);
        for i in 0..n {
            x.extend(data.row(i).iter().zip(&means).map(|(v, m)| v - m));
        }
        let times = data.times();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| times[*b].total_cmp(&times[*a]).then(a.cmp(b)));
        Self {
            order,
            times,
            events,
            x,
            p,
            ridge,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    fn loglik(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta, false).loglik
    }

    fn evaluate(&self, theta: &[f64], derivatives: bool) -> Evaluation {
        let p = self.p;
        let eta: Vec<f64> = (0..self.times.len())
            .map(|i| self.row(i).iter().zip(theta).map(|(a, b)| a * b).sum())
            .collect();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut loglik = 0.0;
        let mut gradient = vec![0.0; p];
        let mut information = vec![0.0; p * p];
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p * p];
        let mut pos = 0;
        while pos < self.order.len() {
            let t = self.times[self.order[pos]];
            let mut end = pos;
            let mut deaths = 0usize;
            while end < self.order.len() && self.times[self.order[end]] == t {
                let i = self.order[end];
                let e = (eta[i] - shift).exp();
                s0 += e;
                if derivatives {
                    let xi = self.row(i);
                    for a in 0..p {
                        s1[a] += e * xi[a];
                        for b in 0..=a {
                            s2[a * p + b] += e * xi[a] * xi[b];
                        }
                    }
                }
                if self.events[i] {
                    deaths += 1;
                    loglik += eta[i];
                    if derivatives {
                        for (g, v) in gradient.iter_mut().zip(self.row(i)) {
                            *g += v;
                        }
                    }
                }
                end += 1;
            }
            if deaths > 0 {
                let d = deaths as f64;
                loglik -= d * (s0.ln() + shift);
                if derivatives {
                    for a in 0..p {
                        let ma = s1[a] / s0;
                        gradient[a] -= d * ma;
                        for b in 0..=a {
                            let v = d * (s2[a * p + b] / s0 - ma * s1[b] / s0);
                            information[a * p + b] += v;
                        }
                    }
                }
            }
            pos = end;
        }
        loglik -= self.ridge * theta.iter().map(|b| b * b).sum::<f64>();
        if derivatives {
            for a in 0..p {
                gradient[a] -= 2.0 * self.ridge * theta[a];
                information[a * p + a] += 2.0 * self.ridge;
                for b in 0..a {
                    information[b * p + a] = information[a * p + b];
                }
            }
        }
        Evaluation {
            loglik,
            gradient,
            information,
        }
    }
}

/// Fits `theta` by maximizing the Breslow partial likelihood.
pub fn fit_cox(data: &SurvivalDataset, config: &CoxConfig) -> Result<CoxModel> {
    fit_with_events(data, data.events(), config)
}

/// Censoring model: the same fit with the event indicator complemented.
pub fn fit_censoring(data: &SurvivalDataset, config: &CoxConfig) -> Result<CoxModel> {
    let flipped: Vec<bool> = data.events().iter().map(|e| !e).collect();
    fit_with_events(data, &flipped, config)
}

fn fit_with_events(
    data: &SurvivalDataset,
    events: &[bool],
    config: &CoxConfig,
) -> Result<CoxModel> {
    if !data.has_covariates() {
        return Err(Error::Validation(
            "a Cox fit needs at least one covariate".into(),
        ));
    }
    if !events.iter().any(|e| *e) {
        return Err(Error::NoEvents);
    }
    if config.ridge < 0.0 || !config.ridge.is_finite() {
        return Err(Error::Validation(format!(
            "ridge penalty {} must be finite and >= 0",
            config.ridge
        )));
    }
    let p = data.n_covariates();
    let objective = Objective::new(data, events, config.ridge);
    let mut theta = vec![0.0; p];
    let mut eval = objective.evaluate(&theta, true);
    let mut trace = vec![eval.loglik];
    let mut iterations = 0;
    loop {
        let gnorm = inf_norm(&eval.gradient);
        if gnorm < config.tol {
            break;
        }
        if iterations == config.max_iter {
            return Err(Error::CoxNonConvergence {
                iterations,
                gradient_norm: gnorm,
                coefficients: theta,
            });
        }
        let step = cholesky_solve(&eval.information, &eval.gradient, p).ok_or_else(|| {
            Error::Degenerate(
                "partial-likelihood information is singular (constant covariate?); \
                 refit with a positive ridge penalty"
                    .into(),
            )
        })?;
        // Newton decrement: predicted log-likelihood gain of a full step. Once
        // it is below rounding noise of the objective, further steps cannot
        // be told apart from the current point.
        let decrement: f64 = step.iter().zip(&eval.gradient).map(|(s, g)| s * g).sum();
        if decrement < DECREMENT_TOL * eval.loglik.abs().max(1.0) {
            break;
        }
        let mut scale = 1.0;
        let mut candidate;
        let mut accepted = false;
        for _ in 0..60 {
            candidate = theta
                .iter()
                .zip(&step)
                .map(|(t, s)| t + scale * s)
                .collect::<Vec<_>>();
            let ll = objective.loglik(&candidate);
            if ll.is_finite() && ll >= eval.loglik {
                theta = candidate;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // No ascent possible along the Newton direction: numerically at
            // the optimum, or stuck.
            let gnorm = inf_norm(&eval.gradient);
            return Err(Error::CoxNonConvergence {
                iterations,
                gradient_norm: gnorm,
                coefficients: theta,
            });
        }
        if let Some((index, value)) = theta
            .iter()
            .enumerate()
            .find(|(_, v)| v.abs() > SEPARATION_LIMIT)
        {
            return Err(Error::Separation {
                index,
                value: *value,
            });
        }
        eval = objective.evaluate(&theta, true);
        trace.push(eval.loglik);
        tracing::trace!(iterations, loglik = eval.loglik, "newton step");
    }

    let standard_errors = match invert_spd(&eval.information, p) {
        Some(inv) => (0..p).map(|a| inv[a * p + a].sqrt()).collect(),
        None => vec![f64::NAN; p],
    };
    // Monotone likelihood: the gradient can vanish numerically while a
    // coefficient drifts off with an enormous standard error.
    if let Some(index) = (0..p).find(|&j| {
        theta[j].abs() > DRIFT_LIMIT && !(standard_errors[j] < DRIFT_SE_RATIO * theta[j].abs())
    }) {
        return Err(Error::Separation {
            index,
            value: theta[index],
        });
    }
    let risks: Vec<f64> = (0..data.len())
        .map(|i| theta.iter().zip(data.row(i)).map(|(b, v)| b * v).sum())
        .collect();
    let baseline = breslow_with_events(data.times(), events, &risks)?;
    let diagnostics = FitDiagnostics {
        log_likelihood: eval.loglik,
        iterations,
        gradient_norm: inf_norm(&eval.gradient),
        standard_errors,
    };
    tracing::debug!(?theta, iterations, "cox fit converged");
    Ok(CoxModel {
        coefficients: theta,
        baseline,
        ridge: config.ridge,
        diagnostics,
        trace,
    })
}

/// Breslow estimate of the baseline cumulative hazard for `risks` aligned to
/// `data` by subject id.
pub fn breslow_baseline(
    data: &SurvivalDataset,
    risks: &RiskScores,
) -> Result<StepCumulativeHazard> {
    let aligned = risks.aligned_to(data)?;
    breslow_with_events(data.times(), data.events(), &aligned)
}

/// Jump `d_j / sum_{Y_i >= t_j} exp(r_i)` at every distinct event time.
pub fn breslow_with_events(
    times: &[f64],
    events: &[bool],
    risks: &[f64],
) -> Result<StepCumulativeHazard> {
    if times.len() != events.len() || times.len() != risks.len() {
        return Err(Error::Alignment(
            "times, events and risks differ in length".into(),
        ));
    }
    let shift = risks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|a, b| times[*b].total_cmp(&times[*a]));
    let mut jumps = Vec::new();
    let mut at_risk = 0.0;
    let mut pos = 0;
    while pos < order.len() {
        let t = times[order[pos]];
        let mut deaths = 0usize;
        while pos < order.len() && times[order[pos]] == t {
            at_risk += (risks[order[pos]] - shift).exp();
            deaths += usize::from(events[order[pos]]);
            pos += 1;
        }
        if deaths > 0 {
            jumps.push((t, deaths as f64 / at_risk * (-shift).exp()));
        }
    }
    jumps.reverse();
    // Event times of zero carry no mass on (0, inf).
    let (jump_times, increments): (Vec<f64>, Vec<f64>) =
        jumps.into_iter().filter(|(t, _)| *t > 0.0).unzip();
    StepCumulativeHazard::new(jump_times, increments)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Lower Cholesky factor of a symmetric positive definite `p x p` matrix.
fn cholesky(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(0.0, f64::max);
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for m in 0..j {
                s -= l[i * p + m] * l[j * p + m];
            }
            if i == j {
                if s <= 1e-13 * scale.max(f64::MIN_POSITIVE) || !s.is_finite() {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let l = cholesky(a, p)?;
    let mut y = b.to_vec();
    for i in 0..p {
        for m in 0..i {
            y[i] -= l[i * p + m] * y[m];
        }
        y[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for m in i + 1..p {
            y[i] -= l[m * p + i] * y[m];
        }
        y[i] /= l[i * p + i];
    }
    Some(y)
}

fn invert_spd(a: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; p * p];
    for c in 0..p {
        let mut e = vec![0.0; p];
        e[c] = 1.0;
        let col = cholesky_solve(a, &e, p)?;
        for r in 0..p {
            inv[r * p + c] = col[r];
        }
    }
    Some(inv)
}
