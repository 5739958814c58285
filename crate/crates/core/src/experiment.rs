//! End-to-end simulation pipeline: simulate, fit Cox models, calibrate,
//! evaluate. One call handles one (setting, seed) pair.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::calibrate::{build_time_grid, fit_surface, CalibrationConfig, CalibrationInputs};
use crate::coxfit::{fit_censoring, fit_cox, CoxConfig, CoxModel};
use crate::data::{
    CalibratedSurface, CurveSource, Method, ProbabilityRole, SurvivalDataset,
    SurvivalProbabilityGrid, TimeGrid, DEFAULT_CLIP_FLOOR,
};
use crate::error::{Error, Result};
use crate::metrics::{
    joint_reports, summarize, CoxPredictor, EvaluationSet, MetricMode, MetricReport,
    PredictorSummary, SurfacePredictor, DEFAULT_TAUS,
};
use crate::simgen::generate;

/// Something that produces survival predictions on the test set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    /// The uncalibrated event model.
    Cox,
    Calibrated(Method),
}

impl Estimator {
    pub fn tag(self) -> &'static str {
        match self {
            Estimator::Cox => "Cox",
            Estimator::Calibrated(m) => m.tag(),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("cox") {
            Ok(Estimator::Cox)
        } else {
            s.parse().map(Estimator::Calibrated)
        }
    }
}

/// Where the calibration nuisances come from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum NuisanceSource {
    /// Cox curves evaluated in process.
    #[default]
    Fitted,
    /// Cox curves tabulated on the time grid, written to this directory as
    /// probability-grid files and read back before calibrating.
    GridFiles(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Train, calibration and test sizes.
    pub split: [usize; 3],
    pub estimators: Vec<Estimator>,
    pub modes: Vec<MetricMode>,
    pub taus: Vec<f64>,
    pub grid_density: usize,
    pub clip_floor: f64,
    pub cox: CoxConfig,
    pub calibration: CalibrationConfig,
    pub nuisances: NuisanceSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            split: [2500, 2500, 5000],
            estimators: std::iter::once(Estimator::Cox)
                .chain(Method::ALL.map(Estimator::Calibrated))
                .collect(),
            modes: vec![MetricMode::Oracle, MetricMode::Ipcw],
            taus: DEFAULT_TAUS.to_vec(),
            grid_density: crate::calibrate::DEFAULT_GRID_DENSITY,
            clip_floor: DEFAULT_CLIP_FLOOR,
            cox: CoxConfig::default(),
            calibration: CalibrationConfig::default(),
            nuisances: NuisanceSource::Fitted,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.split.contains(&0) {
            return Err(Error::Usage("split sizes must be positive".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Usage("no estimators selected".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Usage("no metric modes selected".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].contains(m) {
                return Err(Error::Usage(format!("metric mode {m} listed twice")));
            }
        }
        if self.grid_density == 0 {
            return Err(Error::Usage("grid density must be positive".into()));
        }
        Ok(())
    }
}

/// Everything fitted for one seed, handed to inspection callbacks.
pub struct SeedContext<'a> {
    pub setting: u8,
    pub seed: u64,
    pub train: &'a SurvivalDataset,
    pub cal: &'a SurvivalDataset,
    pub test: &'a SurvivalDataset,
    pub grid: &'a TimeGrid,
    pub event_model: &'a CoxModel,
    pub test_risks: &'a [f64],
}

pub struct SeedRun {
    pub reports: Vec<MetricReport>,
    pub grid_len: usize,
}

impl SeedRun {
    pub fn report(&self, estimator: Estimator, mode: MetricMode) -> Option<&MetricReport> {
        self.reports
            .iter()
            .find(|r| r.method == estimator.tag() && r.mode == mode)
    }

    /// Header plus one CSV row per report.
    pub fn csv(&self, taus: &[f64]) -> String {
        let mut out = MetricReport::csv_header(taus);
        out.push('\n');
        for r in &self.reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}

pub fn dataset_tag(setting: u8) -> String {
    format!("setting{setting}")
}

/// Runs the pipeline for one setting and seed.
pub fn run_seed(setting: u8, seed: u64, config: &ExperimentConfig) -> Result<SeedRun> {
    run_seed_with(setting, seed, config, |_, _, _| Ok(()))
}

/// Like [`run_seed`], calling `inspect` on every calibrated surface before
/// it is evaluated and dropped.
pub fn run_seed_with(
    setting: u8,
    seed: u64,
    config: &ExperimentConfig,
    mut inspect: impl FnMut(&SeedContext, Method, &CalibratedSurface) -> Result<()>,
) -> Result<SeedRun> {
    config.validate()?;
    let total: usize = config.split.iter().sum();
    let data = generate(setting, total, seed)?;
    let parts = data.split(&config.split)?;
    let (train, cal, test) = (&parts[0], &parts[1], &parts[2]);

    let event_model = fit_cox(&train.dataset, &config.cox)?;
    let censor_model = fit_censoring(&train.dataset, &config.cox)?;
    let grid = build_time_grid(&train.dataset, &cal.dataset, config.grid_density)?;
    let t_max = cal.dataset.max_time();
    let cal_risks = event_model.risk_scores(&cal.dataset)?;
    let test_risks = event_model.risk_scores(&test.dataset)?.values().to_vec();

    let s_fit = event_model.curves(&cal.dataset, config.clip_floor)?;
    let g_fit = censor_model.curves(&cal.dataset, config.clip_floor)?;
    let tabulated;
    let (s_hat, g_hat): (&dyn CurveSource, &dyn CurveSource) = match &config.nuisances {
        NuisanceSource::Fitted => (&s_fit, &g_fit),
        NuisanceSource::GridFiles(dir) => {
            tabulated = grid_files_roundtrip(dir, &grid, &cal.dataset, &s_fit, &g_fit)?;
            (&tabulated.0, &tabulated.1)
        }
    };

    let test_g = censor_model.curves(&test.dataset, config.clip_floor)?;
    let true_times: Vec<f64> = test.truths.iter().map(|t| t.true_time).collect();
    let evals = config
        .modes
        .iter()
        .map(|mode| match mode {
            MetricMode::Oracle => EvaluationSet::oracle(&true_times, t_max),
            MetricMode::Naive => EvaluationSet::naive(&test.dataset, t_max),
            MetricMode::Ipcw => EvaluationSet::ipcw(
                &test.dataset,
                &test_g,
                grid.times(),
                t_max,
                config.clip_floor,
            ),
        })
        .collect::<Result<Vec<_>>>()?;

    let ctx = SeedContext {
        setting,
        seed,
        train: &train.dataset,
        cal: &cal.dataset,
        test: &test.dataset,
        grid: &grid,
        event_model: &event_model,
        test_risks: &test_risks,
    };
    let inputs =
        CalibrationInputs::new(&cal.dataset, &cal_risks, Some(s_hat), g_hat, grid.clone())?
            .with_clip_floor(config.clip_floor);

    let mut summaries: Vec<Vec<PredictorSummary>> = vec![Vec::new(); evals.len()];
    for estimator in &config.estimators {
        match estimator {
            Estimator::Cox => {
                let predictor = CoxPredictor::from_parts(&event_model, test_risks.clone());
                for (eval, out) in evals.iter().zip(summaries.iter_mut()) {
                    out.push(summarize("Cox", &predictor, eval, &config.taus)?);
                }
            }
            Estimator::Calibrated(method) => {
                let surface = fit_surface(&inputs, *method, &config.calibration)?;
                inspect(&ctx, *method, &surface)?;
                let predictor = SurfacePredictor::new(&surface, test_risks.clone());
                for (eval, out) in evals.iter().zip(summaries.iter_mut()) {
                    out.push(summarize(method.tag(), &predictor, eval, &config.taus)?);
                }
            }
        }
    }

    let tag = dataset_tag(setting);
    let mut reports = Vec::new();
    for (eval, s) in evals.iter().zip(&summaries) {
        reports.extend(joint_reports(s, eval, &config.taus, &tag, Some(seed))?);
    }
    Ok(SeedRun {
        reports,
        grid_len: grid.len(),
    })
}

/// Writes the nuisance curves as probability-grid files and loads them back.
fn grid_files_roundtrip(
    dir: &Path,
    grid: &TimeGrid,
    cal: &SurvivalDataset,
    s: &dyn CurveSource,
    g: &dyn CurveSource,
) -> Result<(SurvivalProbabilityGrid, SurvivalProbabilityGrid)> {
    let subjects = cal.ids().to_vec();
    let s_path = dir.join("s_hat.json");
    let g_path = dir.join("g_hat.json");
    SurvivalProbabilityGrid::tabulate(
        ProbabilityRole::Survival,
        grid.clone(),
        subjects.clone(),
        s,
    )?
    .save_json(&s_path)?;
    SurvivalProbabilityGrid::tabulate(ProbabilityRole::Censoring, grid.clone(), subjects, g)?
        .save_json(&g_path)?;
    let s = SurvivalProbabilityGrid::load_json(&s_path)?.aligned_to(cal)?;
    let g = SurvivalProbabilityGrid::load_json(&g_path)?.aligned_to(cal)?;
    Ok((s, g))
}
