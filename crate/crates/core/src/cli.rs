//! Command-line front end.
//!
//! Every command loads and checks all of its inputs before it writes
//! anything, so a failing invocation leaves no partial artifacts behind.

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::calibrate::{build_time_grid, fit_surface, CalibrationConfig, CalibrationInputs};
use crate::coxfit::{fit_censoring, fit_cox, CoxConfig, CoxModel};
use crate::data::{
    fmt_f64, write_file, CalibratedSurface, CsvSchema, CurveSource, Interpolation, Method,
    ProbabilityRole, RiskScores, SurvivalDataset, SurvivalProbabilityGrid, TimeGrid,
    DEFAULT_CLIP_FLOOR,
};
use crate::error::{Error, Result};
use crate::experiment::{dataset_tag, run_seed, Estimator, ExperimentConfig, NuisanceSource};
use crate::isotonic::ProjectionAlgorithm;
use crate::metrics::{
    joint_reports, summarize, CoxPredictor, EvaluationSet, MetricMode, MetricReport,
    PredictorSummary, SurfacePredictor, SurvivalPredictor, DEFAULT_TAUS,
};
use crate::simgen::{generate, load_truths, save_truths};

#[derive(Debug, Parser)]
#[command(
    name = "isocal",
    version,
    about = "Isotonic calibration of survival predictions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a synthetic benchmark dataset.
    Simulate(SimulateArgs),
    /// Fit a Cox model for the event or the censoring time.
    Fit(FitArgs),
    /// Tabulate a fitted model's curves on a time grid.
    Tabulate(TabulateArgs),
    /// Fit a calibrated survival surface.
    Calibrate(CalibrateArgs),
    /// Score surfaces and models on a test set.
    Evaluate(EvaluateArgs),
    /// Aggregate per-seed metric CSVs into mean +/- 2 SE tables.
    Report(ReportArgs),
    /// Run the full simulation pipeline over settings and seeds.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub setting: u8,
    /// Total number of subjects; defaults to the sum of `--split`.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train,cal,test sizes. Writes train/cal/test files instead of one.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<usize>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitRole {
    Event,
    Censoring,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = FitRole::Event)]
    pub role: FitRole,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Output directory for `model.json` and `risks.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridRole {
    Survival,
    Censoring,
}

#[derive(Debug, Args)]
pub struct TabulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Subjects whose curves are tabulated (usually the calibration set).
    #[arg(long)]
    pub data: PathBuf,
    /// Training set, used with `--data` to build the time grid.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub role: GridRole,
    #[arg(long, default_value_t = crate::calibrate::DEFAULT_GRID_DENSITY)]
    pub grid_density: usize,
    #[arg(long, default_value_t = DEFAULT_CLIP_FLOOR)]
    pub clip_floor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub cal: PathBuf,
    /// Risk scores for the calibration subjects. Computed from `--s-model`
    /// when omitted.
    #[arg(long)]
    pub risks: Option<PathBuf>,
    #[arg(long)]
    pub method: Method,
    /// Tabulated event survival curves for the calibration subjects.
    #[arg(long, conflicts_with = "s_model")]
    pub s_hat: Option<PathBuf>,
    /// Event Cox model evaluated on the calibration subjects.
    #[arg(long)]
    pub s_model: Option<PathBuf>,
    /// Tabulated censoring survival curves for the calibration subjects.
    #[arg(long, conflicts_with = "g_model")]
    pub g_hat: Option<PathBuf>,
    /// Censoring Cox model evaluated on the calibration subjects.
    #[arg(long)]
    pub g_model: Option<PathBuf>,
    /// Training set; its times join the grid. Ignored with tabulated inputs,
    /// whose grid is used as is.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, default_value = "bilinear")]
    pub interpolation: Interpolation,
    #[arg(long, default_value = "partition")]
    pub solver: ProjectionAlgorithm,
    #[arg(long, default_value_t = crate::calibrate::DEFAULT_GRID_DENSITY)]
    pub grid_density: usize,
    #[arg(long, default_value_t = DEFAULT_CLIP_FLOOR)]
    pub clip_floor: f64,
    /// Output surface JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub test: PathBuf,
    /// Calibrated surface files; repeat for several.
    #[arg(long = "surface")]
    pub surfaces: Vec<PathBuf>,
    /// Event Cox models scored directly; repeat for several.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Test-set risk scores for the surfaces; computed from the first
    /// `--model` when omitted.
    #[arg(long)]
    pub risks: Option<PathBuf>,
    /// Censoring model for IPCW, evaluated on the test subjects.
    #[arg(long, conflicts_with = "g_hat")]
    pub g_model: Option<PathBuf>,
    /// Tabulated censoring curves for the test subjects.
    #[arg(long)]
    pub g_hat: Option<PathBuf>,
    /// Latent truths CSV for oracle mode.
    #[arg(long)]
    pub truths: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "ipcw")]
    pub modes: Vec<MetricMode>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Truncation time; defaults to the largest time in `--cal`.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub cal: Option<PathBuf>,
    #[arg(long, default_value = "data")]
    pub dataset: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_CLIP_FLOOR)]
    pub clip_floor: f64,
    /// Output directory for `metrics.csv` and per-report JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of per-seed metric CSVs.
    #[arg(long)]
    pub results: PathBuf,
    /// Output directory for `summary.csv` and `summary.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    pub settings: Vec<u8>,
    /// Comma list or half-open range such as `0..20`.
    #[arg(long, default_value = "0..20")]
    pub seeds: String,
    #[arg(long, value_delimiter = ',', default_value = "2500,2500,5000")]
    pub split: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "cox,rw,rw+,ht,ht+,dr")]
    pub estimators: Vec<Estimator>,
    #[arg(long, value_delimiter = ',', default_value = "oracle,ipcw")]
    pub modes: Vec<MetricMode>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    #[arg(long, default_value_t = crate::calibrate::DEFAULT_GRID_DENSITY)]
    pub grid_density: usize,
    #[arg(long, default_value_t = DEFAULT_CLIP_FLOOR)]
    pub clip_floor: f64,
    #[arg(long, default_value = "bilinear")]
    pub interpolation: Interpolation,
    /// Round-trip the nuisance curves through probability-grid files.
    #[arg(long)]
    pub grid_files: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    let result = configure_threads().and_then(|_| run(cli.command));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("ISOCAL_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .with_target(false)
        .try_init();
}

/// Applies `ISOCAL_THREADS` to the global worker pool.
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("ISOCAL_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            Error::Usage(format!(
                "ISOCAL_THREADS={value:?} is not a positive integer"
            ))
        })?;
    // Fails only if the pool already exists, which is harmless.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Tabulate(a) => cmd_tabulate(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Experiment(a) => cmd_experiment(&a),
    }
}

fn load_dataset(path: &Path) -> Result<SurvivalDataset> {
    SurvivalDataset::load_csv(path, &CsvSchema::default())
}

fn check_clip_floor(floor: f64) -> Result<()> {
    if floor > 0.0 && floor < 1.0 {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "clip floor {floor} must lie in (0, 1)"
        )))
    }
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::Usage("no quantile levels given".into()));
    }
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::Usage(format!(
            "quantile level {t} must lie in (0, 1)"
        )));
    }
    Ok(())
}

fn check_modes(modes: &[MetricMode]) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::Usage("no metric modes given".into()));
    }
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].contains(m) {
            return Err(Error::Usage(format!("metric mode {m} listed twice")));
        }
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    if a.split.as_ref().is_some_and(|s| s.len() != 3) {
        return Err(Error::Usage(
            "--split takes three sizes: train,cal,test".into(),
        ));
    }
    let n = match (&a.split, a.n) {
        (Some(s), Some(n)) if s.iter().sum::<usize>() != n => {
            return Err(Error::Usage(format!(
                "--split sums to {}, but --n is {n}",
                s.iter().sum::<usize>()
            )))
        }
        (Some(s), _) => s.iter().sum(),
        (None, Some(n)) => n,
        (None, None) => return Err(Error::Usage("give --n or --split".into())),
    };
    if n == 0 || a.split.as_ref().is_some_and(|s| s.contains(&0)) {
        return Err(Error::Usage("sample sizes must be positive".into()));
    }
    let data = generate(a.setting, n, a.seed)?;
    match &a.split {
        None => {
            data.dataset.save_csv(a.out.join("data.csv"))?;
            save_truths(a.out.join("truths.csv"), data.dataset.ids(), &data.truths)?;
        }
        Some(sizes) => {
            let parts = data.split(sizes)?;
            for (name, part) in ["train", "cal", "test"].iter().zip(&parts) {
                part.dataset.save_csv(a.out.join(format!("{name}.csv")))?;
                save_truths(
                    a.out.join(format!("{name}_truths.csv")),
                    part.dataset.ids(),
                    &part.truths,
                )?;
            }
        }
    }
    tracing::info!(setting = a.setting, n, seed = a.seed, "simulated");
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    if !(a.ridge >= 0.0 && a.ridge.is_finite()) {
        return Err(Error::Usage(format!(
            "--ridge {} must be finite and >= 0",
            a.ridge
        )));
    }
    let data = load_dataset(&a.data)?;
    let config = CoxConfig {
        max_iter: a.max_iter,
        ridge: a.ridge,
        ..CoxConfig::default()
    };
    let model = match a.role {
        FitRole::Event => fit_cox(&data, &config)?,
        FitRole::Censoring => fit_censoring(&data, &config)?,
    };
    let risks = model.risk_scores(&data)?;
    model.save_json(a.out.join("model.json"))?;
    risks.save_csv(a.out.join("risks.csv"))?;
    tracing::info!(
        iterations = model.diagnostics.iterations,
        log_likelihood = model.diagnostics.log_likelihood,
        coefficients = ?model.coefficients,
        "converged"
    );
    Ok(())
}

fn cmd_tabulate(a: &TabulateArgs) -> Result<()> {
    check_clip_floor(a.clip_floor)?;
    let model = CoxModel::load_json(&a.model)?;
    let data = load_dataset(&a.data)?;
    let train = a.train.as_deref().map(load_dataset).transpose()?;
    let grid = build_time_grid(train.as_ref().unwrap_or(&data), &data, a.grid_density)?;
    let curves = model.curves(&data, a.clip_floor)?;
    let role = match a.role {
        GridRole::Survival => ProbabilityRole::Survival,
        GridRole::Censoring => ProbabilityRole::Censoring,
    };
    let table = SurvivalProbabilityGrid::tabulate(role, grid, data.ids().to_vec(), &curves)?;
    table.save_json(&a.out)
}

/// A nuisance curve loaded from either a grid file or a model.
enum Nuisance {
    Table(SurvivalProbabilityGrid),
    Model(crate::coxfit::CoxCurves),
}

impl Nuisance {
    fn load(
        table: Option<&Path>,
        model: Option<&Path>,
        data: &SurvivalDataset,
        clip_floor: f64,
    ) -> Result<Option<Self>> {
        match (table, model) {
            (Some(p), _) => Ok(Some(Nuisance::Table(
                SurvivalProbabilityGrid::load_json(p)?.aligned_to(data)?,
            ))),
            (None, Some(p)) => Ok(Some(Nuisance::Model(
                CoxModel::load_json(p)?.curves(data, clip_floor)?,
            ))),
            (None, None) => Ok(None),
        }
    }

    fn source(&self) -> &dyn CurveSource {
        match self {
            Nuisance::Table(t) => t,
            Nuisance::Model(m) => m,
        }
    }

    fn grid(&self) -> Option<&TimeGrid> {
        match self {
            Nuisance::Table(t) => Some(t.grid()),
            Nuisance::Model(_) => None,
        }
    }
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<()> {
    check_clip_floor(a.clip_floor)?;
    if a.method.needs_survival_model() && a.s_hat.is_none() && a.s_model.is_none() {
        return Err(Error::Usage(format!(
            "--method {} needs the event survival curves: pass --s-hat or --s-model",
            a.method.tag().to_lowercase()
        )));
    }
    if a.g_hat.is_none() && a.g_model.is_none() {
        return Err(Error::Usage(
            "the censoring curves are required: pass --g-hat or --g-model".into(),
        ));
    }
    if a.risks.is_none() && a.s_model.is_none() {
        return Err(Error::Usage(
            "risk scores are required: pass --risks or --s-model".into(),
        ));
    }
    let started = Instant::now();
    let cal = load_dataset(&a.cal)?;
    let s = Nuisance::load(a.s_hat.as_deref(), a.s_model.as_deref(), &cal, a.clip_floor)?;
    let g = Nuisance::load(a.g_hat.as_deref(), a.g_model.as_deref(), &cal, a.clip_floor)?
        .expect("checked above");
    let risks = match &a.risks {
        Some(p) => RiskScores::load_csv(p)?,
        None => {
            CoxModel::load_json(a.s_model.as_deref().expect("checked above"))?.risk_scores(&cal)?
        }
    };

    let grid = match (g.grid(), s.as_ref().and_then(Nuisance::grid)) {
        (Some(gg), Some(sg)) if gg != sg => {
            return Err(Error::Alignment(
                "--s-hat and --g-hat are tabulated on different time grids".into(),
            ))
        }
        (Some(grid), _) | (None, Some(grid)) => grid.clone(),
        (None, None) => {
            let train = a.train.as_deref().map(load_dataset).transpose()?;
            build_time_grid(train.as_ref().unwrap_or(&cal), &cal, a.grid_density)?
        }
    };
    let s_source = if a.method.needs_survival_model() {
        s.as_ref().map(Nuisance::source)
    } else {
        None
    };
    let inputs = CalibrationInputs::new(&cal, &risks, s_source, g.source(), grid)?
        .with_clip_floor(a.clip_floor);
    let mut config = CalibrationConfig {
        interpolation: a.interpolation,
        ..CalibrationConfig::default()
    };
    config.projection.algorithm = a.solver;
    let surface = fit_surface(&inputs, a.method, &config)?;
    surface.save_json(&a.out)?;
    tracing::info!(
        method = %a.method,
        subjects = surface.n_rows(),
        grid = surface.grid().len(),
        seconds = started.elapsed().as_secs_f64(),
        "calibrated"
    );
    Ok(())
}

/// Distinct display names: the first use of a tag keeps it, later ones get
/// the file stem appended.
fn unique_name(base: &str, path: &Path, taken: &mut HashSet<String>) -> String {
    let mut name = base.to_string();
    if taken.contains(&name) {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        name = format!("{base}:{stem}");
        let mut k = 2;
        while taken.contains(&name) {
            name = format!("{base}:{stem}#{k}");
            k += 1;
        }
    }
    taken.insert(name.clone());
    name
}

fn file_safe(name: &str) -> String {
    name.replace('+', "plus")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    check_clip_floor(a.clip_floor)?;
    check_modes(&a.modes)?;
    let taus = a.taus.clone().unwrap_or_else(|| DEFAULT_TAUS.to_vec());
    check_taus(&taus)?;
    if a.surfaces.is_empty() && a.models.is_empty() {
        return Err(Error::Usage(
            "nothing to evaluate: pass --surface or --model".into(),
        ));
    }
    if !a.surfaces.is_empty() && a.risks.is_none() && a.models.is_empty() {
        return Err(Error::Usage(
            "surfaces need test risk scores: pass --risks or --model".into(),
        ));
    }
    if a.modes.contains(&MetricMode::Ipcw) && a.g_model.is_none() && a.g_hat.is_none() {
        return Err(Error::Usage("ipcw mode needs --g-model or --g-hat".into()));
    }
    if a.modes.contains(&MetricMode::Oracle) && a.truths.is_none() {
        return Err(Error::Usage("oracle mode needs --truths".into()));
    }
    let test = load_dataset(&a.test)?;
    let t_max = match (a.t_max, &a.cal) {
        (Some(t), _) => t,
        (None, Some(p)) => load_dataset(p)?.max_time(),
        (None, None) => {
            return Err(Error::Usage(
                "give --t-max or --cal to fix the truncation time".into(),
            ))
        }
    };

    let models = a
        .models
        .iter()
        .map(|p| CoxModel::load_json(p))
        .collect::<Result<Vec<_>>>()?;
    let surfaces = a
        .surfaces
        .iter()
        .map(|p| CalibratedSurface::load_json(p))
        .collect::<Result<Vec<_>>>()?;
    let test_risks = match (&a.risks, models.first()) {
        (Some(p), _) => Some(RiskScores::load_csv(p)?.aligned_to(&test)?),
        (None, Some(m)) => Some(m.risk_scores(&test)?.values().to_vec()),
        (None, None) => None,
    };
    let g = Nuisance::load(
        a.g_hat.as_deref(),
        a.g_model.as_deref(),
        &test,
        a.clip_floor,
    )?;
    let g_knots: Vec<f64> = match (&g, surfaces.first()) {
        (Some(Nuisance::Table(t)), _) => t.grid().times().to_vec(),
        (_, Some(s)) => s.grid().times().to_vec(),
        _ => {
            // Censoring model only: its own jump times.
            let model = a.g_model.as_deref().map(CoxModel::load_json).transpose()?;
            model
                .map(|m| m.baseline.jump_times().to_vec())
                .unwrap_or_default()
        }
    };
    let true_times = match &a.truths {
        Some(p) => {
            let (ids, truths) = load_truths(p)?;
            let by_id: BTreeMap<&str, f64> = ids
                .iter()
                .map(String::as_str)
                .zip(truths.iter().map(|t| t.true_time))
                .collect();
            Some(
                test.ids()
                    .iter()
                    .map(|id| {
                        by_id.get(id.as_str()).copied().ok_or_else(|| {
                            Error::Alignment(format!("no latent truth for subject {id:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        None => None,
    };

    let mut taken = HashSet::new();
    let mut predictors: Vec<(String, Box<dyn SurvivalPredictor + '_>)> = Vec::new();
    for (m, p) in models.iter().zip(&a.models) {
        let name = unique_name("Cox", p, &mut taken);
        predictors.push((name, Box::new(CoxPredictor::new(m, &test)?)));
    }
    for (s, p) in surfaces.iter().zip(&a.surfaces) {
        let name = unique_name(s.method().tag(), p, &mut taken);
        let risks = test_risks.clone().expect("checked above");
        predictors.push((name, Box::new(SurfacePredictor::new(s, risks))));
    }

    let mut reports = Vec::new();
    for mode in &a.modes {
        let eval = match mode {
            MetricMode::Oracle => {
                EvaluationSet::oracle(true_times.as_deref().expect("checked above"), t_max)?
            }
            MetricMode::Naive => EvaluationSet::naive(&test, t_max)?,
            MetricMode::Ipcw => EvaluationSet::ipcw(
                &test,
                g.as_ref().expect("checked above").source(),
                &g_knots,
                t_max,
                a.clip_floor,
            )?,
        };
        let summaries = predictors
            .iter()
            .map(|(name, p)| summarize(name, p.as_ref(), &eval, &taus))
            .collect::<Result<Vec<PredictorSummary>>>()?;
        reports.extend(joint_reports(&summaries, &eval, &taus, &a.dataset, a.seed)?);
    }

    let mut csv = MetricReport::csv_header(&taus);
    csv.push('\n');
    for r in &reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
        let json = serde_json::to_vec_pretty(r).expect("reports serialize");
        let path = a
            .out
            .join(format!("{}_{}.json", file_safe(&r.method), r.mode));
        write_file(&path, &json)?;
    }
    write_file(&a.out.join("metrics.csv"), csv.as_bytes())?;
    tracing::info!(reports = reports.len(), "evaluated");
    Ok(())
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

const KEY_COLUMNS: [&str; 4] = ["dataset", "seed", "method", "mode"];

/// Mean and two standard errors of the non-missing values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub two_se: f64,
    pub count: usize,
}

pub fn aggregate(values: &[f64]) -> Option<Aggregate> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let two_se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        2.0 * (var / n as f64).sqrt()
    } else {
        0.0
    };
    Some(Aggregate {
        mean,
        two_se,
        count: n,
    })
}

/// One output row: a (dataset, mode, method) group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub mode: String,
    pub method: String,
    pub n_rows: usize,
    pub metrics: Vec<Option<Aggregate>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub metric_names: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

fn method_rank(method: &str) -> (usize, String) {
    let order = ["Cox", "RW", "RW+", "HT", "HT+", "DR"];
    let base = method.split(':').next().unwrap_or(method);
    let rank = order.iter().position(|m| *m == base).unwrap_or(order.len());
    (rank, method.to_string())
}

/// Aggregates metric CSVs (as written by `evaluate` and `experiment`).
/// Missing cells are skipped; metric columns are the union over files in
/// first-seen order.
pub fn summarize_csvs(files: &[(String, String)]) -> Result<Summary> {
    let mut metric_names: Vec<String> = Vec::new();
    type Key = (String, String, (usize, String));
    let mut groups: BTreeMap<Key, (usize, BTreeMap<String, Vec<f64>>)> = BTreeMap::new();
    for (origin, text) in files {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Parse {
                path: origin.clone(),
                row: 0,
                message: e.to_string(),
            })?
            .clone();
        let col = |name: &str| header.iter().position(|h| h == name);
        let method_col = col("method").ok_or_else(|| Error::Parse {
            path: origin.clone(),
            row: 0,
            message: "missing \"method\" column".into(),
        })?;
        let (dataset_col, mode_col) = (col("dataset"), col("mode"));
        let metric_cols: Vec<(usize, String)> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| !KEY_COLUMNS.contains(h))
            .map(|(i, h)| (i, h.to_string()))
            .collect();
        for (_, name) in &metric_cols {
            if !metric_names.contains(name) {
                metric_names.push(name.clone());
            }
        }
        for (r, rec) in reader.records().enumerate() {
            let bad = |message: String| Error::Parse {
                path: origin.clone(),
                row: r + 1,
                message,
            };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let get = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("").to_string();
            let key = (
                get(dataset_col),
                get(mode_col),
                method_rank(&get(Some(method_col))),
            );
            let entry = groups.entry(key).or_default();
            entry.0 += 1;
            for (c, name) in &metric_cols {
                let cell = rec.get(*c).unwrap_or("");
                if cell.is_empty() {
                    continue;
                }
                let v: f64 = cell
                    .parse()
                    .map_err(|_| bad(format!("{name}: {cell:?} is not a number")))?;
                entry.1.entry(name.clone()).or_default().push(v);
            }
        }
    }
    let rows = groups
        .into_iter()
        .map(
            |((dataset, mode, (_, method)), (n_rows, values))| SummaryRow {
                dataset,
                mode,
                method,
                n_rows,
                metrics: metric_names
                    .iter()
                    .map(|m| values.get(m).and_then(|v| aggregate(v)))
                    .collect(),
            },
        )
        .collect();
    Ok(Summary { metric_names, rows })
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut cols = vec![
            "dataset".to_string(),
            "mode".into(),
            "method".into(),
            "rows".into(),
        ];
        for m in &self.metric_names {
            cols.push(format!("{m}_mean"));
            cols.push(format!("{m}_2se"));
        }
        let mut out = cols.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut cells = vec![
                row.dataset.clone(),
                row.mode.clone(),
                row.method.clone(),
                row.n_rows.to_string(),
            ];
            for a in &row.metrics {
                match a {
                    Some(a) => {
                        cells.push(fmt_f64(a.mean));
                        cells.push(fmt_f64(a.two_se));
                    }
                    None => cells.extend([String::new(), String::new()]),
                }
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Space-aligned table with `mean ± 2se` cells; columns that are
    /// inclusion counts are left out.
    pub fn to_text(&self) -> String {
        let shown: Vec<usize> = (0..self.metric_names.len())
            .filter(|i| {
                let m = &self.metric_names[*i];
                m != "n" && !m.starts_with("included_")
            })
            .collect();
        let mut table: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["dataset".to_string(), "mode".into(), "method".into()];
        header.extend(shown.iter().map(|i| self.metric_names[*i].clone()));
        table.push(header);
        for row in &self.rows {
            let mut cells = vec![row.dataset.clone(), row.mode.clone(), row.method.clone()];
            for i in &shown {
                cells.push(match &row.metrics[*i] {
                    Some(a) => format!("{:.4} ± {:.4}", a.mean, a.two_se),
                    None => "-".into(),
                });
            }
            table.push(cells);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| {
                table
                    .iter()
                    .map(|r| r[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for r in &table {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}", w = *w))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let entries = fs::read_dir(&a.results).map_err(|e| Error::io(&a.results, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| !p.file_name().is_some_and(|n| n == "summary.csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Usage(format!(
            "{} contains no metric CSV files",
            a.results.display()
        )));
    }
    let files = paths
        .iter()
        .map(|p| {
            fs::read_to_string(p)
                .map(|t| (p.display().to_string(), t))
                .map_err(|e| Error::io(p, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize_csvs(&files)?;
    let text = summary.to_text();
    write_file(&a.out.join("summary.csv"), summary.to_csv().as_bytes())?;
    write_file(&a.out.join("summary.txt"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

/// Parses `a..b` (half-open) or a comma list of seeds.
pub fn parse_seeds(list: &str) -> Result<Vec<u64>> {
    let bad = || Error::Usage(format!("cannot parse seed list {list:?}"));
    let seeds: Vec<u64> = if let Some((lo, hi)) = list.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
        (lo..hi).collect()
    } else {
        list.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::Usage(format!("seed list {list:?} is empty")));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(Error::Usage(format!("seed {dup} listed twice")));
    }
    Ok(seeds)
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let seeds = parse_seeds(&a.seeds)?;
    check_clip_floor(a.clip_floor)?;
    check_modes(&a.modes)?;
    let taus = a.taus.clone().unwrap_or_else(|| DEFAULT_TAUS.to_vec());
    check_taus(&taus)?;
    if a.settings.is_empty() {
        return Err(Error::Usage("no settings given".into()));
    }
    for s in &a.settings {
        crate::simgen::Setting::new(*s)?;
    }
    let split: [usize; 3] = a
        .split
        .as_slice()
        .try_into()
        .map_err(|_| Error::Usage("--split takes three sizes".into()))?;
    let base = ExperimentConfig {
        split,
        estimators: a.estimators.clone(),
        modes: a.modes.clone(),
        taus: taus.clone(),
        grid_density: a.grid_density,
        clip_floor: a.clip_floor,
        calibration: CalibrationConfig {
            interpolation: a.interpolation,
            ..CalibrationConfig::default()
        },
        ..ExperimentConfig::default()
    };
    base.validate()?;

    let jobs: Vec<(u8, u64)> = a
        .settings
        .iter()
        .flat_map(|s| seeds.iter().map(move |k| (*s, *k)))
        .collect();
    jobs.par_iter()
        .map(|&(setting, seed)| {
            let started = Instant::now();
            let name = format!("{}_seed{seed}", dataset_tag(setting));
            let mut config = base.clone();
            if a.grid_files {
                config.nuisances = NuisanceSource::GridFiles(a.out.join("grids").join(&name));
            }
            let run = run_seed(setting, seed, &config)?;
            write_file(
                &a.out.join(format!("{name}.csv")),
                run.csv(&taus).as_bytes(),
            )?;
            tracing::info!(
                setting,
                seed,
                grid = run.grid_len,
                seconds = started.elapsed().as_secs_f64(),
                "seed done"
            );
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(())
}
