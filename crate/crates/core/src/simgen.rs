//! Seeded generators for the six synthetic benchmark settings.
//!
//! Event times are log-normal given covariates drawn from `Unif[0, 4]^p`.
//! Every draw comes from ChaCha20 seeded with `seed_from_u64(seed)`, with one
//! stream per variable: stream 0 for covariates (row-major), stream 1 for
//! event-time normals, stream 2 for censoring draws. Uniforms take the top 53
//! bits of `next_u64`; normals use Box-Muller with one normal per two
//! uniforms. Transcendentals come from `libm`, so output is bit-identical
//! across platforms.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::data::{fmt_f64, write_file, CurveSource, SurvivalDataset};
use crate::error::{Error, Result};

const COVARIATE_STREAM: u64 = 0;
const EVENT_STREAM: u64 = 1;
const CENSOR_STREAM: u64 = 2;

/// Censoring-time distribution given covariates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CensoringLaw {
    /// Rate-parameterized: mean `1 / rate`.
    Exponential { rate: f64 },
    /// `exp(N(meanlog, sdlog^2))`.
    LogNormal { meanlog: f64, sdlog: f64 },
}

impl CensoringLaw {
    /// `P(C > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            CensoringLaw::Exponential { rate } => libm::exp(-rate * t),
            CensoringLaw::LogNormal { meanlog, sdlog } => {
                normal_sf((libm::log(t) - meanlog) / sdlog)
            }
        }
    }
}

/// One of the six data-generating mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Setting(u8);

impl Setting {
    pub const ALL: [u8; 6] = [1, 2, 3, 4, 5, 6];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=6).contains(&id) {
            Ok(Self(id))
        } else {
            Err(Error::InvalidSetting(id))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn n_covariates(self) -> usize {
        if self.0 <= 4 {
            1
        } else {
            10
        }
    }

    /// Mean of `log T` given `x`.
    pub fn mu(self, x: &[f64]) -> f64 {
        let x1 = x[0];
        let step = |hi: f64, slope: f64| if x1 > 2.0 { hi } else { slope * x1 };
        match self.0 {
            1 => 0.632 * x1,
            2 => step(3.0, 1.0),
            3 => step(2.0, 1.0),
            4 => step(3.0, 1.5),
            _ => 0.126 * (x1 + libm::sqrt(x[2] * x[4])) + 1.0,
        }
    }

    /// Standard deviation of `log T` given `x`.
    pub fn sigma(self, x: &[f64]) -> f64 {
        match self.0 {
            1 => 2.0,
            2..=4 => 0.5,
            5 => 1.0,
            _ => (x[1] + 2.0) / 4.0,
        }
    }

    pub fn censoring(self, x: &[f64]) -> CensoringLaw {
        match self.0 {
            1 | 2 => CensoringLaw::Exponential { rate: 0.1 },
            3 => CensoringLaw::Exponential {
                rate: 0.25 + (6.0 + x[0]) / 100.0,
            },
            4 => CensoringLaw::LogNormal {
                meanlog: 2.0 + (2.0 - x[0]) / 50.0,
                sdlog: 0.5,
            },
            _ => CensoringLaw::Exponential {
                rate: x[9] / 10.0 + 1.0 / 20.0,
            },
        }
    }

    /// True `P(T > t | x)`.
    pub fn survival(self, x: &[f64], t: f64) -> f64 {
        lognormal_sf(t, self.mu(x), self.sigma(x))
    }
}

/// `P(T > t | x)` for the given setting.
pub fn oracle_survival(setting: u8, x: &[f64], t: f64) -> Result<f64> {
    Ok(Setting::new(setting)?.survival(x, t))
}

/// Standard normal upper tail `1 - Phi(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

pub fn lognormal_sf(t: f64, mu: f64, sigma: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else {
        normal_sf((libm::log(t) - mu) / sigma)
    }
}

/// Latent quantities kept for oracle evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentTruth {
    pub true_time: f64,
    pub censor_time: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub setting: Setting,
    pub dataset: SurvivalDataset,
    pub truths: Vec<LatentTruth>,
}

/// Stream-split ChaCha20 draws.
pub struct Draws {
    rng: ChaCha20Rng,
}

impl Draws {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`, safe to take logarithms of.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
    }

    pub fn exponential(&mut self, rate: f64) -> f64 {
        -libm::log(self.uniform_open0()) / rate
    }
}

/// Simulates `n` subjects from `setting`.
pub fn generate(setting: u8, n: usize, seed: u64) -> Result<SyntheticData> {
    let setting = Setting::new(setting)?;
    if n == 0 {
        return Err(Error::Validation("sample size must be >= 1".into()));
    }
    let p = setting.n_covariates();
    let mut cov = Draws::new(seed, COVARIATE_STREAM);
    let covariates: Vec<f64> = (0..n * p).map(|_| 4.0 * cov.uniform()).collect();

    let mut ev = Draws::new(seed, EVENT_STREAM);
    let mut cens = Draws::new(seed, CENSOR_STREAM);
    let mut truths = Vec::with_capacity(n);
    let mut time = Vec::with_capacity(n);
    let mut event = Vec::with_capacity(n);
    for i in 0..n {
        let x = &covariates[i * p..(i + 1) * p];
        let (mu, sigma) = (setting.mu(x), setting.sigma(x));
        let true_time = libm::exp(mu + sigma * ev.normal());
        let censor_time = match setting.censoring(x) {
            CensoringLaw::Exponential { rate } => cens.exponential(rate),
            CensoringLaw::LogNormal { meanlog, sdlog } => {
                libm::exp(meanlog + sdlog * cens.normal())
            }
        };
        time.push(true_time.min(censor_time));
        event.push(true_time <= censor_time);
        truths.push(LatentTruth {
            true_time,
            censor_time,
            mu,
            sigma,
        });
    }
    let dataset = SurvivalDataset::new(
        (0..n).map(|i| format!("s{i}")).collect(),
        time,
        event,
        (1..=p).map(|j| format!("x{j}")).collect(),
        covariates,
    )?;
    Ok(SyntheticData {
        setting,
        dataset,
        truths,
    })
}

impl SyntheticData {
    /// Consecutive row blocks of the given sizes.
    pub fn split(&self, sizes: &[usize]) -> Result<Vec<SyntheticData>> {
        let total: usize = sizes.iter().sum();
        if total != self.dataset.len() {
            return Err(Error::Validation(format!(
                "split sizes sum to {total}, dataset has {} rows",
                self.dataset.len()
            )));
        }
        let mut start = 0;
        sizes
            .iter()
            .map(|size| {
                let range = start..start + size;
                start += size;
                Ok(SyntheticData {
                    setting: self.setting,
                    dataset: self.dataset.slice(range.clone())?,
                    truths: self.truths[range].to_vec(),
                })
            })
            .collect()
    }

    pub fn truths_csv(&self) -> String {
        truths_to_csv(self.dataset.ids(), &self.truths)
    }
}

pub fn truths_to_csv(ids: &[String], truths: &[LatentTruth]) -> String {
    let mut out = String::from("id,true_time,censor_time,mu,sigma\n");
    for (id, t) in ids.iter().zip(truths) {
        out.push_str(&format!(
            "{id},{},{},{},{}\n",
            fmt_f64(t.true_time),
            fmt_f64(t.censor_time),
            fmt_f64(t.mu),
            fmt_f64(t.sigma)
        ));
    }
    out
}

pub fn save_truths(path: impl AsRef<Path>, ids: &[String], truths: &[LatentTruth]) -> Result<()> {
    write_file(path.as_ref(), truths_to_csv(ids, truths).as_bytes())
}

/// Reads a truths CSV and returns `(ids, truths)`.
pub fn load_truths(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<LatentTruth>)> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: origin.clone(),
            row: 0,
            message: e.to_string(),
        })?;
    let mut ids = Vec::new();
    let mut truths = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let bad = |message: String| Error::Parse {
            path: origin.clone(),
            row: r + 1,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", rec.len())));
        }
        let num = |c: usize| -> Result<f64> {
            rec[c]
                .parse::<f64>()
                .map_err(|_| bad(format!("{:?} is not a number", &rec[c])))
        };
        ids.push(rec[0].to_string());
        truths.push(LatentTruth {
            true_time: num(1)?,
            censor_time: num(2)?,
            mu: num(3)?,
            sigma: num(4)?,
        });
    }
    Ok((ids, truths))
}

/// Which conditional survival function an [`OracleCurves`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleRole {
    Event,
    Censoring,
}

/// True (or deliberately perturbed) conditional curves for a set of
/// covariate rows.
#[derive(Debug, Clone)]
pub struct OracleCurves {
    setting: Setting,
    role: OracleRole,
    p: usize,
    covariates: Vec<f64>,
    /// Added to `mu(x)` of the event model.
    pub mu_shift: f64,
    /// Multiplies the exponential censoring rate.
    pub rate_scale: f64,
    pub clip_floor: f64,
}

impl OracleCurves {
    pub fn new(setting: Setting, role: OracleRole, covariates: Vec<f64>) -> Self {
        Self {
            setting,
            role,
            p: setting.n_covariates(),
            covariates,
            mu_shift: 0.0,
            rate_scale: 1.0,
            clip_floor: 0.0,
        }
    }

    pub fn for_dataset(setting: Setting, role: OracleRole, data: &SurvivalDataset) -> Self {
        let p = setting.n_covariates();
        let mut covariates = Vec::with_capacity(data.len() * p);
        for i in 0..data.len() {
            covariates.extend_from_slice(data.row(i));
        }
        Self::new(setting, role, covariates)
    }

    pub fn with_mu_shift(mut self, shift: f64) -> Self {
        self.mu_shift = shift;
        self
    }

    pub fn with_rate_scale(mut self, scale: f64) -> Self {
        self.rate_scale = scale;
        self
    }

    pub fn with_clip_floor(mut self, floor: f64) -> Self {
        self.clip_floor = floor;
        self
    }

    fn x(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.p..(i + 1) * self.p]
    }
}

impl CurveSource for OracleCurves {
    fn n_subjects(&self) -> usize {
        self.covariates.len() / self.p
    }

    fn fill(&self, subject: usize, times: &[f64], out: &mut [f64]) {
        let x = self.x(subject);
        match self.role {
            OracleRole::Event => {
                let (mu, sigma) = (self.setting.mu(x) + self.mu_shift, self.setting.sigma(x));
                for (t, o) in times.iter().zip(out.iter_mut()) {
                    *o = lognormal_sf(*t, mu, sigma).max(self.clip_floor);
                }
            }
            OracleRole::Censoring => {
                let law = match self.setting.censoring(x) {
                    CensoringLaw::Exponential { rate } => CensoringLaw::Exponential {
                        rate: rate * self.rate_scale,
                    },
                    other => other,
                };
                for (t, o) in times.iter().zip(out.iter_mut()) {
                    *o = law.survival(*t).max(self.clip_floor);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        let s1 = Setting::new(1).unwrap();
        assert_eq!(s1.survival(&[0.0], 1.0), 0.5);
        let s2 = Setting::new(2).unwrap();
        assert_eq!(s2.mu(&[3.0]), 3.0);
        assert_eq!(s2.survival(&[3.0], 3f64.exp()), 0.5);
        assert_eq!(s1.survival(&[1.0], 0.0), 1.0);
        assert!(s1.survival(&[1.0], 1e-300) > 1.0 - 1e-12);
    }

    #[test]
    fn invalid_setting() {
        assert!(matches!(generate(7, 10, 0), Err(Error::InvalidSetting(7))));
        assert!(matches!(Setting::new(0), Err(Error::InvalidSetting(0))));
    }

    #[test]
    fn observed_is_min_of_latent_times() {
        for setting in Setting::ALL {
            let d = generate(setting, 200, 3).unwrap();
            for (i, t) in d.truths.iter().enumerate() {
                assert_eq!(d.dataset.times()[i], t.true_time.min(t.censor_time));
                assert_eq!(d.dataset.events()[i], t.true_time <= t.censor_time);
                assert!(d.dataset.row(i).iter().all(|x| (0.0..4.0).contains(x)));
            }
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate(4, 50, 11).unwrap();
        let b = generate(4, 50, 11).unwrap();
        assert_eq!(a, b);
        let c = generate(4, 50, 12).unwrap();
        assert_ne!(a.dataset.times(), c.dataset.times());
    }

    #[test]
    fn prefix_of_larger_sample_is_stable() {
        // Streams are per variable, so the first rows do not depend on n.
        let small = generate(2, 10, 5).unwrap();
        let large = generate(2, 20, 5).unwrap();
        assert_eq!(small.dataset.times(), &large.dataset.times()[..10]);
    }

    #[test]
    fn normal_tail_values() {
        assert_eq!(normal_sf(0.0), 0.5);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-15);
        assert!((normal_sf(-1.0) - 0.841344746068543).abs() < 1e-14);
    }
}
