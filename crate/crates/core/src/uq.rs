//! Monte Carlo spread of classification accuracy over random splits,
//! network initialisations and Gaussian noise on the damage histories.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classify::{accuracy, split, AnnModel, AnnParams, CaseData, KnnModel, Metric, SplitSpec, Task, TaskData};
use crate::labeling::LabelScheme;
use crate::{Error, Result};

/// Adds i.i.d. `N(0, std²)` noise to every entry. No clamping.
pub fn add_gaussian_noise(phi: &Array2<f64>, std: f64, seed: u64) -> Result<Array2<f64>> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::Parameter(format!("noise std must be finite and >= 0, got {std}")));
    }
    if std == 0.0 {
        return Ok(phi.clone());
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(phi.mapv(|v| v + normal.sample(&mut rng)))
}

/// Seed for `stream` of run `run`, mixed from `base` with SplitMix64.
pub fn derive_seed(base: u64, run: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(run.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SPLIT_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Knn,
    Ann,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::Ann => "ann",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqSpec {
    pub runs: usize,
    pub noise_stds: Vec<f64>,
    pub task: Task,
    pub scheme: LabelScheme,
    pub algorithms: Vec<Algorithm>,
    pub base_seed: u64,
    pub comb: u8,
    pub k: usize,
    pub metric: Metric,
    pub ann: AnnParams,
}

impl Default for UqSpec {
    fn default() -> Self {
        Self {
            runs: 1000,
            noise_stds: vec![0.01, 0.02, 0.05, 0.10, 0.20],
            task: Task::Presence { case_id: 3 },
            scheme: LabelScheme::Multi3,
            algorithms: vec![Algorithm::Knn, Algorithm::Ann],
            base_seed: 0,
            comb: 2,
            k: 2,
            metric: Metric::Cosine,
            ann: AnnParams::default(),
        }
    }
}

impl UqSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if let Some(s) = self.noise_stds.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config(format!("noise std {s} must be finite and >= 0")));
        }
        if self.noise_stds.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Config("need at least one noise level and one algorithm".into()));
        }
        SplitSpec { comb: self.comb, ..SplitSpec::default() }.train_val_fraction()?;
        Ok(())
    }
}

/// Accuracy statistics of one algorithm at one noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqCell {
    pub algorithm: Algorithm,
    pub noise_std: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub runs: usize,
    pub failed: usize,
}

impl UqCell {
    pub fn standard_error(&self) -> f64 {
        self.std / (self.runs as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRun {
    pub algorithm: Algorithm,
    pub noise_std: f64,
    pub run: usize,
    /// `None` for a failed run.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqResult {
    pub cells: Vec<UqCell>,
    pub raw: Vec<RawRun>,
    pub warnings: Vec<String>,
}

impl UqResult {
    pub fn cell(&self, algorithm: Algorithm, noise_std: f64) -> Option<&UqCell> {
        self.cells.iter().find(|c| c.algorithm == algorithm && c.noise_std == noise_std)
    }

    /// Cells of one algorithm in increasing noise order.
    pub fn trend(&self, algorithm: Algorithm) -> Vec<&UqCell> {
        let mut v: Vec<&UqCell> = self.cells.iter().filter(|c| c.algorithm == algorithm).collect();
        v.sort_by(|a, b| a.noise_std.total_cmp(&b.noise_std));
        v
    }
}

fn one_run(spec: &UqSpec, data: &TaskData, algorithm: Algorithm, noise_std: f64, run: usize) -> Result<f64> {
    let r = run as u64;
    let phi = add_gaussian_noise(&data.phi, noise_std, derive_seed(spec.base_seed, r, NOISE_STREAM))?;
    let ds = data.dataset_from(&phi)?;
    let split_spec = SplitSpec { comb: spec.comb, seed: derive_seed(spec.base_seed, r, SPLIT_STREAM), ..SplitSpec::default() };
    let parts = split(&ds.y, &split_spec)?;
    let test = ds.subset(&parts.test);
    let preds = match algorithm {
        Algorithm::Knn => {
            let pool: Vec<usize> = parts.train.iter().chain(&parts.val).copied().collect();
            KnnModel::fit(&ds.subset(&pool), spec.k, spec.metric)?.predict_all(&test.x)?
        }
        Algorithm::Ann => {
            let seed = derive_seed(spec.base_seed, r, INIT_STREAM);
            AnnModel::train(&ds.subset(&parts.train), &ds.subset(&parts.val), spec.ann, seed)?.predict_all(&test.x)
        }
    };
    accuracy(&preds, &test.y)
}

/// Worker count from `PFL_THREADS`, if set to a positive integer.
pub fn thread_limit() -> Option<usize> {
    std::env::var("PFL_THREADS").ok()?.parse().ok().filter(|&n| n > 0)
}

#[cfg(feature = "parallel")]
fn run_all<F>(jobs: usize, f: F) -> Vec<Result<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit() {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(|| (0..jobs).into_par_iter().map(&f).collect()),
        Err(_) => (0..jobs).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all<F>(jobs: usize, f: F) -> Vec<Result<f64>>
where
    F: Fn(usize) -> Result<f64>,
{
    (0..jobs).map(f).collect()
}

/// Runs `spec.runs` train/test repetitions per algorithm and noise level.
///
/// Run `r` uses the same split, initialisation and noise seeds at every
/// noise level, so the levels differ only in the noise amplitude. Failed
/// runs are left out with a warning; more than 1% failures is an error.
pub fn mc_accuracy(spec: &UqSpec, cases: &[CaseData]) -> Result<UqResult> {
    spec.validate()?;
    let data = TaskData::build(spec.task, spec.scheme, cases)?;
    mc_accuracy_on(spec, &data)
}

/// [`mc_accuracy`] on already labeled data; `spec.task` and `spec.scheme`
/// are not consulted.
pub fn mc_accuracy_on(spec: &UqSpec, data: &TaskData) -> Result<UqResult> {
    spec.validate()?;
    let mut cells = Vec::new();
    let mut raw = Vec::new();
    let mut warnings = Vec::new();
    for &algorithm in &spec.algorithms {
        for &noise_std in &spec.noise_stds {
            let results = run_all(spec.runs, |run| one_run(spec, data, algorithm, noise_std, run));
            let mut accs = Vec::with_capacity(results.len());
            let mut first_error = None;
            for (run, res) in results.into_iter().enumerate() {
                match res {
                    Ok(a) => {
                        accs.push(a);
                        raw.push(RawRun { algorithm, noise_std, run, accuracy: Some(a) });
                    }
                    Err(e) => {
                        first_error.get_or_insert_with(|| e.to_string());
                        warnings.push(format!("{} noise {noise_std} run {run}: {e}", algorithm.name()));
                        raw.push(RawRun { algorithm, noise_std, run, accuracy: None });
                    }
                }
            }
            let failed = spec.runs - accs.len();
            if failed as f64 > 0.01 * spec.runs as f64 || accs.is_empty() {
                return Err(Error::Training(format!(
                    "{} at noise {noise_std}: {failed} of {} runs failed; first: {}",
                    algorithm.name(),
                    spec.runs,
                    first_error.unwrap_or_default()
                )));
            }
            let (mean, std) = mean_and_std(&accs);
            cells.push(UqCell { algorithm, noise_std, mean, std, runs: accs.len(), failed });
        }
    }
    Ok(UqResult { cells, raw, warnings })
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_and_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
