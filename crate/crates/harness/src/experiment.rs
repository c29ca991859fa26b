//! RMSE/MAE evaluation over increasing fractions of the training data.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use shiftrec_core::data::{generate, split_matrix, SplitSpec, SyntheticSpec};
use shiftrec_core::{complete, ConvergenceConfig, Method, SparseTensor};

use crate::error::{HarnessError, Result};
use crate::input::{load_dataset, InputFormat};
use crate::metrics::{mae, rmse, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSource {
    File { path: PathBuf, format: InputFormat },
    Synthetic { spec: SyntheticSpec, seed: u64 },
}

impl DataSource {
    pub fn load(&self) -> Result<SparseTensor> {
        match self {
            DataSource::File { path, format } => Ok(load_dataset(path, *format, None)?.matrix),
            DataSource::Synthetic { spec, seed } => Ok(generate(spec, *seed)?.observed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub method: Method,
    /// Subtensor order; evaluation runs on matrices, so only 1 is valid.
    pub k: usize,
    /// `split.seed` is the first of `seeds` consecutive split seeds.
    pub split: SplitSpec,
    pub seeds: usize,
    pub convergence: ConvergenceConfig,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(source: DataSource, method: Method) -> Self {
        ExperimentConfig {
            source,
            method,
            k: 1,
            split: SplitSpec::default(),
            seeds: 5,
            convergence: ConvergenceConfig::default(),
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.convergence.validate()?;
        if self.seeds == 0 {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.split.fractions.is_empty() {
            return Err(HarnessError::Config("at least one sweep fraction is required".into()));
        }
        if self.k != 1 {
            return Err(HarnessError::Config(format!(
                "evaluation completes users x items matrices, so k must be 1 (got {})",
                self.k
            )));
        }
        if let DataSource::Synthetic { spec, .. } = &self.source {
            spec.validate()?;
            if spec.shape.len() != 2 {
                return Err(HarnessError::Config("synthetic evaluation data must be a matrix".into()));
            }
        }
        Ok(())
    }

    fn seed_values(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds as u64).map(move |i| self.split.seed.wrapping_add(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub rmse: f64,
    pub mae: f64,
    pub sweeps_used: usize,
    pub residual: f64,
    /// Test entries whose user or item has no training rating.
    pub cold_test_entries: usize,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub rmse: Summary,
    pub mae: Summary,
    pub sweeps: Summary,
    pub max_cold_test_entries: usize,
    pub runs: Vec<SeedRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub method_label: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetStats,
    /// Protocol choices that affect the numbers.
    pub protocol: Vec<String>,
    pub points: Vec<SweepPoint>,
    pub elapsed_seconds: f64,
}

impl ExperimentReport {
    /// One row per sweep point. Timing is left out so that identical
    /// configurations give identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "method,fraction,seeds,train_size,test_size,rmse_mean,rmse_std,mae_mean,mae_std,sweeps_mean,max_cold_test_entries\n",
        );
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.method,
                p.fraction,
                p.runs.len(),
                p.train_size,
                p.test_size,
                p.rmse.mean,
                p.rmse.std,
                p.mae.mean,
                p.mae.std,
                p.sweeps.mean,
                p.max_cold_test_entries
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn point(&self, fraction: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| (p.fraction - fraction).abs() < 1e-12)
    }
}

/// Runs every (fraction, seed) pair and aggregates per fraction.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let t = cfg.source.load()?;
    if t.ndim() != 2 {
        return Err(HarnessError::Config(format!(
            "evaluation needs a users x items matrix, got shape {}",
            t.shape()
        )));
    }
    let splits = cfg
        .seed_values()
        .map(|seed| {
            let spec = SplitSpec { seed, ..cfg.split.clone() };
            Ok((seed, split_matrix(&t, &spec)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..cfg.split.fractions.len())
        .flat_map(|f| (0..splits.len()).map(move |s| (f, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(f, s)| {
            let (seed, split) = &splits[s];
            let fraction = cfg.split.fractions[f];
            let job_start = Instant::now();
            let train = split.train_at(fraction)?;
            let completion = complete(&train, cfg.k, cfg.method, &cfg.convergence)?;
            let pairs: Vec<(f64, f64)> = split
                .test()
                .iter()
                .map(|(c, v)| Ok((completion.value(c)?, *v)))
                .collect::<Result<_>>()?;
            let empty = || HarnessError::Config("test set is empty; raise the test fraction".into());
            Ok(SeedRun {
                seed: *seed,
                rmse: rmse(&pairs).ok_or_else(empty)?,
                mae: mae(&pairs).ok_or_else(empty)?,
                sweeps_used: completion.diagnostics.sweeps_used,
                residual: completion.diagnostics.residual,
                cold_test_entries: split.flags(&train).cold_test_entries,
                elapsed_seconds: job_start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<SeedRun>>>()?;

    let per_fraction = splits.len();
    let points = cfg
        .split
        .fractions
        .iter()
        .zip(runs.chunks(per_fraction))
        .map(|(&fraction, runs)| {
            let (_, first) = &splits[0];
            let col = |f: fn(&SeedRun) -> f64| runs.iter().map(f).collect::<Vec<_>>();
            SweepPoint {
                fraction,
                train_size: first.train_size(fraction),
                test_size: first.test().len(),
                rmse: Summary::of(&col(|r| r.rmse)),
                mae: Summary::of(&col(|r| r.mae)),
                sweeps: Summary::of(&col(|r| r.sweeps_used as f64)),
                max_cold_test_entries: runs.iter().map(|r| r.cold_test_entries).max().unwrap_or(0),
                runs: runs.to_vec(),
            }
        })
        .collect();

    Ok(ExperimentReport {
        method: cfg.method,
        method_label: cfg.method.label().to_string(),
        config: cfg.clone(),
        dataset: DatasetStats {
            users: t.shape().extent(0),
            items: t.shape().extent(1),
            ratings: t.nnz(),
            sparsity: t.sparsity(),
        },
        protocol: vec![
            "the test set is fixed across sweep points; smaller training sets are prefixes of larger ones".into(),
            "predictions are not clamped to the rating scale".into(),
            "users or items without training ratings are still imputed and counted".into(),
        ],
        points,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    })
}
