//! Experiment cells and CSV emission.
//!
//! Seed ladder, all derived from the config's base seed `S`:
//! - data:  `derive(S, [DATA, replicate])` (MMD adds the trial index),
//!   shared by every m and method;
//! - map:   `derive(S, [MAP, m, replicate])` (MMD adds the trial index),
//!   shared by every method so methods are compared on the same features;
//! - cell:  `derive(S, [m, method tag, replicate])`, feeding the quantizer
//!   and permutation streams.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cli::config::{DataSource, ExperimentConfig, MethodId, Task};
use crate::cli::dataset::{load_csv_dataset, CsvDataset};
use crate::cli::CliError;
use crate::error::{Error, Result};
use crate::features::{KernelSpec, RffMap};
use crate::kernels::{gram_exact, spectral_delta, spectral_sandwich_check, sup_error_scan, SandwichParams};
use crate::pipeline::{Method, Pipeline, Role};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tasks::{krr_predict, krr_train, mse, permutation_test, power, synth_circle_data, synth_krr_data, synth_toy_pairs};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 10] = [
    "task",
    "method",
    "m",
    "b",
    "lambda",
    "p",
    "seed",
    "metric",
    "value",
    "bits_per_sample",
];

const DATA_TAG: u64 = 0xDA7A;
const MAP_TAG: u64 = 0x3A90;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub task: String,
    pub method: String,
    pub m: usize,
    pub b: u8,
    pub lambda: usize,
    pub p: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
    pub bits_per_sample: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSeeds {
    pub data: u64,
    pub map: u64,
    pub cell: u64,
}

pub fn cell_seeds(config: &ExperimentConfig, m: usize, method: MethodId, replicate: u64) -> CellSeeds {
    CellSeeds {
        data: derive_seed(config.seed, &[DATA_TAG, replicate]),
        map: derive_seed(config.seed, &[MAP_TAG, m as u64, replicate]),
        cell: derive_seed(config.seed, &[m as u64, method.tag(), replicate]),
    }
}

/// The output file for a task inside `dir`.
pub fn csv_path(dir: &Path, task: Task) -> PathBuf {
    dir.join(format!("{}_v{SCHEMA_VERSION}.csv", task.name()))
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    csv: Option<CsvDataset>,
}

struct Cell {
    m: usize,
    method: MethodId,
    replicate: u64,
}

impl Context<'_> {
    fn dim(&self) -> Result<usize> {
        let dim = match (&self.csv, self.config.data.dim()) {
            (Some(d), _) => d.x[0].len(),
            (None, Some(d)) => d,
            (None, None) => unreachable!("csv data is loaded before cells run"),
        };
        if let Some(expected) = self.config.dim {
            crate::error::check_len(expected, dim)?;
        }
        Ok(dim)
    }

    fn pipeline(&self, cell: &Cell, map_seed: u64) -> Result<Pipeline> {
        let spec = KernelSpec::rbf(self.config.gamma, self.dim()?)?;
        let map = RffMap::sample(spec, cell.m, map_seed)?;
        Pipeline::new(map, self.config.method(cell.method, cell.m)?)
    }

    fn row(&self, cell: &Cell, pipeline_method: &Method, metric: &str, value: f64) -> Result<ResultRow> {
        let (b, lambda, p) = match pipeline_method {
            Method::NoiseShaping(c) => (c.alphabet.bits(), c.lambda, c.p),
            Method::Rff | Method::Exact | Method::CondensedRff(_) => (32, 1, cell.m),
            Method::Universal => (1, 1, cell.m),
            Method::SemiQ { alphabet } | Method::StocQ { alphabet } => (alphabet.bits(), 1, cell.m),
        };
        let footprint = footprint_of(pipeline_method, cell.m)?;
        Ok(ResultRow {
            task: self.config.task.name().to_string(),
            method: cell.method.name(),
            m: cell.m,
            b,
            lambda,
            p,
            seed: cell.replicate,
            metric: metric.to_string(),
            value,
            bits_per_sample: footprint,
        })
    }

    fn run_cell(&self, cell: &Cell) -> Result<Vec<ResultRow>> {
        let config = self.config;
        let seeds = cell_seeds(config, cell.m, cell.method, cell.replicate);
        match config.task {
            Task::Footprint => {
                let method = config.method(cell.method, cell.m)?;
                let bits = footprint_of(&method, cell.m)?;
                Ok(vec![self.row(cell, &method, "bits", bits as f64)?])
            }
            Task::ApproxScan => {
                let DataSource::ToyPairs { n, dim } = config.data else { unreachable!() };
                let pairs = synth_toy_pairs(n, dim, seeds.data)?;
                let pipeline = self.pipeline(cell, seeds.map)?;
                let report = sup_error_scan(&pipeline, &pairs, &mut rng_from_seed(seeds.cell))?;
                Ok(vec![
                    self.row(cell, pipeline.method(), "max_error", report.max_error)?,
                    self.row(cell, pipeline.method(), "mean_error", report.mean_error)?,
                ])
            }
            Task::Krr => {
                let (x, y) = match (&self.csv, &config.data) {
                    (Some(d), _) => (
                        d.x.clone(),
                        d.targets.clone().ok_or_else(|| {
                            Error::invalid("data.has_target", "krr needs a target column")
                        })?,
                    ),
                    (None, DataSource::KrrSynth { n }) => {
                        let d = synth_krr_data(*n, seeds.data);
                        (d.x, d.y)
                    }
                    _ => unreachable!(),
                };
                let n_train = ((x.len() as f64 * config.train_fraction).round() as usize).clamp(1, x.len() - 1);
                let pipeline = self.pipeline(cell, seeds.map)?;
                let train = pipeline.encode_batch(&x[..n_train], derive_seed(seeds.cell, &[1]))?;
                let test = pipeline.encode_batch(&x[n_train..], derive_seed(seeds.cell, &[2]))?;
                let model = krr_train(&pipeline.feature_matrix(&train, Role::Train)?, &y[..n_train], config.eta)?;
                let pred = krr_predict(&model, &pipeline.feature_matrix(&test, Role::Query)?)?;
                let err = mse(&pred, &y[n_train..])?;
                Ok(vec![self.row(cell, pipeline.method(), "test_mse", err)?])
            }
            Task::Mmd => {
                let DataSource::Circle { n, gap } = config.data else { unreachable!() };
                let mut reports = Vec::with_capacity(config.trials);
                let mut method = None;
                for trial in 0..config.trials as u64 {
                    let sample = synth_circle_data(n, gap, derive_seed(seeds.data, &[trial]))?;
                    let pipeline = self.pipeline(cell, derive_seed(seeds.map, &[trial]))?;
                    let trial_seed = derive_seed(seeds.cell, &[trial]);
                    let x = pipeline.encode_batch(&sample.x, derive_seed(trial_seed, &[1]))?;
                    let y = pipeline.encode_batch(&sample.y, derive_seed(trial_seed, &[2]))?;
                    let mut rng = rng_from_seed(derive_seed(trial_seed, &[3]));
                    reports.push(permutation_test(&x, &y, &pipeline, config.permutations, config.level, &mut rng)?);
                    method.get_or_insert_with(|| pipeline.method().clone());
                }
                let method = method.expect("at least one trial");
                Ok(vec![self.row(cell, &method, "power", power(&reports))?])
            }
            Task::Spectral => {
                let points = match (&self.csv, &config.data) {
                    (Some(d), _) => d.x.clone(),
                    (None, DataSource::Circle { n, gap }) => synth_circle_data(*n, *gap, seeds.data)?.x,
                    _ => unreachable!(),
                };
                let pipeline = self.pipeline(cell, seeds.map)?;
                let exact = gram_exact(&points, config.gamma)?;
                let approx = pipeline.gram(&pipeline.encode_batch(&points, seeds.cell)?)?;
                let delta = match pipeline.method() {
                    Method::NoiseShaping(c) if c.scheme.order() == 1 => {
                        Some(spectral_delta(c.p, c.lambda, c.alphabet.bits()))
                    }
                    _ => None,
                };
                let report = spectral_sandwich_check(
                    &exact,
                    &approx,
                    SandwichParams {
                        eta: config.spectral_eta,
                        delta1: config.delta1,
                        delta2: config.delta2,
                        delta: delta.unwrap_or(0.0),
                    },
                )?;
                let method = pipeline.method();
                let mut rows = vec![
                    self.row(cell, method, "lower_margin", report.lower_margin)?,
                    self.row(cell, method, "upper_margin", report.upper_margin)?,
                    self.row(cell, method, "holds", if report.holds { 1.0 } else { 0.0 })?,
                ];
                if let Some(d) = delta {
                    rows.push(self.row(cell, method, "delta", d)?);
                }
                Ok(rows)
            }
        }
    }
}

fn footprint_of(method: &Method, m: usize) -> Result<u64> {
    let spec = KernelSpec::rbf(1.0, 1)?;
    let map = RffMap::from_parts(spec, vec![0.0; m], vec![0.0; m])?;
    Ok(Pipeline::new(map, method.clone())?.footprint()?.bits)
}

/// Run every `(m, method, replicate)` cell. Row order depends only on the
/// config, never on scheduling.
pub fn run(config: &ExperimentConfig, jobs: Option<usize>) -> std::result::Result<Vec<ResultRow>, CliError> {
    let csv = match &config.data {
        DataSource::Csv { path, has_target } if config.task != Task::Footprint => {
            Some(load_csv_dataset(path, *has_target).map_err(CliError::Runtime)?)
        }
        _ => None,
    };
    if let Some(d) = &csv {
        if config.task == Task::Krr && d.x.len() < 2 {
            return Err(CliError::Runtime(Error::invalid("data.csv", "krr needs at least two rows")));
        }
    }
    let replicates: &[u64] = if config.task == Task::Footprint {
        &[0]
    } else {
        &config.seeds
    };
    let cells: Vec<Cell> = config
        .m_sweep
        .iter()
        .flat_map(|&m| {
            config.methods.iter().flat_map(move |&method| {
                replicates.iter().map(move |&replicate| Cell { m, method, replicate })
            })
        })
        .collect();
    let context = Context { config, csv };
    let execute = || {
        cells
            .par_iter()
            .map(|cell| context.run_cell(cell))
            .collect::<Result<Vec<Vec<ResultRow>>>>()
    };
    let rows = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Runtime(Error::invalid("jobs", e.to_string())))?
            .install(execute),
        None => execute(),
    }
    .map_err(CliError::Runtime)?;
    Ok(rows.into_iter().flatten().collect())
}

/// Write rows to `<dir>/<task>_v1.csv` through a temporary file and rename.
pub fn write_csv(rows: &[ResultRow], dir: &Path, task: Task) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = csv_path(dir, task);
    let tmp = path.with_extension("csv.tmp");
    {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&tmp)?;
        writer.write_record(CSV_HEADER)?;
        for r in rows {
            writer.write_record([
                r.task.clone(),
                r.method.clone(),
                r.m.to_string(),
                r.b.to_string(),
                r.lambda.to_string(),
                r.p.to_string(),
                r.seed.to_string(),
                r.metric.clone(),
                r.value.to_string(),
                r.bits_per_sample.to_string(),
            ])?;
        }
        let mut inner = writer.into_inner().map_err(|e| e.into_error())?;
        inner.flush()?;
        inner.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}
