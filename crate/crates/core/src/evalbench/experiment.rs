//! Seeded synthetic sweeps comparing DSC and TSC.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{clustering_error, run_tsc};
use crate::affinity::default_neighbors;
use crate::datamodel::{DataMatrix, RankPolicy};
use crate::dirsearch::{AUpdateMode, AdmmConfig, ResponseNorm};
use crate::error::{Error, Result};
use crate::pipeline::{run_dsc, DscParams};
use crate::seeding::derive_seed;
use crate::spectral::DEFAULT_RESTARTS;
use crate::synthgen::{add_noise, generate, SynthConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Dsc,
    Tsc,
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmKind::Dsc => "dsc",
            AlgorithmKind::Tsc => "tsc",
        })
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dsc" => Ok(AlgorithmKind::Dsc),
            "tsc" => Ok(AlgorithmKind::Tsc),
            _ => Err(Error::invalid(format!(
                "unknown algorithm `{s}` (expected dsc or tsc)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "y")]
    Intersection,
    #[serde(rename = "N")]
    Clusters,
    #[serde(rename = "tau")]
    Noise,
}

impl SweepVariable {
    pub fn key(self) -> &'static str {
        match self {
            SweepVariable::Intersection => "y",
            SweepVariable::Clusters => "N",
            SweepVariable::Noise => "tau",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

/// Synthetic data settings; the swept variables override their fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub ambient_dim: usize,
    pub clusters: usize,
    pub subspace_dim: usize,
    #[serde(default)]
    pub intersection_dim: usize,
    pub points_per_cluster: usize,
    #[serde(default)]
    pub tau: f64,
}

/// DSC settings in file form. Omitted fields take the library defaults,
/// except the rank policy, which defaults to `exact`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DscSection {
    pub p: u8,
    pub mu: f64,
    pub gamma: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub a_update: String,
    pub rank: String,
    /// Defaults to `max(3, d + 1)` when the subspace dimension is known.
    pub neighbors: Option<usize>,
    pub exclude_self: bool,
    pub renormalize: bool,
    pub restarts: usize,
}

impl Default for DscSection {
    fn default() -> Self {
        let admm = AdmmConfig::default();
        DscSection {
            p: admm.norm.p(),
            mu: admm.mu,
            gamma: admm.gamma,
            max_iters: admm.max_iters,
            tol: admm.tol,
            a_update: admm.a_update.to_string(),
            rank: RankPolicy::Exact.to_string(),
            neighbors: None,
            exclude_self: false,
            renormalize: false,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

impl DscSection {
    pub fn to_params(&self, default_g: usize, seed: u64) -> Result<DscParams> {
        let admm = AdmmConfig {
            norm: ResponseNorm::from_p(self.p)?,
            mu: self.mu,
            gamma: self.gamma,
            max_iters: self.max_iters,
            tol: self.tol,
            a_update: self.a_update.parse::<AUpdateMode>()?,
        };
        admm.validate()?;
        Ok(DscParams {
            admm,
            rank: self.rank.parse()?,
            neighbors: Some(self.neighbors.unwrap_or(default_g)),
            exclude_self: self.exclude_self,
            renormalize: self.renormalize,
            restarts: self.restarts,
            seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TscSection {
    pub neighbors: Option<usize>,
    pub restarts: usize,
}

impl Default for TscSection {
    fn default() -> Self {
        TscSection {
            neighbors: None,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

fn default_trials() -> usize {
    10
}

fn default_algorithms() -> Vec<AlgorithmKind> {
    vec![AlgorithmKind::Dsc, AlgorithmKind::Tsc]
}

/// A sweep over one synthetic-data variable, optionally crossed with a
/// second (`series`) variable, with `trials` seeded datasets per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<AlgorithmKind>,
    pub data: DataSection,
    pub sweep: SweepAxis,
    #[serde(default)]
    pub series: Option<SweepAxis>,
    #[serde(default)]
    pub dsc: DscSection,
    #[serde(default)]
    pub tsc: TscSection,
}

/// One cell of the grid: the series value (if any) and the sweep value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub series: Option<(SweepVariable, f64)>,
    pub sweep: (SweepVariable, f64),
}

impl GridPoint {
    /// `tau=0.1;y=4` style label, series first.
    pub fn label(&self) -> String {
        let one = |(v, x): (SweepVariable, f64)| format!("{}={x}", v.key());
        match self.series {
            Some(s) => format!("{};{}", one(s), one(self.sweep)),
            None => one(self.sweep),
        }
    }
}

fn as_count(var: SweepVariable, x: f64) -> Result<usize> {
    if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(Error::invalid(format!(
            "{} value {x} is not a non-negative integer",
            var.key()
        )))
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::invalid(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment spec serializes")
    }

    pub fn grid(&self) -> Vec<GridPoint> {
        let sweep = |x| (self.sweep.variable, x);
        match &self.series {
            None => self
                .sweep
                .values
                .iter()
                .map(|&x| GridPoint {
                    series: None,
                    sweep: sweep(x),
                })
                .collect(),
            Some(s) => s
                .values
                .iter()
                .flat_map(|&sv| {
                    self.sweep.values.iter().map(move |&x| GridPoint {
                        series: Some((s.variable, sv)),
                        sweep: (self.sweep.variable, x),
                    })
                })
                .collect(),
        }
    }

    /// Data settings at a grid point; the seed is filled in per trial.
    pub fn data_at(&self, point: &GridPoint) -> Result<(SynthConfig, f64)> {
        let d = &self.data;
        let mut cfg = SynthConfig {
            ambient_dim: d.ambient_dim,
            clusters: d.clusters,
            subspace_dim: d.subspace_dim,
            intersection_dim: d.intersection_dim,
            points_per_cluster: d.points_per_cluster,
            seed: 0,
        };
        let mut tau = d.tau;
        for (var, x) in point.series.into_iter().chain([point.sweep]) {
            match var {
                SweepVariable::Intersection => cfg.intersection_dim = as_count(var, x)?,
                SweepVariable::Clusters => cfg.clusters = as_count(var, x)?,
                SweepVariable::Noise => tau = x,
            }
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!(
                "noise ratio {tau} must be non-negative"
            )));
        }
        cfg.validate()?;
        Ok((cfg, tau))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("no algorithms selected"));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::invalid("sweep has no values"));
        }
        if let Some(s) = &self.series {
            if s.values.is_empty() {
                return Err(Error::invalid("series has no values"));
            }
            if s.variable == self.sweep.variable {
                return Err(Error::invalid("series and sweep vary the same variable"));
            }
        }
        for p in self.grid() {
            let (cfg, _) = self.data_at(&p)?;
            if self.algorithms.contains(&AlgorithmKind::Dsc) {
                self.dsc.to_params(
                    default_neighbors(cfg.total_points(), cfg.clusters, Some(cfg.subspace_dim)),
                    0,
                )?;
            }
        }
        Ok(())
    }

    /// Seed of the dataset for trial `trial` at grid cell `cell`.
    pub fn trial_seed(&self, cell: usize, trial: usize) -> u64 {
        derive_seed(derive_seed(self.seed, cell as u64), trial as u64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub point: GridPoint,
    pub trial: usize,
    pub algorithm: AlgorithmKind,
    pub error_pct: f64,
    /// ADMM iterations; zero for TSC.
    pub iters: usize,
    pub converged: bool,
    pub seconds: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub point: GridPoint,
    pub trial: usize,
    pub algorithm: AlgorithmKind,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub point: GridPoint,
    pub algorithm: AlgorithmKind,
    /// Successful trials.
    pub trials: usize,
    pub mean_error_pct: f64,
    /// Sample standard deviation; zero with fewer than two trials.
    pub std_error_pct: f64,
    pub mean_iters: f64,
    pub mean_seconds: f64,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    /// Ordered by grid cell, trial, then algorithm as listed in the spec.
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub summary: Vec<SummaryRow>,
}

enum Outcome {
    Done(TrialRecord),
    Failed(TrialFailure),
}

fn run_trial(spec: &ExperimentSpec, point: GridPoint, trial: usize, seed: u64) -> Vec<Outcome> {
    let fail_all = |message: String| {
        spec.algorithms
            .iter()
            .map(|&algorithm| {
                Outcome::Failed(TrialFailure {
                    point,
                    trial,
                    algorithm,
                    seed,
                    message: message.clone(),
                })
            })
            .collect()
    };
    let data = match spec.data_at(&point).and_then(|(cfg, tau)| {
        add_noise(&generate(&SynthConfig { seed, ..cfg })?, tau, seed).map(|d| (cfg, d))
    }) {
        Ok(x) => x,
        Err(e) => return fail_all(e.to_string()),
    };
    let (cfg, d) = data;
    let truth = d.labels.clone().expect("synthetic data is labeled");
    let g = default_neighbors(d.len(), cfg.clusters, Some(cfg.subspace_dim));
    let cluster_seed = derive_seed(seed, 2);
    spec.algorithms
        .iter()
        .map(|&algorithm| {
            let start = Instant::now();
            let run = run_algorithm(spec, algorithm, &d, cfg.clusters, g, cluster_seed).and_then(
                |(labels, iters, conv)| Ok((clustering_error(&labels, &truth)?, iters, conv)),
            );
            let seconds = start.elapsed().as_secs_f64();
            match run {
                Ok((error_pct, iters, converged)) => Outcome::Done(TrialRecord {
                    point,
                    trial,
                    algorithm,
                    error_pct,
                    iters,
                    converged,
                    seconds,
                    seed,
                }),
                Err(e) => Outcome::Failed(TrialFailure {
                    point,
                    trial,
                    algorithm,
                    seed,
                    message: e.to_string(),
                }),
            }
        })
        .collect()
}

fn run_algorithm(
    spec: &ExperimentSpec,
    algorithm: AlgorithmKind,
    d: &DataMatrix,
    clusters: usize,
    default_g: usize,
    seed: u64,
) -> Result<(Vec<usize>, usize, bool)> {
    match algorithm {
        AlgorithmKind::Dsc => {
            let run = run_dsc(d, clusters, &spec.dsc.to_params(default_g, seed)?)?;
            Ok((
                run.labels.labels,
                run.directions.iters_used,
                run.directions.converged,
            ))
        }
        AlgorithmKind::Tsc => {
            let g = spec.tsc.neighbors.unwrap_or(default_g);
            let labels = run_tsc(d, clusters, g, spec.tsc.restarts, seed)?;
            Ok((labels.labels, 0, true))
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn summarize(
    spec: &ExperimentSpec,
    records: &[TrialRecord],
    failures: &[TrialFailure],
) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for point in spec.grid() {
        for &algorithm in &spec.algorithms {
            let mine: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.point == point && r.algorithm == algorithm)
                .collect();
            let errors: Vec<f64> = mine.iter().map(|r| r.error_pct).collect();
            let iters: Vec<f64> = mine.iter().map(|r| r.iters as f64).collect();
            let secs: Vec<f64> = mine.iter().map(|r| r.seconds).collect();
            rows.push(SummaryRow {
                point,
                algorithm,
                trials: mine.len(),
                mean_error_pct: mean(&errors),
                std_error_pct: sample_std(&errors),
                mean_iters: mean(&iters),
                mean_seconds: mean(&secs),
                failures: failures
                    .iter()
                    .filter(|f| f.point == point && f.algorithm == algorithm)
                    .count(),
            });
        }
    }
    rows
}

/// Runs every (grid cell, trial) job on the current rayon pool. Both
/// algorithms see the same dataset in a trial. Failures are collected, not
/// propagated; only an invalid spec is an error.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let jobs: Vec<(usize, GridPoint, usize)> = spec
        .grid()
        .into_iter()
        .enumerate()
        .flat_map(|(cell, p)| (0..spec.trials).map(move |t| (cell, p, t)))
        .collect();
    let outcomes: Vec<Vec<Outcome>> = jobs
        .par_iter()
        .map(|&(cell, point, trial)| run_trial(spec, point, trial, spec.trial_seed(cell, trial)))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes.into_iter().flatten() {
        match o {
            Outcome::Done(r) => records.push(r),
            Outcome::Failed(f) => failures.push(f),
        }
    }
    let summary = summarize(spec, &records, &failures);
    Ok(ExperimentResult {
        spec: spec.clone(),
        records,
        failures,
        summary,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(header).map_err(&err)?;
    for r in rows {
        w.write_record(&r).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl ExperimentResult {
    pub fn summary_for(&self, point: &GridPoint, algorithm: AlgorithmKind) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.point == *point && r.algorithm == algorithm)
    }

    /// `sweep,trial,algorithm,error_pct,iters,seconds,seed`
    pub fn write_results_csv(&self, path: &Path) -> Result<()> {
        write_rows(
            path,
            &[
                "sweep",
                "trial",
                "algorithm",
                "error_pct",
                "iters",
                "seconds",
                "seed",
            ],
            self.records.iter().map(|r| {
                vec![
                    r.point.label(),
                    r.trial.to_string(),
                    r.algorithm.to_string(),
                    format!("{:.4}", r.error_pct),
                    r.iters.to_string(),
                    format!("{:.3}", r.seconds),
                    r.seed.to_string(),
                ]
            }),
        )
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        write_rows(
            path,
            &[
                "sweep",
                "algorithm",
                "trials",
                "mean_error_pct",
                "std_error_pct",
                "mean_iters",
                "mean_seconds",
                "failures",
            ],
            self.summary.iter().map(|r| {
                vec![
                    r.point.label(),
                    r.algorithm.to_string(),
                    r.trials.to_string(),
                    format!("{:.4}", r.mean_error_pct),
                    format!("{:.4}", r.std_error_pct),
                    format!("{:.1}", r.mean_iters),
                    format!("{:.3}", r.mean_seconds),
                    r.failures.to_string(),
                ]
            }),
        )
    }

    /// Long format, one row per trial, with the series and sweep variables
    /// in separate columns for plotting tools.
    pub fn write_plot_csv(&self, path: &Path) -> Result<()> {
        write_rows(
            path,
            &[
                "series_variable",
                "series_value",
                "sweep_variable",
                "sweep_value",
                "algorithm",
                "trial",
                "error_pct",
            ],
            self.records.iter().map(|r| {
                let (sv, sx) = r
                    .point
                    .series
                    .map_or((String::new(), String::new()), |(v, x)| {
                        (v.key().to_string(), x.to_string())
                    });
                vec![
                    sv,
                    sx,
                    r.point.sweep.0.key().to_string(),
                    r.point.sweep.1.to_string(),
                    r.algorithm.to_string(),
                    r.trial.to_string(),
                    format!("{:.4}", r.error_pct),
                ]
            }),
        )
    }

    pub fn write_failures_csv(&self, path: &Path) -> Result<()> {
        write_rows(
            path,
            &["sweep", "trial", "algorithm", "seed", "message"],
            self.failures.iter().map(|f| {
                vec![
                    f.point.label(),
                    f.trial.to_string(),
                    f.algorithm.to_string(),
                    f.seed.to_string(),
                    f.message.clone(),
                ]
            }),
        )
    }

    /// Writes `results.csv`, `summary.csv`, `plot.csv`, `failures.csv` and
    /// the resolved spec as `run.toml` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_results_csv(&dir.join("results.csv"))?;
        self.write_summary_csv(&dir.join("summary.csv"))?;
        self.write_plot_csv(&dir.join("plot.csv"))?;
        self.write_failures_csv(&dir.join("failures.csv"))?;
        let run = dir.join("run.toml");
        std::fs::write(&run, self.spec.to_toml()).map_err(|e| Error::io(&run, e))
    }
}
