use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sgp_sysid::likelihood::{map_estimate, HyperPoint, LikelihoodObjective, ProblemData};
use sgp_sysid::sysid::{fit_score, simulate_dataset};
use sgp_sysid::{make_preset, Dataset, DatasetPreset, Preset, SolverConfig, SolverKind, SystemSpec, Termination};

use crate::error::{BenchError, Result};
use crate::traces::{emit_trace_plots, TraceSeries};

pub const AGGREGATE_HEADER: [&str; 9] = [
    "preset", "dataset", "solver", "mean_fit", "sd_fit", "mean_it", "mean_nf", "mean_t_s", "failures",
];

pub const TRIAL_HEADER: [&str; 14] = [
    "preset",
    "dataset",
    "solver",
    "trial",
    "seed",
    "checksum",
    "fit",
    "f_final",
    "iterations",
    "function_evals",
    "time_s",
    "termination",
    "failed",
    "error",
];

/// Where a trial's record comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Preset(DatasetPreset),
    Custom { name: String, spec: SystemSpec },
}

impl DatasetSource {
    pub fn name(&self) -> &str {
        match self {
            DatasetSource::Preset(p) => p.as_str(),
            DatasetSource::Custom { name, .. } => name,
        }
    }

    fn system(&self, n_est: usize) -> SystemSpec {
        match self {
            DatasetSource::Preset(p) => p.system(n_est),
            DatasetSource::Custom { spec, .. } => spec.clone(),
        }
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub presets: Vec<Preset>,
    pub datasets: Vec<DatasetSource>,
    pub solvers: Vec<SolverKind>,
    /// Monte Carlo trials per cell; trial `i` uses seed `base_seed + i`.
    pub runs: usize,
    pub base_seed: u64,
    /// Estimated model order for the preset datasets.
    pub n_est: usize,
    /// When set, CSV files are written here.
    pub output_dir: Option<PathBuf>,
    pub solver_config: SolverConfig,
    /// Also write objective/fit series per instance (needs `output_dir`).
    pub traces: bool,
}

impl BenchConfig {
    pub fn new(presets: Vec<Preset>, datasets: Vec<DatasetSource>, solvers: Vec<SolverKind>) -> Self {
        Self {
            presets,
            datasets,
            solvers,
            runs: 1,
            base_seed: 0,
            n_est: sgp_sysid::sysid::DEFAULT_ORDER,
            output_dir: None,
            solver_config: SolverConfig::default(),
            traces: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(BenchError::Config("runs must be at least 1".into()));
        }
        if self.presets.is_empty() || self.datasets.is_empty() || self.solvers.is_empty() {
            return Err(BenchError::Config("presets, datasets and solvers must be non-empty".into()));
        }
        if self.traces && self.output_dir.is_none() {
            return Err(BenchError::Config("trace output needs an output directory".into()));
        }
        for d in &self.datasets {
            d.system(self.n_est).validate()?;
        }
        self.solver_config.validate()?;
        Ok(())
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub preset: String,
    pub dataset: String,
    pub solver: String,
    pub trial: usize,
    pub seed: u64,
    /// Hex FNV-1a hash of the record's `u` and `y`.
    pub checksum: String,
    pub fit: f64,
    pub f_final: f64,
    pub iterations: usize,
    pub function_evals: usize,
    pub time_s: f64,
    pub termination: String,
    /// Error, or a stop other than relative decrease.
    pub failed: bool,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub preset: String,
    pub dataset: String,
    pub solver: String,
    pub mean_fit: f64,
    pub sd_fit: f64,
    pub mean_it: f64,
    pub mean_nf: f64,
    pub mean_t_s: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRow>,
    /// Files written, in order.
    pub files: Vec<PathBuf>,
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.trials.iter().filter(|t| t.failed).count()
    }
}

struct SolveOutcome {
    record: TrialRecord,
    series: Option<TraceSeries>,
}

struct Solved {
    fit: f64,
    f_final: f64,
    iterations: usize,
    function_evals: usize,
    time_s: f64,
    termination: Termination,
    series: Option<TraceSeries>,
}

fn solve_one(
    dataset: &Dataset,
    preset: Preset,
    solver: SolverKind,
    config: &BenchConfig,
    keep_trace: bool,
) -> std::result::Result<Solved, sgp_sysid::Error> {
    let setup = make_preset(preset, dataset.order())?;
    let problem = ProblemData::new(&dataset.u, &dataset.y, setup.spec)?;
    let mut objective = LikelihoodObjective::new(&problem);
    let x0 = setup.x0.to_vector();
    let start = Instant::now();
    let result = solver.solve(&mut objective, &setup.bounds, &x0, &config.solver_config)?;
    let theta = map_estimate(&problem, &HyperPoint::from_slice(result.x_final.as_slice()))?;
    let elapsed = start.elapsed().as_secs_f64();
    let fit = fit_score(theta.as_slice(), &dataset.theta_true)?;
    let series = if keep_trace {
        let mut fits = Vec::with_capacity(result.trace.len());
        for r in &result.trace {
            let th = map_estimate(&problem, &HyperPoint::from_slice(r.x.as_slice()))?;
            fits.push(fit_score(th.as_slice(), &dataset.theta_true)?);
        }
        Some(TraceSeries {
            solver: solver.as_str().to_string(),
            function_evals: result.trace.iter().map(|r| r.function_evals).collect(),
            f: result.trace.iter().map(|r| r.f).collect(),
            fit: fits,
        })
    } else {
        None
    };
    Ok(Solved {
        fit,
        f_final: result.f_final,
        iterations: result.iterations,
        function_evals: result.function_evals,
        time_s: elapsed,
        termination: result.termination,
        series,
    })
}

fn run_trial(
    dataset: &Dataset,
    source: &DatasetSource,
    preset: Preset,
    solver: SolverKind,
    trial: usize,
    config: &BenchConfig,
) -> SolveOutcome {
    let mut record = TrialRecord {
        preset: preset.as_str().to_string(),
        dataset: source.name().to_string(),
        solver: solver.as_str().to_string(),
        trial,
        seed: dataset.seed,
        checksum: format!("{:016x}", dataset.checksum()),
        fit: f64::NAN,
        f_final: f64::NAN,
        iterations: 0,
        function_evals: 0,
        time_s: 0.0,
        termination: String::new(),
        failed: true,
        error: String::new(),
    };
    let series = match solve_one(dataset, preset, solver, config, config.traces) {
        Ok(s) => {
            record.fit = s.fit;
            record.f_final = s.f_final;
            record.iterations = s.iterations;
            record.function_evals = s.function_evals;
            record.time_s = s.time_s;
            record.termination = s.termination.as_str().to_string();
            record.failed = s.termination != Termination::RelativeDecrease;
            s.series
        }
        Err(e) => {
            record.error = e.to_string();
            None
        }
    };
    SolveOutcome { record, series }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Aggregates one cell. Means run over trials that returned a result.
fn aggregate(rows: &[&TrialRecord]) -> AggregateRow {
    let ok: Vec<&TrialRecord> = rows.iter().copied().filter(|r| r.error.is_empty()).collect();
    let fits: Vec<f64> = ok.iter().map(|r| r.fit).collect();
    let mean_fit = mean(&fits);
    let sd_fit = if fits.len() > 1 {
        (fits.iter().map(|f| (f - mean_fit).powi(2)).sum::<f64>() / (fits.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    AggregateRow {
        preset: rows[0].preset.clone(),
        dataset: rows[0].dataset.clone(),
        solver: rows[0].solver.clone(),
        mean_fit,
        sd_fit,
        mean_it: mean(&ok.iter().map(|r| r.iterations as f64).collect::<Vec<_>>()),
        mean_nf: mean(&ok.iter().map(|r| r.function_evals as f64).collect::<Vec<_>>()),
        mean_t_s: mean(&ok.iter().map(|r| r.time_s).collect::<Vec<_>>()),
        failures: rows.iter().filter(|r| r.failed).count(),
    }
}

/// Runs every (preset, dataset, solver, trial) cell. All solvers and presets
/// of a trial share one generated record. Solver errors are recorded as
/// failed trials rather than returned.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
    }
    let mut trials = Vec::new();
    let mut files = Vec::new();
    for source in &config.datasets {
        let system = source.system(config.n_est);
        for trial in 0..config.runs {
            let seed = config.base_seed + trial as u64;
            let dataset = simulate_dataset(&system, seed)?;
            for &preset in &config.presets {
                let mut series = Vec::new();
                for &solver in &config.solvers {
                    let out = run_trial(&dataset, source, preset, solver, trial, config);
                    trials.push(out.record);
                    series.extend(out.series);
                }
                if let (true, Some(dir)) = (config.traces && !series.is_empty(), &config.output_dir) {
                    let instance = format!("{}_{}_{}", preset.as_str(), source.name(), trial);
                    files.extend(emit_trace_plots(&instance, &series, &dir.join("traces"))?);
                }
            }
        }
    }

    let mut aggregates = Vec::new();
    for &preset in &config.presets {
        for source in &config.datasets {
            for &solver in &config.solvers {
                let rows: Vec<&TrialRecord> = trials
                    .iter()
                    .filter(|t| t.preset == preset.as_str() && t.dataset == source.name() && t.solver == solver.as_str())
                    .collect();
                aggregates.push(aggregate(&rows));
            }
        }
    }

    if let Some(dir) = &config.output_dir {
        let path = dir.join("trials.csv");
        write_trials(&path, &trials)?;
        files.push(path);
        let path = dir.join("aggregate.csv");
        write_aggregates(&path, &aggregates)?;
        files.push(path);
    }
    Ok(BenchReport {
        trials,
        aggregates,
        files,
    })
}

pub fn write_trials(path: &Path, trials: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRIAL_HEADER)?;
    for t in trials {
        w.write_record([
            t.preset.clone(),
            t.dataset.clone(),
            t.solver.clone(),
            t.trial.to_string(),
            t.seed.to_string(),
            t.checksum.clone(),
            t.fit.to_string(),
            t.f_final.to_string(),
            t.iterations.to_string(),
            t.function_evals.to_string(),
            t.time_s.to_string(),
            t.termination.clone(),
            t.failed.to_string(),
            t.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for a in rows {
        w.write_record([
            a.preset.clone(),
            a.dataset.clone(),
            a.solver.clone(),
            a.mean_fit.to_string(),
            a.sd_fit.to_string(),
            a.mean_it.to_string(),
            a.mean_nf.to_string(),
            a.mean_t_s.to_string(),
            a.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
