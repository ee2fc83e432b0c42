use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sgp_sysid::sysid::{estimate, fit_score, read_record, sidecar_path, simulate_dataset, DEFAULT_ORDER};
use sgp_sysid::{Dataset, DatasetPreset, Preset, SolverConfig, SolverKind, SystemSpec};
use sysid_bench::harness::read_trials;
use sysid_bench::{performance_profile, run_benchmark, BenchConfig, BenchError, DatasetSource};

#[derive(Parser)]
#[command(name = "bench", version, about = "Benchmark harness for empirical-Bayes impulse-response estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded Monte Carlo trials and write per-trial and aggregate CSVs.
    Run(RunArgs),
    /// Build a performance profile from a `run` output directory.
    Profile(ProfileArgs),
    /// Estimate an impulse response from one `t,u,y` record.
    Identify(IdentifyArgs),
    /// Write a synthetic record and its ground-truth sidecar.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Kernel presets (dc-m, tcss-m, dc, tc, ss).
    #[arg(long, value_delimiter = ',', required = true)]
    preset: Vec<Preset>,
    /// Dataset presets (D1..D4).
    #[arg(long, value_delimiter = ',', required = true)]
    dataset: Vec<DatasetPreset>,
    /// Solvers (sgp, gp, ascbb).
    #[arg(long, value_delimiter = ',', default_value = "sgp,gp,ascbb")]
    solver: Vec<SolverKind>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Estimated model order.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Solver settings as TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write objective-gap and fit series per instance.
    #[arg(long)]
    traces: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Time,
    Nf,
    It,
}

#[derive(Args)]
struct ProfileArgs {
    /// Directory holding `trials.csv`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "time")]
    metric: Metric,
}

#[derive(Args)]
struct IdentifyArgs {
    /// `t,u,y` CSV; a `.json` sidecar next to it enables the fit score.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    preset: Preset,
    #[arg(long, default_value = "sgp")]
    solver: SolverKind,
    /// Model order; defaults to the sidecar's truth length, else 100.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the iteration trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Dataset preset; `--n-data` and `--snr` override its values.
    #[arg(long, default_value = "D1")]
    dataset: DatasetPreset,
    #[arg(long)]
    n_data: Option<usize>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Cost and failure flag per solver, keyed by (preset, dataset, trial).
type ProblemTable = BTreeMap<(String, String, usize), BTreeMap<String, (f64, bool)>>;

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(String),
    Trials(usize),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<sgp_sysid::Error> for Failure {
    fn from(e: sgp_sysid::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn solver_config(path: Option<&Path>) -> Result<SolverConfig, Failure> {
    Ok(match path {
        Some(p) => SolverConfig::load(p)?,
        None => SolverConfig::default(),
    })
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = BenchConfig::new(
        args.preset,
        args.dataset.into_iter().map(DatasetSource::Preset).collect(),
        args.solver,
    );
    cfg.runs = args.runs;
    cfg.base_seed = args.seed;
    cfg.n_est = args.n;
    cfg.output_dir = Some(args.out);
    cfg.traces = args.traces;
    cfg.solver_config = solver_config(args.config.as_deref())?;
    let report = run_benchmark(&cfg)?;
    println!("preset   dataset solver      fit (sd)         it       nf      t[s]  fail");
    for a in &report.aggregates {
        println!(
            "{:<8} {:<7} {:<6} {:>7.2} ({:>6.2}) {:>8.1} {:>8.1} {:>9.4} {:>5}",
            a.preset, a.dataset, a.solver, a.mean_fit, a.sd_fit, a.mean_it, a.mean_nf, a.mean_t_s, a.failures
        );
    }
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    match report.failures() {
        0 => Ok(()),
        n => Err(Failure::Trials(n)),
    }
}

fn profile(args: ProfileArgs) -> Result<(), Failure> {
    let trials = read_trials(&args.input.join("trials.csv"))?;
    let mut solvers: Vec<String> = Vec::new();
    let mut problems = ProblemTable::new();
    for t in &trials {
        if !solvers.contains(&t.solver) {
            solvers.push(t.solver.clone());
        }
        let cost = match args.metric {
            Metric::Time => t.time_s,
            Metric::Nf => t.function_evals as f64,
            Metric::It => t.iterations.max(1) as f64,
        };
        problems
            .entry((t.preset.clone(), t.dataset.clone(), t.trial))
            .or_default()
            .insert(t.solver.clone(), (cost, t.failed));
    }
    let mut times = Vec::new();
    let mut failures = Vec::new();
    for (key, row) in &problems {
        let mut t = Vec::new();
        let mut f = Vec::new();
        for s in &solvers {
            let (cost, failed) = row
                .get(s)
                .ok_or_else(|| Failure::Config(format!("solver {s} missing for problem {key:?}")))?;
            t.push(*cost);
            f.push(*failed);
        }
        times.push(t);
        failures.push(f);
    }
    let prof = performance_profile(&times, &failures)?;
    prof.write_csv(&solvers, BufWriter::new(File::create(&args.out)?))?;
    eprintln!("wrote {} ({} problems, rho_max {})", args.out.display(), times.len(), prof.rho_max);
    Ok(())
}

fn identify(args: IdentifyArgs) -> Result<(), Failure> {
    let cfg = solver_config(args.config.as_deref())?;
    let truth = if sidecar_path(&args.data).exists() {
        Some(Dataset::load(&args.data)?)
    } else {
        None
    };
    let (u, y) = read_record(&args.data)?;
    let order = args
        .order
        .or(truth.as_ref().map(Dataset::order))
        .unwrap_or(DEFAULT_ORDER);
    let est = estimate(&u, &y, order, args.preset, args.solver, &cfg)?;
    let r = &est.result;
    println!("termination  {}", r.termination);
    println!("iterations   {}", r.iterations);
    println!("f_evals      {}", r.function_evals);
    println!("f            {}", r.f_final);
    println!("nu           {:?}", est.x_hat.nu);
    println!("sigma2       {}", est.x_hat.sigma2);
    if let Some(ds) = truth.filter(|d| d.order() == order) {
        println!("fit          {:.4}", fit_score(est.theta_hat.as_slice(), &ds.theta_true)?);
    }
    println!("theta        {:?}", est.theta_hat.as_slice());
    if let Some(path) = args.trace {
        r.write_trace_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let (n, snr) = args.dataset.size_and_snr();
    let spec = SystemSpec::new(args.n_data.unwrap_or(n), args.snr.unwrap_or(snr), args.order);
    let ds = simulate_dataset(&spec, args.seed)?;
    ds.save(&args.out)?;
    eprintln!("wrote {} and {}", args.out.display(), sidecar_path(&args.out).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Profile(a) => profile(a),
        Command::Identify(a) => identify(a),
        Command::Generate(a) => generate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Trials(n)) => {
            eprintln!("{n} trial(s) failed");
            ExitCode::from(2)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
