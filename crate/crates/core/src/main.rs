use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use gagam::dataset::{load_csv, Dataset, DEFAULT_TARGET};
use gagam::experiment::{evolve, partition, run_baselines, write_outcome, Timing, REFERENCE_SEEDS};
use gagam::genome::CROSSOVER_PROBABILITY;
use gagam::nsga2::GenerationStats;
use gagam::report::{emit_tables, read_records, write_json, RunConfig, RunRecord, RESULTS_JSON};
use gagam::Error;

#[derive(Parser)]
#[command(name = "gagam", version, about = "Evolve GAM structures with NSGA-II")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for one seed.
    Evolve(EvolveArgs),
    /// Run the five reference seeds and write both tables.
    Reproduce(ReproduceArgs),
    /// Fit only the baseline GAM and regression tree.
    Baseline(BaselineArgs),
    /// Rebuild the tables from `{out}/{seed}/results.json` files.
    Report(ReportArgs),
    /// Pretty-print a saved chromosome, model or run record.
    Inspect { path: PathBuf },
    /// Print how to export the dataset from scikit-learn.
    ExportHelp,
}

#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = DEFAULT_TARGET)]
    target: String,
    #[arg(long = "test-frac", default_value_t = 0.2)]
    test_frac: f64,
}

#[derive(Args, Clone)]
struct GaArgs {
    #[arg(long, default_value_t = 80)]
    pop: usize,
    #[arg(long, default_value_t = 50)]
    gens: usize,
    #[arg(long, default_value_t = 5)]
    kfolds: usize,
    #[arg(long, env = "GAGGAM_OUT", default_value = "out")]
    out: PathBuf,
    /// Concurrent model fits (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Append one JSON line per generation to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    ga: GaArgs,
}

#[derive(Args)]
struct ReproduceArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ga: GaArgs,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, env = "GAGGAM_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, env = "GAGGAM_OUT", default_value = "out")]
    out: PathBuf,
}

const EXPORT_HELP: &str = "\
The California Housing data can be exported with scikit-learn:

    python -c \"from sklearn.datasets import fetch_california_housing; \\
    fetch_california_housing(as_frame=True).frame.to_csv('california_housing.csv', index=False)\"

The CSV needs a header row, eight numeric feature columns and a MedHouseVal
target column (override with --target).";

fn config(data: &DataArgs, ga: &GaArgs, seed: u64) -> RunConfig {
    RunConfig {
        data: data.data.display().to_string(),
        target: data.target.clone(),
        seed,
        population_size: ga.pop,
        generations: ga.gens,
        k_folds: ga.kfolds,
        test_fraction: data.test_frac,
        crossover_prob: CROSSOVER_PROBABILITY,
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn load(data: &DataArgs) -> Result<Dataset, Error> {
    load_csv(&data.data, &data.target)
}

fn run_one(dataset: &Dataset, cfg: &RunConfig, ga: &GaArgs) -> Result<RunRecord, Error> {
    eprintln!("config {}", serde_json::to_string(cfg)?);
    let mut trace = match &ga.trace {
        Some(p) => Some(fs::File::create(p).map_err(|e| Error::io(p, e))?),
        None => None,
    };
    let mut trace_err = None;
    let observer = |s: &GenerationStats| {
        eprintln!(
            "gen {:>3}  best_rmse {:.4}  best_penalty {:.4}  front {}",
            s.generation, s.best_rmse, s.best_penalty, s.front_size
        );
        if let (Some(f), None) = (trace.as_mut(), &trace_err) {
            let line = serde_json::to_string(s).expect("stats serialize");
            if let Err(e) = writeln!(f, "{line}") {
                trace_err = Some(e);
            }
        }
    };
    let start = Instant::now();
    let outcome = pool(ga.workers)?.install(|| evolve(dataset, cfg, observer))?;
    if let (Some(e), Some(p)) = (trace_err, &ga.trace) {
        return Err(Error::io(p, e));
    }
    write_outcome(&outcome, &ga.out)?;
    let timing = Timing {
        seed: cfg.seed,
        seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&ga.out.join(cfg.seed.to_string()).join("timing.json"), &timing)?;
    let r = &outcome.record;
    eprintln!(
        "seed {}: test rmse best_by_rmse {:.4} knee {:.4} best_by_penalty {:.4} | baseline gam {:.4} cart {:.4} ({:.1}s)",
        r.seed,
        r.best_by_rmse.test_rmse,
        r.knee.test_rmse,
        r.best_by_penalty.test_rmse,
        r.baseline.gam_test_rmse,
        r.baseline.cart_test_rmse,
        timing.seconds
    );
    Ok(outcome.record)
}

fn collect_records(out: &Path) -> Result<Vec<RunRecord>, Error> {
    let mut records = Vec::new();
    let entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(out, e))?.path().join(RESULTS_JSON);
        if path.is_file() {
            let s = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            records.push(serde_json::from_str::<RunRecord>(&s)?);
        }
    }
    records.sort_by_key(|r| {
        let pos = REFERENCE_SEEDS.iter().position(|&s| s == r.seed).unwrap_or(usize::MAX);
        (pos, r.seed)
    });
    Ok(records)
}

fn inspect(path: &Path) -> Result<(), Error> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(records) = read_records(path) {
        for r in &records {
            println!("{}", serde_json::to_string_pretty(r)?);
        }
        return Ok(());
    }
    let value: serde_json::Value = serde_json::from_str(&s)?;
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Evolve(a) => {
            let cfg = config(&a.data, &a.ga, a.seed);
            cfg.ga().validate()?;
            let dataset = load(&a.data)?;
            run_one(&dataset, &cfg, &a.ga)?;
        }
        Command::Reproduce(a) => {
            config(&a.data, &a.ga, 0).ga().validate()?;
            let dataset = load(&a.data)?;
            let mut records = Vec::new();
            for seed in REFERENCE_SEEDS {
                let mut ga = a.ga.clone();
                ga.trace = a.ga.trace.as_ref().map(|p| p.with_extension(format!("{seed}.jsonl")));
                records.push(run_one(&dataset, &config(&a.data, &a.ga, seed), &ga)?);
            }
            emit_tables(&records, &a.ga.out)?;
        }
        Command::Baseline(a) => {
            let dataset = load(&a.data)?;
            let (train, test) = partition(&dataset, a.seed, a.data.test_frac)?;
            let b = run_baselines(&train, &test)?;
            let dir = a.out.join(a.seed.to_string());
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_json(&dir.join("baseline.json"), &b.record)?;
            eprintln!(
                "seed {}: baseline gam rmse {:.4} penalty {:.4} | cart rmse {:.4} ({} leaves)",
                a.seed, b.record.gam_test_rmse, b.record.gam_penalty, b.record.cart_test_rmse, b.record.cart_leaves
            );
        }
        Command::Report(a) => {
            let records = collect_records(&a.out)?;
            emit_tables(&records, &a.out)?;
            eprintln!("wrote tables for {} runs to {}", records.len(), a.out.display());
        }
        Command::Inspect { path } => inspect(&path)?,
        Command::ExportHelp => println!("{EXPORT_HELP}"),
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
