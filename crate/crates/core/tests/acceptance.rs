//! Acceptance criteria, one line per criterion.
//!
//! Criteria 8 to 10 need five full-size runs on the California Housing
//! data and only execute with `cargo test --test acceptance -- --ignored`
//! (or `--include-ignored`); otherwise they are reported as skipped.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gagam::complexity::{combine, complexity_penalty, sparsity_score, ComplexityScore};
use gagam::dataset::{load_csv, Dataset};
use gagam::evaluation::{make_cv_plan, Evaluator, Objectives};
use gagam::experiment::{evolve, REFERENCE_SEEDS};
use gagam::gam::{fit, ModelSpec, TermKind, TermSpec, GRID_SIZE};
use gagam::genome::{smart_init, CROSSOVER_PROBABILITY};
use gagam::nsga2::{self, crowding_distance, dominates, fast_nondominated_sort, GaConfig, GenerationStats};
use gagam::report::{emit_tables, write_json, RunConfig, RunRecord, RESULTS_JSON};
use gagam::splines::build_basis;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Reference test RMSE of the all-spline baseline per seed.
const BASELINE_RMSE: [(u64, f64); 5] = [(42, 0.7216), (7, 0.6674), (123, 0.6697), (225, 0.6536), (729, 0.6520)];
const BASELINE_RMSE_TOL: f64 = 0.06;
const BASELINE_PENALTY_BAND: (f64, f64) = (0.35, 0.52);
const RMSE_MARGIN: f64 = 0.01;
const MIN_PENALTY: f64 = 0.10;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn check(id: &str, name: &str, budget: Option<f64>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let secs = start.elapsed().as_secs_f64();
    let in_time = budget.is_none_or(|b| secs < b);
    let pass = v.pass && in_time;
    let budget = budget.map(|b| format!(" < {b:.0}s")).unwrap_or_default();
    println!(
        "criterion {id:>2} {}: {name}: {} [{secs:.1}s{budget}]",
        if pass { "PASS" } else { "FAIL" },
        v.detail
    );
    pass
}

fn skip(id: &str, name: &str) {
    println!("criterion {id:>2} SKIP: {name}: full-scale run, pass --ignored to execute");
}

fn spline_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut unity: f64 = 0.0;
    let mut oracle: f64 = 0.0;
    for n_basis in [4, 8, 12, 20] {
        let values: Vec<f64> = (0..400).map(|_| rng.random::<f64>().powi(2) * 10.0).collect();
        let basis = build_basis(&values, n_basis).unwrap();
        let (lo, hi) = basis.domain();
        let xs: Vec<f64> = (0..1000).map(|_| rng.random_range(lo..=hi)).collect();
        let m = basis.evaluate(&xs);
        for r in 0..m.nrows() {
            unity = unity.max((m.row(r).sum() - 1.0).abs());
        }
        for &x in &xs[..10] {
            let row = basis.evaluate(&[x]);
            for i in 0..n_basis {
                oracle = oracle.max((row[(0, i)] - common::bspline(basis.knots(), i, x)).abs());
            }
        }
    }
    verdict(
        unity < 1e-10 && oracle < 1e-9,
        format!("partition of unity {unity:.1e} < 1e-10, divided differences {oracle:.1e} < 1e-9"),
    )
}

fn fit_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut worst_rel: f64 = 0.0;
    for _ in 0..20 {
        let p = rng.random_range(1..=4);
        let x = DMatrix::from_fn(50, p, |_, _| rng.random_range(-3.0f64..3.0));
        let w: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0f64..2.0)).collect();
        let y = DVector::from_fn(50, |r, _| 1.0 + (0..p).map(|j| w[j] * x[(r, j)]).sum::<f64>() + noise.sample(&mut rng));
        let m = fit(&ModelSpec::new(vec![TermSpec::linear(false); p]), &x, &y).unwrap();
        let want = common::ols(&x, &y);
        worst_rel = worst_rel.max((m.beta() - &want).norm() / want.norm());
    }

    let x = DMatrix::from_fn(200, 1, |_, _| rng.random::<f64>() * 4.0);
    let y = DVector::from_fn(200, |r, _| 3.0 * x[(r, 0)] + 0.3 * noise.sample(&mut rng));
    let m = fit(&ModelSpec::new(vec![TermSpec::spline(12, 1e9, false)]), &x, &y).unwrap();
    let pd = m.partial_dependence(0, GRID_SIZE).unwrap();
    let (g0, g1) = (pd.grid[0], pd.grid[GRID_SIZE - 1]);
    let (e0, e1) = (pd.effect[0], pd.effect[GRID_SIZE - 1]);
    let bend = pd
        .grid
        .iter()
        .zip(&pd.effect)
        .map(|(g, e)| (e - (e0 + (e1 - e0) * (g - g0) / (g1 - g0))).abs())
        .fold(0.0, f64::max);
    verdict(
        worst_rel < 1e-8 && bend < 1e-3,
        format!("OLS relative error {worst_rel:.1e} < 1e-8, large-λ deviation from a line {bend:.1e} < 1e-3"),
    )
}

fn penalty_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (u, s) = (rng.random::<f64>(), rng.random::<f64>());
        let c = ComplexityScore::from_parts(u, s, 0).penalty;
        worst = worst.max((c - (0.70 * u + 0.30 * s)).abs()).max((combine(u, s) - c).abs());
    }
    let sparsity_exact = (0..=8).all(|k| sparsity_score(k, 8) == k as f64 / 8.0);

    let x = DMatrix::from_fn(120, 4, |_, _| rng.random_range(-1.0f64..1.0));
    let mut in_range = true;
    for _ in 0..60 {
        let y = DVector::from_fn(120, |r, _| x[(r, 0)] * rng.random_range(-5.0f64..5.0) + rng.random::<f64>());
        let c = smart_init(4, &mut rng);
        if let Ok(m) = fit(&c.to_model_spec(), &x, &y) {
            let p = complexity_penalty(&m).penalty;
            in_range &= (0.0..=1.0).contains(&p);
        }
    }
    verdict(
        worst < 1e-12 && sparsity_exact && in_range,
        format!("0.70U+0.30S error {worst:.1e} < 1e-12, sparsity exact {sparsity_exact}, C in [0,1] {in_range}"),
    )
}

fn nsga2_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(0..=64);
        let levels = rng.random_range(2..=10);
        let objs: Vec<Objectives> = (0..n)
            .map(|_| Objectives::new(rng.random_range(0..levels) as f64, rng.random_range(0..levels) as f64))
            .collect();
        if fast_nondominated_sort(&objs) != common::peel(&objs) {
            mismatches += 1;
        }
    }

    let o = Objectives::new;
    let hand = crowding_distance(&[o(1.0, 1.0)]) == vec![f64::INFINITY]
        && crowding_distance(&[o(1.0, 2.0), o(2.0, 1.0)]) == vec![f64::INFINITY; 2]
        && crowding_distance(&[o(0.0, 2.0), o(1.0, 1.0), o(2.0, 0.0)])[1] == 2.0;

    let x = DMatrix::from_fn(200, 4, |_, _| rng.random_range(-1.0f64..1.0));
    let y = DVector::from_fn(200, |r, _| (3.0 * x[(r, 0)]).sin() + 0.5 * x[(r, 1)] + 0.1 * rng.random::<f64>());
    let data = gagam::dataset::TrainingData::whole(Dataset::from_columns(x, y).unwrap());
    let evaluator = Evaluator::new(data, make_cv_plan(200, 3, 1).unwrap()).unwrap();
    let config = GaConfig {
        population_size: 12,
        generations: 10,
        k_folds: 3,
        seed: 104,
        ..GaConfig::default()
    };
    let mut history: Vec<GenerationStats> = Vec::new();
    let run = nsga2::run(&config, &evaluator, |s| history.push(s.clone())).unwrap();
    let elitism = history.windows(2).all(|w| elitist(&w[0], &w[1], config.population_size));
    let truncation = run.population.len() == config.population_size
        && run
            .first_front
            .iter()
            .all(|i| !run.population.iter().any(|p| dominates(&p.objectives, &i.objectives)));
    verdict(
        mismatches == 0 && hand && elitism && truncation,
        format!("peeling mismatches {mismatches}/200, crowding hand cases {hand}, elitism {elitism}, truncation {truncation}"),
    )
}

fn point_dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    dominates(&Objectives::new(a.0, a.1), &Objectives::new(b.0, b.1))
}

/// No earlier front point beats a new one, and while distinct pairs fit in
/// the population no earlier pair disappears without being dominated.
fn elitist(before: &GenerationStats, after: &GenerationStats, n: usize) -> bool {
    let not_beaten = after
        .front
        .iter()
        .all(|&new| !before.front.iter().any(|&old| point_dominates(old, new)));
    let mut distinct = after.front.clone();
    distinct.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    distinct.dedup();
    let kept = distinct.len() >= n
        || before
            .front
            .iter()
            .all(|&old| after.front.contains(&old) || after.front.iter().any(|&new| point_dominates(new, old)));
    not_beaten && kept
}

fn toy_csv(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut s = String::from("a,b,c,d,MedHouseVal\n");
    for _ in 0..240 {
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (3.0 * v[0]).sin() + v[1] * v[2] + 0.1 * rng.random::<f64>();
        s.push_str(&format!("{},{},{},{},{}\n", v[0], v[1], v[2], v[3], y));
    }
    fs::write(path, s).unwrap();
}

fn run_cli(data: &Path, out: &Path, workers: usize) -> bool {
    Command::new(env!("CARGO_BIN_EXE_gagam"))
        .args(["evolve", "--seed", "5", "--pop", "8", "--gens", "3", "--kfolds", "3"])
        .arg("--data")
        .arg(data)
        .arg("--out")
        .arg(out)
        .args(["--workers", &workers.to_string()])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// Every file of `{out}/5` except the wall-clock record, sorted by name.
fn artifacts(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(out.join("5"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().is_some_and(|n| n != "timing.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(records: &mut Vec<RunRecord>) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    toy_csv(&data);
    let outs: Vec<PathBuf> = ["w1", "w8", "w1again"].iter().map(|d| dir.path().join(d)).collect();
    let ran = run_cli(&data, &outs[0], 1) && run_cli(&data, &outs[1], 8) && run_cli(&data, &outs[2], 1);
    if !ran {
        return verdict(false, "gagam evolve failed");
    }
    let a = artifacts(&outs[0]);
    let same = a == artifacts(&outs[1]) && a == artifacts(&outs[2]);
    let svgs = a.iter().filter(|(n, _)| n.ends_with(".svg")).count();
    let has_json = a.iter().any(|(n, _)| n == RESULTS_JSON);
    if let Ok(s) = fs::read_to_string(outs[0].join("5").join(RESULTS_JSON)) {
        records.extend(serde_json::from_str::<RunRecord>(&s));
    }
    verdict(
        same && has_json && svgs > 0,
        format!("results.json and {svgs} SVGs byte-identical across --workers 1, 8 and a repeat: {same}"),
    )
}

const NOISE_SD: f64 = 0.3;

/// `y = sin(4x₁) + 0.5x₂ + noise` with four decoy features.
fn recovery_data() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let noise = Normal::new(0.0, NOISE_SD).unwrap();
    let x = DMatrix::from_fn(600, 6, |_, _| rng.random_range(-1.0f64..1.0));
    let y = DVector::from_fn(600, |r, _| (4.0 * x[(r, 0)]).sin() + 0.5 * x[(r, 1)] + noise.sample(&mut rng));
    Dataset::from_columns(x, y).unwrap()
}

fn toy_config(seed: u64, population_size: usize, generations: usize) -> RunConfig {
    RunConfig {
        data: "toy".into(),
        target: "y".into(),
        seed,
        population_size,
        generations,
        k_folds: 3,
        test_fraction: 0.2,
        crossover_prob: CROSSOVER_PROBABILITY,
    }
}

fn toy_recovery(records: &mut Vec<RunRecord>) -> Verdict {
    let sd = NOISE_SD;
    let outcome = evolve(&recovery_data(), &toy_config(106, 24, 15), |_| {}).unwrap();
    let r = &outcome.record;
    let genes = r.best_by_rmse.chromosome.genes();
    let x1_spline = genes[0].kind == TermKind::Spline;
    let x2_active = genes[1].kind != TermKind::None;
    let rel = (r.best_by_rmse.cv.rmse - sd).abs() / sd;
    let active = r.best_by_penalty.chromosome.n_active();
    let sparsity = sparsity_score(active, 6);
    records.push(r.clone());
    verdict(
        x1_spline && x2_active && rel <= 0.15 && sparsity <= 0.5,
        format!(
            "best_by_rmse {} (x1 spline {x1_spline}, x2 active {x2_active}), CV RMSE {:.4} is {:.1}% from noise sd {sd} (<= 15%), best_by_penalty S = {sparsity:.3} <= 0.5",
            r.best_by_rmse.key,
            r.best_by_rmse.cv.rmse,
            100.0 * rel
        ),
    )
}

fn ordered(r: &RunRecord) -> bool {
    let (p, k, b) = (&r.best_by_penalty.cv, &r.knee.cv, &r.best_by_rmse.cv);
    p.penalty <= k.penalty && k.penalty <= b.penalty && b.rmse <= k.rmse && k.rmse <= p.rmse
}

fn ordering(records: &mut Vec<RunRecord>) -> Verdict {
    let data = recovery_data();
    for seed in 1..=4 {
        records.push(evolve(&data, &toy_config(seed, 12, 6), |_| {}).unwrap().record);
    }
    let good = records.iter().filter(|r| ordered(r)).count();
    verdict(
        !records.is_empty() && good == records.len(),
        format!("penalty and mirrored RMSE ordering of the representatives holds on {good}/{} runs", records.len()),
    )
}

fn full_scale_runs() -> Vec<RunRecord> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let data = load_csv(root.join("data/california_housing.csv"), "MedHouseVal").unwrap();
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("full");
    let mut records = Vec::new();
    for seed in REFERENCE_SEEDS {
        let config = RunConfig {
            data: "data/california_housing.csv".into(),
            target: "MedHouseVal".into(),
            seed,
            population_size: 80,
            generations: 50,
            k_folds: 5,
            test_fraction: 0.2,
            crossover_prob: CROSSOVER_PROBABILITY,
        };
        let outcome = evolve(&data, &config, |_| {}).unwrap();
        let dir = out.join(seed.to_string());
        fs::create_dir_all(&dir).unwrap();
        write_json(&dir.join(RESULTS_JSON), &outcome.record).unwrap();
        records.push(outcome.record);
    }
    emit_tables(&records, &out).unwrap();
    println!("full-scale records written to {}", out.display());
    records
}

fn baseline_bands(records: &[RunRecord]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in records {
        let want = BASELINE_RMSE.iter().find(|(s, _)| *s == r.seed).map(|p| p.1).unwrap();
        let b = &r.baseline;
        let rmse_ok = (b.gam_test_rmse - want).abs() <= BASELINE_RMSE_TOL;
        let pen_ok = (BASELINE_PENALTY_BAND.0..=BASELINE_PENALTY_BAND.1).contains(&b.gam_penalty);
        pass &= rmse_ok && pen_ok;
        parts.push(format!(
            "seed {} rmse {:.4} vs {want}±{BASELINE_RMSE_TOL} {}, penalty {:.4} {}",
            r.seed,
            b.gam_test_rmse,
            if rmse_ok { "ok" } else { "out" },
            b.gam_penalty,
            if pen_ok { "ok" } else { "out" }
        ));
    }
    verdict(pass, parts.join("; "))
}

fn ga_beats_baseline(records: &[RunRecord]) -> Verdict {
    let wins = records
        .iter()
        .filter(|r| r.best_by_rmse.test_rmse <= r.baseline.gam_test_rmse + RMSE_MARGIN)
        .count();
    let parts: Vec<String> = records
        .iter()
        .map(|r| format!("{}: {:.4} vs {:.4}", r.seed, r.best_by_rmse.test_rmse, r.baseline.gam_test_rmse))
        .collect();
    verdict(
        wins >= 4,
        format!("best_by_rmse within baseline + {RMSE_MARGIN} on {wins}/5 seeds (>= 4); {}", parts.join(", ")),
    )
}

fn min_penalty(records: &[RunRecord]) -> Verdict {
    let parts: Vec<String> = records
        .iter()
        .map(|r| format!("{}: {:.4} ({})", r.seed, r.best_by_penalty.penalty, r.best_by_penalty.key))
        .collect();
    verdict(
        records.iter().all(|r| r.best_by_penalty.penalty < MIN_PENALTY),
        format!("best_by_penalty penalty < {MIN_PENALTY} on every seed; {}", parts.join(", ")),
    )
}

fn main() {
    let long = std::env::args().any(|a| a == "--ignored" || a == "--include-ignored");
    let mut ok = true;
    let mut records = Vec::new();

    ok &= check("1", "spline correctness", Some(5.0), spline_correctness);
    ok &= check("2", "fit oracle", Some(10.0), fit_oracle);
    ok &= check("3", "penalty algebra", None, penalty_algebra);
    ok &= check("4", "NSGA-II equivalence", Some(20.0), nsga2_equivalence);
    ok &= check("5", "determinism", None, || determinism(&mut records));
    ok &= check("6", "toy recovery", None, || toy_recovery(&mut records));

    let names = ["baseline bands", "GA best_by_rmse vs baseline", "best_by_penalty below 0.10"];
    if long {
        let full = full_scale_runs();
        records.extend(full.iter().cloned());
        ok &= check("7", "ordering", None, || ordering(&mut records));
        ok &= check("8", names[0], None, || baseline_bands(&full));
        ok &= check("9", names[1], None, || ga_beats_baseline(&full));
        ok &= check("10", names[2], None, || min_penalty(&full));
    } else {
        ok &= check("7", "ordering", None, || ordering(&mut records));
        for (id, name) in ["8", "9", "10"].iter().zip(names) {
            skip(id, name);
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
