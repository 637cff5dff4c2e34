//! End-to-end runs: split, evolve, pick representatives, refit, score on
//! the held-out rows, fit baselines, write artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_gam_spec, fit_cart, CartParams, CartTree};
use crate::complexity::complexity_penalty;
use crate::dataset::{make_split, Dataset, TestData, TrainingData};
use crate::error::Result;
use crate::evaluation::{make_cv_plan, Evaluator};
use crate::gam::{fit, FittedGam};
use crate::nsga2::{self, GaConfig, GenerationStats, Individual, RunResult};
use crate::pareto::{select_representatives, FrontSelection};
use crate::report::{
    emit_pareto_plot, emit_partial_dependence_plot, score_on_test, write_json, BaselineRecord, FrontPoint,
    ModelRecord, RunConfig, RunRecord, RESULTS_JSON,
};

/// Seeds run by `reproduce`.
pub const REFERENCE_SEEDS: [u64; 5] = [42, 7, 123, 225, 729];

const SPLIT_STREAM: u64 = 1;
const FOLD_STREAM: u64 = 2;

/// Independent seed for one use of the run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl RunConfig {
    pub fn ga(&self) -> GaConfig {
        GaConfig {
            population_size: self.population_size,
            generations: self.generations,
            crossover_prob: self.crossover_prob,
            k_folds: self.k_folds,
            seed: self.seed,
        }
    }
}

/// Train+val and test partitions for a seed.
pub fn partition(data: &Dataset, seed: u64, test_fraction: f64) -> Result<(TrainingData, TestData)> {
    let split = make_split(data.n_rows(), test_fraction, derive_seed(seed, SPLIT_STREAM))?;
    data.partition(&split)
}

/// Baseline models refit on train+val and scored on test.
pub struct Baselines {
    pub gam: FittedGam,
    pub cart: CartTree,
    pub record: BaselineRecord,
}

pub fn run_baselines(train: &TrainingData, test: &TestData) -> Result<Baselines> {
    let d = train.data();
    let gam = fit(&baseline_gam_spec(d.n_features()), d.features(), d.target())?;
    let cart = fit_cart(d.features(), d.target(), CartParams::default())?;
    let record = BaselineRecord {
        gam_test_rmse: score_on_test(&gam, train, test)?,
        gam_penalty: complexity_penalty(&gam).penalty,
        cart_test_rmse: score_on_test(&cart, train, test)?,
        cart_leaves: cart.n_leaves(),
        cart_depth: cart.depth(),
    };
    Ok(Baselines { gam, cart, record })
}

fn model_record(ind: &Individual, train: &TrainingData, test: &TestData) -> Result<(ModelRecord, FittedGam)> {
    let d = train.data();
    let model = fit(&ind.chromosome.to_model_spec(), d.features(), d.target())?;
    let record = ModelRecord {
        chromosome: ind.chromosome.clone(),
        key: ind.chromosome.canonical_key().to_owned(),
        cv: ind.objectives,
        test_rmse: score_on_test(&model, train, test)?,
        penalty: complexity_penalty(&model).penalty,
    };
    Ok((record, model))
}

pub struct Outcome {
    pub record: RunRecord,
    pub run: RunResult,
    pub selection: FrontSelection,
    pub knee_model: FittedGam,
    pub baselines: Baselines,
}

/// Runs the whole pipeline for one seed. Evaluation uses the current rayon
/// pool; wrap the call in `ThreadPool::install` to bound workers.
pub fn evolve(data: &Dataset, config: &RunConfig, observer: impl FnMut(&GenerationStats)) -> Result<Outcome> {
    let ga = config.ga();
    ga.validate()?;
    let (train, test) = partition(data, config.seed, config.test_fraction)?;
    let plan = make_cv_plan(train.data().n_rows(), config.k_folds, derive_seed(config.seed, FOLD_STREAM))?;
    let evaluator = Evaluator::new(train.clone(), plan)?;
    let run = nsga2::run(&ga, &evaluator, observer)?;
    let selection = select_representatives(&run.first_front)?;

    let (knee, knee_model) = model_record(&selection.knee, &train, &test)?;
    let (best_by_rmse, _) = model_record(&selection.best_by_rmse, &train, &test)?;
    let (best_by_penalty, _) = model_record(&selection.best_by_penalty, &train, &test)?;
    let baselines = run_baselines(&train, &test)?;

    let mut front: Vec<FrontPoint> = run
        .first_front
        .iter()
        .map(|i| FrontPoint {
            key: i.chromosome.canonical_key().to_owned(),
            rmse: i.objectives.rmse,
            penalty: i.objectives.penalty,
        })
        .collect();
    front.sort_by(|a, b| a.penalty.total_cmp(&b.penalty).then(a.rmse.total_cmp(&b.rmse)));

    let record = RunRecord {
        seed: config.seed,
        config: config.clone(),
        feature_names: data.feature_names().to_vec(),
        n_train: train.rows().len(),
        n_test: test.rows().len(),
        knee,
        best_by_rmse,
        best_by_penalty,
        baseline: baselines.record.clone(),
        front,
        evaluations: evaluator.evaluations(),
    };
    Ok(Outcome {
        record,
        run,
        selection,
        knee_model,
        baselines,
    })
}

/// Writes `{out}/{seed}/results.json`, `pareto.svg`, `pd_{feature}.svg`
/// for the knee model and `baseline_pd_{feature}.svg`.
pub fn write_outcome(outcome: &Outcome, out_dir: &Path) -> Result<()> {
    let seed = outcome.record.seed;
    let dir = out_dir.join(seed.to_string());
    std::fs::create_dir_all(&dir).map_err(|e| crate::Error::io(&dir, e))?;
    write_json(&dir.join(RESULTS_JSON), &outcome.record)?;
    emit_pareto_plot(
        &outcome.run.first_front,
        &outcome.selection,
        &format!("Pareto front, seed {seed}"),
        &dir.join("pareto.svg"),
    )?;
    for (j, name) in outcome.record.feature_names.iter().enumerate() {
        emit_partial_dependence_plot(
            &outcome.knee_model,
            j,
            name,
            &format!("Knee model: {name}, seed {seed}"),
            &dir.join(format!("pd_{name}.svg")),
        )?;
        emit_partial_dependence_plot(
            &outcome.baselines.gam,
            j,
            name,
            &format!("Baseline GAM: {name}, seed {seed}"),
            &dir.join(format!("baseline_pd_{name}.svg")),
        )?;
    }
    Ok(())
}

/// Per-run wall-clock, kept apart from `results.json` so that file depends
/// only on the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seed: u64,
    pub seconds: f64,
}
