//! Two-objective fitness: k-fold cross-validated RMSE and the complexity
//! penalty of a refit on all train+val rows.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::complexity_penalty;
use crate::dataset::{Dataset, TrainingData};
use crate::error::{Error, Result};
use crate::gam::{fit, fit_point};
use crate::genome::Chromosome;

/// Multiplier on the target range used as the failed-fit RMSE.
pub const FAILED_RMSE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub rmse: f64,
    pub penalty: f64,
    pub valid: bool,
}

impl Objectives {
    pub fn new(rmse: f64, penalty: f64) -> Self {
        Self {
            rmse,
            penalty,
            valid: true,
        }
    }

    /// Worst-case objectives for a structure that could not be fit.
    pub fn failed(target_range: f64) -> Self {
        Self {
            rmse: FAILED_RMSE_FACTOR * target_range,
            penalty: 1.0,
            valid: false,
        }
    }
}

/// Fold assignment over the train+val rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

/// Shuffles `0..n_rows` and deals rows round-robin into `k` folds, so fold
/// sizes differ by at most one. Each fold is returned sorted.
pub fn make_cv_plan(n_rows: usize, k: usize, seed: u64) -> Result<CvPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    if n_rows < k {
        return Err(Error::TooFewRows {
            rows: n_rows,
            required: k,
        });
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(n_rows / k + 1); k];
    for (i, row) in order.into_iter().enumerate() {
        folds[i % k].push(row);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(CvPlan { k, folds, seed })
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::TooFewRows { rows: 0, required: 1 });
    }
    let mse = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64;
    Ok(mse.sqrt())
}

struct Fold {
    train: Dataset,
    held_out: Dataset,
}

fn build_folds(data: &Dataset, plan: &CvPlan) -> Result<Vec<Fold>> {
    let n = data.n_rows();
    let mut owner = vec![usize::MAX; n];
    for (f, rows) in plan.folds.iter().enumerate() {
        for &r in rows {
            if r >= n || owner[r] != usize::MAX {
                return Err(Error::InvalidConfig(
                    "CV plan does not partition the training rows".into(),
                ));
            }
            owner[r] = f;
        }
    }
    if owner.contains(&usize::MAX) {
        return Err(Error::InvalidConfig("CV plan does not cover every row".into()));
    }
    Ok(plan
        .folds
        .iter()
        .enumerate()
        .map(|(f, rows)| {
            let train: Vec<usize> = (0..n).filter(|&r| owner[r] != f).collect();
            Fold {
                train: data.subset(&train),
                held_out: data.subset(rows),
            }
        })
        .collect())
}

fn evaluate_with_folds(c: &Chromosome, data: &Dataset, folds: &[Fold]) -> Objectives {
    let target = data.target();
    let failed = Objectives::failed(target.max() - target.min());
    let spec = c.to_model_spec();
    let mut total = 0.0;
    for fold in folds {
        let score = fit_point(&spec, fold.train.features(), fold.train.target())
            .and_then(|m| m.predict(fold.held_out.features()))
            .and_then(|p: DVector<f64>| rmse(p.as_slice(), fold.held_out.target().as_slice()));
        match score {
            Ok(s) if s.is_finite() => total += s,
            _ => return failed,
        }
    }
    let cv_rmse = total / folds.len() as f64;
    match fit(&spec, data.features(), target) {
        Ok(model) => {
            let penalty = complexity_penalty(&model).penalty;
            if penalty.is_finite() {
                Objectives::new(cv_rmse, penalty)
            } else {
                failed
            }
        }
        Err(_) => failed,
    }
}

/// Scores one chromosome. Any failed fit yields [`Objectives::failed`].
pub fn evaluate(c: &Chromosome, data: &TrainingData, plan: &CvPlan) -> Result<Objectives> {
    let folds = build_folds(data.data(), plan)?;
    Ok(evaluate_with_folds(c, data.data(), &folds))
}

/// Reusable evaluation context: fold subsets are materialized once and
/// results are memoized by canonical key for the lifetime of the value.
pub struct Evaluator {
    data: TrainingData,
    plan: CvPlan,
    folds: Vec<Fold>,
    cache: Mutex<HashMap<String, Objectives>>,
    evaluations: AtomicUsize,
}

impl Evaluator {
    pub fn new(data: TrainingData, plan: CvPlan) -> Result<Self> {
        let folds = build_folds(data.data(), &plan)?;
        Ok(Self {
            data,
            plan,
            folds,
            cache: Mutex::new(HashMap::new()),
            evaluations: AtomicUsize::new(0),
        })
    }

    pub fn data(&self) -> &TrainingData {
        &self.data
    }

    pub fn plan(&self) -> &CvPlan {
        &self.plan
    }

    /// Number of uncached evaluations performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    /// Uncached evaluation.
    pub fn evaluate(&self, c: &Chromosome) -> Objectives {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        evaluate_with_folds(c, self.data.data(), &self.folds)
    }

    /// Evaluates a population in input order. Distinct uncached structures
    /// are evaluated once each, in parallel on the current rayon pool.
    pub fn evaluate_population(&self, pop: &[Chromosome]) -> Vec<Objectives> {
        let pending: Vec<&Chromosome> = {
            let cache = self.cache.lock().expect("cache lock");
            let mut seen = std::collections::HashSet::new();
            pop.iter()
                .filter(|c| !cache.contains_key(c.canonical_key()) && seen.insert(c.canonical_key()))
                .collect()
        };
        let fresh: Vec<Objectives> = pending.par_iter().map(|c| self.evaluate(c)).collect();
        let mut cache = self.cache.lock().expect("cache lock");
        for (c, o) in pending.iter().zip(fresh) {
            cache.insert(c.canonical_key().to_owned(), o);
        }
        pop.iter().map(|c| cache[c.canonical_key()]).collect()
    }
}
