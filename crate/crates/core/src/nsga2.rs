//! NSGA-II over model-structure chromosomes: Pareto ranking, crowding,
//! binary crowded tournaments and (μ+λ) environmental selection.
//!
//! All randomness of generation `g` comes from one ChaCha8 stream
//! (`seed`, stream `g`), consumed on the calling thread. Only evaluation
//! fans out across workers, and results are gathered by slot, so the
//! outcome does not depend on the worker count.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Evaluator, Objectives};
use crate::genome::{adaptive_rate, mutate, smart_init, uniform_crossover, Chromosome, CROSSOVER_PROBABILITY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub chromosome: Chromosome,
    pub objectives: Objectives,
    /// Pareto rank, 0 for the first front.
    pub rank: usize,
    #[serde(with = "crowding_serde")]
    pub crowding: f64,
}

impl Individual {
    pub fn new(chromosome: Chromosome, objectives: Objectives) -> Self {
        Self {
            chromosome,
            objectives,
            rank: usize::MAX,
            crowding: 0.0,
        }
    }
}

// JSON has no infinity; boundary points serialize as null.
mod crowding_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub k_folds: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 80,
            generations: 50,
            crossover_prob: CROSSOVER_PROBABILITY,
            k_folds: 5,
            seed: 42,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "population must be even and at least 4, got {}",
                self.population_size
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(Error::InvalidConfig(format!(
                "crossover probability {} not in [0, 1]",
                self.crossover_prob
            )));
        }
        if self.k_folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 folds, got {}",
                self.k_folds
            )));
        }
        Ok(())
    }
}

/// Pareto dominance for minimization of both objectives.
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a.rmse <= b.rmse && a.penalty <= b.penalty && (a.rmse < b.rmse || a.penalty < b.penalty)
}

/// Fast non-dominated sort. Returns fronts of indices, first front first;
/// indices within a front are ascending.
pub fn fast_nondominated_sort(objs: &[Objectives]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&objs[i], &objs[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&objs[j], &objs[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of one front. Extreme points of either
/// objective get infinity; interior points sum the normalized gap between
/// their neighbours per objective. Equal objective values keep input order.
/// A repeat of an earlier objective pair gets 0, so copies never displace a
/// distinct point during truncation.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let mut dist = vec![0.0; front.len()];
    let mut unique: Vec<usize> = Vec::with_capacity(front.len());
    for (i, o) in front.iter().enumerate() {
        if !unique.iter().any(|&u| front[u].rmse == o.rmse && front[u].penalty == o.penalty) {
            unique.push(i);
        }
    }
    let n = unique.len();
    if n <= 2 {
        for &i in &unique {
            dist[i] = f64::INFINITY;
        }
        return dist;
    }
    let getters: [fn(&Objectives) -> f64; 2] = [|o| o.rmse, |o| o.penalty];
    for get in getters {
        let mut order = unique.clone();
        order.sort_by(|&a, &b| get(&front[a]).total_cmp(&get(&front[b])));
        let lo = get(&front[order[0]]);
        let hi = get(&front[order[n - 1]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            dist[w[1]] += (get(&front[w[2]]) - get(&front[w[0]])) / span;
        }
    }
    dist
}

/// Writes rank and crowding into `pop` and returns the fronts.
pub fn assign_rank_and_crowding(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let objs: Vec<Objectives> = pop.iter().map(|i| i.objectives).collect();
    let fronts = fast_nondominated_sort(&objs);
    for (rank, front) in fronts.iter().enumerate() {
        let members: Vec<Objectives> = front.iter().map(|&i| objs[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&members)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    fronts
}

/// Crowded comparison: lower rank first, then larger crowding.
pub fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.total_cmp(&a.crowding))
}

/// Binary tournament by crowded comparison; ties go to a fair coin.
pub fn tournament_select<'a>(pop: &'a [Individual], rng: &mut impl Rng) -> &'a Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    match crowded_cmp(a, b) {
        Ordering::Less => a,
        Ordering::Greater => b,
        Ordering::Equal => {
            if rng.random_bool(0.5) {
                a
            } else {
                b
            }
        }
    }
}

/// Ranks `combined` in place and returns the indices of the `n` survivors:
/// whole fronts while they fit, then the most crowded-distant members of
/// the front that does not.
pub fn select_survivors(combined: &mut [Individual], n: usize) -> Vec<usize> {
    let fronts = assign_rank_and_crowding(combined);
    let mut survivors = Vec::with_capacity(n);
    for front in fronts {
        if survivors.len() + front.len() <= n {
            survivors.extend(front);
            continue;
        }
        let mut cut = front;
        cut.sort_by(|&a, &b| combined[b].crowding.total_cmp(&combined[a].crowding));
        survivors.extend(cut.into_iter().take(n - survivors.len()));
        break;
    }
    survivors
}

/// Summary of the population after one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_rmse: f64,
    pub best_penalty: f64,
    pub front_size: usize,
    /// `(rmse, penalty)` of the distinct first-front structures.
    pub front: Vec<(f64, f64)>,
    pub mutation_rate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub population: Vec<Individual>,
    /// First front of the final population, one entry per structure.
    pub first_front: Vec<Individual>,
    pub history: Vec<GenerationStats>,
}

/// First-front members with duplicate structures removed (first kept).
pub fn distinct_first_front(pop: &[Individual]) -> Vec<Individual> {
    let mut seen = HashSet::new();
    pop.iter()
        .filter(|i| i.rank == 0 && seen.insert(i.chromosome.canonical_key().to_owned()))
        .cloned()
        .collect()
}

fn stats(pop: &[Individual], generation: usize, rate: f64, evaluations: usize) -> GenerationStats {
    let front = distinct_first_front(pop);
    GenerationStats {
        generation,
        best_rmse: pop.iter().map(|i| i.objectives.rmse).fold(f64::INFINITY, f64::min),
        best_penalty: pop.iter().map(|i| i.objectives.penalty).fold(f64::INFINITY, f64::min),
        front_size: front.len(),
        front: front.iter().map(|i| (i.objectives.rmse, i.objectives.penalty)).collect(),
        mutation_rate: rate,
        evaluations,
    }
}

fn generation_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs NSGA-II. `observer` sees the initial population (generation 0) and
/// every following generation.
pub fn run(
    config: &GaConfig,
    evaluator: &Evaluator,
    mut observer: impl FnMut(&GenerationStats),
) -> Result<RunResult> {
    config.validate()?;
    let n = config.population_size;
    let n_features = evaluator.data().data().n_features();

    let mut rng = generation_rng(config.seed, 0);
    let chromosomes: Vec<Chromosome> = (0..n).map(|_| smart_init(n_features, &mut rng)).collect();
    let objectives = evaluator.evaluate_population(&chromosomes);
    let mut pop: Vec<Individual> = chromosomes
        .into_iter()
        .zip(objectives)
        .map(|(c, o)| Individual::new(c, o))
        .collect();
    assign_rank_and_crowding(&mut pop);
    let mut history = vec![stats(&pop, 0, adaptive_rate(0), evaluator.evaluations())];
    observer(&history[0]);

    for g in 0..config.generations {
        let rate = adaptive_rate(g);
        let mut rng = generation_rng(config.seed, g as u64 + 1);
        let mut children = Vec::with_capacity(n);
        while children.len() < n {
            let a = tournament_select(&pop, &mut rng);
            let b = tournament_select(&pop, &mut rng);
            let (x, y) = uniform_crossover(&a.chromosome, &b.chromosome, config.crossover_prob, &mut rng)?;
            children.push(mutate(&x, rate, &mut rng));
            children.push(mutate(&y, rate, &mut rng));
        }
        let objectives = evaluator.evaluate_population(&children);
        let mut combined = pop;
        combined.extend(children.into_iter().zip(objectives).map(|(c, o)| Individual::new(c, o)));
        let keep = select_survivors(&mut combined, n);
        let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
        pop = keep.into_iter().map(|i| slots[i].take().expect("unique index")).collect();
        assign_rank_and_crowding(&mut pop);

        let s = stats(&pop, g + 1, rate, evaluator.evaluations());
        observer(&s);
        history.push(s);
    }

    Ok(RunResult {
        first_front: distinct_first_front(&pop),
        population: pop,
        history,
    })
}
