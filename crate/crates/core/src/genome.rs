//! Chromosome encoding of a model structure and its variation operators.
//!
//! A chromosome carries one gene per feature. A gene is a [`TermSpec`]
//! whose spline size stays in `[8, 20]` and whose smoothing weight stays in
//! `[0.1, 10]` for the whole search.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gam::{ModelSpec, TermKind, TermSpec};

pub const MIN_SPLINES: usize = 8;
pub const MAX_SPLINES: usize = 20;
pub const MIN_LAMBDA: f64 = 0.1;
pub const MAX_LAMBDA: f64 = 10.0;
/// Sampling probabilities of `none`, `linear`, `spline`.
pub const KIND_PROBABILITIES: [f64; 3] = [0.2, 0.3, 0.5];
pub const CROSSOVER_PROBABILITY: f64 = 0.3;
pub const INITIAL_MUTATION_RATE: f64 = 0.15;
pub const MUTATION_DECAY_GENERATIONS: f64 = 100.0;
pub const MUTATION_RATE_FLOOR: f64 = 0.015;
/// Standard deviation of the log-normal smoothing-weight perturbation.
pub const LAMBDA_LOG_SIGMA: f64 = 0.5;
pub const MAX_KNOT_STEP: i64 = 3;

pub type Gene = TermSpec;

/// True when `gene` is a well-formed term inside the search ranges.
pub fn gene_in_range(gene: &Gene) -> bool {
    if gene.validate().is_err() {
        return false;
    }
    match (gene.n_splines, gene.lambda) {
        (Some(k), Some(l)) => (MIN_SPLINES..=MAX_SPLINES).contains(&k) && (MIN_LAMBDA..=MAX_LAMBDA).contains(&l),
        _ => true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Gene>", into = "Vec<Gene>")]
pub struct Chromosome {
    genes: Vec<Gene>,
    key: String,
}

impl From<Vec<Gene>> for Chromosome {
    fn from(genes: Vec<Gene>) -> Self {
        Self::new(genes)
    }
}

impl From<Chromosome> for Vec<Gene> {
    fn from(c: Chromosome) -> Self {
        c.genes
    }
}

impl Chromosome {
    pub fn new(genes: Vec<Gene>) -> Self {
        let key = canonical_key(&genes);
        Self { genes, key }
    }

    pub fn genes(&self) -> &[Gene] {
        &self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    /// Stable string identity used as the evaluation cache key.
    pub fn canonical_key(&self) -> &str {
        &self.key
    }

    pub fn to_model_spec(&self) -> ModelSpec {
        ModelSpec::new(self.genes.clone())
    }

    pub fn from_model_spec(spec: &ModelSpec) -> Self {
        Self::new(spec.terms.clone())
    }

    pub fn n_active(&self) -> usize {
        self.genes.iter().filter(|g| g.is_active()).count()
    }
}

fn canonical_key(genes: &[Gene]) -> String {
    let mut key = String::with_capacity(genes.len() * 12);
    for (i, g) in genes.iter().enumerate() {
        if i > 0 {
            key.push('|');
        }
        let s = u8::from(g.scale);
        match g.kind {
            TermKind::None => key.push_str(&format!("N{s}")),
            TermKind::Linear => key.push_str(&format!("L{s}")),
            TermKind::Spline => key.push_str(&format!(
                "S{s}:{}:{:.6}",
                g.n_splines.unwrap_or(0),
                g.lambda.unwrap_or(0.0)
            )),
        }
    }
    key
}

/// Kind drawn with the initialization probabilities.
pub fn sample_kind(rng: &mut impl Rng) -> TermKind {
    let u: f64 = rng.random();
    if u < KIND_PROBABILITIES[0] {
        TermKind::None
    } else if u < KIND_PROBABILITIES[0] + KIND_PROBABILITIES[1] {
        TermKind::Linear
    } else {
        TermKind::Spline
    }
}

fn sample_gene_of_kind(kind: TermKind, scale: bool, rng: &mut impl Rng) -> Gene {
    match kind {
        TermKind::Spline => TermSpec::spline(
            rng.random_range(MIN_SPLINES..=MAX_SPLINES),
            rng.random_range(MIN_LAMBDA..=MAX_LAMBDA),
            scale,
        ),
        TermKind::Linear => TermSpec::linear(scale),
        TermKind::None => TermSpec::none(scale),
    }
}

/// One gene of the smart initialization.
pub fn sample_gene(rng: &mut impl Rng) -> Gene {
    let kind = sample_kind(rng);
    let gene = sample_gene_of_kind(kind, false, rng);
    Gene {
        scale: rng.random_bool(0.5),
        ..gene
    }
}

/// Smart initialization: per feature, kind ~ {0.2, 0.3, 0.5}; spline genes
/// get a basis size in `[8, 20]` and a weight in `[0.1, 10]`; scale is a
/// fair coin.
pub fn smart_init(n_features: usize, rng: &mut impl Rng) -> Chromosome {
    Chromosome::new((0..n_features).map(|_| sample_gene(rng)).collect())
}

/// Swaps whole genes position by position with probability `swap_prob`.
pub fn swap_genes(
    a: &Chromosome,
    b: &Chromosome,
    swap_prob: f64,
    rng: &mut impl Rng,
) -> Result<(Chromosome, Chromosome)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut x = a.genes.clone();
    let mut y = b.genes.clone();
    for i in 0..x.len() {
        if rng.random_bool(swap_prob) {
            std::mem::swap(&mut x[i], &mut y[i]);
        }
    }
    Ok((Chromosome::new(x), Chromosome::new(y)))
}

/// With probability `crossover_prob` applies a uniform (p = 0.5) gene swap,
/// otherwise returns clones of the parents.
pub fn uniform_crossover(
    a: &Chromosome,
    b: &Chromosome,
    crossover_prob: f64,
    rng: &mut impl Rng,
) -> Result<(Chromosome, Chromosome)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if rng.random_bool(crossover_prob) {
        swap_genes(a, b, 0.5, rng)
    } else {
        Ok((a.clone(), b.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationAction {
    /// Redraw the kind (and fresh spline settings if it lands on spline).
    Resample,
    /// Shift the basis size by a non-zero step in `[-3, 3]`.
    NudgeSplines,
    /// Multiply the smoothing weight by `exp(N(0, 0.5))`.
    JitterLambda,
    FlipScale,
}

const ACTIONS: [MutationAction; 4] = [
    MutationAction::Resample,
    MutationAction::NudgeSplines,
    MutationAction::JitterLambda,
    MutationAction::FlipScale,
];

fn apply_action(gene: &Gene, action: MutationAction, rng: &mut impl Rng) -> Gene {
    let is_spline = gene.kind == TermKind::Spline;
    match action {
        MutationAction::NudgeSplines if is_spline => {
            let step = loop {
                let s = rng.random_range(-MAX_KNOT_STEP..=MAX_KNOT_STEP);
                if s != 0 {
                    break s;
                }
            };
            let k = gene.n_splines.expect("spline gene") as i64 + step;
            Gene {
                n_splines: Some(k.clamp(MIN_SPLINES as i64, MAX_SPLINES as i64) as usize),
                ..gene.clone()
            }
        }
        MutationAction::JitterLambda if is_spline => {
            let factor = Normal::new(0.0, LAMBDA_LOG_SIGMA)
                .expect("valid sigma")
                .sample(rng)
                .exp();
            let l = gene.lambda.expect("spline gene") * factor;
            Gene {
                lambda: Some(l.clamp(MIN_LAMBDA, MAX_LAMBDA)),
                ..gene.clone()
            }
        }
        MutationAction::FlipScale => Gene {
            scale: !gene.scale,
            ..gene.clone()
        },
        // Resample, and the spline-only actions on non-spline genes
        _ => sample_gene_of_kind(sample_kind(rng), gene.scale, rng),
    }
}

/// Each gene mutates with probability `rate`, applying one uniformly chosen
/// [`MutationAction`].
pub fn mutate(c: &Chromosome, rate: f64, rng: &mut impl Rng) -> Chromosome {
    mutate_with(c, rate, None, rng)
}

/// [`mutate`] with the action optionally pinned.
pub fn mutate_with(
    c: &Chromosome,
    rate: f64,
    action: Option<MutationAction>,
    rng: &mut impl Rng,
) -> Chromosome {
    let rate = rate.clamp(0.0, 1.0);
    let genes = c
        .genes
        .iter()
        .map(|g| {
            if rng.random_bool(rate) {
                let a = action.unwrap_or_else(|| ACTIONS[rng.random_range(0..ACTIONS.len())]);
                apply_action(g, a, rng)
            } else {
                g.clone()
            }
        })
        .collect();
    Chromosome::new(genes)
}

/// Linear decay from 0.15 to zero over 100 generations, floored at 0.015.
pub fn adaptive_rate(generation: usize) -> f64 {
    (INITIAL_MUTATION_RATE * (1.0 - generation as f64 / MUTATION_DECAY_GENERATIONS)).max(MUTATION_RATE_FLOOR)
}
