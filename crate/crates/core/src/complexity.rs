//! The interpretability penalty `C = 0.70·U + 0.30·S`.
//!
//! `U` is the mean 95% band width of the active terms, each normalized by
//! the range of the training target and clipped to `[0, 1]`; a term whose
//! band is not usable counts as 1. `S` is the fraction of features with an
//! active term. The intercept is not a term.

use serde::{Deserialize, Serialize};

use crate::gam::{CiWidth, FittedGam};

pub const UNCERTAINTY_WEIGHT: f64 = 0.70;
pub const SPARSITY_WEIGHT: f64 = 0.30;
/// Floor on the target range in the width normalization.
pub const RANGE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityScore {
    pub penalty: f64,
    pub uncertainty: f64,
    pub sparsity: f64,
    pub n_active: usize,
}

impl ComplexityScore {
    pub fn from_parts(uncertainty: f64, sparsity: f64, n_active: usize) -> Self {
        Self {
            penalty: combine(uncertainty, sparsity),
            uncertainty,
            sparsity,
            n_active,
        }
    }
}

/// `0.70·u + 0.30·s`.
#[inline]
pub fn combine(uncertainty: f64, sparsity: f64) -> f64 {
    UNCERTAINTY_WEIGHT * uncertainty + SPARSITY_WEIGHT * sparsity
}

/// Normalized width of a single term, in `[0, 1]`.
pub fn normalized_width(width: CiWidth, target_range: f64) -> f64 {
    match width {
        CiWidth::Valid(w) if w.is_finite() => (w / target_range.max(RANGE_EPS)).clamp(0.0, 1.0),
        _ => 1.0,
    }
}

/// Mean of the per-term normalized widths; 0 for the empty model.
pub fn uncertainty_from_widths(widths: &[CiWidth], target_range: f64) -> f64 {
    if widths.is_empty() {
        return 0.0;
    }
    widths
        .iter()
        .map(|&w| normalized_width(w, target_range))
        .sum::<f64>()
        / widths.len() as f64
}

pub fn uncertainty_score(model: &FittedGam) -> f64 {
    let widths: Vec<CiWidth> = model
        .layout()
        .terms
        .iter()
        .map(|t| model.term_ci_width(t.feature).unwrap_or(CiWidth::Invalid))
        .collect();
    uncertainty_from_widths(&widths, model.train_target_range())
}

/// `min(n_active, n_features) / n_features`.
pub fn sparsity_score(n_active: usize, n_features: usize) -> f64 {
    assert!(n_features >= 1, "sparsity needs at least one feature");
    n_active.min(n_features) as f64 / n_features as f64
}

pub fn complexity_penalty(model: &FittedGam) -> ComplexityScore {
    let n_active = model.n_active();
    ComplexityScore::from_parts(
        uncertainty_score(model),
        sparsity_score(n_active, model.n_features()),
        n_active,
    )
}
