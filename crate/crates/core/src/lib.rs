//! Evolutionary structure search for generalized additive models.
//!
//! A chromosome assigns every feature a term (inactive, linear, or a
//! penalized cubic spline). NSGA-II evolves a population of chromosomes
//! against two objectives: k-fold cross-validated RMSE and an
//! interpretability penalty built from confidence-band width and sparsity.
//!
//! ```
//! use gagam::gam::{fit, ModelSpec, TermSpec};
//! use nalgebra::{DMatrix, DVector};
//!
//! let x = DMatrix::from_fn(50, 2, |r, c| (r as f64 / 7.0).sin() + c as f64 * r as f64 / 50.0);
//! let y = DVector::from_fn(50, |r, _| 2.0 * x[(r, 0)] - x[(r, 1)]);
//! let spec = ModelSpec::new(vec![TermSpec::spline(8, 1.0, false), TermSpec::linear(false)]);
//! let model = fit(&spec, &x, &y)?;
//! assert!(model.rss() < 1e-2);
//! # Ok::<(), gagam::Error>(())
//! ```

pub mod baselines;
pub mod complexity;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod gam;
pub mod genome;
pub mod nsga2;
pub mod pareto;
pub mod report;
pub mod splines;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/splines.md")]
    mod splines {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/complexity.md")]
    mod complexity {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/pareto.md")]
    mod pareto {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
