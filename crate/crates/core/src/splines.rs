//! Cubic B-spline bases with quantile knots, and difference penalties.
//!
//! A basis with `n_basis` functions uses the clamped knot vector
//!
//! ```text
//! [lo, lo, lo, lo, k_1, ..., k_{n_basis-4}, hi, hi, hi, hi]
//! ```
//!
//! where `lo..hi` is the training domain of the feature and the interior
//! knots `k_i` sit at evenly spaced quantiles of the training values.
//! Evaluation clamps to the domain, so every row of a basis matrix is a
//! partition of unity with at most four non-zero entries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial degree of every basis (cubic).
pub const DEGREE: usize = 3;
/// Basis functions that can be non-zero at a single point.
pub const ORDER: usize = DEGREE + 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    degree: usize,
    n_basis: usize,
    knots: Vec<f64>,
    domain: (f64, f64),
}

impl SplineBasis {
    /// Reassembles a basis from a stored knot vector.
    pub fn from_knots(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 * ORDER {
            return Err(Error::InvalidSpline(format!(
                "cubic basis needs at least {} knots, got {}",
                2 * ORDER,
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidSpline(
                "knot vector must be finite and non-decreasing".into(),
            ));
        }
        let n_basis = knots.len() - ORDER;
        let lo = knots[0];
        let hi = knots[knots.len() - 1];
        if knots[..ORDER].iter().any(|&k| k != lo)
            || knots[n_basis..].iter().any(|&k| k != hi)
            || knots[ORDER..n_basis].iter().any(|&k| k <= lo || k >= hi)
        {
            return Err(Error::InvalidSpline(
                "boundary knots must be clamped and interior knots strictly inside".into(),
            ));
        }
        Ok(Self {
            degree: DEGREE,
            n_basis,
            knots,
            domain: (lo, hi),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[ORDER..self.n_basis]
    }

    /// Index of the knot span containing `x` (already clamped): the largest
    /// `i` in `DEGREE..n_basis` with `knots[i] <= x`. The right endpoint of
    /// the domain belongs to the last span.
    fn span(&self, x: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= x);
        i.saturating_sub(1).clamp(DEGREE, self.n_basis - 1)
    }

    /// Values of the (at most) four basis functions that are non-zero at `x`.
    ///
    /// Returns `(first, values)` where `values[r]` belongs to basis function
    /// `first + r`. Uses the triangular Cox–de Boor recurrence.
    pub fn evaluate_point(&self, x: f64) -> (usize, [f64; ORDER]) {
        let x = x.clamp(self.domain.0, self.domain.1);
        let t = &self.knots;
        let span = self.span(x);
        let mut n = [0.0; ORDER];
        let mut left = [0.0; ORDER];
        let mut right = [0.0; ORDER];
        n[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (span - DEGREE, n)
    }

    /// Dense `x.len() × n_basis` basis matrix.
    pub fn evaluate(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.len(), self.n_basis);
        for (row, &xi) in x.iter().enumerate() {
            let (first, vals) = self.evaluate_point(xi);
            for (r, v) in vals.into_iter().enumerate() {
                out[(row, first + r)] = v;
            }
        }
        out
    }

    /// Greville abscissae: the knot averages at which the coefficient of
    /// each basis function "lives". `Σ ξ_i B_i(x) = x` on the domain.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.n_basis)
            .map(|i| self.knots[i + 1..=i + DEGREE].iter().sum::<f64>() / DEGREE as f64)
            .collect()
    }

    /// Second-order difference penalty taken over the Greville abscissae
    /// rather than the coefficient index.
    ///
    /// Row `i` of the operator is `h̄ · [1/h_i, -(1/h_i + 1/h_{i+1}), 1/h_{i+1}]`
    /// with `h_i = ξ_{i+1} - ξ_i` and `h̄` the mean spacing, so it reduces to
    /// `[1, -2, 1]` when the abscissae are evenly spaced. Its null space is
    /// exactly the coefficient vectors `a + b·ξ`, i.e. straight lines in `x`.
    /// That is what makes a very large smoothing weight produce a linear fit
    /// even with clamped, unevenly placed knots.
    pub fn smoothness_penalty(&self) -> PenaltyMatrix {
        let xi = self.greville();
        let n = self.n_basis;
        let mean_gap = (xi[n - 1] - xi[0]) / (n - 1) as f64;
        let mut d = DMatrix::zeros(n - 2, n);
        for i in 0..n - 2 {
            let a = mean_gap / (xi[i + 1] - xi[i]);
            let b = mean_gap / (xi[i + 2] - xi[i + 1]);
            d[(i, i)] = a;
            d[(i, i + 1)] = -(a + b);
            d[(i, i + 2)] = b;
        }
        PenaltyMatrix::from_operator(&d)
    }
}

/// Builds a cubic basis with `n_basis` functions over the range of `values`.
///
/// Interior knots go at the quantiles `k / (n_basis - 3)` (linear
/// interpolation between order statistics). When those quantiles are not
/// strictly increasing and strictly inside the range, which happens for
/// heavily tied features, the interior knots are spaced uniformly instead.
pub fn build_basis(values: &[f64], n_basis: usize) -> Result<SplineBasis> {
    if n_basis < ORDER {
        return Err(Error::InvalidSpline(format!(
            "need at least {ORDER} basis functions, got {n_basis}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpline("non-finite input value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = match (sorted.first(), sorted.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
        _ => {
            return Err(Error::InvalidSpline(
                "feature needs at least two distinct values".into(),
            ))
        }
    };

    let n_interior = n_basis - ORDER;
    let mut interior: Vec<f64> = (1..=n_interior)
        .map(|k| quantile_sorted(&sorted, k as f64 / (n_interior + 1) as f64))
        .collect();
    let usable = interior.iter().all(|&k| k > lo && k < hi)
        && interior.windows(2).all(|w| w[0] < w[1]);
    if !usable {
        let step = (hi - lo) / (n_interior + 1) as f64;
        interior = (1..=n_interior).map(|k| lo + k as f64 * step).collect();
    }

    let mut knots = Vec::with_capacity(n_basis + ORDER);
    knots.extend(std::iter::repeat_n(lo, ORDER));
    knots.extend(interior);
    knots.extend(std::iter::repeat_n(hi, ORDER));
    SplineBasis::from_knots(knots)
}

/// Evaluates `basis` at every point of `x` (clamped to the domain).
pub fn evaluate_basis(basis: &SplineBasis, x: &[f64]) -> DMatrix<f64> {
    basis.evaluate(x)
}

/// Quantile of already-sorted data with linear interpolation between order
/// statistics (the "type 7" definition).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Symmetric positive semi-definite penalty `DᵀD`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix(DMatrix<f64>);

impl PenaltyMatrix {
    pub fn from_operator(d: &DMatrix<f64>) -> Self {
        let mut p = d.transpose() * d;
        // exact symmetry
        let n = p.nrows();
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (p[(i, j)] + p[(j, i)]);
                p[(i, j)] = avg;
                p[(j, i)] = avg;
            }
        }
        Self(p)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `cᵀ P c`.
    pub fn quadratic_form(&self, c: &[f64]) -> f64 {
        let n = self.dim();
        assert_eq!(c.len(), n, "coefficient length must match penalty size");
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += c[i] * self.0[(i, j)] * c[j];
            }
        }
        acc
    }
}

/// `(n-2) × n` second-order difference operator on the coefficient index.
pub fn second_difference_operator(n_basis: usize) -> Result<DMatrix<f64>> {
    if n_basis < 3 {
        return Err(Error::InvalidSpline(format!(
            "second differences need at least 3 coefficients, got {n_basis}"
        )));
    }
    let mut d = DMatrix::zeros(n_basis - 2, n_basis);
    for i in 0..n_basis - 2 {
        d[(i, i)] = 1.0;
        d[(i, i + 1)] = -2.0;
        d[(i, i + 2)] = 1.0;
    }
    Ok(d)
}

/// The classic index-based P-spline penalty `DᵀD`, `D` the second-order
/// difference operator. Annihilates constant and index-linear coefficients.
pub fn second_difference_penalty(n_basis: usize) -> Result<PenaltyMatrix> {
    Ok(PenaltyMatrix::from_operator(&second_difference_operator(
        n_basis,
    )?))
}
