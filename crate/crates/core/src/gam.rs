//! Additive models `y = β₀ + Σ f_j(x_j)` fit by penalized least squares.
//!
//! Each feature contributes nothing, one linear column, or a block of cubic
//! B-spline columns. Coefficients solve
//!
//! ```text
//! (XᵀX + Λ) β = Xᵀy,    Λ = ε·I₀ + ⊕_j λ_j P_j
//! ```
//!
//! where `P_j` is the spline block's smoothness penalty, `ε = 1e-8` and `I₀` is the
//! identity with the intercept entry zeroed.
//! Each spline block is constrained so its contribution sums to zero over
//! the fitting rows; the intercept carries the level. The constraint is
//! applied as a reparametrization `β = Tγ`, so the design stays sparse and
//! `β` is always reported in the B-spline basis. The coefficient covariance
//! is `T (TᵀXᵀXT + TᵀΛT)⁻¹ Tᵀ σ²`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnScale, ScalerState};
use crate::error::{Error, Result};
use crate::splines::{build_basis, SplineBasis, ORDER};

/// Diagonal loading applied to every coefficient except the intercept.
pub const RIDGE: f64 = 1e-8;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;
/// Grid resolution used for CI widths and plots.
pub const GRID_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    None,
    Linear,
    Spline,
}

/// Structural choice for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub kind: TermKind,
    pub n_splines: Option<usize>,
    pub lambda: Option<f64>,
    pub scale: bool,
}

impl TermSpec {
    pub fn none(scale: bool) -> Self {
        Self {
            kind: TermKind::None,
            n_splines: None,
            lambda: None,
            scale,
        }
    }

    pub fn linear(scale: bool) -> Self {
        Self {
            kind: TermKind::Linear,
            n_splines: None,
            lambda: None,
            scale,
        }
    }

    pub fn spline(n_splines: usize, lambda: f64, scale: bool) -> Self {
        Self {
            kind: TermKind::Spline,
            n_splines: Some(n_splines),
            lambda: Some(lambda),
            scale,
        }
    }

    pub fn is_active(&self) -> bool {
        self.kind != TermKind::None
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.n_splines, self.lambda) {
            (TermKind::Spline, Some(n), Some(l)) => {
                if n < ORDER {
                    return Err(Error::InvalidTerm(format!(
                        "spline term needs at least {ORDER} basis functions, got {n}"
                    )));
                }
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::InvalidTerm(format!(
                        "smoothing weight must be positive, got {l}"
                    )));
                }
                Ok(())
            }
            (TermKind::Spline, _, _) => Err(Error::InvalidTerm(
                "spline term needs both a basis size and a smoothing weight".into(),
            )),
            (_, None, None) => Ok(()),
            _ => Err(Error::InvalidTerm(
                "only spline terms carry a basis size and smoothing weight".into(),
            )),
        }
    }
}

/// One term per feature, in feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub terms: Vec<TermSpec>,
}

impl ModelSpec {
    pub fn new(terms: Vec<TermSpec>) -> Self {
        Self { terms }
    }

    pub fn n_active(&self) -> usize {
        self.terms.iter().filter(|t| t.is_active()).count()
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.terms.len() != n_features {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                found: self.terms.len(),
            });
        }
        self.terms.iter().try_for_each(TermSpec::validate)
    }
}

/// How one active feature maps onto design columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermLayout {
    pub feature: usize,
    pub kind: TermKind,
    pub columns: Range<usize>,
    pub lambda: Option<f64>,
    pub scaler: Option<ColumnScale>,
    pub basis: Option<SplineBasis>,
    /// Raw-unit range of the feature on the fitting rows.
    pub domain: (f64, f64),
}

impl TermLayout {
    #[inline]
    fn transform(&self, x: f64) -> f64 {
        self.scaler.map_or(x, |s| s.apply(x))
    }

    /// Dense block of this term's design columns at raw values `x`.
    pub fn block_rows(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.basis {
            Some(b) => {
                let z: Vec<f64> = x.iter().map(|&v| self.transform(v)).collect();
                b.evaluate(&z)
            }
            None => DMatrix::from_iterator(x.len(), 1, x.iter().map(|&v| self.transform(v))),
        }
    }
}

/// Column layout, scalers and bases derived from the fitting rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignLayout {
    pub n_features: usize,
    pub n_columns: usize,
    pub terms: Vec<TermLayout>,
}

impl DesignLayout {
    /// Builds scalers, spline bases and the column map from `features`.
    pub fn fit(spec: &ModelSpec, features: &DMatrix<f64>) -> Result<Self> {
        spec.validate(features.ncols())?;
        let mut terms = Vec::new();
        let mut next = 1;
        for (j, term) in spec.terms.iter().enumerate() {
            if !term.is_active() {
                continue;
            }
            let raw = features.column(j);
            let lo = raw.min();
            let hi = raw.max();
            let scaler = if term.scale {
                Some(ColumnScale::fit(j, raw.iter().copied())?)
            } else {
                None
            };
            let (width, basis) = match term.kind {
                TermKind::Linear => (1, None),
                TermKind::Spline => {
                    let z: Vec<f64> = raw.iter().map(|&v| scaler.map_or(v, |s| s.apply(v))).collect();
                    let b = build_basis(&z, term.n_splines.expect("validated"))?;
                    (b.n_basis(), Some(b))
                }
                TermKind::None => unreachable!(),
            };
            terms.push(TermLayout {
                feature: j,
                kind: term.kind,
                columns: next..next + width,
                lambda: term.lambda,
                scaler,
                basis,
                domain: (lo, hi),
            });
            next += width;
        }
        Ok(Self {
            n_features: features.ncols(),
            n_columns: next,
            terms,
        })
    }

    pub fn term(&self, feature: usize) -> Option<&TermLayout> {
        self.terms.iter().find(|t| t.feature == feature)
    }

    /// Design rows for `features` using this layout's scalers and bases.
    pub fn assemble(&self, features: &DMatrix<f64>) -> Result<Design> {
        if features.ncols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: features.ncols(),
            });
        }
        let n = features.nrows();
        let per_row: usize = 1 + self
            .terms
            .iter()
            .map(|t| if t.basis.is_some() { ORDER } else { 1 })
            .sum::<usize>();
        let mut cols = Vec::with_capacity(n * per_row);
        let mut vals = Vec::with_capacity(n * per_row);
        for r in 0..n {
            cols.push(0u32);
            vals.push(1.0);
            for t in &self.terms {
                let z = t.transform(features[(r, t.feature)]);
                match &t.basis {
                    Some(b) => {
                        let (first, v) = b.evaluate_point(z);
                        for (k, v) in v.into_iter().enumerate() {
                            cols.push((t.columns.start + first + k) as u32);
                            vals.push(v);
                        }
                    }
                    None => {
                        cols.push(t.columns.start as u32);
                        vals.push(z);
                    }
                }
            }
        }
        Ok(Design {
            n_rows: n,
            n_columns: self.n_columns,
            stride: per_row,
            cols,
            vals,
        })
    }

    /// Block-diagonal `Λ` (without the ridge).
    fn penalty(&self) -> DMatrix<f64> {
        let mut pen = DMatrix::zeros(self.n_columns, self.n_columns);
        for t in &self.terms {
            if let (Some(b), Some(lambda)) = (&t.basis, t.lambda) {
                let p = b.smoothness_penalty();
                let s = t.columns.start;
                let w = t.columns.len();
                pen.view_mut((s, s), (w, w))
                    .zip_apply(p.matrix(), |a, b| *a = lambda * b);
            }
        }
        pen
    }
}

/// Sparse design matrix: every row stores the same number of entries
/// (intercept, one per linear term, four per spline term).
#[derive(Debug, Clone)]
pub struct Design {
    n_rows: usize,
    n_columns: usize,
    stride: usize,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Design {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.n_columns
    }

    fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let s = r * self.stride;
        (&self.cols[s..s + self.stride], &self.vals[s..s + self.stride])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_columns);
        for r in 0..self.n_rows {
            let (c, v) = self.row(r);
            for (&c, &v) in c.iter().zip(v) {
                m[(r, c as usize)] += v;
            }
        }
        m
    }

    pub fn mul_vec(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n_rows, |r, _| {
            let (c, v) = self.row(r);
            c.iter().zip(v).map(|(&c, &v)| v * beta[c as usize]).sum()
        })
    }

    /// `(XᵀX, Xᵀy)`.
    fn normal_equations(&self, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.n_columns;
        let mut gram = vec![0.0; p * p];
        let mut xty = DVector::zeros(p);
        for r in 0..self.n_rows {
            let (c, v) = self.row(r);
            let yr = y[r];
            for a in 0..c.len() {
                let ca = c[a] as usize;
                let va = v[a];
                xty[ca] += va * yr;
                let base = ca * p;
                for b in 0..c.len() {
                    gram[base + c[b] as usize] += va * v[b];
                }
            }
        }
        (DMatrix::from_row_slice(p, p, &gram), xty)
    }
}

/// Design columns of each feature, `None` for inactive ones.
pub type ColumnBlocks = Vec<Option<Range<usize>>>;

/// Dense design matrix and per-feature column blocks for `spec` built from
/// `features` (scalers and bases are fit on these rows).
pub fn assemble_design(
    spec: &ModelSpec,
    features: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, ColumnBlocks)> {
    let layout = DesignLayout::fit(spec, features)?;
    let blocks = (0..layout.n_features)
        .map(|j| layout.term(j).map(|t| t.columns.clone()))
        .collect();
    Ok((layout.assemble(features)?.to_dense(), blocks))
}

/// Coefficients only; enough to predict. Cross-validation folds use this.
#[derive(Debug, Clone)]
pub struct PointFit {
    layout: DesignLayout,
    beta: DVector<f64>,
}

impl PointFit {
    pub fn predict(&self, features: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(self.layout.assemble(features)?.mul_vec(&self.beta))
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }
}

struct Solved {
    layout: DesignLayout,
    design: Design,
    beta: DVector<f64>,
    /// Maps constrained coefficients back to design columns.
    t: DMatrix<f64>,
    /// `Tᵀ XᵀX T`.
    gram: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

/// `k × (k-1)` orthonormal basis of `{b : cᵀb = 0}` (a Householder
/// reflection with its first column dropped).
fn null_space_of(c: &[f64]) -> DMatrix<f64> {
    let k = c.len();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut w = DVector::from_column_slice(c);
    w[0] += if c[0] >= 0.0 { norm } else { -norm };
    let ww = w.norm_squared();
    let mut h = DMatrix::<f64>::identity(k, k);
    if ww > 0.0 {
        h -= (&w * w.transpose()) * (2.0 / ww);
    }
    h.columns(1, k - 1).clone_owned()
}

/// Sum-to-zero reparametrization: every spline block is restricted to
/// coefficients whose contribution sums to zero over the fitting rows.
fn constraint(layout: &DesignLayout, gram: &DMatrix<f64>) -> DMatrix<f64> {
    let p = layout.n_columns;
    let q = p - layout.terms.iter().filter(|t| t.basis.is_some()).count();
    let mut t = DMatrix::zeros(p, q);
    t[(0, 0)] = 1.0;
    let mut next = 1;
    for term in &layout.terms {
        let cols = term.columns.clone();
        if term.basis.is_some() {
            // intercept row of XᵀX = column sums of the block
            let c: Vec<f64> = cols.clone().map(|j| gram[(0, j)]).collect();
            let z = null_space_of(&c);
            t.view_mut((cols.start, next), (cols.len(), cols.len() - 1)).copy_from(&z);
            next += cols.len() - 1;
        } else {
            t[(cols.start, next)] = 1.0;
            next += 1;
        }
    }
    t
}

fn solve(spec: &ModelSpec, features: &DMatrix<f64>, target: &DVector<f64>) -> Result<Solved> {
    if features.nrows() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            found: target.len(),
        });
    }
    if features.nrows() < 2 {
        return Err(Error::TooFewRows {
            rows: features.nrows(),
            required: 2,
        });
    }
    let layout = DesignLayout::fit(spec, features)?;
    let design = layout.assemble(features)?;
    let (gram, xty) = design.normal_equations(target);
    let t = constraint(&layout, &gram);
    let tt = t.transpose();
    let gram = &tt * &gram * &t;
    let mut a = &gram + &tt * layout.penalty() * &t;
    for i in 1..a.nrows() {
        a[(i, i)] += RIDGE;
    }
    let chol = a.cholesky().ok_or(Error::SingularSystem)?;
    let gamma = chol.solve(&(&tt * xty));
    if gamma.iter().any(|b| !b.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(Solved {
        beta: &t * gamma,
        layout,
        design,
        t,
        gram,
        chol,
    })
}

/// Penalized least-squares coefficients without uncertainty estimates.
pub fn fit_point(spec: &ModelSpec, features: &DMatrix<f64>, target: &DVector<f64>) -> Result<PointFit> {
    let s = solve(spec, features, target)?;
    Ok(PointFit {
        layout: s.layout,
        beta: s.beta,
    })
}

/// Fits `spec` on the given rows, including covariance and residual
/// variance.
pub fn fit(spec: &ModelSpec, features: &DMatrix<f64>, target: &DVector<f64>) -> Result<FittedGam> {
    let Solved {
        layout,
        design,
        beta,
        t,
        gram,
        chol,
    } = solve(spec, features, target)?;
    let n = features.nrows() as f64;
    let a_inv = chol.inverse();
    // trace of the hat matrix X A⁻¹ Xᵀ
    let edf = a_inv.component_mul(&gram.transpose()).sum();
    let fitted = design.mul_vec(&beta);
    let rss = (target - fitted).norm_squared();
    let sigma2 = rss / (n - edf).max(1.0);
    let mut covariance = &t * a_inv * t.transpose() * sigma2;
    let p = covariance.nrows();
    for i in 0..p {
        for j in 0..i {
            let avg = 0.5 * (covariance[(i, j)] + covariance[(j, i)]);
            covariance[(i, j)] = avg;
            covariance[(j, i)] = avg;
        }
    }
    let train_target_range = target.max() - target.min();
    Ok(FittedGam {
        spec: spec.clone(),
        point: PointFit { layout, beta },
        covariance,
        sigma2,
        edf,
        rss,
        train_target_range,
    })
}

/// A fitted additive model with everything needed for intervals.
#[derive(Debug, Clone)]
pub struct FittedGam {
    spec: ModelSpec,
    point: PointFit,
    covariance: DMatrix<f64>,
    sigma2: f64,
    edf: f64,
    rss: f64,
    train_target_range: f64,
}

/// Effect curve of one term with its pointwise 95% band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialDependence {
    pub feature: usize,
    pub kind: TermKind,
    /// Raw feature values.
    pub grid: Vec<f64>,
    pub effect: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Mean 95% band width of a term, or `Invalid` when the band cannot be
/// trusted (non-finite or indefinite covariance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CiWidth {
    Valid(f64),
    Invalid,
}

impl FittedGam {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layout(&self) -> &DesignLayout {
        &self.point.layout
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.point.beta
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn edf(&self) -> f64 {
        self.edf
    }

    pub fn rss(&self) -> f64 {
        self.rss
    }

    /// `max(y) - min(y)` over the fitting rows.
    pub fn train_target_range(&self) -> f64 {
        self.train_target_range
    }

    pub fn n_features(&self) -> usize {
        self.spec.terms.len()
    }

    pub fn n_active(&self) -> usize {
        self.spec.n_active()
    }

    /// Column range of a feature's coefficients, `None` if inactive.
    pub fn block(&self, feature: usize) -> Option<Range<usize>> {
        self.layout().term(feature).map(|t| t.columns.clone())
    }

    pub fn point(&self) -> &PointFit {
        &self.point
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.point.predict(features)
    }

    /// Test-only hook for exercising the invalid-interval path.
    #[doc(hidden)]
    pub fn with_covariance(mut self, covariance: DMatrix<f64>) -> Self {
        self.covariance = covariance;
        self
    }

    /// Effect of `feature` on `grid_size` evenly spaced raw values across
    /// its training range, with band `effect ± 1.96·sqrt(diag(B Σ Bᵀ))`.
    pub fn partial_dependence(&self, feature: usize, grid_size: usize) -> Result<PartialDependence> {
        let term = self.layout().term(feature).ok_or(Error::InactiveTerm(feature))?;
        let (lo, hi) = term.domain;
        let grid: Vec<f64> = match grid_size {
            0 => Vec::new(),
            1 => vec![lo],
            g => (0..g).map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64).collect(),
        };
        let b = term.block_rows(&grid);
        let cols = term.columns.clone();
        let w = cols.len();
        let beta = self.beta().rows(cols.start, w);
        let cov = self.covariance.view((cols.start, cols.start), (w, w));
        let effect = &b * beta;
        let bc = &b * cov;
        let mut lower = Vec::with_capacity(grid.len());
        let mut upper = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let var = bc.row(i).dot(&b.row(i));
            let half = Z_95 * var.max(0.0).sqrt();
            let half = if var.is_finite() { half } else { f64::NAN };
            lower.push(effect[i] - half);
            upper.push(effect[i] + half);
        }
        Ok(PartialDependence {
            feature,
            kind: term.kind,
            grid,
            effect: effect.iter().copied().collect(),
            lower,
            upper,
        })
    }

    /// Mean band width over the standard 100-point grid.
    pub fn term_ci_width(&self, feature: usize) -> Result<CiWidth> {
        let cols = self.block(feature).ok_or(Error::InactiveTerm(feature))?;
        let w = cols.len();
        let block = self.covariance.view((cols.start, cols.start), (w, w)).clone_owned();
        if block.iter().any(|v| !v.is_finite()) || !is_psd(&block) {
            return Ok(CiWidth::Invalid);
        }
        let pd = self.partial_dependence(feature, GRID_SIZE)?;
        let widths: Vec<f64> = pd.upper.iter().zip(&pd.lower).map(|(u, l)| u - l).collect();
        if widths.iter().any(|w| !w.is_finite()) {
            return Ok(CiWidth::Invalid);
        }
        Ok(CiWidth::Valid(widths.iter().sum::<f64>() / widths.len() as f64))
    }

    /// Serializable summary (covariance optional).
    pub fn document(&self, include_covariance: bool) -> ModelDocument {
        let layout = self.layout();
        ModelDocument {
            spec: self.spec.clone(),
            intercept: self.beta()[0],
            beta: self.beta().iter().copied().collect(),
            terms: layout
                .terms
                .iter()
                .map(|t| TermDocument {
                    feature: t.feature,
                    kind: t.kind,
                    columns: [t.columns.start, t.columns.end],
                    lambda: t.lambda,
                    knots: t.basis.as_ref().map(|b| b.knots().to_vec()),
                    scaler: t.scaler,
                    domain: [t.domain.0, t.domain.1],
                })
                .collect(),
            scalers: ScalerState {
                columns: layout.terms.iter().filter_map(|t| t.scaler).collect(),
            },
            sigma2: self.sigma2,
            edf: self.edf,
            train_target_range: self.train_target_range,
            covariance: include_covariance.then(|| {
                self.covariance
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect()
            }),
        }
    }
}

fn is_psd(m: &DMatrix<f64>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    eig.eigenvalues.iter().all(|&e| e.is_finite() && e >= -1e-8 * scale)
}

/// JSON form of a fitted model. Field names are part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub spec: ModelSpec,
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub terms: Vec<TermDocument>,
    pub scalers: ScalerState,
    pub sigma2: f64,
    pub edf: f64,
    pub train_target_range: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDocument {
    pub feature: usize,
    pub kind: TermKind,
    pub columns: [usize; 2],
    pub lambda: Option<f64>,
    pub knots: Option<Vec<f64>>,
    pub scaler: Option<ColumnScale>,
    pub domain: [f64; 2],
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn synthetic(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0f64..2.0));
        let y = DVector::from_fn(n, |r, _| {
            (1.5 * x[(r, 0)]).sin() + 0.4 * x[(r, p - 1)] + noise.sample(&mut rng)
        });
        (x, y)
    }

    #[test]
    fn term_spec_validation() {
        assert!(TermSpec::spline(3, 1.0, false).validate().is_err());
        assert!(TermSpec::spline(8, 0.0, false).validate().is_err());
        assert!(TermSpec::spline(8, 1.0, false).validate().is_ok());
        let bad = TermSpec {
            kind: TermKind::Linear,
            n_splines: Some(8),
            lambda: None,
            scale: false,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn design_column_counts() {
        let (x, _) = synthetic(40, 2, 1);
        let (d, blocks) = assemble_design(&ModelSpec::new(vec![TermSpec::none(false); 2]), &x).unwrap();
        assert_eq!(d.ncols(), 1);
        assert!(d.iter().all(|&v| v == 1.0));
        assert_eq!(blocks, vec![None, None]);

        let spec = ModelSpec::new(vec![TermSpec::linear(true), TermSpec::spline(6, 1.0, false)]);
        let (d, blocks) = assemble_design(&spec, &x).unwrap();
        assert_eq!(d.ncols(), 8);
        assert_eq!(blocks, vec![Some(1..2), Some(2..8)]);

        let layout = DesignLayout::fit(&spec, &x).unwrap();
        assert_eq!(layout.assemble(&x).unwrap().to_dense(), layout.assemble(&x).unwrap().to_dense());
    }

    #[test]
    fn spec_length_mismatch() {
        let (x, y) = synthetic(20, 3, 2);
        assert!(matches!(
            fit(&ModelSpec::new(vec![TermSpec::linear(false)]), &x, &y),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scaled_constant_feature_errors() {
        let x = DMatrix::from_element(10, 1, 3.0);
        let y = DVector::from_fn(10, |r, _| r as f64);
        assert!(matches!(
            fit(&ModelSpec::new(vec![TermSpec::linear(true)]), &x, &y),
            Err(Error::ZeroVariance { .. })
        ));
    }

    #[test]
    fn intercept_only_predicts_mean() {
        let (x, y) = synthetic(30, 2, 3);
        let m = fit(&ModelSpec::new(vec![TermSpec::none(false); 2]), &x, &y).unwrap();
        let mean = y.mean();
        for p in m.predict(&x).unwrap().iter() {
            assert_abs_diff_eq!(*p, mean, epsilon = 1e-9);
        }
        assert_eq!(m.predict(&x.rows(0, 1).into_owned()).unwrap().len(), 1);
    }

    #[test]
    fn active_terms_beat_intercept_in_sample() {
        let (x, y) = synthetic(120, 3, 4);
        let base = fit(&ModelSpec::new(vec![TermSpec::none(false); 3]), &x, &y).unwrap();
        for spec in [
            vec![TermSpec::linear(false), TermSpec::none(false), TermSpec::none(false)],
            vec![TermSpec::spline(10, 0.5, true), TermSpec::none(false), TermSpec::linear(true)],
            vec![TermSpec::spline(8, 2.0, false); 3],
        ] {
            let m = fit(&ModelSpec::new(spec), &x, &y).unwrap();
            assert!(m.rss() < base.rss());
        }
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let (x, y) = synthetic(150, 3, 5);
        let spec = ModelSpec::new(vec![
            TermSpec::spline(12, 0.3, false),
            TermSpec::spline(9, 4.0, true),
            TermSpec::linear(false),
        ]);
        let m = fit(&spec, &x, &y).unwrap();
        let c = m.covariance();
        assert!((c - c.transpose()).amax() < 1e-8);
        let eig = c.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e > -1e-8));
        assert!(m.edf() > 1.0 && m.edf() < 23.0);
    }

    #[test]
    fn spline_contributions_sum_to_zero() {
        let (x, y) = synthetic(120, 2, 11);
        let spec = ModelSpec::new(vec![TermSpec::spline(11, 0.5, false), TermSpec::spline(8, 3.0, true)]);
        let m = fit(&spec, &x, &y).unwrap();
        for t in &m.layout().terms {
            let col: Vec<f64> = x.column(t.feature).iter().copied().collect();
            let f = t.block_rows(&col) * m.beta().rows(t.columns.start, t.columns.len());
            assert!(f.sum().abs() < 1e-8, "{}", f.sum());
        }
        assert_abs_diff_eq!(m.beta()[0], y.mean(), epsilon = 1e-8);
    }

    #[test]
    fn smoothing_weight_reduces_roughness() {
        let (x, y) = synthetic(200, 1, 6);
        let mut last = f64::INFINITY;
        for lambda in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let m = fit(&ModelSpec::new(vec![TermSpec::spline(15, lambda, false)]), &x, &y).unwrap();
            let t = m.layout().term(0).unwrap();
            let c: Vec<f64> = m.beta().rows(t.columns.start, t.columns.len()).iter().copied().collect();
            let rough = t.basis.as_ref().unwrap().smoothness_penalty().quadratic_form(&c);
            assert!(rough <= last + 1e-12, "{rough} > {last}");
            last = rough;
        }
    }

    #[test]
    fn linear_partial_dependence_is_the_scaled_line() {
        let (x, y) = synthetic(60, 1, 7);
        let m = fit(&ModelSpec::new(vec![TermSpec::linear(true)]), &x, &y).unwrap();
        let pd = m.partial_dependence(0, 7).unwrap();
        let s = m.layout().term(0).unwrap().scaler.unwrap();
        let c = m.beta()[1];
        for (g, e) in pd.grid.iter().zip(&pd.effect) {
            assert_abs_diff_eq!(*e, c * s.apply(*g), epsilon = 1e-12);
        }
        assert!(pd.upper.iter().zip(&pd.lower).all(|(u, l)| u > l));
        assert!(matches!(m.partial_dependence(1, 5), Err(Error::InactiveTerm(1))));
    }

    #[test]
    fn ci_width_consistent_with_band() {
        let (x, y) = synthetic(100, 2, 8);
        let spec = ModelSpec::new(vec![TermSpec::spline(10, 1.0, false), TermSpec::none(false)]);
        let m = fit(&spec, &x, &y).unwrap();
        let pd = m.partial_dependence(0, GRID_SIZE).unwrap();
        let mean = pd.upper.iter().zip(&pd.lower).map(|(u, l)| u - l).sum::<f64>() / GRID_SIZE as f64;
        assert_eq!(m.term_ci_width(0).unwrap(), CiWidth::Valid(mean));
        assert!(matches!(m.term_ci_width(1), Err(Error::InactiveTerm(1))));
    }

    #[test]
    fn exact_linear_data_has_zero_width() {
        let x = DMatrix::from_fn(50, 1, |r, _| r as f64 / 7.0);
        let y = DVector::from_fn(50, |r, _| 3.0 - 2.0 * r as f64 / 7.0);
        let m = fit(&ModelSpec::new(vec![TermSpec::linear(false)]), &x, &y).unwrap();
        let range = y.max() - y.min();
        match m.term_ci_width(0).unwrap() {
            CiWidth::Valid(w) => assert!(w < 1e-6 * range, "{w}"),
            CiWidth::Invalid => panic!("expected a valid width"),
        }
    }

    #[test]
    fn non_finite_covariance_is_invalid() {
        let (x, y) = synthetic(40, 1, 9);
        let m = fit(&ModelSpec::new(vec![TermSpec::linear(false)]), &x, &y).unwrap();
        let mut c = m.covariance().clone();
        c[(1, 1)] = f64::NAN;
        assert_eq!(m.with_covariance(c).term_ci_width(0).unwrap(), CiWidth::Invalid);
    }

    #[test]
    fn document_round_trips_through_json() {
        let (x, y) = synthetic(80, 2, 10);
        let spec = ModelSpec::new(vec![TermSpec::spline(8, 1.0, true), TermSpec::linear(false)]);
        let m = fit(&spec, &x, &y).unwrap();
        let doc = m.document(false);
        assert!(doc.covariance.is_none());
        let back: ModelDocument = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
        let json = serde_json::to_value(m.document(true)).unwrap();
        assert_eq!(json["covariance"].as_array().unwrap().len(), 10);
        assert_eq!(json["terms"][0]["knots"].as_array().unwrap().len(), 12);
    }
}
