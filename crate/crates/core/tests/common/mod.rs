//! Oracles shared by the integration tests. None of them call into the
//! fitting or sorting code they check.
#![allow(dead_code)]

use gagam::evaluation::Objectives;
use gagam::nsga2::dominates;
use nalgebra::{DMatrix, DVector};

/// k-th derivative of `t ↦ (t - x)³₊`, right-continuous in `t`.
fn truncated_cubic_derivative(t: f64, x: f64, k: usize) -> f64 {
    let d = t - x;
    if d <= 0.0 {
        return 0.0;
    }
    match k {
        0 => d.powi(3),
        1 => 3.0 * d * d,
        2 => 6.0 * d,
        3 => 6.0,
        _ => 0.0,
    }
}

/// Divided difference over `nodes` (sorted, repeats allowed).
fn divided_difference(nodes: &[f64], x: f64) -> f64 {
    let k = nodes.len() - 1;
    let (a, b) = (nodes[0], nodes[k]);
    if a == b {
        let factorial: f64 = (1..=k).map(|i| i as f64).product();
        return truncated_cubic_derivative(a, x, k) / factorial;
    }
    (divided_difference(&nodes[1..], x) - divided_difference(&nodes[..k], x)) / (b - a)
}

/// `B_i(x) = (t_{i+4} - t_i) · [t_i, …, t_{i+4}] (· - x)³₊`.
pub fn bspline(knots: &[f64], i: usize, x: f64) -> f64 {
    let span = knots[i + 4] - knots[i];
    if span == 0.0 {
        return 0.0;
    }
    span * divided_difference(&knots[i..=i + 4], x)
}

/// OLS on `[1 | X]` through a QR factorization.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut a = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    a.view_mut((0, 1), (x.nrows(), x.ncols())).copy_from(x);
    let qr = a.qr();
    let qty = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&qty).unwrap()
}

/// Repeatedly removes the set of points no remaining point dominates.
pub fn peel(objs: &[Objectives]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..objs.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominates(&objs[j], &objs[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}
