//! Named representatives of a final front, plus a 2-D hypervolume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::Objectives;
use crate::nsga2::Individual;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontSelection {
    pub knee: Individual,
    pub best_by_rmse: Individual,
    pub best_by_penalty: Individual,
}

fn by_rmse(a: &Objectives, b: &Objectives) -> std::cmp::Ordering {
    a.rmse.total_cmp(&b.rmse).then(a.penalty.total_cmp(&b.penalty))
}

fn by_penalty(a: &Objectives, b: &Objectives) -> std::cmp::Ordering {
    a.penalty.total_cmp(&b.penalty).then(a.rmse.total_cmp(&b.rmse))
}

/// Index of the knee: smallest Euclidean distance to `(0, 0)` after
/// min-max normalizing each objective over `front`. Ties go to lower RMSE.
pub fn knee_index(front: &[Objectives]) -> Option<usize> {
    let norm = |get: fn(&Objectives) -> f64| {
        let lo = front.iter().map(get).fold(f64::INFINITY, f64::min);
        let hi = front.iter().map(get).fold(f64::NEG_INFINITY, f64::max);
        move |o: &Objectives| if hi > lo { (get(o) - lo) / (hi - lo) } else { 0.0 }
    };
    let nr = norm(|o| o.rmse);
    let np = norm(|o| o.penalty);
    (0..front.len()).min_by(|&a, &b| {
        let da = nr(&front[a]).hypot(np(&front[a]));
        let db = nr(&front[b]).hypot(np(&front[b]));
        da.total_cmp(&db).then(by_rmse(&front[a], &front[b]))
    })
}

pub fn select_representatives(front: &[Individual]) -> Result<FrontSelection> {
    let objs: Vec<Objectives> = front.iter().map(|i| i.objectives).collect();
    let knee = knee_index(&objs).ok_or(Error::EmptyFront)?;
    let argmin = |cmp: fn(&Objectives, &Objectives) -> std::cmp::Ordering| {
        (0..objs.len()).min_by(|&a, &b| cmp(&objs[a], &objs[b])).expect("non-empty")
    };
    Ok(FrontSelection {
        knee: front[knee].clone(),
        best_by_rmse: front[argmin(by_rmse)].clone(),
        best_by_penalty: front[argmin(by_penalty)].clone(),
    })
}

/// Area dominated by `points` and bounded by `reference` (both objectives
/// minimized). Points not strictly better than the reference in both
/// objectives contribute nothing.
pub fn hypervolume(points: &[(f64, f64)], reference: (f64, f64)) -> f64 {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(a, b)| a < reference.0 && b < reference.1)
        .collect();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut area = 0.0;
    let mut ceiling = reference.1;
    for (a, b) in pts {
        if b < ceiling {
            area += (reference.0 - a) * (ceiling - b);
            ceiling = b;
        }
    }
    area
}
