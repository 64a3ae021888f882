//! Pareto filtering and exact hypervolume in two and three dimensions.
//!
//! All vectors are in maximisation orientation.

use crate::error::{Error, Result};
use crate::instance::STANDARD_BUDGETS;
use crate::objectives::ProblemKind;

/// `a` Pareto-dominates `b`: no worse everywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// Indices of the points not dominated by any other point. Of several equal
/// points only the first is kept.
pub fn pareto_filter_indices(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().enumerate().any(|(j, q)| {
                j != i && (dominates(q, &points[i]) || (j < i && q == &points[i]))
            })
        })
        .collect()
}

pub fn pareto_filter(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pareto_filter_indices(points)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

/// Volume of the union of boxes `[reference, p]` over the points `p` that
/// strictly exceed `reference` in every objective.
pub fn hypervolume(front: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    let dim = reference.len();
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    if let Some(p) = front.iter().find(|p| p.len() != dim) {
        return Err(Error::InvalidArgument(format!(
            "point of dimension {} against a {dim}-dimensional reference",
            p.len()
        )));
    }
    let shifted: Vec<Vec<f64>> = front
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x > r))
        .map(|p| p.iter().zip(reference).map(|(x, r)| x - r).collect())
        .collect();
    Ok(match dim {
        2 => hv2(shifted.iter().map(|p| [p[0], p[1]]).collect()),
        _ => hv3(&shifted),
    })
}

/// Area dominated by positive points relative to the origin.
fn hv2(mut pts: Vec<[f64; 2]>) -> f64 {
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let mut area = 0.0;
    let mut best_y = 0.0_f64;
    for (i, p) in pts.iter().enumerate() {
        best_y = best_y.max(p[1]);
        let next_x = pts.get(i + 1).map_or(0.0, |q| q[0]);
        area += (p[0] - next_x) * best_y;
    }
    area
}

/// Slices along the third axis, summing 2-D areas times slab heights.
fn hv3(pts: &[Vec<f64>]) -> f64 {
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| pts[b][2].total_cmp(&pts[a][2]));
    let mut volume = 0.0;
    let mut active: Vec<[f64; 2]> = Vec::with_capacity(pts.len());
    let mut k = 0;
    while k < order.len() {
        let z = pts[order[k]][2];
        while k < order.len() && pts[order[k]][2] == z {
            active.push([pts[order[k]][0], pts[order[k]][1]]);
            k += 1;
        }
        let next_z = order.get(k).map_or(0.0, |&i| pts[i][2]);
        volume += hv2(active.clone()) * (z - next_z);
    }
    volume
}

/// Named reference points of the standard test grid.
pub fn reference_preset(name: &str) -> Option<Vec<f64>> {
    if name == "profits" {
        return Some(vec![0.0, 0.0]);
    }
    let (kind, size) = name.split_once('-')?;
    let n: usize = size.parse().ok()?;
    let t_max = STANDARD_BUDGETS.iter().find(|(m, _)| *m == n)?.1;
    match kind {
        "mixed" => Some(vec![0.0, -t_max]),
        "three" => Some(vec![0.0, 0.0, -t_max]),
        _ => None,
    }
}

pub fn preset_names() -> Vec<String> {
    let mut names = vec!["profits".to_owned()];
    for kind in ["mixed", "three"] {
        for (n, _) in STANDARD_BUDGETS {
            names.push(format!("{kind}-{n}"));
        }
    }
    names
}

/// Reference point for a problem kind: zero profits and, where the length is
/// an objective, `−t_max`.
pub fn reference_point(kind: ProblemKind, k_profits: usize, t_max: f64) -> Vec<f64> {
    let mut r = vec![0.0; k_profits];
    if kind.includes_length() {
        r.push(-t_max);
    }
    r
}
