//! Feasibility-first dominance, non-dominated sorting and crowding distance.

use crate::metrics::dominates;

/// Constrained dominance: feasible beats infeasible, lower violation beats
/// higher, and feasible pairs compare by Pareto dominance (maximisation).
pub fn constrained_dominates(a: &[f64], a_cv: f64, b: &[f64], b_cv: f64) -> bool {
    match (a_cv == 0.0, b_cv == 0.0) {
        (true, true) => dominates(a, b),
        (true, false) => true,
        (false, true) => false,
        (false, false) => a_cv < b_cv,
    }
}

/// Fast non-dominated sorting under constrained dominance. Returns the rank
/// of every point and the fronts (indices ascending within each front).
pub fn nondominated_sort(objectives: &[Vec<f64>], cvs: &[f64]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = objectives.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dom_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if constrained_dominates(&objectives[i], cvs[i], &objectives[j], cvs[j]) {
                dominated_by_me[i].push(j);
                dom_count[j] += 1;
            } else if constrained_dominates(&objectives[j], cvs[j], &objectives[i], cvs[i]) {
                dominated_by_me[j].push(i);
                dom_count[i] += 1;
            }
        }
    }
    let mut ranks = vec![usize::MAX; n];
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dom_count[i] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            ranks[i] = r;
            for &j in &dominated_by_me[i] {
                dom_count[j] -= 1;
                if dom_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::take(&mut current));
        current = next;
        r += 1;
    }
    (ranks, fronts)
}

/// Crowding distance of each point of one front. Boundary points get
/// infinity; objectives with zero range contribute nothing.
pub fn crowding_distance(front: &[&[f64]]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    let m = front[0].len();
    for k in 0..m {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| front[a][k].total_cmp(&front[b][k]).then(a.cmp(&b)));
        let lo = front[idx[0]][k];
        let hi = front[idx[n - 1]][k];
        dist[idx[0]] = f64::INFINITY;
        dist[idx[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n.saturating_sub(1) {
            let gap = front[idx[w + 1]][k] - front[idx[w - 1]][k];
            dist[idx[w]] += gap / range;
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_and_incomparable() {
        let (r, _) = nondominated_sort(&[vec![1.0, 2.0]], &[0.0]);
        assert_eq!(r, vec![0]);
        let (r, f) = nondominated_sort(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]);
        assert_eq!(r, vec![0, 0]);
        assert_eq!(f, vec![vec![0, 1]]);
    }

    #[test]
    fn feasibility_first() {
        let objs = vec![vec![10.0, 10.0], vec![0.0, 0.0], vec![5.0, 5.0]];
        let (r, _) = nondominated_sort(&objs, &[0.5, 0.0, 0.2]);
        assert_eq!(r, vec![2, 0, 1]);
    }

    #[test]
    fn crowding_cases() {
        let a = [0.0, 2.0];
        let b = [1.0, 1.0];
        let c = [2.0, 0.0];
        let d = crowding_distance(&[&a, &c]);
        assert!(d.iter().all(|v| v.is_infinite()));
        // middle point: (2 − 0)/2 in each objective
        let d = crowding_distance(&[&a, &b, &c]);
        assert_eq!(d[1], 2.0);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        // constant second objective contributes zero
        let p = [[0.0, 1.0], [1.0, 1.0], [3.0, 1.0]];
        let d = crowding_distance(&[&p[0], &p[1], &p[2]]);
        assert!((d[1] - 1.0).abs() < 1e-15);
    }
}
