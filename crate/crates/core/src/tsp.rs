//! Reference TSP solvers used as baselines and test oracles.

use crate::dypn::cycle_length;
use crate::instance::euclid;

/// Nearest-neighbour closed tour starting at city 0.
pub fn nearest_neighbor(coords: &[[f64; 2]]) -> Vec<usize> {
    let n = coords.len();
    if n == 0 {
        return Vec::new();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = 0;
    visited[0] = true;
    order.push(0);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !visited[j])
            .min_by(|&a, &b| {
                euclid(coords[cur], coords[a])
                    .total_cmp(&euclid(coords[cur], coords[b]))
                    .then(a.cmp(&b))
            })
            .expect("an unvisited city remains");
        visited[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

pub fn nearest_neighbor_length(coords: &[[f64; 2]]) -> f64 {
    cycle_length(coords, &nearest_neighbor(coords))
}

/// Exhaustive optimum over all cyclic orders with city 0 fixed first.
/// Intended for n ≤ 10.
pub fn brute_force(coords: &[[f64; 2]]) -> (Vec<usize>, f64) {
    let n = coords.len();
    if n <= 1 {
        return ((0..n).collect(), 0.0);
    }
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best = (Vec::new(), f64::INFINITY);
    permute(&mut rest, 0, &mut |p| {
        let mut order = Vec::with_capacity(n);
        order.push(0);
        order.extend_from_slice(p);
        let len = cycle_length(coords, &order);
        if len < best.1 {
            best = (order, len);
        }
    });
    best
}

fn permute(xs: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == xs.len() {
        visit(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, visit);
        xs.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_optimum() {
        let coords = [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let (order, len) = brute_force(&coords);
        assert!((len - 4.0).abs() < 1e-12);
        assert_eq!(order[0], 0);
        assert!(nearest_neighbor_length(&coords) >= len - 1e-12);
    }

    #[test]
    fn nn_visits_everything() {
        let coords = crate::instance::random_coords(&mut crate::rng::seeded(1), 30);
        let mut o = nearest_neighbor(&coords);
        o.sort_unstable();
        assert_eq!(o, (0..30).collect::<Vec<_>>());
    }
}
