//! Genetic operators for the binary and permutation codings.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// Operator probabilities. `mutation_rate: None` means `1 / L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationConfig {
    pub crossover_prob: f64,
    pub mutation_rate: Option<f64>,
    pub inversion_prob: f64,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            crossover_prob: 0.7,
            mutation_rate: None,
            inversion_prob: 0.1,
        }
    }
}

/// Draws a window `[a, b)` with `a < b` inside `0..=len`.
fn window(len: usize, rng: &mut Rng) -> (usize, usize) {
    let mut a = rng.random_range(0..=len);
    let mut b = rng.random_range(0..=len);
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    (a, b)
}

/// Two-point crossover: each child keeps its own parent outside `[a, b)` and
/// takes the other parent's bits inside it.
pub fn two_point_crossover(p1: &[bool], p2: &[bool], a: usize, b: usize) -> (Vec<bool>, Vec<bool>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    c1[a..b].copy_from_slice(&p2[a..b]);
    c2[a..b].copy_from_slice(&p1[a..b]);
    (c1, c2)
}

/// Flips each bit independently with probability `rate`.
pub fn bit_flip(bits: &mut [bool], rate: f64, rng: &mut Rng) {
    if rate <= 0.0 {
        return;
    }
    for b in bits {
        if rng.random::<f64>() < rate {
            *b = !*b;
        }
    }
}

/// Binary variation over consecutive parent pairs.
pub fn vary_binary(parents: &[Vec<bool>], cfg: &VariationConfig, rng: &mut Rng) -> Vec<Vec<bool>> {
    assert!(parents.len().is_multiple_of(2), "binary variation needs an even parent count");
    let mut out = Vec::with_capacity(parents.len());
    for pair in parents.chunks_exact(2) {
        let len = pair[0].len();
        let (mut c1, mut c2) = if rng.random::<f64>() < cfg.crossover_prob {
            let (a, b) = window(len, rng);
            two_point_crossover(&pair[0], &pair[1], a, b)
        } else {
            (pair[0].clone(), pair[1].clone())
        };
        let rate = cfg
            .mutation_rate
            .unwrap_or(if len == 0 { 0.0 } else { 1.0 / len as f64 });
        bit_flip(&mut c1, rate, rng);
        bit_flip(&mut c2, rate, rng);
        out.push(c1);
        out.push(c2);
    }
    out
}

/// Order crossover: the child keeps `p1[a..b]` in place and fills the other
/// positions, starting at `b` and wrapping, with `p2`'s remaining genes in
/// the order they appear from `b` onward.
pub fn order_crossover(p1: &[usize], p2: &[usize], a: usize, b: usize) -> Vec<usize> {
    let n = p1.len();
    if n == 0 {
        return Vec::new();
    }
    let max_gene = p1.iter().copied().max().unwrap_or(0);
    let mut used = vec![false; max_gene + 1];
    for &g in &p1[a..b] {
        used[g] = true;
    }
    let mut child = p1.to_vec();
    let mut pos = b % n;
    for k in 0..n {
        let g = p2[(b + k) % n];
        if used[g] {
            continue;
        }
        used[g] = true;
        child[pos] = g;
        pos = (pos + 1) % n;
    }
    child
}

/// Reverses `order[i..=j]`.
pub fn invert(order: &mut [usize], i: usize, j: usize) {
    order[i..=j].reverse();
}

/// Permutation variation over consecutive parent pairs.
pub fn vary_permutation(parents: &[Vec<usize>], cfg: &VariationConfig, rng: &mut Rng) -> Vec<Vec<usize>> {
    assert!(parents.len().is_multiple_of(2), "permutation variation needs an even parent count");
    let mut out = Vec::with_capacity(parents.len());
    for pair in parents.chunks_exact(2) {
        let len = pair[0].len();
        let (mut c1, mut c2) = if len > 1 && rng.random::<f64>() < cfg.crossover_prob {
            let (a, b) = window(len, rng);
            (
                order_crossover(&pair[0], &pair[1], a, b),
                order_crossover(&pair[1], &pair[0], a, b),
            )
        } else {
            (pair[0].clone(), pair[1].clone())
        };
        for c in [&mut c1, &mut c2] {
            if len > 1 && rng.random::<f64>() < cfg.inversion_prob {
                let i = rng.random_range(0..len);
                let j = rng.random_range(0..len);
                invert(c, i.min(j), i.max(j));
            }
        }
        out.push(c1);
        out.push(c2);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::seq::SliceRandom;

    fn is_perm(v: &[usize], n: usize) -> bool {
        let mut s = v.to_vec();
        s.sort_unstable();
        s == (1..=n).collect::<Vec<_>>()
    }

    #[test]
    fn no_op_settings_copy_parents() {
        let mut rng = seeded(3);
        let cfg = VariationConfig {
            crossover_prob: 0.0,
            mutation_rate: Some(0.0),
            inversion_prob: 0.0,
        };
        let parents: Vec<Vec<bool>> = (0..6).map(|_| (0..9).map(|_| rng.random()).collect()).collect();
        assert_eq!(vary_binary(&parents, &cfg, &mut rng), parents);
        let perms: Vec<Vec<usize>> = (0..4)
            .map(|_| {
                let mut p: Vec<usize> = (1..=7).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        assert_eq!(vary_permutation(&perms, &cfg, &mut rng), perms);
    }

    #[test]
    fn crossover_outside_window_is_parent_one() {
        let mut rng = seeded(4);
        for _ in 0..200 {
            let p1: Vec<bool> = (0..15).map(|_| rng.random()).collect();
            let p2: Vec<bool> = (0..15).map(|_| rng.random()).collect();
            let (a, b) = window(15, &mut rng);
            let (c1, c2) = two_point_crossover(&p1, &p2, a, b);
            for i in 0..15 {
                if i < a || i >= b {
                    assert_eq!(c1[i], p1[i]);
                    assert_eq!(c2[i], p2[i]);
                } else {
                    assert_eq!(c1[i], p2[i]);
                    assert_eq!(c2[i], p1[i]);
                }
            }
        }
    }

    #[test]
    fn mean_flips_per_child_is_one() {
        let mut rng = seeded(5);
        let len = 40;
        let cfg = VariationConfig {
            crossover_prob: 0.0,
            ..VariationConfig::default()
        };
        let parents = vec![vec![false; len]; 1000];
        let mut flips = 0usize;
        let mut children = 0usize;
        for _ in 0..100 {
            for c in vary_binary(&parents, &cfg, &mut rng) {
                flips += c.iter().filter(|&&b| b).count();
                children += 1;
            }
        }
        assert_eq!(children, 100_000);
        let mean = flips as f64 / children as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean flips {mean}");
    }

    #[test]
    fn ox_identical_parents() {
        let p = vec![3, 1, 5, 2, 4];
        for a in 0..=5 {
            for b in a..=5 {
                assert_eq!(order_crossover(&p, &p, a, b), p);
            }
        }
    }

    #[test]
    fn ox_known_child() {
        let p1 = vec![1, 2, 3, 4, 5, 6, 7, 8, 9];
        let p2 = vec![9, 3, 7, 8, 2, 6, 5, 1, 4];
        assert_eq!(order_crossover(&p1, &p2, 3, 7), vec![3, 8, 2, 4, 5, 6, 7, 1, 9]);
    }

    #[test]
    fn offspring_are_permutations() {
        let mut rng = seeded(6);
        let cfg = VariationConfig {
            inversion_prob: 0.5,
            ..VariationConfig::default()
        };
        for _ in 0..5_000 {
            let n = rng.random_range(1..12);
            let mut a: Vec<usize> = (1..=n).collect();
            let mut b = a.clone();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            for c in vary_permutation(&[a, b], &cfg, &mut rng) {
                assert!(is_perm(&c, n));
            }
        }
    }

    #[test]
    fn inversion_example() {
        let mut v = vec![1, 2, 3, 4, 5];
        invert(&mut v, 1, 3);
        assert_eq!(v, vec![1, 4, 3, 2, 5]);
    }
}
