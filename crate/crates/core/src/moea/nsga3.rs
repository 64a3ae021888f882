//! Reference-direction survival (NSGA-III).

use rand::seq::IndexedRandom;

use crate::rng::Rng;

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Largest division count whose simplex lattice has at most `pop_size`
/// points.
pub fn divisions_for(n_obj: usize, pop_size: usize) -> usize {
    if n_obj <= 1 {
        return 1;
    }
    let mut h = 1;
    while binomial(h + 1 + n_obj - 1, n_obj - 1) <= pop_size {
        h += 1;
    }
    h
}

/// Das–Dennis simplex lattice: all `n_obj`-vectors with entries `k / h`
/// summing to one, first component ascending.
pub fn das_dennis(n_obj: usize, h: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, dims: usize, h: usize, prefix: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if dims == 1 {
            prefix.push(left as f64 / h as f64);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for i in 0..=left {
            prefix.push(i as f64 / h as f64);
            rec(left - i, dims - 1, h, prefix, out);
            prefix.pop();
        }
    }
    if n_obj == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    rec(h, n_obj, h, &mut Vec::new(), &mut out);
    out
}

pub fn reference_directions(n_obj: usize, pop_size: usize) -> Vec<Vec<f64>> {
    das_dennis(n_obj, divisions_for(n_obj, pop_size))
}

/// Solves `a x = b` for small dense systems; `None` when (near-)singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Normalises minimisation vectors by ideal point and hyperplane intercepts
/// (falling back to the nadir of the set when the extreme-point plane is
/// degenerate).
fn normalise(f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = f[0].len();
    let ideal: Vec<f64> = (0..m)
        .map(|k| f.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let t: Vec<Vec<f64>> = f
        .iter()
        .map(|p| p.iter().zip(&ideal).map(|(x, z)| x - z).collect())
        .collect();
    let extremes: Vec<Vec<f64>> = (0..m)
        .map(|axis| {
            let asf = |p: &Vec<f64>| {
                p.iter()
                    .enumerate()
                    .map(|(k, v)| v / if k == axis { 1.0 } else { 1e-6 })
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            t.iter()
                .min_by(|a, b| asf(a).total_cmp(&asf(b)))
                .expect("non-empty set")
                .clone()
        })
        .collect();
    let nadir: Vec<f64> = (0..m)
        .map(|k| t.iter().map(|p| p[k]).fold(0.0, f64::max))
        .collect();
    let intercepts = solve(extremes, vec![1.0; m])
        .map(|plane| plane.iter().map(|a| 1.0 / a).collect::<Vec<f64>>())
        .filter(|ic| ic.iter().zip(&nadir).all(|(i, _)| i.is_finite() && *i > 1e-10))
        .unwrap_or(nadir);
    t.iter()
        .map(|p| {
            p.iter()
                .zip(&intercepts)
                .map(|(v, i)| if *i > 1e-10 { v / i } else { *v })
                .collect()
        })
        .collect()
}

fn perpendicular_distance(p: &[f64], w: &[f64]) -> f64 {
    let ww: f64 = w.iter().map(|x| x * x).sum();
    let proj = p.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / ww;
    p.iter()
        .zip(w)
        .map(|(a, b)| (a - proj * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Chooses `target` survivors from `fronts` (ranked fronts of indices into
/// `objectives`, maximisation orientation). Whole fronts are kept while they
/// fit; the partial last front is filled by niche-preserving selection.
pub fn nsga3_select(
    objectives: &[Vec<f64>],
    fronts: &[Vec<usize>],
    target: usize,
    ref_dirs: &[Vec<f64>],
    rng: &mut Rng,
) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::with_capacity(target);
    let mut last: &[usize] = &[];
    for f in fronts {
        if chosen.len() + f.len() <= target {
            chosen.extend_from_slice(f);
            if chosen.len() == target {
                return chosen;
            }
        } else {
            last = f;
            break;
        }
    }
    if last.is_empty() {
        return chosen;
    }

    // S_t = chosen ∪ last, in minimisation orientation.
    let members: Vec<usize> = chosen.iter().chain(last).copied().collect();
    let minimised: Vec<Vec<f64>> = members
        .iter()
        .map(|&i| objectives[i].iter().map(|v| -v).collect())
        .collect();
    let normed = normalise(&minimised);
    let assoc: Vec<(usize, f64)> = normed
        .iter()
        .map(|p| {
            ref_dirs
                .iter()
                .enumerate()
                .map(|(j, w)| (j, perpendicular_distance(p, w)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("at least one reference direction")
        })
        .collect();

    let mut niche = vec![0usize; ref_dirs.len()];
    for (k, _) in chosen.iter().enumerate() {
        niche[assoc[k].0] += 1;
    }
    // Remaining last-front members as positions into `members`.
    let mut pool: Vec<usize> = (chosen.len()..members.len()).collect();
    let mut open = vec![true; ref_dirs.len()];
    while chosen.len() < target && !pool.is_empty() {
        let min_count = (0..ref_dirs.len())
            .filter(|&j| open[j])
            .map(|j| niche[j])
            .min()
            .expect("an open niche remains while the pool is non-empty");
        let candidates: Vec<usize> = (0..ref_dirs.len())
            .filter(|&j| open[j] && niche[j] == min_count)
            .collect();
        let j = *candidates.choose(rng).expect("non-empty");
        let in_niche: Vec<usize> = pool.iter().copied().filter(|&k| assoc[k].0 == j).collect();
        if in_niche.is_empty() {
            open[j] = false;
            continue;
        }
        let pick = if niche[j] == 0 {
            *in_niche
                .iter()
                .min_by(|&&a, &&b| assoc[a].1.total_cmp(&assoc[b].1).then(a.cmp(&b)))
                .expect("non-empty")
        } else {
            *in_niche.choose(rng).expect("non-empty")
        };
        pool.retain(|&k| k != pick);
        niche[j] += 1;
        chosen.push(members[pick]);
    }
    chosen
}
