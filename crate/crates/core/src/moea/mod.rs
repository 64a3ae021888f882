//! NSGA-II / NSGA-III engines over pluggable genome codings.

mod coding;
mod dominance;
mod nsga3;
mod variation;

pub use coding::{
    decode_double_chromosome, decode_single_chromosome, greedy_individual, greedy_initialize,
    selection_probabilities, PermutationGenome, SelectionGenome,
};
pub use dominance::{constrained_dominates, crowding_distance, nondominated_sort};
pub use nsga3::{das_dennis, divisions_for, nsga3_select, reference_directions};
pub use variation::{
    bit_flip, invert, order_crossover, two_point_crossover, vary_binary, vary_permutation,
    VariationConfig,
};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::objectives::EvaluatedSolution;
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Nsga2,
    Nsga3,
}

impl Engine {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "nsga2" => Ok(Self::Nsga2),
            "nsga3" => Ok(Self::Nsga3),
            other => Err(Error::InvalidArgument(format!(
                "unknown engine `{other}` (expected nsga2 or nsga3)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Nsga2 => "nsga2",
            Self::Nsga3 => "nsga3",
        }
    }
}

/// An evaluated genome. `objectives` are maximisation-oriented.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual<G> {
    pub genome: G,
    pub objectives: Vec<f64>,
    pub cv: f64,
    pub solution: EvaluatedSolution,
}

/// A coding plus its evaluator.
pub trait Problem {
    type Genome: Clone;

    fn evaluate(&mut self, genomes: Vec<Self::Genome>) -> Result<Vec<Individual<Self::Genome>>>;

    /// Produces one child per parent; `parents.len()` is even.
    fn vary(&self, parents: &[&Self::Genome], rng: &mut Rng) -> Vec<Self::Genome>;
}

/// Members with feasibility-first ranks and per-front crowding distances.
#[derive(Clone, Debug)]
pub struct Population<G> {
    pub members: Vec<Individual<G>>,
    pub ranks: Vec<usize>,
    pub crowding: Vec<f64>,
}

impl<G> Population<G> {
    pub fn new(members: Vec<Individual<G>>) -> Self {
        let objs: Vec<Vec<f64>> = members.iter().map(|m| m.objectives.clone()).collect();
        let cvs: Vec<f64> = members.iter().map(|m| m.cv).collect();
        let (ranks, fronts) = nondominated_sort(&objs, &cvs);
        let mut crowding = vec![0.0; members.len()];
        for f in &fronts {
            let pts: Vec<&[f64]> = f.iter().map(|&i| objs[i].as_slice()).collect();
            for (&i, d) in f.iter().zip(crowding_distance(&pts)) {
                crowding[i] = d;
            }
        }
        Self {
            members,
            ranks,
            crowding,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Feasible rank-0 members.
    pub fn feasible_front(&self) -> Vec<&Individual<G>> {
        self.members
            .iter()
            .zip(&self.ranks)
            .filter(|(m, &r)| r == 0 && m.cv == 0.0)
            .map(|(m, _)| m)
            .collect()
    }
}

/// Survival rule plus whatever it precomputes.
#[derive(Clone, Debug)]
pub struct Survival {
    pub engine: Engine,
    pub ref_dirs: Vec<Vec<f64>>,
}

impl Survival {
    pub fn new(engine: Engine, n_objectives: usize, pop_size: usize) -> Self {
        let ref_dirs = match engine {
            Engine::Nsga2 => Vec::new(),
            Engine::Nsga3 => reference_directions(n_objectives, pop_size),
        };
        Self { engine, ref_dirs }
    }

    /// Indices of `target` survivors among `objectives`/`cvs`, ascending.
    pub fn select(&self, objectives: &[Vec<f64>], cvs: &[f64], target: usize, rng: &mut Rng) -> Vec<usize> {
        let (_, fronts) = nondominated_sort(objectives, cvs);
        let mut chosen = match self.engine {
            Engine::Nsga2 => {
                let mut chosen = Vec::with_capacity(target);
                for f in &fronts {
                    if chosen.len() + f.len() <= target {
                        chosen.extend_from_slice(f);
                    } else {
                        let pts: Vec<&[f64]> = f.iter().map(|&i| objectives[i].as_slice()).collect();
                        let d = crowding_distance(&pts);
                        let mut order: Vec<usize> = (0..f.len()).collect();
                        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
                        let room = target - chosen.len();
                        chosen.extend(order[..room].iter().map(|&k| f[k]));
                    }
                    if chosen.len() == target {
                        break;
                    }
                }
                chosen
            }
            Engine::Nsga3 => nsga3_select(objectives, &fronts, target, &self.ref_dirs, rng),
        };
        chosen.sort_unstable();
        chosen
    }
}

/// Binary tournament on (rank, crowding); full ties go to a coin flip.
pub fn tournament<G>(pop: &Population<G>, rng: &mut Rng) -> usize {
    let n = pop.len();
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    match pop.ranks[a].cmp(&pop.ranks[b]) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => match pop.crowding[a].total_cmp(&pop.crowding[b]) {
            std::cmp::Ordering::Greater => a,
            std::cmp::Ordering::Less => b,
            std::cmp::Ordering::Equal => {
                if rng.random::<bool>() {
                    a
                } else {
                    b
                }
            }
        },
    }
}

/// Evaluates `genomes` and ranks them.
pub fn initial_population<P: Problem>(problem: &mut P, genomes: Vec<P::Genome>) -> Result<Population<P::Genome>> {
    Ok(Population::new(problem.evaluate(genomes)?))
}

/// Mating selection, variation, offspring evaluation and (μ+λ) survival.
pub fn moea_generation<P: Problem>(
    survival: &Survival,
    pop: Population<P::Genome>,
    problem: &mut P,
    rng: &mut Rng,
) -> Result<Population<P::Genome>> {
    let n = pop.len();
    if n == 0 {
        return Ok(pop);
    }
    let pool_size = n + n % 2;
    let pool: Vec<&P::Genome> = (0..pool_size)
        .map(|_| &pop.members[tournament(&pop, rng)].genome)
        .collect();
    let mut children = problem.vary(&pool, rng);
    children.truncate(n);
    let offspring = problem.evaluate(children)?;

    let mut combined = pop.members;
    combined.extend(offspring);
    let objs: Vec<Vec<f64>> = combined.iter().map(|m| m.objectives.clone()).collect();
    let cvs: Vec<f64> = combined.iter().map(|m| m.cv).collect();
    let keep = survival.select(&objs, &cvs, n, rng);
    let mut slots: Vec<Option<Individual<P::Genome>>> = combined.into_iter().map(Some).collect();
    let members = keep
        .into_iter()
        .map(|i| slots[i].take().expect("survivor indices are distinct"))
        .collect();
    Ok(Population::new(members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{dominates, hypervolume};
    use crate::rng::seeded;

    /// Two linear objectives over bits, with a cardinality budget.
    struct Knapsack {
        w: Vec<[f64; 2]>,
        cap: usize,
        cfg: VariationConfig,
    }

    impl Problem for Knapsack {
        type Genome = Vec<bool>;

        fn evaluate(&mut self, genomes: Vec<Vec<bool>>) -> Result<Vec<Individual<Vec<bool>>>> {
            Ok(genomes
                .into_iter()
                .map(|g| {
                    let mut o = vec![0.0, 0.0];
                    let mut count = 0usize;
                    for (b, w) in g.iter().zip(&self.w) {
                        if *b {
                            o[0] += w[0];
                            o[1] += w[1];
                            count += 1;
                        }
                    }
                    let cv = count.saturating_sub(self.cap) as f64;
                    Individual {
                        genome: g,
                        objectives: o,
                        cv,
                        solution: EvaluatedSolution {
                            selection: vec![0],
                            tour: vec![],
                            profits: vec![],
                            length: 0.0,
                            cv,
                        },
                    }
                })
                .collect())
        }

        fn vary(&self, parents: &[&Vec<bool>], rng: &mut Rng) -> Vec<Vec<bool>> {
            let owned: Vec<Vec<bool>> = parents.iter().map(|p| (*p).clone()).collect();
            vary_binary(&owned, &self.cfg, rng)
        }
    }

    fn knapsack(n: usize, seed: u64) -> Knapsack {
        let mut rng = seeded(seed);
        Knapsack {
            w: (0..n).map(|_| [rng.random(), rng.random()]).collect(),
            cap: n / 3,
            cfg: VariationConfig::default(),
        }
    }

    fn random_pop(p: &mut Knapsack, size: usize, rng: &mut Rng) -> Population<Vec<bool>> {
        let n = p.w.len();
        let genomes = (0..size)
            .map(|_| (0..n).map(|_| rng.random::<f64>() < 0.3).collect())
            .collect();
        initial_population(p, genomes).unwrap()
    }

    fn front_hv(pop: &Population<Vec<bool>>) -> f64 {
        let pts: Vec<Vec<f64>> = pop.feasible_front().iter().map(|m| m.objectives.clone()).collect();
        hypervolume(&pts, &[0.0, 0.0]).unwrap()
    }

    #[test]
    fn clones_stay_clones() {
        let mut p = knapsack(12, 1);
        p.cfg = VariationConfig {
            crossover_prob: 0.7,
            mutation_rate: Some(0.0),
            inversion_prob: 0.0,
        };
        let g: Vec<bool> = (0..12).map(|i| i % 3 == 0).collect();
        let mut pop = initial_population(&mut p, vec![g.clone(); 20]).unwrap();
        let mut rng = seeded(2);
        for engine in [Engine::Nsga2, Engine::Nsga3] {
            let s = Survival::new(engine, 2, 20);
            for _ in 0..5 {
                pop = moea_generation(&s, pop, &mut p, &mut rng).unwrap();
                assert!(pop.members.iter().all(|m| m.genome == g));
            }
        }
    }

    #[test]
    fn size_preserved_and_elitist_hv() {
        for (engine, seed) in [(Engine::Nsga2, 3), (Engine::Nsga3, 4), (Engine::Nsga2, 5)] {
            let mut p = knapsack(19, seed);
            let mut rng = seeded(seed);
            let size = 30 + seed as usize;
            let mut pop = random_pop(&mut p, size, &mut rng);
            let s = Survival::new(engine, 2, size);
            let mut hv = front_hv(&pop);
            for _ in 0..100 {
                pop = moea_generation(&s, pop, &mut p, &mut rng).unwrap();
                assert_eq!(pop.len(), size);
                let next = front_hv(&pop);
                if engine == Engine::Nsga2 {
                    assert!(next >= hv - 1e-12, "{engine:?}: HV dropped {hv} -> {next}");
                }
                hv = next;
            }
        }
    }

    #[test]
    fn ranks_are_consistent() {
        let mut p = knapsack(10, 6);
        let mut rng = seeded(6);
        let pop = random_pop(&mut p, 80, &mut rng);
        for i in 0..pop.len() {
            for j in 0..pop.len() {
                let (a, b) = (&pop.members[i], &pop.members[j]);
                if constrained_dominates(&a.objectives, a.cv, &b.objectives, b.cv) {
                    assert!(pop.ranks[i] < pop.ranks[j]);
                }
            }
        }
        for m in pop.feasible_front() {
            assert!(m.cv == 0.0);
            assert!(!pop
                .feasible_front()
                .iter()
                .any(|o| dominates(&o.objectives, &m.objectives)));
        }
    }

    #[test]
    fn nsga3_niches_are_balanced() {
        // 2-D points on a line front, with far more last-front points than slots.
        let mut rng = seeded(7);
        let objs: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let t: f64 = rng.random();
                vec![t, 1.0 - t]
            })
            .collect();
        let cvs = vec![0.0; 400];
        let s = Survival::new(Engine::Nsga3, 2, 20);
        assert_eq!(s.ref_dirs.len(), 20);
        let chosen = s.select(&objs, &cvs, 20, &mut rng);
        assert_eq!(chosen.len(), 20);
        let mut counts = vec![0usize; s.ref_dirs.len()];
        for &i in &chosen {
            let p: Vec<f64> = objs[i].iter().map(|v| -v).collect();
            let (j, _) = s
                .ref_dirs
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let lo = [-1.0f64, -1.0];
                    let q: Vec<f64> = p.iter().zip(lo).map(|(a, b)| a - b).collect();
                    let ww: f64 = w.iter().map(|x| x * x).sum();
                    let pr = q.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / ww;
                    let d: f64 = q.iter().zip(w).map(|(a, b)| (a - pr * b).powi(2)).sum();
                    (j, d)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            counts[j] += 1;
        }
        let nonempty: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
        let (lo, hi) = (nonempty.iter().min().unwrap(), nonempty.iter().max().unwrap());
        assert!(hi - lo <= 1, "niche counts {nonempty:?}");
    }
}
