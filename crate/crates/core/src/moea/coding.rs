//! Genome layouts, the profit-density initialiser and the permutation
//! decoders.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::instance::{Instance, DEPOT};
use crate::objectives::{closed_length, profit_objectives, EvaluatedSolution};
use crate::rng::Rng;

/// City-selection bits; `bits[j]` stands for city `j + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionGenome {
    pub bits: Vec<bool>,
}

impl SelectionGenome {
    pub fn empty(n_cities: usize) -> Self {
        Self {
            bits: vec![false; n_cities.saturating_sub(1)],
        }
    }

    pub fn from_cities(n_cities: usize, cities: &[usize]) -> Self {
        let mut g = Self::empty(n_cities);
        for &c in cities {
            g.bits[c - 1] = true;
        }
        g
    }

    /// Selected non-depot cities, ascending.
    pub fn cities(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j + 1)
            .collect()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// A visiting order over all non-depot cities, plus selection bits
/// (indexed like [`SelectionGenome`]) in the double-chromosome layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationGenome {
    pub order: Vec<usize>,
    pub bits: Option<Vec<bool>>,
}

impl PermutationGenome {
    pub fn random(n_cities: usize, with_bits: bool, rng: &mut Rng) -> Self {
        let mut order: Vec<usize> = (1..n_cities).collect();
        order.shuffle(rng);
        let bits = with_bits.then(|| (1..n_cities).map(|_| rng.random::<bool>()).collect());
        Self { order, bits }
    }
}

/// Softmax over the profit densities `s_j / e_ij` of `candidates` seen from
/// `current`.
pub fn selection_probabilities(inst: &Instance, current: usize, candidates: &[usize]) -> Vec<f64> {
    let dens: Vec<f64> = candidates
        .iter()
        .map(|&j| inst.total_profit(j) / inst.dist(current, j).max(1e-12))
        .collect();
    softmax(&dens)
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// One greedy individual: sample cities by profit density until the next
/// one would push the closed circuit past `t_max`.
pub fn greedy_individual(inst: &Instance, rng: &mut Rng) -> SelectionGenome {
    let mut genome = SelectionGenome::empty(inst.n_cities);
    let mut unvisited: Vec<usize> = (1..inst.n_cities).collect();
    let mut current = DEPOT;
    let mut open_len = 0.0;
    while !unvisited.is_empty() {
        let p = selection_probabilities(inst, current, &unvisited);
        let pick = crate::dypn::sample(&p, rng);
        let next = unvisited[pick];
        let step = inst.dist(current, next);
        if open_len + step + inst.dist(next, DEPOT) > inst.t_max {
            break;
        }
        open_len += step;
        genome.bits[next - 1] = true;
        current = next;
        unvisited.swap_remove(pick);
    }
    genome
}

pub fn greedy_initialize(inst: &Instance, pop_size: usize, rng: &mut Rng) -> Vec<SelectionGenome> {
    (0..pop_size).map(|_| greedy_individual(inst, rng)).collect()
}

fn solution(inst: &Instance, tour: Vec<usize>) -> EvaluatedSolution {
    let length = closed_length(&inst.coords, DEPOT, &tour);
    let mut selection = tour.clone();
    selection.push(DEPOT);
    selection.sort_unstable();
    let profits = profit_objectives(inst, &selection).expect("decoded tours hold distinct cities");
    EvaluatedSolution {
        selection,
        tour,
        profits,
        length,
        cv: (length - inst.t_max).max(0.0),
    }
}

/// Visits the permutation in order and stops at the first city whose
/// insertion would break the length budget.
pub fn decode_single_chromosome(inst: &Instance, order: &[usize]) -> EvaluatedSolution {
    let mut tour = Vec::new();
    let mut current = DEPOT;
    let mut open_len = 0.0;
    for &c in order {
        let step = inst.dist(current, c);
        if open_len + step + inst.dist(c, DEPOT) > inst.t_max {
            break;
        }
        open_len += step;
        tour.push(c);
        current = c;
    }
    solution(inst, tour)
}

/// Selected cities in permutation order; the budget is not enforced.
pub fn decode_double_chromosome(inst: &Instance, bits: &[bool], order: &[usize]) -> EvaluatedSolution {
    let tour: Vec<usize> = order.iter().copied().filter(|&c| bits[c - 1]).collect();
    solution(inst, tour)
}
