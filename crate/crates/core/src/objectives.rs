//! Objective vector, closed-tour length and feasibility for the MO-OP.
//!
//! Objectives are kept in a single maximisation orientation: profit sums
//! followed by the negated tour length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, DEPOT};

/// Which objectives a problem variant optimises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Profit sums and tour length (one profit column in the standard set).
    Mixed,
    /// Profit sums only; the tour length is purely a constraint.
    Profits,
    /// Two profit sums and the tour length.
    ThreeObjective,
}

impl ProblemKind {
    pub fn default_for(inst: &Instance) -> Self {
        if inst.k_profits <= 1 {
            ProblemKind::Mixed
        } else {
            ProblemKind::ThreeObjective
        }
    }

    pub fn includes_length(self) -> bool {
        !matches!(self, ProblemKind::Profits)
    }

    pub fn n_objectives(self, k_profits: usize) -> usize {
        k_profits + usize::from(self.includes_length())
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "mixed" => Some(ProblemKind::Mixed),
            "profits" => Some(ProblemKind::Profits),
            "three" | "three-objective" => Some(ProblemKind::ThreeObjective),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSolution {
    /// Sorted city indices, depot included.
    pub selection: Vec<usize>,
    /// Visiting order of the non-depot cities; the route is depot → tour → depot.
    pub tour: Vec<usize>,
    pub profits: Vec<f64>,
    pub length: f64,
    pub cv: f64,
}

impl EvaluatedSolution {
    pub fn is_feasible(&self) -> bool {
        self.cv == 0.0
    }

    /// Maximisation-oriented objective vector for `kind`.
    pub fn objectives(&self, kind: ProblemKind) -> Vec<f64> {
        let mut v = self.profits.clone();
        if kind.includes_length() {
            v.push(-self.length);
        }
        v
    }

    /// The closed route with the depot at both ends.
    pub fn route(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.tour.len() + 2);
        r.push(DEPOT);
        r.extend_from_slice(&self.tour);
        r.push(DEPOT);
        r
    }
}

fn check_tour(inst: &Instance, tour: &[usize]) -> Result<()> {
    let mut seen = vec![false; inst.n_cities];
    for &c in tour {
        if c == DEPOT || c >= inst.n_cities {
            return Err(Error::Validation(format!(
                "tour index {c} is not a non-depot city of a {}-city instance",
                inst.n_cities
            )));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::Validation(format!("city {c} appears twice in the tour")));
        }
    }
    Ok(())
}

/// Length of the closed circuit depot → tour[0] → … → tour[last] → depot.
pub fn tour_length(inst: &Instance, tour: &[usize]) -> Result<f64> {
    check_tour(inst, tour)?;
    Ok(closed_length(&inst.coords, DEPOT, tour))
}

/// Closed-circuit length through `start` and `order`, without validation.
pub fn closed_length(coords: &[[f64; 2]], start: usize, order: &[usize]) -> f64 {
    let Some((&first, _)) = order.split_first() else {
        return 0.0;
    };
    let mut total = crate::instance::euclid(coords[start], coords[first]);
    for w in order.windows(2) {
        total += crate::instance::euclid(coords[w[0]], coords[w[1]]);
    }
    total + crate::instance::euclid(coords[*order.last().unwrap()], coords[start])
}

/// Per-column profit sums over the non-depot cities of `selection`, added in
/// ascending city order.
pub fn profit_objectives(inst: &Instance, selection: &[usize]) -> Result<Vec<f64>> {
    if !selection.contains(&DEPOT) {
        return Err(Error::Validation("selection must contain the depot".into()));
    }
    let mut out = vec![0.0; inst.k_profits];
    let mut seen = vec![false; inst.n_cities];
    // Ascending order makes the sums independent of how the selection is listed.
    let mut sorted = selection.to_vec();
    sorted.sort_unstable();
    for &c in &sorted {
        if c >= inst.n_cities {
            return Err(Error::Validation(format!("selection index {c} out of range")));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::Validation(format!("city {c} appears twice in the selection")));
        }
        if c == DEPOT {
            continue;
        }
        for (acc, p) in out.iter_mut().zip(&inst.profits[c]) {
            *acc += p;
        }
    }
    Ok(out)
}

/// Evaluates a (selection, tour) pair. `tour` must be a permutation of the
/// selection without the depot.
pub fn evaluate(inst: &Instance, selection: &[usize], tour: &[usize]) -> Result<EvaluatedSolution> {
    let profits = profit_objectives(inst, selection)?;
    check_tour(inst, tour)?;
    let mut sel: Vec<usize> = selection.to_vec();
    sel.sort_unstable();
    let mut from_tour: Vec<usize> = tour.to_vec();
    from_tour.push(DEPOT);
    from_tour.sort_unstable();
    if sel != from_tour {
        return Err(Error::Validation(
            "tour is not a permutation of the selection without the depot".into(),
        ));
    }
    let length = closed_length(&inst.coords, DEPOT, tour);
    Ok(EvaluatedSolution {
        selection: sel,
        tour: tour.to_vec(),
        profits,
        length,
        cv: (length - inst.t_max).max(0.0),
    })
}

/// Evaluates a tour, taking the selection to be the depot plus the tour cities.
pub fn evaluate_tour(inst: &Instance, tour: &[usize]) -> Result<EvaluatedSolution> {
    let mut selection = Vec::with_capacity(tour.len() + 1);
    selection.push(DEPOT);
    selection.extend_from_slice(tour);
    evaluate(inst, &selection, tour)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_instance;

    fn square() -> Instance {
        Instance::from_parts(
            "square",
            vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]],
            vec![vec![0.9], vec![0.2], vec![0.5], vec![0.1]],
            4.0,
        )
        .unwrap()
    }

    #[test]
    fn unit_square_circuit() {
        assert_eq!(tour_length(&square(), &[1, 2, 3]).unwrap(), 4.0);
        assert_eq!(tour_length(&square(), &[]).unwrap(), 0.0);
    }

    #[test]
    fn bad_tours_rejected() {
        assert!(tour_length(&square(), &[1, 1]).is_err());
        assert!(tour_length(&square(), &[0, 1]).is_err());
        assert!(tour_length(&square(), &[7]).is_err());
    }

    #[test]
    fn tour_length_matches_leg_by_leg_sum() {
        let inst = generate_instance(8, 1, 3.0, 11).unwrap();
        let tour = [3, 7, 1, 5, 2, 6, 4];
        let mut expected = 0.0;
        let mut prev = 0;
        for &c in tour.iter().chain(std::iter::once(&0)) {
            let dx = inst.coords[prev][0] - inst.coords[c][0];
            let dy = inst.coords[prev][1] - inst.coords[c][1];
            expected += (dx * dx + dy * dy).sqrt();
            prev = c;
        }
        assert!((tour_length(&inst, &tour).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn profit_sums() {
        let inst = Instance::from_parts(
            "p",
            vec![[0.0, 0.0], [0.1, 0.1], [0.2, 0.2]],
            vec![vec![0.7, 0.7], vec![0.2, 0.3], vec![0.5, 0.1]],
            1.0,
        )
        .unwrap();
        assert_eq!(profit_objectives(&inst, &[0]).unwrap(), vec![0.0, 0.0]);
        let p = profit_objectives(&inst, &[0, 1, 2]).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-15 && (p[1] - 0.4).abs() < 1e-15);
        assert!(profit_objectives(&inst, &[1, 2]).is_err());
    }

    #[test]
    fn profit_sums_match_column_loop() {
        let inst = generate_instance(50, 3, 3.0, 8).unwrap();
        let selection: Vec<usize> = (0..50).filter(|i| i % 3 != 1).collect();
        let got = profit_objectives(&inst, &selection).unwrap();
        for k in 0..3 {
            let mut col = 0.0;
            for &i in &selection {
                if i != 0 {
                    col += inst.profits[i][k];
                }
            }
            assert!((got[k] - col).abs() < 1e-12);
        }
    }

    #[test]
    fn depot_only_solution() {
        let e = evaluate(&square(), &[0], &[]).unwrap();
        assert_eq!(e.profits, vec![0.0]);
        assert_eq!(e.length, 0.0);
        assert_eq!(e.cv, 0.0);
        assert_eq!(e.objectives(ProblemKind::Mixed), vec![0.0, -0.0]);
        assert_eq!(e.route(), vec![0, 0]);
    }

    #[test]
    fn violation_is_excess_length() {
        // 0 -> (0, 1) -> 0 has length 2
        let inst = Instance::from_parts(
            "v",
            vec![[0.0, 0.0], [0.0, 1.0]],
            vec![vec![0.0], vec![1.0]],
            4.0,
        )
        .unwrap();
        let mut e = evaluate(&inst, &[0, 1], &[1]).unwrap();
        assert_eq!(e.cv, 0.0);
        e = evaluate(&Instance { t_max: 1.2, ..inst }, &[0, 1], &[1]).unwrap();
        assert!((e.cv - 0.8).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_selection_rejected() {
        assert!(evaluate(&square(), &[0, 1, 2], &[1]).is_err());
        assert!(evaluate(&square(), &[0, 1], &[1, 2]).is_err());
    }
}
