//! Orienteering / TSP instances: generation, distances and the JSON file format.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEPOT: usize = 0;

/// Tour-length budgets of the standard test grid, keyed by city count.
pub const STANDARD_BUDGETS: [(usize, f64); 6] = [
    (20, 2.0),
    (50, 3.0),
    (100, 4.0),
    (200, 6.0),
    (500, 10.0),
    (1000, 15.0),
];

/// Seed used for the standard test grid.
pub const TEST_SEED: u64 = 12345;
/// Seed used for the training distribution.
pub const TRAIN_SEED: u64 = 1234;

pub fn standard_budget(n_cities: usize) -> Option<f64> {
    STANDARD_BUDGETS
        .iter()
        .find(|(n, _)| *n == n_cities)
        .map(|&(_, t)| t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub name: String,
    pub n_cities: usize,
    pub k_profits: usize,
    pub t_max: f64,
    pub depot: usize,
    pub seed: u64,
    pub coords: Vec<[f64; 2]>,
    pub profits: Vec<Vec<f64>>,
}

impl Instance {
    /// Builds an instance from explicit data and validates it.
    pub fn from_parts(
        name: impl Into<String>,
        coords: Vec<[f64; 2]>,
        profits: Vec<Vec<f64>>,
        t_max: f64,
    ) -> Result<Self> {
        let k_profits = profits.first().map_or(0, Vec::len);
        let inst = Instance {
            name: name.into(),
            n_cities: coords.len(),
            k_profits,
            t_max,
            depot: DEPOT,
            seed: 0,
            coords,
            profits,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Error::Parse {
            what: "instance",
            field: field.to_owned(),
            message,
        };
        if self.n_cities < 2 {
            return Err(bad("n_cities", format!("need at least 2 cities, got {}", self.n_cities)));
        }
        if self.coords.len() != self.n_cities {
            return Err(bad(
                "coords",
                format!("expected {} rows, got {}", self.n_cities, self.coords.len()),
            ));
        }
        if let Some(i) = self
            .coords
            .iter()
            .position(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(bad("coords", format!("row {i} lies outside the unit square")));
        }
        if self.profits.len() != self.n_cities {
            return Err(bad(
                "profits",
                format!("expected {} rows, got {}", self.n_cities, self.profits.len()),
            ));
        }
        for (i, row) in self.profits.iter().enumerate() {
            if row.len() != self.k_profits {
                return Err(bad(
                    "profits",
                    format!("row {i} has {} entries, k_profits is {}", row.len(), self.k_profits),
                ));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(bad("profits", format!("row {i} has a value outside [0, 1]")));
            }
        }
        if self.depot != DEPOT {
            return Err(bad("depot", format!("depot must be 0, got {}", self.depot)));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(bad("t_max", format!("must be a finite nonnegative number, got {}", self.t_max)));
        }
        Ok(())
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        euclid(self.coords[i], self.coords[j])
    }

    /// Summed profit `s_j` of city `j` over all profit columns.
    pub fn total_profit(&self, j: usize) -> f64 {
        self.profits[j].iter().sum()
    }

    pub fn distance_matrix(&self) -> DistanceMatrix {
        DistanceMatrix::from_coords(&self.coords)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance =
            serde_json::from_str(text).map_err(|e| Error::from_json("instance", &e))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Draws `n_cities` uniform coordinates and `k_profits` uniform profits per
/// city (depot included) from a generator seeded with `seed`.
pub fn generate_instance(n_cities: usize, k_profits: usize, t_max: f64, seed: u64) -> Result<Instance> {
    if n_cities < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_cities must be at least 2 (got {n_cities}): there is no city to select"
        )));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_max must be finite and >= 0, got {t_max}")));
    }
    let mut rng = rng::seeded(seed);
    let coords = random_coords(&mut rng, n_cities);
    let profits = (0..n_cities)
        .map(|_| (0..k_profits).map(|_| rng.random::<f64>()).collect())
        .collect();
    Ok(Instance {
        name: format!("op{n_cities}-k{k_profits}-s{seed}"),
        n_cities,
        k_profits,
        t_max,
        depot: DEPOT,
        seed,
        coords,
        profits,
    })
}

/// Uniform coordinates in the unit square; the TSP training distribution.
pub fn random_coords(rng: &mut rng::Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

/// Dense symmetric Euclidean distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_coords(coords: &[[f64; 2]]) -> Self {
        let n = coords.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclid(coords[i], coords[j]);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        DistanceMatrix { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instance_has_requested_shape() {
        let inst = generate_instance(100, 2, 4.0, 12345).unwrap();
        assert_eq!(inst.coords.len(), 100);
        assert_eq!(inst.profits.len(), 100);
        assert!(inst.profits.iter().all(|p| p.len() == 2));
        assert_eq!(inst.t_max, 4.0);
        assert_eq!(inst.depot, 0);
        inst.validate().unwrap();
    }

    #[test]
    fn two_city_zero_budget_is_valid() {
        let inst = generate_instance(2, 1, 0.0, 7).unwrap();
        inst.validate().unwrap();
        assert_eq!(inst.n_cities, 2);
    }

    #[test]
    fn rejects_single_city() {
        assert!(matches!(generate_instance(1, 1, 1.0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_instance(50, 2, 3.0, 99).unwrap();
        let b = generate_instance(50, 2, 3.0, 99).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_instance(50, 2, 3.0, 100).unwrap();
        assert_ne!(a.coords, c.coords);
    }

    #[test]
    fn distance_matrix_basics() {
        let m = DistanceMatrix::from_coords(&[[0.0, 0.0], [0.3, 0.4]]);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);
        assert_eq!(m.get(0, 0), 0.0);
        // 3-4-5 outside the unit square is still just arithmetic
        let m = DistanceMatrix::from_coords(&[[0.0, 0.0], [3.0, 4.0]]);
        assert_eq!(m.get(0, 1), 5.0);
    }

    #[test]
    fn distance_matrix_matches_pairwise_loop() {
        let inst = generate_instance(10, 0, 1.0, 3).unwrap();
        let m = inst.distance_matrix();
        for i in 0..10 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..10 {
                let dx = inst.coords[i][0] - inst.coords[j][0];
                let dy = inst.coords[i][1] - inst.coords[j][1];
                let d = (dx * dx + dy * dy).sqrt();
                assert!((m.get(i, j) - d).abs() < 1e-15);
                assert_eq!(m.get(i, j), m.get(j, i));
                for k in 0..10 {
                    assert!(m.get(i, j) <= m.get(i, k) + m.get(k, j) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn missing_coords_names_the_field() {
        let text = r#"{"name":"x","n_cities":2,"k_profits":0,"t_max":1.0,"depot":0,"seed":0,"profits":[[],[]]}"#;
        match Instance::from_json(text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "coords"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_coordinate_is_rejected() {
        let text = r#"{"name":"x","n_cities":2,"k_profits":0,"t_max":1.0,"depot":0,"seed":0,
                       "coords":[[0,0],[1.5,0]],"profits":[[],[]]}"#;
        match Instance::from_json(text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "coords"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn hand_written_three_city_fixture() {
        let text = r#"{
            "name": "tiny",
            "n_cities": 3,
            "k_profits": 2,
            "t_max": 2.5,
            "depot": 0,
            "seed": 0,
            "coords": [[0.0, 0.0], [0.25, 0.75], [1.0, 0.5]],
            "profits": [[0.0, 0.0], [0.2, 0.3], [0.5, 0.1]]
        }"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.name, "tiny");
        assert_eq!(inst.coords[1], [0.25, 0.75]);
        assert_eq!(inst.profits[2], vec![0.5, 0.1]);
        assert_eq!(inst.t_max, 2.5);
        assert_eq!(inst.k_profits, 2);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        let inst = generate_instance(30, 2, 3.0, 5).unwrap();
        inst.save(&path).unwrap();
        assert_eq!(Instance::load(&path).unwrap(), inst);
    }
}
