//! The MOEA-DRL loop: the evolutionary engine proposes city selections and
//! the pointer network routes them. Pure permutation-coded MOEAs share the
//! same driver.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dypn::Actor;
use crate::exec::Exec;
use crate::instance::{Instance, DEPOT};
use crate::metrics::{hypervolume, pareto_filter_indices, reference_point};
use crate::moea::{
    decode_double_chromosome, decode_single_chromosome, greedy_initialize, initial_population,
    moea_generation, vary_binary, vary_permutation, Engine, Individual, PermutationGenome,
    Population, Problem, SelectionGenome, Survival, VariationConfig,
};
use crate::objectives::{evaluate, EvaluatedSolution, ProblemKind};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub pop_size: usize,
    pub max_generations: usize,
    pub engine: Engine,
    /// Objective layout; `None` picks the instance's default.
    pub kind: Option<ProblemKind>,
    pub seed: u64,
    pub variation: VariationConfig,
    pub exec: Exec,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            pop_size: 100,
            max_generations: 20,
            engine: Engine::Nsga2,
            kind: None,
            seed: 0,
            variation: VariationConfig::default(),
            exec: Exec::default(),
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size == 0 {
            return Err(Error::InvalidArgument("population size must be positive".into()));
        }
        for (name, p) in [
            ("crossover probability", self.variation.crossover_prob),
            ("inversion probability", self.variation.inversion_prob),
            ("mutation rate", self.variation.mutation_rate.unwrap_or(0.0)),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn kind_for(&self, inst: &Instance) -> ProblemKind {
        self.kind.unwrap_or_else(|| ProblemKind::default_for(inst))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coding {
    Single,
    Double,
}

impl Coding {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "single" => Ok(Self::Single),
            "double" => Ok(Self::Double),
            other => Err(Error::InvalidArgument(format!(
                "unknown coding `{other}` (expected single or double)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::Double => "double",
        }
    }
}

/// One reported solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontEntry {
    pub objectives: Vec<f64>,
    /// Closed route, depot at both ends.
    pub route: Vec<usize>,
    pub profits: Vec<f64>,
    pub length: f64,
    pub cv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub solver: String,
    pub kind: ProblemKind,
    pub seed: u64,
    pub front: Vec<FrontEntry>,
    pub reference: Vec<f64>,
    pub hv: f64,
    /// HV of the feasible rank-0 set after the initial population and after
    /// every generation.
    pub hv_trace: Vec<f64>,
    pub evaluations: usize,
    pub seconds: f64,
}

impl RunResult {
    /// Objective columns followed by the `;`-joined route.
    pub fn front_csv(&self) -> String {
        let mut out = String::new();
        let n_obj = self.reference.len();
        let mut header: Vec<String> = Vec::new();
        let n_profit = if self.kind.includes_length() { n_obj - 1 } else { n_obj };
        for k in 0..n_profit {
            header.push(format!("profit{}", k + 1));
        }
        if self.kind.includes_length() {
            header.push("neg_length".into());
        }
        header.push("route".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for e in &self.front {
            for v in &e.objectives {
                let _ = write!(out, "{v},");
            }
            let route: Vec<String> = e.route.iter().map(|c| c.to_string()).collect();
            out.push_str(&route.join(";"));
            out.push('\n');
        }
        out
    }
}

/// Reads the objective columns of a front CSV written by [`RunResult::front_csv`]
/// (or any CSV whose numeric columns precede an optional `route` column).
pub fn read_front_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Validation("front file is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let n_obj = cols.iter().take_while(|c| **c != "route").count();
    if n_obj == 0 {
        return Err(Error::Validation("front file has no objective columns".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < n_obj {
                return Err(Error::Validation(format!(
                    "front row {} has {} fields, expected at least {n_obj}",
                    i + 2,
                    fields.len()
                )));
            }
            fields[..n_obj]
                .iter()
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| {
                        Error::Validation(format!("front row {}: `{f}` is not a number ({e})", i + 2))
                    })
                })
                .collect()
        })
        .collect()
}

/// Routes `genome`'s cities with the actor's greedy decode, depot first.
pub fn route_selection(inst: &Instance, actor: &Actor, cities: &[usize]) -> Result<Vec<usize>> {
    let mut coords = Vec::with_capacity(cities.len() + 1);
    coords.push(inst.coords[DEPOT]);
    coords.extend(cities.iter().map(|&c| inst.coords[c]));
    let order = actor.route_from_depot(&coords).map_err(|e| {
        Error::Validation(format!("decoding selection {cities:?} failed: {e}"))
    })?;
    Ok(order.into_iter().map(|p| cities[p - 1]).collect())
}

/// Selection coding evaluated through the actor, with a route cache.
pub struct SelectionProblem<'a> {
    pub inst: &'a Instance,
    pub actor: &'a Actor,
    pub kind: ProblemKind,
    pub variation: VariationConfig,
    pub exec: Exec,
    cache: HashMap<Vec<bool>, Vec<usize>>,
    pub evaluations: usize,
}

impl<'a> SelectionProblem<'a> {
    pub fn new(inst: &'a Instance, actor: &'a Actor, kind: ProblemKind, variation: VariationConfig, exec: Exec) -> Self {
        Self {
            inst,
            actor,
            kind,
            variation,
            exec,
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn cached_routes(&self) -> usize {
        self.cache.len()
    }
}

fn individual<G>(genome: G, solution: EvaluatedSolution, kind: ProblemKind) -> Individual<G> {
    Individual {
        objectives: solution.objectives(kind),
        cv: solution.cv,
        genome,
        solution,
    }
}

impl Problem for SelectionProblem<'_> {
    type Genome = SelectionGenome;

    fn evaluate(&mut self, genomes: Vec<SelectionGenome>) -> Result<Vec<Individual<SelectionGenome>>> {
        let mut missing: Vec<&Vec<bool>> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for g in &genomes {
            if !self.cache.contains_key(&g.bits) && queued.insert(&g.bits) {
                missing.push(&g.bits);
            }
        }
        let (inst, actor) = (self.inst, self.actor);
        let routed = self.exec.map(&missing, |bits| {
            let cities = SelectionGenome { bits: bits.to_vec() }.cities();
            route_selection(inst, actor, &cities)
        });
        let new: Vec<(Vec<bool>, Vec<usize>)> = missing
            .into_iter()
            .cloned()
            .zip(routed)
            .map(|(b, r)| r.map(|r| (b, r)))
            .collect::<Result<_>>()?;
        self.cache.extend(new);
        self.evaluations += genomes.len();
        genomes
            .into_iter()
            .map(|g| {
                let tour = &self.cache[&g.bits];
                let mut selection = g.cities();
                selection.push(DEPOT);
                let sol = evaluate(self.inst, &selection, tour)?;
                Ok(individual(g, sol, self.kind))
            })
            .collect()
    }

    fn vary(&self, parents: &[&SelectionGenome], rng: &mut Rng) -> Vec<SelectionGenome> {
        let bits: Vec<Vec<bool>> = parents.iter().map(|p| p.bits.clone()).collect();
        vary_binary(&bits, &self.variation, rng)
            .into_iter()
            .map(|bits| SelectionGenome { bits })
            .collect()
    }
}

/// Permutation coding decoded by budget truncation or by paired bits.
pub struct PermutationProblem<'a> {
    pub inst: &'a Instance,
    pub kind: ProblemKind,
    pub coding: Coding,
    pub variation: VariationConfig,
    pub exec: Exec,
    pub evaluations: usize,
}

impl Problem for PermutationProblem<'_> {
    type Genome = PermutationGenome;

    fn evaluate(&mut self, genomes: Vec<PermutationGenome>) -> Result<Vec<Individual<PermutationGenome>>> {
        self.evaluations += genomes.len();
        let (inst, coding) = (self.inst, self.coding);
        let sols = self.exec.map(&genomes, |g| match (coding, &g.bits) {
            (Coding::Double, Some(bits)) => decode_double_chromosome(inst, bits, &g.order),
            _ => decode_single_chromosome(inst, &g.order),
        });
        Ok(genomes
            .into_iter()
            .zip(sols)
            .map(|(g, s)| individual(g, s, self.kind))
            .collect())
    }

    fn vary(&self, parents: &[&PermutationGenome], rng: &mut Rng) -> Vec<PermutationGenome> {
        let orders: Vec<Vec<usize>> = parents.iter().map(|p| p.order.clone()).collect();
        let orders = vary_permutation(&orders, &self.variation, rng);
        let bits: Option<Vec<Vec<bool>>> = parents.iter().map(|p| p.bits.clone()).collect();
        match bits {
            Some(bits) if self.coding == Coding::Double => vary_binary(&bits, &self.variation, rng)
                .into_iter()
                .zip(orders)
                .map(|(b, order)| PermutationGenome { order, bits: Some(b) })
                .collect(),
            _ => orders
                .into_iter()
                .map(|order| PermutationGenome { order, bits: None })
                .collect(),
        }
    }
}

fn front_hv<G>(pop: &Population<G>, reference: &[f64]) -> Result<f64> {
    let pts: Vec<Vec<f64>> = pop
        .feasible_front()
        .iter()
        .map(|m| m.objectives.clone())
        .collect();
    hypervolume(&pts, reference)
}

fn drive<P: Problem>(
    problem: &mut P,
    genomes: Vec<P::Genome>,
    cfg: &HybridConfig,
    generations: usize,
    reference: &[f64],
    rng: &mut Rng,
) -> Result<(Population<P::Genome>, Vec<f64>)> {
    let survival = Survival::new(cfg.engine, reference.len(), cfg.pop_size);
    let mut pop = initial_population(problem, genomes)?;
    let mut trace = vec![front_hv(&pop, reference)?];
    for _ in 0..generations {
        pop = moea_generation(&survival, pop, problem, rng)?;
        trace.push(front_hv(&pop, reference)?);
    }
    Ok((pop, trace))
}

#[allow(clippy::too_many_arguments)]
fn finish<G>(
    solver: String,
    kind: ProblemKind,
    seed: u64,
    pop: &Population<G>,
    reference: Vec<f64>,
    hv_trace: Vec<f64>,
    evaluations: usize,
    started: Instant,
) -> Result<RunResult> {
    let members = pop.feasible_front();
    let points: Vec<Vec<f64>> = members.iter().map(|m| m.objectives.clone()).collect();
    let mut front: Vec<FrontEntry> = pareto_filter_indices(&points)
        .into_iter()
        .map(|i| {
            let s = &members[i].solution;
            FrontEntry {
                objectives: points[i].clone(),
                route: s.route(),
                profits: s.profits.clone(),
                length: s.length,
                cv: s.cv,
            }
        })
        .collect();
    front.sort_by(|a, b| {
        a.objectives
            .iter()
            .zip(&b.objectives)
            .map(|(x, y)| y.total_cmp(x))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.route.cmp(&b.route))
    });
    let hv = hypervolume(
        &front.iter().map(|e| e.objectives.clone()).collect::<Vec<_>>(),
        &reference,
    )?;
    Ok(RunResult {
        solver,
        kind,
        seed,
        front,
        reference,
        hv,
        hv_trace,
        evaluations,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Greedy initialisation, then `max_generations` rounds of evolution with
/// pointer-network routing. The initial population is evaluated before the
/// first generation, so a run examines `pop_size * (max_generations + 1)`
/// selections.
pub fn run_moea_drl(inst: &Instance, actor: &Actor, cfg: &HybridConfig) -> Result<RunResult> {
    cfg.validate()?;
    inst.validate()?;
    let started = Instant::now();
    let kind = cfg.kind_for(inst);
    let reference = reference_point(kind, inst.k_profits, inst.t_max);
    let mut rng = rng::seeded(cfg.seed);
    let genomes = greedy_initialize(inst, cfg.pop_size, &mut rng);
    let mut problem = SelectionProblem::new(inst, actor, kind, cfg.variation, cfg.exec);
    let (pop, trace) = drive(&mut problem, genomes, cfg, cfg.max_generations, &reference, &mut rng)?;
    let solver = format!("moea-drl-{}", cfg.engine.name());
    finish(solver, kind, cfg.seed, &pop, reference, trace, problem.evaluations, started)
}

/// Pure MOEA over permutation genomes, random initial population.
pub fn run_pure_moea(inst: &Instance, cfg: &HybridConfig, coding: Coding) -> Result<RunResult> {
    cfg.validate()?;
    inst.validate()?;
    let started = Instant::now();
    let kind = cfg.kind_for(inst);
    let reference = reference_point(kind, inst.k_profits, inst.t_max);
    let mut rng = rng::seeded(cfg.seed);
    let genomes = (0..cfg.pop_size)
        .map(|_| PermutationGenome::random(inst.n_cities, coding == Coding::Double, &mut rng))
        .collect();
    let mut problem = PermutationProblem {
        inst,
        kind,
        coding,
        variation: cfg.variation,
        exec: cfg.exec,
        evaluations: 0,
    };
    let (pop, trace) = drive(&mut problem, genomes, cfg, cfg.max_generations, &reference, &mut rng)?;
    let solver = format!("{}-{}-{}", cfg.engine.name(), cfg.max_generations, coding.name());
    finish(solver, kind, cfg.seed, &pop, reference, trace, problem.evaluations, started)
}

/// A solver named on the command line: `hybrid`, `hybrid-nsga3`,
/// `nsga2-500`, `nsga3-2000-double`, ...
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solver {
    Hybrid { engine: Engine },
    Pure { engine: Engine, generations: usize, coding: Coding },
}

impl Solver {
    pub fn parse(name: &str) -> Result<Self> {
        let parts: Vec<&str> = name.split('-').collect();
        let bad = || {
            Error::InvalidArgument(format!(
                "unknown solver `{name}` (expected hybrid[-nsga2|-nsga3] or nsga2|nsga3-GENS[-single|-double])"
            ))
        };
        match parts.as_slice() {
            ["hybrid"] => Ok(Self::Hybrid { engine: Engine::Nsga2 }),
            ["hybrid", e] => Ok(Self::Hybrid {
                engine: Engine::parse(e).map_err(|_| bad())?,
            }),
            [e, g, rest @ ..] if rest.len() <= 1 => Ok(Self::Pure {
                engine: Engine::parse(e).map_err(|_| bad())?,
                generations: g.parse().map_err(|_| bad())?,
                coding: match rest.first() {
                    Some(c) => Coding::parse(c).map_err(|_| bad())?,
                    None => Coding::Single,
                },
            }),
            _ => Err(bad()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Hybrid { engine } => format!("hybrid-{}", engine.name()),
            Self::Pure {
                engine,
                generations,
                coding,
            } => format!("{}-{generations}-{}", engine.name(), coding.name()),
        }
    }

    pub fn needs_actor(&self) -> bool {
        matches!(self, Self::Hybrid { .. })
    }

    /// Runs on `inst`; `base` supplies population size, seed and execution
    /// settings.
    pub fn run(&self, inst: &Instance, actor: Option<&Actor>, base: &HybridConfig) -> Result<RunResult> {
        match *self {
            Self::Hybrid { engine } => {
                let actor = actor.ok_or_else(|| {
                    Error::InvalidArgument("the hybrid solver needs a trained checkpoint".into())
                })?;
                let cfg = HybridConfig { engine, ..base.clone() };
                let mut r = run_moea_drl(inst, actor, &cfg)?;
                r.solver = self.name();
                Ok(r)
            }
            Self::Pure {
                engine,
                generations,
                coding,
            } => {
                let cfg = HybridConfig {
                    engine,
                    max_generations: generations,
                    ..base.clone()
                };
                run_pure_moea(inst, &cfg, coding)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dypn::{ActorConfig, Init};
    use crate::instance::generate_instance;
    use crate::objectives::tour_length;

    fn small_actor() -> Actor {
        let mut rng = rng::seeded(5);
        Actor::new(ActorConfig { hidden: 8, dynamic: true }, Init::FanIn, &mut rng)
    }

    #[test]
    fn empty_and_single_city_selections() {
        let inst = generate_instance(10, 1, 2.0, 1).unwrap();
        let actor = small_actor();
        let mut p = SelectionProblem::new(&inst, &actor, ProblemKind::Mixed, VariationConfig::default(), Exec::Sequential);
        let ev = p
            .evaluate(vec![SelectionGenome::empty(10), SelectionGenome::from_cities(10, &[4])])
            .unwrap();
        assert_eq!(ev[0].objectives, vec![0.0, -0.0]);
        assert_eq!(ev[0].cv, 0.0);
        assert_eq!(ev[1].solution.length, 2.0 * inst.dist(0, 4));
        assert_eq!(ev[1].solution.route(), vec![0, 4, 0]);
    }

    #[test]
    fn evaluation_count_and_zero_generations() {
        let inst = generate_instance(20, 1, 2.0, 2).unwrap();
        let actor = small_actor();
        let cfg = HybridConfig {
            pop_size: 12,
            max_generations: 3,
            seed: 9,
            ..HybridConfig::default()
        };
        let r = run_moea_drl(&inst, &actor, &cfg).unwrap();
        assert_eq!(r.evaluations, 12 * 4);
        assert_eq!(r.hv_trace.len(), 4);
        let r0 = run_moea_drl(&inst, &actor, &HybridConfig { max_generations: 0, ..cfg.clone() }).unwrap();
        assert_eq!(r0.evaluations, 12);
        assert_eq!(r0.hv, r0.hv_trace[0]);
    }

    #[test]
    fn front_entries_reevaluate_exactly() {
        let inst = generate_instance(30, 2, 3.0, 3).unwrap();
        let actor = small_actor();
        for engine in [Engine::Nsga2, Engine::Nsga3] {
            let cfg = HybridConfig {
                pop_size: 20,
                max_generations: 4,
                engine,
                seed: 1,
                ..HybridConfig::default()
            };
            let r = run_moea_drl(&inst, &actor, &cfg).unwrap();
            assert!(!r.front.is_empty());
            for e in &r.front {
                let tour = &e.route[1..e.route.len() - 1];
                let len = tour_length(&inst, tour).unwrap();
                assert_eq!(len, e.length);
                assert!(len <= inst.t_max);
                let sol = crate::objectives::evaluate_tour(&inst, tour).unwrap();
                assert_eq!(sol.objectives(r.kind), e.objectives);
            }
        }
    }

    #[test]
    fn same_seed_same_result() {
        let inst = generate_instance(25, 1, 2.0, 4).unwrap();
        let actor = small_actor();
        let cfg = HybridConfig {
            pop_size: 16,
            max_generations: 5,
            seed: 3,
            ..HybridConfig::default()
        };
        let a = run_moea_drl(&inst, &actor, &cfg).unwrap();
        let b = run_moea_drl(&inst, &actor, &HybridConfig { exec: Exec::Sequential, ..cfg }).unwrap();
        assert_eq!(a.front_csv(), b.front_csv());
        assert_eq!(a.hv_trace, b.hv_trace);
    }

    #[test]
    fn pure_codings() {
        let inst = generate_instance(20, 1, 2.0, 5).unwrap();
        let cfg = HybridConfig {
            pop_size: 20,
            max_generations: 10,
            seed: 2,
            ..HybridConfig::default()
        };
        let r = run_pure_moea(&inst, &cfg, Coding::Single).unwrap();
        assert!(!r.front.is_empty());
        assert!(r.front.iter().all(|e| e.cv == 0.0));
        let d = run_pure_moea(&inst, &cfg, Coding::Double).unwrap();
        assert!(d.front.iter().all(|e| e.cv == 0.0 && e.length <= inst.t_max));
    }

    #[test]
    fn csv_round_trip() {
        let inst = generate_instance(15, 1, 2.0, 6).unwrap();
        let cfg = HybridConfig {
            pop_size: 10,
            max_generations: 3,
            ..HybridConfig::default()
        };
        let r = run_pure_moea(&inst, &cfg, Coding::Single).unwrap();
        let csv = r.front_csv();
        assert!(csv.starts_with("profit1,neg_length,route\n"));
        let pts = read_front_csv(&csv).unwrap();
        assert_eq!(pts, r.front.iter().map(|e| e.objectives.clone()).collect::<Vec<_>>());
        assert_eq!(hypervolume(&pts, &r.reference).unwrap(), r.hv);
    }

    #[test]
    fn solver_names() {
        assert_eq!(Solver::parse("hybrid").unwrap(), Solver::Hybrid { engine: Engine::Nsga2 });
        assert_eq!(
            Solver::parse("nsga3-2000-double").unwrap(),
            Solver::Pure {
                engine: Engine::Nsga3,
                generations: 2000,
                coding: Coding::Double
            }
        );
        assert_eq!(Solver::parse("nsga2-500").unwrap().name(), "nsga2-500-single");
        assert!(Solver::parse("nsga4-5").is_err());
        assert!(Solver::parse("hybrid-x").is_err());
    }
}
