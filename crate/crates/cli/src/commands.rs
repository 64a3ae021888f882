use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use moea_drl::dypn::{Actor, Init};
use moea_drl::exec::Exec;
use moea_drl::hybrid::{read_front_csv, run_moea_drl, run_pure_moea, Coding, HybridConfig, RunResult, Solver};
use moea_drl::instance::{generate_instance, standard_budget, Instance, STANDARD_BUDGETS};
use moea_drl::metrics::{hypervolume, preset_names, reference_preset};
use moea_drl::moea::Engine;
use moea_drl::objectives::ProblemKind;
use moea_drl::reinforce::{log_csv, train_with, Checkpoint, TrainConfig, CHECKPOINT_VERSION};

use crate::args::*;

/// Everything needed to re-run a command.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub invocation: Command,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<PathBuf>,
    pub versions: BTreeMap<String, String>,
    pub wall_seconds: f64,
}

#[derive(Default)]
struct Outcome {
    seeds: Vec<u64>,
    artifacts: Vec<PathBuf>,
}

impl Outcome {
    fn write(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        write_checked(&path, contents)?;
        self.artifacts.push(path);
        Ok(())
    }
}

/// Writes `contents` and reads it back.
fn write_checked(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    let back = fs::read_to_string(path).with_context(|| format!("reading back {}", path.display()))?;
    ensure!(back == contents, "{} changed while being written", path.display());
    Ok(())
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("moea-drl".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("checkpoint-format".to_string(), CHECKPOINT_VERSION.to_string()),
    ])
}

fn out_dir(cmd: &Command) -> Option<PathBuf> {
    match cmd {
        Command::Generate(a) => Some(a.out.clone()),
        Command::Train(a) => Some(a.out.clone()),
        Command::Solve(a) => Some(a.run.out.clone()),
        Command::Baseline(a) => Some(a.run.out.clone()),
        Command::Benchmark(a) => Some(a.out.clone()),
        Command::Hv(a) => a.out.clone(),
        Command::Replay(_) => None,
    }
}

fn redirect(cmd: &mut Command, out: PathBuf) {
    match cmd {
        Command::Generate(a) => a.out = out,
        Command::Train(a) => a.out = out,
        Command::Solve(a) => a.run.out = out,
        Command::Baseline(a) => a.run.out = out,
        Command::Benchmark(a) => a.out = out,
        Command::Hv(a) => a.out = Some(out),
        Command::Replay(_) => {}
    }
}

pub fn run(cmd: Command) -> Result<()> {
    if let Command::Replay(r) = &cmd {
        let text = fs::read_to_string(&r.manifest)
            .with_context(|| format!("reading manifest {}", r.manifest.display()))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", r.manifest.display()))?;
        let mut inner = manifest.invocation;
        if matches!(inner, Command::Replay(_)) {
            bail!("manifest {} records a replay, not a runnable command", r.manifest.display());
        }
        if let Some(out) = &r.out {
            redirect(&mut inner, out.clone());
        }
        return run(inner);
    }

    let started = Instant::now();
    let mut outcome = match &cmd {
        Command::Generate(a) => generate(a)?,
        Command::Train(a) => train(a)?,
        Command::Solve(a) => solve(a)?,
        Command::Baseline(a) => baseline(a)?,
        Command::Benchmark(a) => benchmark(a)?,
        Command::Hv(a) => hv(a)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    if let Some(dir) = out_dir(&cmd) {
        let manifest = Manifest {
            command: cmd.name().to_string(),
            seeds: std::mem::take(&mut outcome.seeds),
            artifacts: std::mem::take(&mut outcome.artifacts),
            invocation: cmd,
            versions: versions(),
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        let path = dir.join("manifest.json");
        write_checked(&path, &serde_json::to_string_pretty(&manifest)?)?;
        eprintln!("manifest: {}", path.display());
    }
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<Outcome> {
    let sizes: Vec<usize> = if a.cities.is_empty() {
        STANDARD_BUDGETS.iter().map(|(n, _)| *n).collect()
    } else {
        a.cities.clone()
    };
    let mut out = Outcome {
        seeds: vec![a.seed_base],
        ..Outcome::default()
    };
    for &n in &sizes {
        let t_max = match a.tmax.or_else(|| standard_budget(n)) {
            Some(t) => t,
            None => bail!("no standard budget for {n} cities; pass --tmax"),
        };
        for &k in &a.profits {
            let inst = generate_instance(n, k, t_max, a.seed_base)?;
            let path = a.out.join(format!("{}.json", inst.name));
            out.write(path.clone(), &inst.to_json())?;
            println!("{}", path.display());
        }
    }
    Ok(out)
}

fn train(a: &TrainArgs) -> Result<Outcome> {
    let mut cfg = match a.preset {
        PresetArg::Desk => TrainConfig::desk(),
        PresetArg::Full => TrainConfig::full_scale(),
    };
    if let Some(v) = a.cities {
        cfg.cities = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.instances {
        cfg.instances_per_epoch = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.dropout {
        cfg.dropout = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = a.init {
        cfg.init = match v {
            InitArg::Unit => Init::Unit,
            InitArg::FanIn => Init::FanIn,
        };
    }
    if a.no_dynamic {
        cfg.dynamic = false;
    }
    if let Some(v) = a.validation_size {
        cfg.validation_size = v;
    }
    if let Some(v) = a.validate_every {
        cfg.validate_every = v;
    }
    if let Some(v) = a.seed_base {
        cfg.seed = v;
    }
    if a.sequential {
        cfg.exec = Exec::Sequential;
    }
    let total = cfg.epochs * cfg.batches_per_epoch();
    let outcome = train_with(&cfg, |row| {
        if let Some(c) = row.validation_cost {
            eprintln!("batch {:>6}/{total}  validation cost {c:.4}", row.batch);
        }
    })?;
    let mut out = Outcome {
        seeds: vec![cfg.seed],
        ..Outcome::default()
    };
    let ck_path = a.out.join("checkpoint.json");
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    outcome.checkpoint.save(&ck_path)?;
    Checkpoint::load(&ck_path).context("re-reading the written checkpoint")?;
    out.artifacts.push(ck_path);
    out.write(a.out.join("train_log.csv"), &log_csv(&outcome.log))?;
    println!(
        "validation cost {:.4} -> {:.4}",
        outcome.initial_cost, outcome.final_cost
    );
    Ok(out)
}

fn kind(arg: Option<KindArg>) -> Option<ProblemKind> {
    arg.map(|k| match k {
        KindArg::Mixed => ProblemKind::Mixed,
        KindArg::Profits => ProblemKind::Profits,
        KindArg::Three => ProblemKind::ThreeObjective,
    })
}

fn engine(arg: EngineArg) -> Engine {
    match arg {
        EngineArg::Nsga2 => Engine::Nsga2,
        EngineArg::Nsga3 => Engine::Nsga3,
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::load(path).with_context(|| format!("loading instance {}", path.display()))
}

fn load_actor(path: &Path) -> Result<Actor> {
    if !path.exists() {
        bail!(
            "checkpoint {} does not exist; create one with `moea-drl train --out DIR`",
            path.display()
        );
    }
    let ck = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok(ck.actor()?)
}

fn run_config(r: &RunArgs) -> HybridConfig {
    HybridConfig {
        pop_size: r.pop,
        max_generations: r.gens,
        engine: engine(r.engine),
        kind: kind(r.kind),
        seed: r.seed_base,
        exec: if r.sequential { Exec::Sequential } else { Exec::Parallel },
        ..HybridConfig::default()
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    instance: &'a Path,
    solver: &'a str,
    kind: ProblemKind,
    seed: u64,
    reference: &'a [f64],
    hv: f64,
    front_size: usize,
    evaluations: usize,
    seconds: f64,
    config: &'a HybridConfig,
}

fn hv_trace_csv(r: &RunResult) -> String {
    let mut s = String::from("generation,hv\n");
    for (g, v) in r.hv_trace.iter().enumerate() {
        s.push_str(&format!("{g},{v}\n"));
    }
    s
}

fn write_run(dir: &Path, instance: &Path, cfg: &HybridConfig, r: &RunResult) -> Result<Outcome> {
    let mut out = Outcome {
        seeds: vec![r.seed],
        ..Outcome::default()
    };
    let front = dir.join("front.csv");
    out.write(front.clone(), &r.front_csv())?;
    let reread = read_front_csv(&fs::read_to_string(&front)?)?;
    ensure!(reread.len() == r.front.len(), "front file {} did not round-trip", front.display());
    out.write(dir.join("hv_trace.csv"), &hv_trace_csv(r))?;
    let summary = RunSummary {
        instance,
        solver: &r.solver,
        kind: r.kind,
        seed: r.seed,
        reference: &r.reference,
        hv: r.hv,
        front_size: r.front.len(),
        evaluations: r.evaluations,
        seconds: r.seconds,
        config: cfg,
    };
    out.write(dir.join("run.json"), &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "{}: {} solutions, HV {:?}, {} evaluations, {:.2}s",
        r.solver,
        r.front.len(),
        r.hv,
        r.evaluations,
        r.seconds
    );
    Ok(out)
}

fn solve(a: &SolveArgs) -> Result<Outcome> {
    let inst = load_instance(&a.run.instance)?;
    let actor = load_actor(&a.checkpoint)?;
    let cfg = run_config(&a.run);
    let r = run_moea_drl(&inst, &actor, &cfg)?;
    write_run(&a.run.out, &a.run.instance, &cfg, &r)
}

fn baseline(a: &BaselineArgs) -> Result<Outcome> {
    let inst = load_instance(&a.run.instance)?;
    let cfg = run_config(&a.run);
    let coding = match a.coding {
        CodingArg::Single => Coding::Single,
        CodingArg::Double => Coding::Double,
    };
    let r = run_pure_moea(&inst, &cfg, coding)?;
    write_run(&a.run.out, &a.run.instance, &cfg, &r)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn benchmark(a: &BenchmarkArgs) -> Result<Outcome> {
    ensure!(a.seeds > 0, "--seeds must be positive");
    ensure!(a.jobs > 0, "--jobs must be positive");
    let solvers: Vec<Solver> = a.solvers.iter().map(|s| Solver::parse(s)).collect::<Result<_, _>>()?;
    let actor = if solvers.iter().any(Solver::needs_actor) {
        let path = a
            .checkpoint
            .as_ref()
            .context("a hybrid solver was requested; pass --checkpoint PATH")?;
        Some(load_actor(path)?)
    } else {
        None
    };
    let instances: Vec<(PathBuf, Instance)> = a
        .instance
        .iter()
        .map(|p| Ok((p.clone(), load_instance(p)?)))
        .collect::<Result<_>>()?;

    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| a.seed_base + i).collect();
    let mut tasks = Vec::new();
    for (ii, _) in instances.iter().enumerate() {
        for (si, _) in solvers.iter().enumerate() {
            for &seed in &seeds {
                tasks.push((ii, si, seed));
            }
        }
    }
    let exec = if a.jobs > 1 { Exec::Sequential } else { Exec::Parallel };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .context("building the worker pool")?;
    let results: Vec<RunResult> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ii, si, seed)| {
                let base = HybridConfig {
                    pop_size: a.pop,
                    max_generations: a.gens,
                    kind: kind(a.kind),
                    seed,
                    exec,
                    ..HybridConfig::default()
                };
                solvers[si].run(&instances[ii].1, actor.as_ref(), &base)
            })
            .collect::<Result<_, _>>()
    })?;

    let mut out = Outcome {
        seeds: seeds.clone(),
        ..Outcome::default()
    };
    let mut runs = String::from("instance,solver,seed,hv,front_size,evaluations,seconds\n");
    let mut table: BTreeMap<(usize, usize), Vec<&RunResult>> = BTreeMap::new();
    for (&(ii, si, seed), r) in tasks.iter().zip(&results) {
        let name = &instances[ii].1.name;
        let solver = solvers[si].name();
        out.write(
            a.out.join("fronts").join(name).join(&solver).join(format!("seed-{seed}.csv")),
            &r.front_csv(),
        )?;
        runs.push_str(&format!(
            "{name},{solver},{seed},{},{},{},{:.3}\n",
            r.hv,
            r.front.len(),
            r.evaluations,
            r.seconds
        ));
        table.entry((ii, si)).or_default().push(r);
    }
    out.write(a.out.join("runs.csv"), &runs)?;

    let mut summary = String::from("instance,solver,runs,median_hv,mean_hv,median_seconds,mean_seconds\n");
    println!(
        "{:<24} {:<22} {:>5} {:>12} {:>12} {:>10}",
        "instance", "solver", "runs", "median HV", "mean HV", "median s"
    );
    for ((ii, si), rs) in &table {
        let hvs: Vec<f64> = rs.iter().map(|r| r.hv).collect();
        let secs: Vec<f64> = rs.iter().map(|r| r.seconds).collect();
        let name = &instances[*ii].1.name;
        let solver = solvers[*si].name();
        summary.push_str(&format!(
            "{name},{solver},{},{},{},{:.3},{:.3}\n",
            rs.len(),
            median(&hvs),
            mean(&hvs),
            median(&secs),
            mean(&secs)
        ));
        println!(
            "{:<24} {:<22} {:>5} {:>12.4} {:>12.4} {:>10.2}",
            name,
            solver,
            rs.len(),
            median(&hvs),
            mean(&hvs),
            median(&secs)
        );
    }
    out.write(a.out.join("summary.csv"), &summary)?;
    Ok(out)
}

fn hv(a: &HvArgs) -> Result<Outcome> {
    let reference = match (&a.reference, &a.ref_preset) {
        (Some(r), _) => r.clone(),
        (None, Some(name)) => match reference_preset(name) {
            Some(r) => r,
            None => bail!(
                "unknown reference preset `{name}`; known presets: {}",
                preset_names().join(", ")
            ),
        },
        (None, None) => bail!("pass --ref-preset NAME or --ref X,Y[,Z]"),
    };
    let text = fs::read_to_string(&a.front).with_context(|| format!("reading {}", a.front.display()))?;
    let front = read_front_csv(&text)?;
    if let Some(p) = front.first() {
        ensure!(
            p.len() == reference.len(),
            "front has {} objective columns but the reference point has {}",
            p.len(),
            reference.len()
        );
    }
    let value = hypervolume(&front, &reference)?;
    println!("{value:?}");
    let mut out = Outcome::default();
    if let Some(dir) = &a.out {
        out.write(dir.join("hv.txt"), &format!("{value:?}\n"))?;
    }
    Ok(out)
}
