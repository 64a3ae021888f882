//! REINFORCE training of the pointer network with a learned critic baseline,
//! plus checkpoint I/O.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Gradients, ParamId, ParamSet, Tape, Tensor, Var};
use crate::dypn::{check_layout, cycle_length, Actor, ActorConfig, DecodeMode, Init};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::instance::{random_coords, TRAIN_SEED};
use crate::rng::{self, stream_seed};

pub const CRITIC_WIDTH: usize = 20;
pub const CHECKPOINT_VERSION: u32 = 1;

const VALIDATION_STREAM: u64 = u64::MAX;
const ROLLOUT_SALT: u64 = 0x0005_eed0_fa11;

pub fn critic_layout(d: usize) -> Vec<(&'static str, usize, usize, usize)> {
    vec![
        ("critic.l1.w", 2 * d, CRITIC_WIDTH, 2 * d),
        ("critic.l1.b", 1, CRITIC_WIDTH, 2 * d),
        ("critic.l2.w", CRITIC_WIDTH, CRITIC_WIDTH, CRITIC_WIDTH),
        ("critic.l2.b", 1, CRITIC_WIDTH, CRITIC_WIDTH),
        ("critic.l3.w", CRITIC_WIDTH, 1, CRITIC_WIDTH),
        ("critic.l3.b", 1, 1, CRITIC_WIDTH),
    ]
}

/// Critic network φ: three pointwise layers (2d → 20 → 20 → 1) with rectifiers
/// between them, summed over cities.
#[derive(Clone, Debug)]
pub struct Critic {
    pub hidden: usize,
    pub params: ParamSet,
    ids: [ParamId; 6],
}

impl Critic {
    pub fn new(hidden: usize, init: Init, rng: &mut rng::Rng) -> Self {
        let mut params = ParamSet::new();
        for (name, r, c, fan_in) in critic_layout(hidden) {
            params.add_uniform(name, r, c, init.bound(fan_in), rng);
        }
        Self::from_params(hidden, params).expect("layout is consistent")
    }

    pub fn from_params(hidden: usize, params: ParamSet) -> Result<Self> {
        check_layout(&params, &critic_layout(hidden), "critic")?;
        let ids: Vec<ParamId> = params.ids().collect();
        Ok(Critic {
            hidden,
            params,
            ids: ids.try_into().expect("six tensors"),
        })
    }

    /// Per-city critic input `[s̄ ; d̄_0]` (n × 2d) built from the actor's
    /// encoders. It enters the critic as a constant, so critic gradients never
    /// reach actor parameters.
    pub fn input(actor: &Actor, coords: &[[f64; 2]]) -> Tensor {
        let d = actor.hidden();
        let s = actor.static_embed(coords);
        let dy = actor.dynamic_embed(&vec![0.0; coords.len()]);
        let mut data = Vec::with_capacity(coords.len() * 2 * d);
        for i in 0..coords.len() {
            data.extend_from_slice(s.row_slice(i));
            data.extend_from_slice(dy.row_slice(i));
        }
        Tensor::new(coords.len(), 2 * d, data).expect("non-empty")
    }

    /// Records V(r; φ) onto `tape` for a prepared critic input.
    pub fn value_on_tape(&self, tape: &mut Tape, input: Tensor) -> Result<Var> {
        let x = tape.constant(input);
        let p: Vec<Var> = self.ids.iter().map(|&id| tape.param(&self.params, id)).collect();
        let h = tape.pointwise(x, p[0], p[1])?;
        let h = tape.relu(h);
        let h = tape.pointwise(h, p[2], p[3])?;
        let h = tape.relu(h);
        let per_city = tape.pointwise(h, p[4], p[5])?;
        Ok(tape.sum(per_city))
    }

    pub fn value(&self, actor: &Actor, coords: &[[f64; 2]]) -> Result<f64> {
        let mut tape = Tape::new();
        let v = self.value_on_tape(&mut tape, Self::input(actor, coords))?;
        Ok(tape.value(v).item())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Instances per epoch; rounded down to whole batches.
    pub instances_per_epoch: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub dropout: f64,
    pub cities: usize,
    pub hidden: usize,
    pub dynamic: bool,
    pub init: Init,
    pub seed: u64,
    pub validation_size: usize,
    /// Validate every this many batches (and after the last one).
    pub validate_every: usize,
    pub exec: Exec,
}

impl TrainConfig {
    /// Full-scale settings: 10 epochs × 1,280,000 100-city instances.
    pub fn full_scale() -> Self {
        TrainConfig {
            epochs: 10,
            instances_per_epoch: 1_280_000,
            batch_size: 64,
            lr: 1e-4,
            dropout: 0.1,
            cities: 100,
            hidden: 128,
            dynamic: true,
            init: Init::Unit,
            seed: TRAIN_SEED,
            validation_size: 256,
            validate_every: 100,
            exec: Exec::default(),
        }
    }

    /// Single-core desk scale: 200 batches of 128 20-city instances.
    pub fn desk() -> Self {
        TrainConfig {
            epochs: 1,
            instances_per_epoch: 200 * 128,
            batch_size: 128,
            lr: 1e-2,
            dropout: 0.1,
            cities: 20,
            hidden: 32,
            dynamic: true,
            init: Init::FanIn,
            seed: TRAIN_SEED,
            validation_size: 256,
            validate_every: 20,
            exec: Exec::default(),
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.instances_per_epoch / self.batch_size
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("cities", self.cities),
            ("hidden", self.hidden),
            ("validation_size", self.validation_size),
            ("validate_every", self.validate_every),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub mean_reward: f64,
    pub mean_baseline: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

/// Gradients of one REINFORCE batch, before any optimiser step.
pub struct BatchGradients {
    pub actor: Gradients,
    pub critic: Gradients,
    pub stats: BatchStats,
    pub tours: Vec<Vec<usize>>,
}

/// Per-instance contribution to a batch.
struct Rollout {
    actor: Gradients,
    critic: Gradients,
    reward: f64,
    baseline: f64,
    log_prob: f64,
    tour: Vec<usize>,
}

/// Knobs for [`batch_gradients`].
#[derive(Clone, Copy, Debug)]
pub struct RolloutOptions<'a> {
    pub dropout: f64,
    pub seed: u64,
    pub exec: Exec,
    /// Teacher-forced tours, one per instance (for gradient checks).
    pub forced: Option<&'a [Vec<usize>]>,
    /// Replaces the critic's V with this constant per instance.
    pub baseline_override: Option<&'a [f64]>,
}

/// Samples one tour per instance and computes
/// `dθ = 1/M Σ (L − V) ∇θ log p(π|r)` and `dφ = 1/M Σ ∇φ (L − V)²`,
/// with V held constant in the actor term.
pub fn batch_gradients(
    actor: &Actor,
    critic: &Critic,
    batch: &[Vec<[f64; 2]>],
    opts: RolloutOptions<'_>,
) -> Result<BatchGradients> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    let m = batch.len() as f64;
    let results = opts.exec.map_indexed(batch.len(), |i| -> Result<Rollout> {
        let coords = &batch[i];
        let mut rng = rng::seeded(stream_seed(opts.seed, i as u64));
        let mut tape = Tape::new();
        let forced = opts.forced.map(|f| f[i].as_slice());
        let roll = actor.rollout(&mut tape, coords, DecodeMode::Sample, forced, opts.dropout, &mut rng)?;
        let reward = cycle_length(coords, &roll.tour);

        let mut ctape = Tape::new();
        let v = critic.value_on_tape(&mut ctape, Critic::input(actor, coords))?;
        let baseline = match opts.baseline_override {
            Some(b) => b[i],
            None => ctape.value(v).item(),
        };
        let advantage = reward - baseline;

        let log_prob = tape.value(roll.log_prob).item();
        let actor_obj = tape.scale(roll.log_prob, advantage / m);
        let mut ga = actor.params.zero_grads();
        tape.backward(actor_obj, &mut ga)?;

        let target = ctape.constant(Tensor::scalar(reward));
        let se = ctape.squared_error(v, target)?;
        let critic_obj = ctape.scale(se, 1.0 / m);
        let mut gc = critic.params.zero_grads();
        ctape.backward(critic_obj, &mut gc)?;

        Ok(Rollout {
            actor: ga,
            critic: gc,
            reward,
            baseline,
            log_prob,
            tour: roll.tour,
        })
    });

    let mut actor_g = actor.params.zero_grads();
    let mut critic_g = critic.params.zero_grads();
    let mut stats = BatchStats {
        mean_reward: 0.0,
        mean_baseline: 0.0,
        actor_loss: 0.0,
        critic_loss: 0.0,
    };
    let mut tours = Vec::with_capacity(batch.len());
    for r in results {
        let r = r?;
        actor_g.add_assign(&r.actor);
        critic_g.add_assign(&r.critic);
        let adv = r.reward - r.baseline;
        stats.mean_reward += r.reward / m;
        stats.mean_baseline += r.baseline / m;
        stats.actor_loss += adv * r.log_prob / m;
        stats.critic_loss += adv * adv / m;
        tours.push(r.tour);
    }
    Ok(BatchGradients {
        actor: actor_g,
        critic: critic_g,
        stats,
        tours,
    })
}

/// Actor and critic together with their optimiser state.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub actor: Actor,
    pub critic: Critic,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
}

impl Trainer {
    pub fn new(actor: Actor, critic: Critic, lr: f64) -> Self {
        let cfg = AdamConfig { lr, ..AdamConfig::default() };
        Trainer {
            actor_opt: AdamState::new(&actor.params, cfg.clone()),
            critic_opt: AdamState::new(&critic.params, cfg),
            actor,
            critic,
        }
    }

    /// One REINFORCE update on `batch`: gradients, then an Adam step for each
    /// network.
    pub fn reinforce_batch(&mut self, batch: &[Vec<[f64; 2]>], dropout: f64, seed: u64, exec: Exec) -> Result<BatchStats> {
        let opts = RolloutOptions {
            dropout,
            seed,
            exec,
            forced: None,
            baseline_override: None,
        };
        let mut g = batch_gradients(&self.actor, &self.critic, batch, opts)?;
        self.actor_opt.step(&mut self.actor.params, &mut g.actor)?;
        self.critic_opt.step(&mut self.critic.params, &mut g.critic)?;
        Ok(g.stats)
    }
}

/// Mean greedy tour length over `set`.
pub fn greedy_cost(actor: &Actor, set: &[Vec<[f64; 2]>], exec: Exec) -> Result<f64> {
    let lens = exec.map(set, |coords| -> Result<f64> {
        let t = actor.decode_tour(coords, DecodeMode::Greedy, &mut rng::seeded(0))?;
        Ok(cycle_length(coords, &t.order))
    });
    let mut total = 0.0;
    for l in lens {
        total += l?;
    }
    Ok(total / set.len() as f64)
}

pub fn validation_set(cfg: &TrainConfig) -> Vec<Vec<[f64; 2]>> {
    let mut rng = rng::stream(cfg.seed, VALIDATION_STREAM);
    (0..cfg.validation_size)
        .map(|_| random_coords(&mut rng, cfg.cities))
        .collect()
}

fn training_batch(cfg: &TrainConfig, global_batch: usize) -> Vec<Vec<[f64; 2]>> {
    let mut rng = rng::stream(cfg.seed, global_batch as u64);
    (0..cfg.batch_size)
        .map(|_| random_coords(&mut rng, cfg.cities))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub batch: usize,
    pub mean_reward: f64,
    pub critic_loss: f64,
    pub validation_cost: Option<f64>,
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from("batch,mean_reward,critic_loss,validation_cost\n");
    for r in rows {
        let v = r.validation_cost.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.batch, r.mean_reward, r.critic_loss, v));
    }
    out
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Row 0 is the untrained model (validation only).
    pub log: Vec<LogRow>,
    pub initial_cost: f64,
    pub final_cost: f64,
}

/// Runs `epochs × batches_per_epoch` REINFORCE batches on freshly sampled
/// uniform instances, validating greedily on a held-out set.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(cfg, |_| {})
}

/// [`train`] with a callback invoked after every logged batch.
pub fn train_with(cfg: &TrainConfig, mut on_row: impl FnMut(&LogRow)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut init_rng = rng::seeded(cfg.seed);
    let actor_cfg = ActorConfig {
        hidden: cfg.hidden,
        dynamic: cfg.dynamic,
    };
    let actor = Actor::new(actor_cfg, cfg.init, &mut init_rng);
    let critic = Critic::new(cfg.hidden, cfg.init, &mut init_rng);
    let mut trainer = Trainer::new(actor, critic, cfg.lr);

    let valid = validation_set(cfg);
    let initial_cost = greedy_cost(&trainer.actor, &valid, cfg.exec)?;
    let mut log = vec![LogRow {
        batch: 0,
        mean_reward: f64::NAN,
        critic_loss: f64::NAN,
        validation_cost: Some(initial_cost),
    }];
    on_row(&log[0]);

    let per_epoch = cfg.batches_per_epoch();
    let total = cfg.epochs * per_epoch;
    let mut last_cost = initial_cost;
    for b in 0..total {
        let batch = training_batch(cfg, b);
        let stats = trainer.reinforce_batch(
            &batch,
            cfg.dropout,
            stream_seed(cfg.seed ^ ROLLOUT_SALT, b as u64),
            cfg.exec,
        )?;
        if !(stats.mean_reward.is_finite()
            && stats.critic_loss.is_finite()
            && stats.actor_loss.is_finite()
            && trainer.actor.params.all_finite()
            && trainer.critic.params.all_finite())
        {
            return Err(Error::NonFinite {
                batch: b + 1,
                detail: format!(
                    "stats {stats:?}; actor finite: {}; critic finite: {}",
                    trainer.actor.params.all_finite(),
                    trainer.critic.params.all_finite()
                ),
            });
        }
        let validation_cost = if (b + 1) % cfg.validate_every == 0 || b + 1 == total {
            last_cost = greedy_cost(&trainer.actor, &valid, cfg.exec)?;
            Some(last_cost)
        } else {
            None
        };
        let row = LogRow {
            batch: b + 1,
            mean_reward: stats.mean_reward,
            critic_loss: stats.critic_loss,
            validation_cost,
        };
        on_row(&row);
        log.push(row);
    }

    let checkpoint = Checkpoint::from_models(
        &trainer.actor,
        &trainer.critic,
        cfg.cities,
        cfg.seed,
        TrainingMeta {
            epochs_seen: cfg.epochs,
            batches_seen: total,
            config: Some(cfg.clone()),
        },
    );
    Ok(TrainOutcome {
        checkpoint,
        log,
        initial_cost,
        final_cost: last_cost,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub d_h: usize,
    pub train_city_count: usize,
    pub seed: u64,
    pub dynamic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_seen: usize,
    pub batches_seen: usize,
    pub config: Option<TrainConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub actor: Vec<ParamBlock>,
    pub critic: Vec<ParamBlock>,
    pub meta: TrainingMeta,
}

fn to_blocks(params: &ParamSet) -> Vec<ParamBlock> {
    params
        .iter()
        .map(|(_, p)| ParamBlock {
            name: p.name.clone(),
            shape: p.value.shape(),
            data: p.value.data().to_vec(),
        })
        .collect()
}

fn from_blocks(blocks: &[ParamBlock]) -> Result<ParamSet> {
    let mut set = ParamSet::new();
    for b in blocks {
        let t = Tensor::new(b.shape[0], b.shape[1], b.data.clone()).map_err(|_| {
            Error::Checkpoint(format!(
                "tensor `{}` declares shape {:?} but holds {} values",
                b.name,
                b.shape,
                b.data.len()
            ))
        })?;
        if set.id(&b.name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor `{}`", b.name)));
        }
        set.add(b.name.clone(), t);
    }
    Ok(set)
}

impl Checkpoint {
    pub fn from_models(actor: &Actor, critic: &Critic, train_city_count: usize, seed: u64, meta: TrainingMeta) -> Self {
        Checkpoint {
            header: CheckpointHeader {
                version: CHECKPOINT_VERSION,
                d_h: actor.hidden(),
                train_city_count,
                seed,
                dynamic: actor.config.dynamic,
            },
            actor: to_blocks(&actor.params),
            critic: to_blocks(&critic.params),
            meta,
        }
    }

    pub fn actor(&self) -> Result<Actor> {
        self.actor_expecting(self.header.d_h)
    }

    /// Rebuilds the actor, requiring the tensors to fit width `hidden`.
    pub fn actor_expecting(&self, hidden: usize) -> Result<Actor> {
        let cfg = ActorConfig {
            hidden,
            dynamic: self.header.dynamic,
        };
        Actor::from_params(cfg, from_blocks(&self.actor)?)
    }

    pub fn critic(&self) -> Result<Critic> {
        Critic::from_params(self.header.d_h, from_blocks(&self.critic)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::from_json("checkpoint", &e))?;
        if ck.header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (this build reads version {CHECKPOINT_VERSION})",
                ck.header.version
            )));
        }
        // Validate both networks against the declared width up front.
        ck.actor()?;
        ck.critic()?;
        Ok(ck)
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_json()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
