use moea_drl::autodiff::Gradients;
use moea_drl::dypn::{cycle_length, Actor, ActorConfig, DecodeMode, Init};
use moea_drl::exec::Exec;
use moea_drl::reinforce::{batch_gradients, train, Checkpoint, Critic, RolloutOptions, TrainConfig};
use moea_drl::rng::seeded;
use rand::Rng as _;

fn batch(m: usize, n: usize, seed: u64) -> Vec<Vec<[f64; 2]>> {
    let mut rng = seeded(seed);
    (0..m).map(|_| (0..n).map(|_| [rng.random(), rng.random()]).collect()).collect()
}

fn models(seed: u64) -> (Actor, Critic) {
    let mut rng = seeded(seed);
    let a = Actor::new(ActorConfig { hidden: 8, dynamic: true }, Init::FanIn, &mut rng);
    let c = Critic::new(8, Init::FanIn, &mut rng);
    (a, c)
}

fn opts<'a>(forced: &'a [Vec<usize>], base: Option<&'a [f64]>) -> RolloutOptions<'a> {
    RolloutOptions { dropout: 0.0, seed: 5, exec: Exec::Sequential, forced: Some(forced), baseline_override: base }
}

fn all(g: &Gradients, a: &Actor) -> Vec<f64> {
    a.params.ids().flat_map(|id| g.get(id).to_vec()).collect()
}

fn tiny() -> TrainConfig {
    TrainConfig {
        epochs: 1,
        instances_per_epoch: 6 * 16,
        batch_size: 16,
        lr: 1e-2,
        dropout: 0.0,
        cities: 8,
        hidden: 8,
        dynamic: true,
        init: Init::FanIn,
        seed: 77,
        validation_size: 32,
        validate_every: 3,
        exec: Exec::Sequential,
    }
}

#[test]
fn actor_gradient_depends_only_on_the_advantage() {
    let (actor, critic) = models(1);
    let b = batch(6, 7, 2);
    let mut rng = seeded(3);
    let tours: Vec<Vec<usize>> = b
        .iter()
        .map(|c| actor.decode_tour(c, DecodeMode::Sample, &mut rng).unwrap().order)
        .collect();
    let lengths: Vec<f64> = b.iter().zip(&tours).map(|(c, t)| cycle_length(c, t)).collect();

    // Baseline equal to the reward: zero advantage, zero actor gradient.
    let g0 = batch_gradients(&actor, &critic, &b, opts(&tours, Some(&lengths))).unwrap();
    assert!(all(&g0.actor, &actor).iter().all(|&x| x.abs() < 1e-10));

    // Lowering every baseline by c scales one fixed direction by c.
    let shifted = |c: f64| -> Vec<f64> {
        let base: Vec<f64> = lengths.iter().map(|l| l - c).collect();
        all(&batch_gradients(&actor, &critic, &b, opts(&tours, Some(&base))).unwrap().actor, &actor)
    };
    let unit = shifted(1.0);
    for c in [0.5, 3.0, -2.0] {
        for (x, u) in shifted(c).iter().zip(&unit) {
            assert!((x - c * u).abs() < 1e-10, "{x} vs {}", c * u);
        }
    }
}

#[test]
fn critic_loss_leaves_actor_gradient_alone() {
    let (actor, critic) = models(4);
    let (_, other_critic) = models(99);
    let b = batch(5, 6, 5);
    let mut rng = seeded(6);
    let tours: Vec<Vec<usize>> = b
        .iter()
        .map(|c| actor.decode_tour(c, DecodeMode::Sample, &mut rng).unwrap().order)
        .collect();
    let base = vec![2.0; 5];
    let g1 = batch_gradients(&actor, &critic, &b, opts(&tours, Some(&base))).unwrap();
    let g2 = batch_gradients(&actor, &other_critic, &b, opts(&tours, Some(&base))).unwrap();
    assert_eq!(all(&g1.actor, &actor), all(&g2.actor, &actor));
    assert_ne!(g1.critic.max_abs(), 0.0);

    // The critic's own value, used as a constant baseline, matches the default path.
    let values: Vec<f64> = b.iter().map(|c| critic.value(&actor, c).unwrap()).collect();
    let g3 = batch_gradients(&actor, &critic, &b, opts(&tours, Some(&values))).unwrap();
    let g4 = batch_gradients(&actor, &critic, &b, opts(&tours, None)).unwrap();
    for (x, y) in all(&g3.actor, &actor).iter().zip(all(&g4.actor, &actor)) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn zero_epochs_returns_the_initialisation() {
    let cfg = TrainConfig { epochs: 0, ..tiny() };
    let out = train(&cfg).unwrap();
    let mut rng = seeded(cfg.seed);
    let actor = Actor::new(ActorConfig { hidden: 8, dynamic: true }, Init::FanIn, &mut rng);
    let critic = Critic::new(8, Init::FanIn, &mut rng);
    let got = out.checkpoint.actor().unwrap();
    for ((_, a), (_, b)) in got.params.iter().zip(actor.params.iter()) {
        assert_eq!(a.value, b.value);
    }
    for ((_, a), (_, b)) in out.checkpoint.critic().unwrap().params.iter().zip(critic.params.iter()) {
        assert_eq!(a.value, b.value);
    }
    assert_eq!(out.initial_cost, out.final_cost);
}

#[test]
fn training_is_reproducible() {
    let a = train(&tiny()).unwrap();
    let b = train(&TrainConfig { exec: Exec::Parallel, ..tiny() }).unwrap();
    assert_eq!(a.checkpoint.actor, b.checkpoint.actor);
    assert_eq!(a.checkpoint.critic, b.checkpoint.critic);
    let again = train(&tiny()).unwrap();
    assert_eq!(a.checkpoint.to_json(), again.checkpoint.to_json());
    assert_eq!(a.log.len(), 7);
}

#[test]
fn short_training_does_not_regress() {
    let cfg = TrainConfig { instances_per_epoch: 30 * 32, batch_size: 32, validate_every: 10, ..tiny() };
    let out = train(&cfg).unwrap();
    assert!(out.final_cost <= out.initial_cost * 1.05, "{} -> {}", out.initial_cost, out.final_cost);
}

#[test]
fn checkpoint_round_trip_preserves_greedy_tours() {
    let out = train(&tiny()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.json");
    out.checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded, out.checkpoint);
    let (a1, a2) = (out.checkpoint.actor().unwrap(), loaded.actor().unwrap());
    for coords in batch(100, 10, 8) {
        let t1 = a1.decode_tour(&coords, DecodeMode::Greedy, &mut seeded(0)).unwrap();
        let t2 = a2.decode_tour(&coords, DecodeMode::Greedy, &mut seeded(0)).unwrap();
        assert_eq!(t1, t2);
    }
}
