use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smoothlab_core::agents::{
    actor_loss_with_regularizer, critic_loss_and_grads, standard_normal, ActorInputs, Agent, AgentConfig, Algorithm,
    CriticReduce, Policy, PolicyKind, TripleBatch, UpdateRngs,
};
use smoothlab_core::optim::{adam_step_net, AdamConfig, AdamState};
use smoothlab_core::rng::{stream, Stream};
use smoothlab_core::smoothness::temporal_term_grad;
use smoothlab_core::{
    ActionBounds, Activation, DenseNet, Error, OutputActivation, RegularizerKind, RegularizerSpec, Tensor2,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn batch(seed: u64, n: usize, obs: usize, act: usize) -> TripleBatch {
    let mut r = rng(seed);
    let mut t =
        |rows, cols| Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
    let s_prev = t(n, obs);
    let s = t(n, obs);
    let a = t(n, act);
    let s_next = t(n, obs);
    let rew = t(n, 1).into_vec();
    TripleBatch { s_prev: Some(s_prev), s, a, r: rew, s_next, done: vec![false; n] }
}

fn small_config(algorithm: Algorithm) -> AgentConfig {
    let mut c = AgentConfig::new(algorithm);
    c.hidden = vec![16, 16];
    c.batch_size = 8;
    c
}

fn agent(algorithm: Algorithm, cfg: impl FnOnce(&mut AgentConfig), reg: RegularizerSpec) -> Agent {
    let mut c = small_config(algorithm);
    cfg(&mut c);
    Agent::new(2, ActionBounds::symmetric(1, 2.0).unwrap(), c, reg, &mut stream(5, Stream::Init)).unwrap()
}

fn run_updates(a: &mut Agent, steps: u64) -> Vec<f64> {
    let (mut pn, mut sp) = (stream(5, Stream::PolicyNoise), stream(5, Stream::Spatial));
    let mut losses = Vec::new();
    for i in 0..steps {
        let d = a.update(&batch(100 + i, 8, 2, 1), UpdateRngs { policy_noise: &mut pn, spatial: &mut sp }).unwrap();
        losses.push(d.critic_loss);
    }
    losses
}

#[test]
fn tau_one_copies_online_into_targets() {
    for alg in [Algorithm::Sac, Algorithm::Td3] {
        let mut a = agent(
            alg,
            |c| {
                c.tau = 1.0;
                c.td3.policy_delay = 1;
            },
            RegularizerSpec::vanilla(),
        );
        run_updates(&mut a, 1);
        match &a {
            Agent::Sac(s) => {
                for (t, c) in s.critic_targets.iter().zip(&s.critics) {
                    assert_eq!(t.flat_params(), c.flat_params());
                }
            }
            Agent::Td3(t) => {
                assert_eq!(t.actor_target.net.flat_params(), t.actor.net.flat_params());
                for (tg, c) in t.critic_targets.iter().zip(&t.critics) {
                    assert_eq!(tg.flat_params(), c.flat_params());
                }
            }
        }
    }
}

#[test]
fn ddpg_flag_degenerates_td3() {
    let mut a = agent(Algorithm::Td3, |c| c.td3.ddpg = true, RegularizerSpec::vanilla());
    let Agent::Td3(t) = &a else { unreachable!() };
    assert_eq!(t.critics.len(), 1);
    let (mut pn, mut sp) = (stream(1, Stream::PolicyNoise), stream(1, Stream::Spatial));
    let before = pn.clone();
    for i in 0..3 {
        let d = a.update(&batch(i, 8, 2, 1), UpdateRngs { policy_noise: &mut pn, spatial: &mut sp }).unwrap();
        assert!(d.actor.is_some(), "actor must update every step");
    }
    // No target smoothing noise is drawn.
    assert_eq!(pn, before);
}

#[test]
fn td3_delays_actor_updates() {
    let mut a = agent(Algorithm::Td3, |_| {}, RegularizerSpec::vanilla());
    let (mut pn, mut sp) = (stream(1, Stream::PolicyNoise), stream(1, Stream::Spatial));
    let updated: Vec<bool> = (0..4)
        .map(|i| {
            a.update(&batch(i, 8, 2, 1), UpdateRngs { policy_noise: &mut pn, spatial: &mut sp })
                .unwrap()
                .actor
                .is_some()
        })
        .collect();
    assert_eq!(updated, vec![false, true, false, true]);
}

#[test]
fn critic_regression_decreases_monotonically() {
    let mut r = rng(3);
    let mut critic = DenseNet::new(&[3, 32, 32, 1], Activation::Relu, OutputActivation::Identity, &mut r).unwrap();
    let inputs = Tensor2::from_vec(32, 3, (0..96).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
    // Bellman targets with γ = 0 reduce to the rewards.
    let targets: Vec<f64> = (0..32).map(|i| (inputs.get(i, 0) - 0.5 * inputs.get(i, 2)).sin()).collect();
    let mut opt = AdamState::for_net(&critic);
    let cfg = AdamConfig::with_lr(AgentConfig::new(Algorithm::Sac).critic_lr);
    let mut prev = f64::INFINITY;
    for step in 0..100 {
        let (loss, g) = critic_loss_and_grads(&critic, &inputs, &targets).unwrap();
        assert!(loss < prev, "step {step}: {loss} >= {prev}");
        prev = loss;
        adam_step_net(&mut critic, &g, &mut opt, &cfg).unwrap();
    }
}

struct Fixture {
    policy: Policy,
    critics: Vec<DenseNet>,
    xi: Tensor2,
}

fn fixture(kind: PolicyKind, rows: usize) -> Fixture {
    let mut r = rng(9);
    let policy = Policy::new(2, &[16, 16], kind, ActionBounds::symmetric(1, 2.0).unwrap(), &mut r).unwrap();
    let critics = (0..2)
        .map(|_| DenseNet::new(&[3, 16, 1], Activation::Relu, OutputActivation::Identity, &mut r).unwrap())
        .collect();
    let xi = standard_normal(rows, 1, &mut r);
    Fixture { policy, critics, xi }
}

fn loss_of(f: &Fixture, b: &TripleBatch, spec: &RegularizerSpec) -> (smoothlab_core::agents::ActorLoss, Vec<f64>) {
    let inputs = ActorInputs {
        critics: &f.critics,
        reduce: CriticReduce::Min,
        alpha: 0.2,
        xi: Some(&f.xi),
        spatial_noise: None,
    };
    let (l, g) = actor_loss_with_regularizer(&f.policy, b, spec, &inputs).unwrap();
    (l, g.flat())
}

#[test]
fn kind_none_is_exactly_vanilla() {
    let f = fixture(PolicyKind::Gaussian, 6);
    let b = batch(1, 6, 2, 1);
    let (none, g_none) = loss_of(&f, &b, &RegularizerSpec::with_kind(RegularizerKind::None, 1.0));
    let (zero, g_zero) = loss_of(&f, &b, &RegularizerSpec::with_kind(RegularizerKind::GradcapsNorm, 0.0));
    assert_eq!(none.total, none.base);
    assert_eq!(none.temporal, 0.0);
    assert_eq!(none, zero);
    assert_eq!(g_none, g_zero);
}

#[test]
fn constant_policy_has_zero_temporal_term() {
    let mut f = fixture(PolicyKind::Gaussian, 6);
    f.policy.net.zero_output_layer();
    let b = batch(2, 6, 2, 1);
    for kind in [RegularizerKind::Caps, RegularizerKind::GradcapsRaw, RegularizerKind::GradcapsNorm] {
        assert_eq!(loss_of(&f, &b, &RegularizerSpec::with_kind(kind, 1.0)).0.temporal, 0.0);
    }
}

#[test]
fn single_row_regularized_loss_equals_smoothness_module() {
    for pk in [PolicyKind::Gaussian, PolicyKind::Deterministic] {
        let f = fixture(pk, 1);
        let b = batch(3, 1, 2, 1);
        let vanilla = loss_of(&f, &b, &RegularizerSpec::vanilla()).0.total;
        let act = |s: &Tensor2| f.policy.deterministic_action(s.row(0)).unwrap().into_inner();
        let (p, t, n) = (act(b.s_prev.as_ref().unwrap()), act(&b.s), act(&b.s_next));
        for kind in [RegularizerKind::Caps, RegularizerKind::GradcapsRaw, RegularizerKind::GradcapsNorm] {
            let spec = RegularizerSpec::with_kind(kind, 1.0);
            let total = loss_of(&f, &b, &spec).0.total;
            let expected = temporal_term_grad(kind, &p, &t, &n, spec.epsilon).unwrap().loss;
            assert!((total - vanilla - expected).abs() < 1e-12, "{pk:?} {kind:?}");
        }
    }
}

#[test]
fn regularizer_changes_actor_gradient() {
    let f = fixture(PolicyKind::Gaussian, 6);
    let b = batch(4, 6, 2, 1);
    let (_, g0) = loss_of(&f, &b, &RegularizerSpec::vanilla());
    for kind in [RegularizerKind::Caps, RegularizerKind::GradcapsRaw, RegularizerKind::GradcapsNorm] {
        let (_, g) = loss_of(&f, &b, &RegularizerSpec::with_kind(kind, 1.0));
        assert!(g.iter().zip(&g0).any(|(a, b)| a != b), "{kind:?}");
    }
}

#[test]
fn gradcaps_without_prev_states_is_rejected() {
    let f = fixture(PolicyKind::Gaussian, 4);
    let mut b = batch(5, 4, 2, 1);
    b.s_prev = None;
    let inputs = ActorInputs {
        critics: &f.critics,
        reduce: CriticReduce::Min,
        alpha: 0.2,
        xi: Some(&f.xi),
        spatial_noise: None,
    };
    let spec = RegularizerSpec::with_kind(RegularizerKind::GradcapsNorm, 1.0);
    assert!(matches!(actor_loss_with_regularizer(&f.policy, &b, &spec, &inputs), Err(Error::MissingPrevState(_))));
    assert!(actor_loss_with_regularizer(
        &f.policy,
        &b,
        &RegularizerSpec::with_kind(RegularizerKind::Caps, 1.0),
        &inputs
    )
    .is_ok());
}

#[test]
fn zero_weight_regularizer_leaves_training_bit_identical() {
    for alg in [Algorithm::Sac, Algorithm::Td3] {
        let mut vanilla = agent(alg, |_| {}, RegularizerSpec::vanilla());
        let mut off = agent(alg, |_| {}, RegularizerSpec::with_kind(RegularizerKind::GradcapsNorm, 0.0));
        let l1 = run_updates(&mut vanilla, 6);
        let l2 = run_updates(&mut off, 6);
        assert_eq!(l1, l2);
        assert_eq!(vanilla.policy().net.flat_params(), off.policy().net.flat_params());
    }
}

#[test]
fn non_finite_reward_aborts_with_diagnostics() {
    let mut a = agent(Algorithm::Sac, |_| {}, RegularizerSpec::vanilla());
    let mut b = batch(6, 8, 2, 1);
    b.r[3] = f64::NAN;
    let (mut pn, mut sp) = (stream(1, Stream::PolicyNoise), stream(1, Stream::Spatial));
    match a.update(&b, UpdateRngs { policy_noise: &mut pn, spatial: &mut sp }) {
        Err(Error::Aborted(msg)) => assert!(msg.contains("sac update 0"), "{msg}"),
        other => panic!("expected abort, got {other:?}"),
    }
}

#[test]
fn invalid_agent_config_is_rejected() {
    for bad in [0.0, 1.0, -0.5] {
        let mut c = small_config(Algorithm::Sac);
        c.gamma = bad;
        assert!(c.validate().is_err());
    }
    let mut c = small_config(Algorithm::Td3);
    c.tau = 1.5;
    assert!(c.validate().is_err());
    c.tau = 1.0;
    assert!(c.validate().is_ok());
}

proptest! {
    #[test]
    fn soft_update_is_convex_combination(seed in 0u64..500, tau in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let online = DenseNet::new(&[3, 5, 2], Activation::Tanh, OutputActivation::Identity, &mut r).unwrap();
        let mut target = DenseNet::new(&[3, 5, 2], Activation::Tanh, OutputActivation::Identity, &mut r).unwrap();
        let before = target.flat_params();
        target.soft_update_from(&online, tau);
        for ((t, o), b) in target.flat_params().iter().zip(online.flat_params()).zip(before) {
            prop_assert!((t - (tau * o + (1.0 - tau) * b)).abs() <= 1e-15);
            prop_assert!(*t >= o.min(b) - 1e-15 && *t <= o.max(b) + 1e-15);
        }
    }
}
