use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vvc_core::cases;
use vvc_core::env::{AgentLayout, EnvConfig, VvcEnv};
use vvc_core::forecast::{generate_profiles, GaussianPersistence, ProfileParams};
use vvc_core::marl::*;

fn layouts() -> Vec<AgentLayout> {
    vec![
        AgentLayout {
            region: 1,
            buses: vec![0, 1, 2],
            inverters: vec![0],
        },
        AgentLayout {
            region: 2,
            buses: vec![3, 4],
            inverters: vec![1, 2],
        },
    ]
}

const STATE_DIM: usize = 7;

fn rand_vec(rng: &mut impl Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-s..s)).collect()
}

fn transition(rng: &mut impl Rng, layouts: &[AgentLayout]) -> Transition {
    let joint: usize = layouts.iter().map(|l| l.action_dim()).sum();
    let obs = |rng: &mut ChaCha8Rng| -> Vec<[Vec<f64>; 3]> {
        layouts
            .iter()
            .map(|l| std::array::from_fn(|_| rand_vec(rng, l.obs_dim(), 1.0)))
            .collect()
    };
    let mut r = ChaCha8Rng::seed_from_u64(rng.random());
    Transition {
        state: rand_vec(&mut r, STATE_DIM, 1.0),
        next_state: rand_vec(&mut r, STATE_DIM, 1.0),
        action: rand_vec(&mut r, joint, 0.8),
        reward: r.random_range(-0.3..0.0),
        shaping: r.random_range(-0.1..0.1),
        obs: obs(&mut r),
        next_obs: obs(&mut r),
    }
}

fn small_cfg(algorithm: Algorithm) -> LearnerConfig {
    LearnerConfig {
        algorithm,
        policy_hidden: vec![8, 8],
        critic_hidden: Some(vec![12, 6]),
        ..Default::default()
    }
}

fn ensemble(cfg: LearnerConfig, seed: u64) -> AgentEnsemble {
    AgentEnsemble::new(
        cfg,
        &layouts(),
        STATE_DIM,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

// ---------------------------------------------------------------- targets

#[test]
fn td_target_examples() {
    let y = td_target(-0.3, 0.05, 1.0, 0.9, -2.0, Some(-1.5));
    assert!((y - -2.05).abs() < 1e-12);
    assert_eq!(
        td_target(-0.3, 0.05, 0.0, 0.9, -2.0, Some(-1.0)),
        -0.3 + 0.9 * -2.0
    );
    // the smaller estimate wins whichever slot it sits in
    assert_eq!(td_target(0.0, 0.0, 0.0, 1.0, -1.0, Some(3.0)), -1.0);
    assert_eq!(td_target(0.0, 0.0, 0.0, 1.0, 3.0, Some(-1.0)), -1.0);
}

#[test]
fn maddpg_target_has_no_twin_min() {
    let e = ensemble(small_cfg(Algorithm::Maddpg), 3);
    assert_eq!(e.agents[0].critics.len(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch: Vec<Transition> = (0..5).map(|_| transition(&mut rng, &layouts())).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let next_a = rand_vec(&mut rng, 5 * 3, 0.8);
    let y = e.td_targets(0, &refs, &next_a).unwrap();
    for (s, t) in batch.iter().enumerate() {
        let mut x = t.next_state.clone();
        x.extend_from_slice(&next_a[s * 3..s * 3 + 3]);
        let q = e.agents[0].target_critics[0].forward(&x, 1).unwrap()[0];
        // unshaped: the stored shaping term must not leak in
        assert_eq!(y[s], t.reward + 0.9 * q);
    }
}

#[test]
fn twin_targets_take_the_smaller_critic() {
    let e = ensemble(small_cfg(Algorithm::MpnrsMatd3), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch: Vec<Transition> = (0..6).map(|_| transition(&mut rng, &layouts())).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let next_a = rand_vec(&mut rng, 6 * 3, 0.8);
    for m in 0..2 {
        let y = e.td_targets(m, &refs, &next_a).unwrap();
        for (s, t) in batch.iter().enumerate() {
            let mut x = t.next_state.clone();
            x.extend_from_slice(&next_a[s * 3..s * 3 + 3]);
            let q1 = e.agents[m].target_critics[0].forward(&x, 1).unwrap()[0];
            let q2 = e.agents[m].target_critics[1].forward(&x, 1).unwrap()[0];
            let expect = t.reward + 1.0 * t.shaping + 0.9 * q1.min(q2);
            assert!((y[s] - expect).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn twin_min_never_exceeds_either_critic(
        r in -1.0..0.0f64, f in -1.0..1.0f64, lambda in 0.0..2.0f64, gamma in 0.0..1.0f64,
        q1 in -5.0..5.0f64, q2 in -5.0..5.0f64,
    ) {
        let y = td_target(r, f, lambda, gamma, q1, Some(q2));
        prop_assert!(y <= td_target(r, f, lambda, gamma, q1, None));
        prop_assert!(y <= td_target(r, f, lambda, gamma, q2, None));
    }

    #[test]
    fn actions_stay_within_the_ratio_bound(seed in 0u64..1000, tau in 0.0..3.0f64, scale in 0.1..50.0f64) {
        for alg in Algorithm::ALL {
            let e = ensemble(small_cfg(alg), seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let obs: Vec<[Vec<f64>; 3]> =
                layouts().iter().map(|l| std::array::from_fn(|_| rand_vec(&mut rng, l.obs_dim(), scale))).collect();
            for acts in [e.act(&obs, tau, &mut rng).unwrap(), e.act_greedy(&obs).unwrap()] {
                for per in &acts {
                    for a in per.iter().flatten() {
                        prop_assert!(a.abs() <= 0.8);
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------- action selection

#[test]
fn greedy_and_seeded_actions_are_reproducible() {
    let e = ensemble(small_cfg(Algorithm::MpnrsMatd3), 5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let obs = transition(&mut rng, &layouts()).obs;
    assert_eq!(
        e.act(&obs, 0.0, &mut rng).unwrap(),
        e.act_greedy(&obs).unwrap()
    );
    let a = e.act(&obs, 0.1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = e.act(&obs, 0.1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, e.act_greedy(&obs).unwrap());
    // each head reads its own sample
    let p = &e.agents[0].policies;
    for j in 0..3 {
        assert_eq!(
            e.act_greedy(&obs).unwrap()[0][j],
            p[j].forward(&obs[0][j], 1).unwrap()
        );
    }
}

#[test]
fn baselines_replicate_the_median_head() {
    for alg in [Algorithm::Matd3, Algorithm::Maddpg] {
        let e = ensemble(small_cfg(alg), 6);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let obs = transition(&mut rng, &layouts()).obs;
        for (m, per) in e.act_greedy(&obs).unwrap().iter().enumerate() {
            let median = e.agents[m].policies[0].forward(&obs[m][2], 1).unwrap();
            assert!(per.iter().all(|a| *a == median));
        }
    }
}

#[test]
fn wrong_observation_width_is_rejected() {
    let e = ensemble(small_cfg(Algorithm::Matd3), 6);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut obs = transition(&mut rng, &layouts()).obs;
    obs[1][2].push(0.0);
    assert!(matches!(
        e.act_greedy(&obs),
        Err(MarlError::Dimension { .. })
    ));
    assert!(matches!(
        e.act_greedy(&obs[..1]),
        Err(MarlError::Dimension { .. })
    ));
}

// ---------------------------------------------------------------- critic pathway

fn critic(rng: &mut ChaCha8Rng, input: usize) -> Mlp {
    let mut c = Mlp::orthogonal(&[input, 12, 6, 1], OutputHead::Linear, 1.0, rng);
    for p in c.params_mut() {
        *p += rng.random_range(-0.2..0.2);
    }
    c
}

#[test]
fn perfect_critic_has_zero_loss_and_takes_no_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut c = critic(&mut rng, 10);
    let x = rand_vec(&mut rng, 8 * 10, 1.0);
    let y = c.forward(&x, 8).unwrap();
    let (loss, grad) = critic_loss_grad(&c, &x, &y).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
    let before = c.params().to_vec();
    Adam::new(c.n_params(), 5e-4).step(c.params_mut(), &grad);
    assert_eq!(c.params(), &before[..]);
}

#[test]
fn single_transition_loss_is_the_squared_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let c = critic(&mut rng, 10);
    let x = rand_vec(&mut rng, 10, 1.0);
    let q = c.forward(&x, 1).unwrap()[0];
    let (loss, _) = critic_loss_grad(&c, &x, &[q - 0.7]).unwrap();
    assert!((loss - 0.49).abs() < 1e-12);
}

#[test]
fn critic_loss_falls_on_a_frozen_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut c = critic(&mut rng, 10);
    let x = rand_vec(&mut rng, 32 * 10, 1.0);
    let y = rand_vec(&mut rng, 32, 1.0);
    let mut opt = Adam::new(c.n_params(), 5e-4);
    let (first, _) = critic_loss_grad(&c, &x, &y).unwrap();
    let mut last = first;
    for _ in 0..100 {
        let (loss, g) = critic_loss_grad(&c, &x, &y).unwrap();
        last = loss;
        opt.step(c.params_mut(), &g);
    }
    assert!(last < first, "{last} !< {first}");
}

/// Central differences of `f` over every coordinate of `theta`.
fn fd(theta: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            let orig = t[k];
            t[k] = orig + h;
            let up = f(&t);
            t[k] = orig - h;
            let dn = f(&t);
            t[k] = orig;
            (up - dn) / (2.0 * h)
        })
        .collect()
}

fn assert_grads_close(analytic: &[f64], numeric: &[f64]) {
    // entries tiny in both are dominated by rounding of the differences
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (k, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        if a.abs().max(n.abs()) < 1e-6 * scale.max(1e-3) {
            continue;
        }
        assert!(
            rel_err(*a, *n) <= 1e-4,
            "coordinate {k}: analytic {a} vs numeric {n}"
        );
    }
}

#[test]
fn critic_loss_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let c = critic(&mut rng, 10);
        let x = rand_vec(&mut rng, 4 * 10, 1.0);
        let y = rand_vec(&mut rng, 4, 1.0);
        let (_, g) = critic_loss_grad(&c, &x, &y).unwrap();
        let num = fd(c.params(), |p| {
            let net = Mlp::from_parts(c.dims().to_vec(), c.head(), p.to_vec()).unwrap();
            critic_loss_grad(&net, &x, &y).unwrap().0
        });
        assert_grads_close(&g, &num);
    }
}

#[test]
fn action_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let c = critic(&mut rng, 10);
        let x = rand_vec(&mut rng, 3 * 10, 1.0);
        let g = action_gradient(&c, &x, 3, 7, 1, 2).unwrap();
        for s in 0..3 {
            let row = &x[s * 10..(s + 1) * 10];
            let num = fd(&row[8..10], |a| {
                let mut r = row.to_vec();
                r[8..10].copy_from_slice(a);
                c.forward(&r, 1).unwrap()[0]
            });
            assert_grads_close(&g[s * 2..s * 2 + 2], &num);
        }
    }
}

#[test]
fn policy_objective_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let b = 4;
        let mut policy = Mlp::orthogonal(
            &[5, 8, 8, 2],
            OutputHead::Tanh { scale: 0.8 },
            1.0,
            &mut rng,
        );
        for p in policy.params_mut() {
            *p += rng.random_range(-0.2..0.2);
        }
        let c = critic(&mut rng, STATE_DIM + 3);
        let obs = rand_vec(&mut rng, b * 5, 1.0);
        let states = rand_vec(&mut rng, b * STATE_DIM, 1.0);
        let joint = rand_vec(&mut rng, b * 3, 0.8);
        let (_, g) = actor_objective_grad(&policy, &c, &obs, &states, &joint, b, 1).unwrap();
        let num = fd(policy.params(), |p| {
            let net = Mlp::from_parts(policy.dims().to_vec(), policy.head(), p.to_vec()).unwrap();
            actor_objective_grad(&net, &c, &obs, &states, &joint, b, 1)
                .unwrap()
                .0
        });
        assert_grads_close(&g, &num);
    }
}

#[test]
fn critic_blind_to_actions_gives_zero_policy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut c = critic(&mut rng, STATE_DIM + 3);
    // first-layer weights are row-major (out × in); zero the action columns
    let n_in = STATE_DIM + 3;
    for o in 0..12 {
        for i in STATE_DIM..n_in {
            c.params_mut()[o * n_in + i] = 0.0;
        }
    }
    let policy = Mlp::orthogonal(&[5, 8, 2], OutputHead::Tanh { scale: 0.8 }, 1.0, &mut rng);
    let obs = rand_vec(&mut rng, 4 * 5, 1.0);
    let states = rand_vec(&mut rng, 4 * STATE_DIM, 1.0);
    let joint = rand_vec(&mut rng, 4 * 3, 0.8);
    let (_, g) = actor_objective_grad(&policy, &c, &obs, &states, &joint, 4, 0).unwrap();
    assert!(g.iter().all(|v| *v == 0.0));
}

#[test]
fn one_small_actor_step_raises_the_frozen_critic() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let mut policy =
            Mlp::orthogonal(&[5, 8, 2], OutputHead::Tanh { scale: 0.8 }, 1.0, &mut rng);
        let c = critic(&mut rng, STATE_DIM + 3);
        let obs = rand_vec(&mut rng, 8 * 5, 1.0);
        let states = rand_vec(&mut rng, 8 * STATE_DIM, 1.0);
        let joint = rand_vec(&mut rng, 8 * 3, 0.8);
        let (before, g) = actor_objective_grad(&policy, &c, &obs, &states, &joint, 8, 1).unwrap();
        let descent: Vec<f64> = g.iter().map(|v| -v).collect();
        Adam::new(policy.n_params(), 1e-5).step(policy.params_mut(), &descent);
        let (after, _) = actor_objective_grad(&policy, &c, &obs, &states, &joint, 8, 1).unwrap();
        assert!(after > before, "seed {seed}: {after} !> {before}");
    }
}

// ---------------------------------------------------------------- ensembles

#[test]
fn online_and_target_shapes_match() {
    for alg in Algorithm::ALL {
        let e = ensemble(
            LearnerConfig {
                algorithm: alg,
                ..Default::default()
            },
            0,
        );
        for (l, a) in layouts().iter().zip(&e.agents) {
            assert_eq!(a.policies.len(), alg.heads());
            assert_eq!(a.critics.len(), if alg.twin_critics() { 2 } else { 1 });
            for (p, t) in a.policies.iter().zip(&a.target_policies) {
                assert_eq!(p, t);
                assert_eq!(p.dims(), &[l.obs_dim(), 256, 256, l.action_dim()]);
            }
            let d = 3 * l.obs_dim();
            for (c, t) in a.critics.iter().zip(&a.target_critics) {
                assert_eq!(c, t);
                assert_eq!(c.dims(), &[STATE_DIM + 3, 2 * d, d, 1]);
            }
        }
    }
}

#[test]
fn unshaped_single_head_matches_the_median_head_of_the_ensemble() {
    let cfg = LearnerConfig {
        shaping_lambda: 0.0,
        ..small_cfg(Algorithm::MpnrsMatd3)
    };
    let mut full = ensemble(cfg.clone(), 21);
    let mut ck = full.to_checkpoint();
    ck.config.algorithm = Algorithm::Matd3;
    for a in ck.agents.iter_mut() {
        a.policies = vec![a.policies[2].clone()];
        a.target_policies = vec![a.target_policies[2].clone()];
    }
    let mut single = AgentEnsemble::from_checkpoint(ck).unwrap();
    let full_ck = full.to_checkpoint();
    full = AgentEnsemble::from_checkpoint(full_ck).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let batch: Vec<Transition> = (0..32).map(|_| transition(&mut rng, &layouts())).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    for _ in 0..5 {
        full.update(&refs, &mut rng).unwrap();
        single.update(&refs, &mut rng).unwrap();
    }
    for (f, s) in full.agents.iter().zip(&single.agents) {
        assert_eq!(f.policies[2], s.policies[0]);
        assert_eq!(f.target_policies[2], s.target_policies[0]);
        assert_eq!(f.critics, s.critics);
        assert_eq!(f.target_critics, s.target_critics);
    }
}

#[test]
fn delayed_policy_updates_leave_actors_alone_between_turns() {
    let cfg = LearnerConfig {
        policy_delay: 2,
        ..small_cfg(Algorithm::Matd3)
    };
    let mut e = ensemble(cfg, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let batch: Vec<Transition> = (0..8).map(|_| transition(&mut rng, &layouts())).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    e.update(&refs, &mut rng).unwrap();
    let after_first = e.agents[0].policies[0].clone();
    let critic_first = e.agents[0].critics[0].clone();
    e.update(&refs, &mut rng).unwrap();
    assert_eq!(e.agents[0].policies[0], after_first);
    assert_ne!(e.agents[0].critics[0], critic_first);
    assert_eq!(e.updates(), 2);
}

#[test]
fn checkpoint_round_trip() {
    let mut e = ensemble(small_cfg(Algorithm::MpnrsMatd3), 30);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch: Vec<Transition> = (0..8).map(|_| transition(&mut rng, &layouts())).collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    e.update(&refs, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    e.save(&path).unwrap();
    let back = AgentEnsemble::load(&path).unwrap();
    assert_eq!(back.updates(), 1);
    assert_eq!(back.cfg, e.cfg);
    for (a, b) in e.agents.iter().zip(&back.agents) {
        assert_eq!(a.policies, b.policies);
        assert_eq!(a.target_policies, b.target_policies);
        assert_eq!(a.critics, b.critics);
        assert_eq!(a.target_critics, b.target_critics);
    }
    assert_eq!(
        e.act_greedy(&batch[0].obs).unwrap(),
        back.act_greedy(&batch[0].obs).unwrap()
    );
}

#[test]
fn malformed_checkpoints_are_refused() {
    let e = ensemble(small_cfg(Algorithm::Matd3), 31);
    let mut ck = e.to_checkpoint();
    let extra = ck.agents[0].policies[0].clone();
    ck.agents[0].policies.push(extra);
    assert!(matches!(
        AgentEnsemble::from_checkpoint(ck),
        Err(MarlError::Checkpoint(_))
    ));
    let mut ck = e.to_checkpoint();
    ck.version = 99;
    assert!(matches!(
        AgentEnsemble::from_checkpoint(ck),
        Err(MarlError::Checkpoint(_))
    ));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{not json").unwrap();
    assert!(AgentEnsemble::load(&path).is_err());
}

// ---------------------------------------------------------------- training

fn toy_env() -> VvcEnv {
    let net = Arc::new(cases::toy6());
    let prof = Arc::new(generate_profiles(7, 900, &net, &ProfileParams::default()));
    let pred = Arc::new(GaussianPersistence::new(&net));
    VvcEnv::new(
        net,
        prof,
        pred,
        EnvConfig {
            episode_len: 10,
            ..Default::default()
        },
    )
    .unwrap()
}

fn quick(alg: Algorithm, episodes: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        learner: LearnerConfig {
            algorithm: alg,
            policy_hidden: vec![16, 16],
            ..Default::default()
        },
        episodes,
        seed,
        ..Default::default()
    }
}

#[test]
fn zero_episodes_leave_networks_untouched() {
    let mut env = toy_env();
    let lo = env.earliest_start();
    let hi = env.latest_start().unwrap();
    let out = train(&quick(Algorithm::MpnrsMatd3, 0, 2), &mut env, (lo, hi)).unwrap();
    assert!(out.curve.is_empty());
    assert_eq!(out.updates, 0);
    let mut init = ChaCha8Rng::seed_from_u64(2);
    init.set_stream(1);
    let fresh = AgentEnsemble::new(
        out.ensemble.cfg.clone(),
        env.layouts(),
        env.evaluator().state_dim(),
        &mut init,
    )
    .unwrap();
    for (a, b) in out.ensemble.agents.iter().zip(&fresh.agents) {
        assert_eq!(a.policies, b.policies);
        assert_eq!(a.critics, b.critics);
    }
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let mut env = toy_env();
    let lo = env.earliest_start();
    let hi = env.latest_start().unwrap();
    let cfg = quick(Algorithm::MpnrsMatd3, 8, 5);
    let a = train(&cfg, &mut env, (lo, hi)).unwrap();
    let b = train(&cfg, &mut env, (lo, hi)).unwrap();
    assert!(a.updates > 0);
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.episode_starts, b.episode_starts);
    for (x, y) in a.ensemble.agents.iter().zip(&b.ensemble.agents) {
        assert_eq!(x.policies, y.policies);
        assert_eq!(x.critics, y.critics);
    }
    let c = train(&quick(Algorithm::MpnrsMatd3, 8, 6), &mut env, (lo, hi)).unwrap();
    assert_ne!(a.curve, c.curve);
}

#[test]
fn episode_starts_do_not_depend_on_the_algorithm() {
    let mut env = toy_env();
    let lo = env.earliest_start();
    let hi = env.latest_start().unwrap();
    let starts: Vec<Vec<usize>> = Algorithm::ALL
        .iter()
        .map(|&alg| {
            train(&quick(alg, 4, 9), &mut env, (lo, hi))
                .unwrap()
                .episode_starts
        })
        .collect();
    assert_eq!(starts[0], starts[1]);
    assert_eq!(starts[1], starts[2]);
}

#[test]
fn start_range_outside_the_profile_is_a_config_error() {
    let mut env = toy_env();
    let hi = env.latest_start().unwrap();
    let err = train(&quick(Algorithm::Matd3, 1, 0), &mut env, (0, hi + 1)).unwrap_err();
    assert!(matches!(err, MarlError::Config(_)));
}

#[test]
fn update_budget_caps_the_run() {
    let mut env = toy_env();
    let lo = env.earliest_start();
    let hi = env.latest_start().unwrap();
    let cfg = TrainConfig {
        max_updates: 7,
        ..quick(Algorithm::Maddpg, 6, 1)
    };
    assert_eq!(train(&cfg, &mut env, (lo, hi)).unwrap().updates, 7);
}

#[test]
fn curve_csv_round_trip() {
    let mut env = toy_env();
    let lo = env.earliest_start();
    let hi = env.latest_start().unwrap();
    let out = train(&quick(Algorithm::Matd3, 3, 1), &mut env, (lo, hi)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    write_curve(&path, &out.curve).unwrap();
    assert!(std::fs::read_to_string(&path)
        .unwrap()
        .starts_with("episode,mean_reward,r_ll,r_vd,phi\n"));
    assert_eq!(read_curve(&path).unwrap(), out.curve);
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    assert!(toml::from_str::<TrainConfig>("episodes = 3\nbogus = 1").is_err());
    let cfg: TrainConfig =
        toml::from_str("episodes = 3\nalgorithm = \"maddpg\"\nshaping_lambda = 0.3").unwrap();
    assert_eq!(cfg.learner.algorithm, Algorithm::Maddpg);
    assert_eq!(cfg.learner.shaping_lambda, 0.3);
    assert_eq!(cfg.buffer_capacity, 10_000);
    assert_eq!(cfg.learner.batch_size, 32);
    for bad in [
        LearnerConfig {
            gamma: 1.5,
            ..Default::default()
        },
        LearnerConfig {
            xi: -0.1,
            ..Default::default()
        },
        LearnerConfig {
            policy_hidden: vec![0],
            ..Default::default()
        },
        LearnerConfig {
            batch_size: 0,
            ..Default::default()
        },
    ] {
        assert!(bad.validate().is_err());
    }
    assert!("td3".parse::<Algorithm>().is_err());
}
