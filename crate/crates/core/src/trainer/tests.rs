use super::*;
use crate::world::{Env, Layout, ScenarioConfig};

fn brute_force_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    // Terminal after the last step: the value beyond the horizon is zero.
    let n = rewards.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| {
            let next = if t + 1 < n { values[t + 1] } else { 0.0 };
            rewards[t] + gamma * next - values[t]
        })
        .collect();
    (0..n)
        .map(|t| (t..n).map(|l| (gamma * lambda).powi((l - t) as i32) * delta[l]).sum())
        .collect()
}

#[test]
fn gae_hand_example() {
    let (adv, ret) = gae(&[1.0; 3], &[0.5; 3], &[false, false, true], 0.0, 0.9, 0.8);
    let expected = brute_force_gae(&[1.0; 3], &[0.5; 3], 0.9, 0.8);
    for (a, e) in adv.iter().zip(&expected) {
        assert!((a - e).abs() < 1e-12);
    }
    assert!((adv[2] - 0.5).abs() < 1e-12);
    assert!((adv[1] - 1.31).abs() < 1e-12);
    assert!((adv[0] - 1.8932).abs() < 1e-12);
    assert!((ret[0] - 2.3932).abs() < 1e-12);
}

#[test]
fn gae_lambda_zero_is_one_step_td() {
    let r = [0.3, -1.0, 2.0, 0.1];
    let v = [0.2, 0.7, -0.4, 1.1];
    let (adv, _) = gae(&r, &v, &[false, false, false, false], 0.6, 0.95, 0.0);
    let next = [0.7, -0.4, 1.1, 0.6];
    for t in 0..4 {
        assert!((adv[t] - (r[t] + 0.95 * next[t] - v[t])).abs() < 1e-12);
    }
}

#[test]
fn gae_lambda_one_with_zero_values_is_discounted_return() {
    let r = [1.0, 2.0, 3.0];
    let (adv, _) = gae(&r, &[0.0; 3], &[false, false, true], 99.0, 0.5, 1.0);
    assert!((adv[2] - 3.0).abs() < 1e-12);
    assert!((adv[1] - 3.5).abs() < 1e-12);
    assert!((adv[0] - 2.75).abs() < 1e-12);
}

#[test]
fn gae_matches_brute_force_on_random_sequences() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.random_range(1..30);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut d = vec![false; n];
        d[n - 1] = true;
        let (adv, _) = gae(&r, &v, &d, 0.0, 0.99, 0.95);
        let bf = brute_force_gae(&r, &v, 0.99, 0.95);
        for (a, b) in adv.iter().zip(&bf) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn normalized_advantages_have_zero_mean_unit_std() {
    let mut adv = Advantages {
        advantages: vec![vec![vec![1.0, 5.0, -2.0], vec![0.5, 0.25, 9.0]]],
        returns: vec![vec![vec![0.0; 3], vec![0.0; 3]]],
    };
    normalize_advantages(&mut adv);
    let flat: Vec<f64> = adv.flat_advantages().collect();
    let n = flat.len() as f64;
    let mean = flat.iter().sum::<f64>() / n;
    let std = (flat.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-10);
    assert!((std - 1.0).abs() < 1e-6);
}

#[test]
fn clipped_objective_cases() {
    assert!((clipped_objective(1.3, 1.0, 0.2) - 1.2).abs() < 1e-12);
    assert!((clipped_objective(0.5, -1.0, 0.2) + 0.8).abs() < 1e-12);
    assert!((clipped_objective(1.1, 2.0, 0.2) - 2.2).abs() < 1e-12);
    // Never more optimistic than the unclipped term.
    for &r in &[0.1, 0.8, 1.0, 1.2, 3.0] {
        for &a in &[-2.0, -0.1, 0.0, 0.7, 4.0] {
            assert!(clipped_objective(r, a, 0.2) <= r * a + 1e-12);
        }
    }
}

fn small_scenario(horizon: usize) -> ScenarioConfig {
    ScenarioConfig {
        horizon,
        aoi_norm: horizon as f64,
        ..ScenarioConfig::tiny()
    }
}

fn small_config() -> TrainConfig {
    TrainConfig {
        hidden: 8,
        head_hidden: 8,
        critic_widths: vec![16],
        episodes_per_update: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn rollout_bookkeeping() {
    let scn = small_scenario(10);
    let env = Env::new(scn.clone()).unwrap();
    let bundle = small_config().init_bundle(&scn, 1);
    let batch = collect_rollout(&env, &bundle, 3, 50, 1).unwrap();
    assert_eq!(batch.episodes.len(), 3);
    assert_eq!(batch.samples(), 3 * 2 * 10);
    for (k, ep) in batch.episodes.iter().enumerate() {
        assert_eq!(ep.seed, episode_seed(50, k as u64));
        assert_eq!(ep.len(), 10);
        assert_eq!(ep.stats.slots, 10);
        for ag in &ep.agents {
            assert_eq!(ag.len(), 10);
            assert_eq!(ag.hidden.len(), 10);
            assert!(ag.dones[9] && !ag.dones[..9].iter().any(|&d| d));
            assert!(ag.log_probs.iter().all(|&lp| lp <= 0.0 && lp.is_finite()));
            assert!(ag.actions.iter().all(|&a| a < 8));
        }
        let sum: f64 = (0..10)
            .map(|t| ep.agents.iter().map(|a| a.rewards[t]).sum::<f64>() / 2.0)
            .sum();
        assert!((sum - ep.stats.cum_reward).abs() < 1e-9);
    }
}

#[test]
fn rollout_is_deterministic_and_thread_independent() {
    let scn = small_scenario(12);
    let env = Env::new(scn.clone()).unwrap();
    let bundle = small_config().init_bundle(&scn, 2);
    let a = collect_rollout(&env, &bundle, 5, 9, 1).unwrap();
    let b = collect_rollout(&env, &bundle, 5, 9, 1).unwrap();
    let c = collect_rollout(&env, &bundle, 5, 9, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let d = collect_rollout(&env, &bundle, 5, 10, 1).unwrap();
    assert_ne!(a.episodes[0].agents[0].actions, d.episodes[0].agents[0].actions);
}

#[test]
fn first_step_ratio_is_exactly_one() {
    let scn = small_scenario(10);
    let env = Env::new(scn.clone()).unwrap();
    let cfg = small_config();
    let mut bundle = cfg.init_bundle(&scn, 4);
    let batch = collect_rollout(&env, &bundle, 2, 0, 1).unwrap();
    let mut adv = compute_advantages(&batch, cfg.gamma, cfg.gae_lambda, 1.0);
    normalize_advantages(&mut adv);
    let mut opt = crate::tensor::Adam::new(cfg.adam(), bundle.tensors());
    let report = ppo_update(&mut bundle, &mut opt, &batch, &adv, &cfg, 0).unwrap();
    assert!(report.first_step_ratio_dev < 1e-12, "{}", report.first_step_ratio_dev);
    assert_eq!(report.steps, cfg.epochs * cfg.minibatches);
    assert!(report.grad_norm.is_finite() && report.grad_norm > 0.0);
    // The live actors moved, the old ones did not.
    assert_ne!(bundle.actors[0].tensors()[0], bundle.old_actors[0].tensors()[0]);
}

#[test]
fn train_single_episode_gives_one_row() {
    let scn = small_scenario(8);
    let cfg = TrainConfig {
        episodes: 1,
        ..small_config()
    };
    let out = train(&scn, &cfg, 3, &mut NullSink).unwrap();
    assert_eq!(out.metrics.len(), 1);
    assert_eq!(out.metrics[0].episode, 1);
    assert_eq!(out.metrics[0].wall_ms, 0);
    assert_eq!(out.losses.len(), 1);
}

#[test]
fn train_is_deterministic() {
    let scn = small_scenario(8);
    let cfg = TrainConfig {
        episodes: 5,
        ..small_config()
    };
    let a = train(&scn, &cfg, 11, &mut NullSink).unwrap();
    let b = train(&scn, &cfg, 11, &mut NullSink).unwrap();
    let threaded = train(&scn, &TrainConfig { threads: 2, ..cfg.clone() }, 11, &mut NullSink).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.bundle.tensors(), b.bundle.tensors());
    assert_eq!(a.bundle.tensors(), threaded.bundle.tensors());
    assert_eq!(a.metrics.len(), 5);
    let eps: Vec<usize> = a.metrics.iter().map(|m| m.episode).collect();
    assert_eq!(eps, vec![1, 2, 3, 4, 5]);
}

#[test]
fn checkpoints_fire_on_interval_crossings() {
    struct Count(Vec<usize>);
    impl TrainSink for Count {
        fn on_episode(&mut self, _: &MetricsRow, _: &EpisodeTrajectory) -> std::io::Result<()> {
            Ok(())
        }
        fn on_checkpoint(&mut self, ep: usize, _: &crate::nets::PolicyBundle<f64>) -> std::io::Result<()> {
            self.0.push(ep);
            Ok(())
        }
    }
    let scn = small_scenario(5);
    let cfg = TrainConfig {
        episodes: 7,
        eval_interval: 3,
        ..small_config()
    };
    let mut sink = Count(Vec::new());
    train(&scn, &cfg, 0, &mut sink).unwrap();
    assert_eq!(sink.0, vec![4, 6]);
}

#[test]
fn invalid_config_is_rejected() {
    let bad = TrainConfig {
        minibatches: 5,
        ..small_config()
    };
    assert!(matches!(bad.validate(), Err(TrainError::Config { key: "minibatches", .. })));
    let bad = TrainConfig {
        gamma: 1.5,
        ..TrainConfig::default()
    };
    assert!(bad.validate().is_err());
    assert!(TrainConfig::default().validate().is_ok());
    assert!(TrainConfig::mappo_ff().validate().is_ok());
}

#[test]
fn greedy_collects_both_iots_in_toy() {
    let scn = ScenarioConfig {
        n_uavs: 1,
        n_iots: 2,
        obs_k_nearest: 2,
        horizon: 60,
        aoi_norm: 60.0,
        regenerate_on_collect: false,
        layout: Some(Layout {
            uavs: vec![[0.0, 0.0]],
            iots: vec![[100.0, 0.0], [-100.0, 0.0]],
            lbds: vec![[0.0, 0.0, 0.0]],
        }),
        ..ScenarioConfig::default()
    };
    let env = Env::new(scn).unwrap();
    let report = evaluate(&mut GreedyPolicy::new(), &env, 1, 0).unwrap();
    assert_eq!(report.mean_collections, 2.0);
    assert_eq!(report.constraints.uncollected_iots, 0);
}

#[test]
fn evaluation_is_deterministic() {
    let env = Env::new(small_scenario(20)).unwrap();
    let a = evaluate(&mut RandomPolicy, &env, 4, 5).unwrap();
    let b = evaluate(&mut RandomPolicy, &env, 4, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.peak_aoi.len(), 4);
    let mut logs = 0;
    evaluate_with(&mut GreedyPolicy::new(), &env, 3, 0, |_, log| {
        logs += 1;
        assert_eq!(log.slots.len(), 20);
        Ok(())
    })
    .unwrap();
    assert_eq!(logs, 3);
}

#[test]
fn baseline_names_round_trip() {
    for k in [BaselineKind::MappoFf, BaselineKind::Greedy, BaselineKind::Random] {
        assert_eq!(BaselineKind::parse(k.name()), Some(k));
    }
    assert_eq!(BaselineKind::parse("ppo"), None);
}
