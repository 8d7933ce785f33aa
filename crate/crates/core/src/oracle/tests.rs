use super::*;
use crate::trainer::{evaluate, GreedyPolicy};
use crate::world::Layout;
use rand::{Rng, SeedableRng};

fn instance(uavs: &[[f64; 2]], iots: &[[f64; 2]], horizon: usize) -> TinyInstance {
    TinyInstance::new(ScenarioConfig {
        n_uavs: uavs.len(),
        n_iots: iots.len(),
        obs_k_nearest: iots.len(),
        horizon,
        aoi_norm: horizon as f64,
        comm_radius: 1.0,
        collision_dist: 0.5,
        layout: Some(Layout {
            uavs: uavs.to_vec(),
            iots: iots.to_vec(),
            lbds: vec![[0.0, 0.0, 0.0]],
        }),
        ..ScenarioConfig::default()
    })
    .unwrap()
}

/// Plain enumeration of every sequence, without memoization.
fn naive(inst: &TinyInstance) -> usize {
    let env = Env::new(inst.config().clone()).unwrap();
    let c = env.config();
    let joints = joint_actions(c.n_actions(), c.n_uavs);
    fn go(env: &Env, joints: &[Vec<Action>], s: &WorldState) -> usize {
        if s.done {
            return crate::world::terminal_peak_aoi(s, env.config().horizon).max(s.peak_aoi_so_far);
        }
        joints
            .iter()
            .map(|j| go(env, joints, &env.step(s, j).unwrap().state))
            .min()
            .unwrap()
    }
    go(&env, &joints, &env.reset(c.rng_seed))
}

#[test]
fn adjacent_iot_optimum_is_one() {
    let inst = instance(&[[0.0, 0.0]], &[[5.0, 0.0]], 3);
    let r = exact_min_peak_aoi(&inst).unwrap();
    assert_eq!(r.optimum, 1);
    assert_eq!(r.witness[0], vec![Action::E]);
    assert_eq!(replay_verify(&inst, &r.witness).unwrap(), 1);
}

#[test]
fn symmetric_two_iots_optimum_is_three() {
    let inst = instance(&[[0.0, 0.0]], &[[5.0, 0.0], [-5.0, 0.0]], 4);
    let r = exact_min_peak_aoi(&inst).unwrap();
    assert_eq!(r.optimum, 3);
    assert_eq!(r.witness.len(), 4);
    assert_eq!(replay_verify(&inst, &r.witness).unwrap(), 3);
    assert_eq!(naive(&inst), 3);
}

#[test]
fn memoized_search_matches_naive_enumeration() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    for _ in 0..6 {
        let iots: Vec<[f64; 2]> = (0..rng.random_range(1..=3))
            .map(|_| [5.0 * rng.random_range(-2..=2) as f64, 5.0 * rng.random_range(-2..=2) as f64])
            .collect();
        let inst = instance(&[[0.0, 0.0]], &iots, 4);
        let r = exact_min_peak_aoi(&inst).unwrap();
        assert_eq!(r.optimum, naive(&inst), "{iots:?}");
        assert_eq!(replay_verify(&inst, &r.witness).unwrap(), r.optimum);
    }
}

#[test]
fn all_hover_leaves_peak_at_horizon() {
    let mut inst = instance(&[[0.0, 0.0]], &[[10.0, 0.0]], 5);
    inst.config.include_hover_action = true;
    let seq = vec![vec![Action::Hover]; 5];
    assert!(replay_verify(&inst, &seq).unwrap() >= 5);
}

#[test]
fn relabeling_uavs_keeps_the_optimum() {
    let a = instance(&[[0.0, 0.0], [0.0, 5.0]], &[[5.0, 0.0], [-5.0, 5.0]], 3);
    let b = instance(&[[0.0, 5.0], [0.0, 0.0]], &[[-5.0, 5.0], [5.0, 0.0]], 3);
    assert_eq!(exact_min_peak_aoi(&a).unwrap().optimum, exact_min_peak_aoi(&b).unwrap().optimum);
}

#[test]
fn optimum_settles_once_the_horizon_allows_full_collection() {
    // Pending packets age up to the horizon, so a longer horizon can only
    // raise the optimum; it stops changing once every IoT fits in time.
    let iots = [[10.0, 0.0], [-5.0, 0.0]];
    let values: Vec<usize> = (3..=7)
        .map(|t| exact_min_peak_aoi(&instance(&[[0.0, 0.0]], &iots, t)).unwrap().optimum)
        .collect();
    assert_eq!(values, vec![3, 4, 4, 4, 4]);
}

#[test]
fn policies_never_beat_the_oracle() {
    let inst = instance(&[[0.0, 0.0]], &[[5.0, 0.0], [-5.0, 0.0], [0.0, 10.0]], 6);
    let opt = exact_min_peak_aoi(&inst).unwrap().optimum;
    let env = Env::new(inst.config().clone()).unwrap();
    let greedy = evaluate(&mut GreedyPolicy::new(), &env, 1, 0).unwrap();
    assert!(greedy.max_peak_aoi >= opt);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let seq: Vec<Vec<Action>> = (0..6).map(|_| vec![Action::ALL[rng.random_range(0..8)]]).collect();
        assert!(replay_verify(&inst, &seq).unwrap() >= opt);
    }
}

#[test]
fn guard_and_size_limits() {
    let mut cfg = instance(&[[0.0, 0.0]], &[[5.0, 0.0]], 3).config().clone();
    cfg.horizon = 9;
    assert!(matches!(TinyInstance::new(cfg.clone()), Err(OracleError::TooLarge { what: "horizon_T", .. })));
    cfg.horizon = 8;
    cfg.n_uavs = 2;
    cfg.layout.as_mut().unwrap().uavs.push([0.0, 5.0]);
    assert!(matches!(TinyInstance::new(cfg.clone()), Err(OracleError::Branching(_))));
    cfg.layout = None;
    cfg.horizon = 2;
    assert!(matches!(TinyInstance::new(cfg), Err(OracleError::NoLayout)));
}

#[test]
fn sequence_round_trip_and_length_check() {
    let inst = instance(&[[0.0, 0.0]], &[[5.0, 0.0]], 3);
    let seq = parse_sequence("E,NW,S").unwrap();
    assert_eq!(format_sequence(&seq), "E,NW,S");
    assert!(parse_sequence("E,QQ").is_none());
    assert!(matches!(replay_verify(&inst, &seq[..2]), Err(OracleError::Length { .. })));
}
