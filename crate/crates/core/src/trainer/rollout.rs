use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::nets::{sample_action, HiddenState, PolicyBundle};
use crate::world::{terminal_peak_aoi, Action, Env, Event, EventKind, RewardBreakdown, WorldState};

/// Seed of the `k`-th episode drawn from `base`.
pub fn episode_seed(base: u64, k: u64) -> u64 {
    base.wrapping_add(k)
}

/// One agent's view of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrajectory {
    pub obs: Vec<Vec<f64>>,
    /// Recurrent state fed into the actor at each slot.
    pub hidden: Vec<HiddenState<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub reward_parts: Vec<RewardBreakdown>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value after the last slot; 0 when the episode ended there.
    pub bootstrap: f64,
}

impl AgentTrajectory {
    fn with_capacity(n: usize) -> Self {
        Self {
            obs: Vec::with_capacity(n),
            hidden: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            reward_parts: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            bootstrap: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Per-episode summary, averaged over agents where a per-agent quantity is
/// involved.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeStats {
    pub slots: usize,
    pub cum_reward: f64,
    pub aoi_reward: f64,
    pub energy_reward: f64,
    pub collection_reward: f64,
    pub peak_aoi: usize,
    pub collections: usize,
    pub collisions: usize,
    pub clips: usize,
    pub failed: bool,
}

impl EpisodeStats {
    /// Accumulates the events and rewards of one slot.
    pub fn absorb(&mut self, state: &WorldState, rewards: &[RewardBreakdown], weights: [f64; 3]) {
        let n = rewards.len().max(1) as f64;
        self.slots += 1;
        for r in rewards {
            self.cum_reward += r.total / n;
            self.aoi_reward += weights[0] * r.r_a / n;
            self.energy_reward += weights[1] * r.r_p / n;
            self.collection_reward += weights[2] * r.r_s / n;
        }
        for e in &state.events {
            match e.kind {
                EventKind::Collect => self.collections += 1,
                EventKind::Clip => self.clips += 1,
                EventKind::Collide if e.peer.is_some_and(|p| p > e.id) => self.collisions += 1,
                _ => {}
            }
        }
    }

    pub fn finish(&mut self, state: &WorldState, horizon: usize) {
        self.peak_aoi = terminal_peak_aoi(state, horizon);
        self.failed = state.failed;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrajectory {
    pub seed: u64,
    pub global_states: Vec<Vec<f64>>,
    pub agents: Vec<AgentTrajectory>,
    pub stats: EpisodeStats,
    /// Every world event of the episode, in slot order.
    pub events: Vec<Event>,
}

impl EpisodeTrajectory {
    pub fn len(&self) -> usize {
        self.global_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global_states.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryBatch {
    pub episodes: Vec<EpisodeTrajectory>,
}

impl TrajectoryBatch {
    pub fn samples(&self) -> usize {
        self.episodes
            .iter()
            .map(|e| e.agents.iter().map(|a| a.len()).sum::<usize>())
            .sum()
    }
}

pub(crate) fn reward_weights(env: &Env) -> [f64; 3] {
    let c = env.config();
    [c.alpha_a, c.beta_p, c.gamma_s]
}

/// Runs one episode with the old actors sampling actions and the critic
/// recording values.
fn run_episode(env: &Env, bundle: &PolicyBundle<f64>, seed: u64) -> Result<EpisodeTrajectory, TrainError> {
    let cfg = env.config();
    let n = env.n_agents();
    if bundle.n_agents() != n {
        return Err(TrainError::Config {
            key: "n_uavs",
            message: format!("policy has {} actors for {n} UAVs", bundle.n_agents()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = env.reset(cfg.rng_seed);
    let mut hidden: Vec<HiddenState<f64>> = bundle.old_actors.iter().map(|a| a.initial_hidden()).collect();
    let mut agents: Vec<AgentTrajectory> = (0..n).map(|_| AgentTrajectory::with_capacity(cfg.horizon)).collect();
    let mut global_states = Vec::with_capacity(cfg.horizon);
    let mut stats = EpisodeStats::default();
    let mut events = Vec::new();
    let weights = reward_weights(env);

    while !state.done {
        let gs = env.global_state(&state);
        let obs: Vec<Vec<f64>> = (0..n).map(|j| env.observe(&state, j)).collect::<Result<_, _>>()?;
        let values = bundle.critic.values(&obs, &gs)?;
        let mut joint = Vec::with_capacity(n);
        for (j, o) in obs.into_iter().enumerate() {
            let (dist, next_hidden) = bundle.old_actors[j].step(&o, &hidden[j])?;
            let (a, lp) = sample_action(&dist, &mut rng);
            joint.push(Action::from_index(a).expect("actor emits valid action indices"));
            let ag = &mut agents[j];
            ag.obs.push(o);
            ag.hidden.push(std::mem::replace(&mut hidden[j], next_hidden));
            ag.actions.push(a);
            ag.log_probs.push(lp);
            ag.values.push(values[j]);
        }
        global_states.push(gs);
        let out = env.step(&state, &joint)?;
        stats.absorb(&out.state, &out.rewards, weights);
        events.extend_from_slice(&out.state.events);
        for (ag, r) in agents.iter_mut().zip(&out.rewards) {
            ag.rewards.push(r.total);
            ag.reward_parts.push(*r);
            ag.dones.push(out.done);
        }
        state = out.state;
    }
    stats.finish(&state, cfg.horizon);
    Ok(EpisodeTrajectory {
        seed,
        global_states,
        agents,
        stats,
        events,
    })
}

/// Collects `episodes` episodes; episode `k` samples with seed
/// `episode_seed(seed, k)`. Work is spread over `threads` workers and merged
/// in episode order, so the batch does not depend on the thread count.
pub fn collect_rollout(
    env: &Env,
    bundle: &PolicyBundle<f64>,
    episodes: usize,
    seed: u64,
    threads: usize,
) -> Result<TrajectoryBatch, TrainError> {
    let seeds: Vec<u64> = (0..episodes as u64).map(|k| episode_seed(seed, k)).collect();
    let workers = threads.clamp(1, episodes.max(1));
    let results: Vec<Result<EpisodeTrajectory, TrainError>> = if workers == 1 {
        seeds.iter().map(|&s| run_episode(env, bundle, s)).collect()
    } else {
        let mut slots: Vec<Option<Result<EpisodeTrajectory, TrainError>>> = (0..episodes).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let seeds = &seeds;
                    scope.spawn(move || {
                        (w..seeds.len())
                            .step_by(workers)
                            .map(|k| (k, run_episode(env, bundle, seeds[k])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (k, r) in h.join().expect("rollout worker panicked") {
                    slots[k] = Some(r);
                }
            }
        });
        slots.into_iter().map(|r| r.expect("every episode assigned")).collect()
    };
    Ok(TrajectoryBatch {
        episodes: results.into_iter().collect::<Result<_, _>>()?,
    })
}
