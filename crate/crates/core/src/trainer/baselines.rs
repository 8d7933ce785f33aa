use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::nets::{sample_action, Actor, HiddenState};
use crate::world::{Action, Env, WorldState};

/// Anything that maps a world state to a joint action.
pub trait Policy {
    fn name(&self) -> &str;

    /// Called once after every reset.
    fn begin_episode(&mut self, env: &Env, state: &WorldState);

    fn act(&mut self, env: &Env, state: &WorldState, rng: &mut ChaCha8Rng) -> Result<Vec<Action>, TrainError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Feed-forward actor with a single-head critic, trained like the main
    /// method.
    MappoFf,
    Greedy,
    Random,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::MappoFf => "mappo_ff",
            BaselineKind::Greedy => "greedy",
            BaselineKind::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mappo_ff" => Some(BaselineKind::MappoFf),
            "greedy" => Some(BaselineKind::Greedy),
            "random" => Some(BaselineKind::Random),
            _ => None,
        }
    }
}

/// Uniform over the action set.
#[derive(Debug, Clone, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn begin_episode(&mut self, _env: &Env, _state: &WorldState) {}

    fn act(&mut self, env: &Env, state: &WorldState, rng: &mut ChaCha8Rng) -> Result<Vec<Action>, TrainError> {
        let n = env.config().n_actions();
        Ok(state
            .uavs
            .iter()
            .map(|_| Action::from_index(rng.random_range(0..n)).expect("index below action count"))
            .collect())
    }
}

/// Heads for the oldest pending packet not already claimed by a
/// lower-indexed UAV. Below the charge threshold a UAV flies to the nearest
/// LBD and stays until its battery is full.
#[derive(Debug, Clone, Default)]
pub struct GreedyPolicy {
    charging: Vec<bool>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl GreedyPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Action whose clipped landing point is closest to `target`; ties go to
    /// the lower action index.
    fn toward(env: &Env, pos: [f64; 2], target: [f64; 2]) -> Action {
        let c = env.config();
        let step = c.step_length();
        let h = c.area_half_side;
        let mut best = (f64::INFINITY, Action::N);
        for &a in &Action::ALL[..c.n_actions()] {
            let d = a.direction();
            let mut p = [(pos[0] + d[0] * step).clamp(-h, h), (pos[1] + d[1] * step).clamp(-h, h)];
            let r = p[0].hypot(p[1]);
            if r > c.flight_limit {
                p = [p[0] * c.flight_limit / r, p[1] * c.flight_limit / r];
            }
            let dd = dist(p, target);
            if dd < best.0 {
                best = (dd, a);
            }
        }
        best.1
    }
}

impl Policy for GreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn begin_episode(&mut self, env: &Env, _state: &WorldState) {
        self.charging = vec![false; env.n_agents()];
    }

    fn act(&mut self, env: &Env, state: &WorldState, _rng: &mut ChaCha8Rng) -> Result<Vec<Action>, TrainError> {
        let c = env.config();
        if self.charging.len() != state.uavs.len() {
            self.charging = vec![false; state.uavs.len()];
        }
        let mut claimed = vec![false; state.iots.len()];
        let mut joint = Vec::with_capacity(state.uavs.len());
        for (j, uav) in state.uavs.iter().enumerate() {
            if uav.energy <= c.e_charge_threshold {
                self.charging[j] = true;
            } else if uav.energy >= c.e_full - c.e_full_tol {
                self.charging[j] = false;
            }
            let target = if self.charging[j] {
                state
                    .lbds
                    .iter()
                    .map(|l| [l[0], l[1]])
                    .min_by(|a, b| dist(uav.pos, *a).total_cmp(&dist(uav.pos, *b)))
            } else {
                let pick = state
                    .iots
                    .iter()
                    .enumerate()
                    .filter(|(i, iot)| iot.has_data && !claimed[*i])
                    .map(|(i, iot)| (iot.pending_age(state.slot).unwrap_or(0), dist(uav.pos, iot.pos), i))
                    .min_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
                pick.map(|(_, _, i)| {
                    claimed[i] = true;
                    state.iots[i].pos
                })
            };
            joint.push(match target {
                Some(t) => Self::toward(env, uav.pos, t),
                None if c.include_hover_action => Action::Hover,
                None => Action::N,
            });
        }
        Ok(joint)
    }
}

/// Trained actors acting on their own observations, either by argmax or
/// by sampling.
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    actors: Vec<Actor<f64>>,
    hidden: Vec<HiddenState<f64>>,
    sample: bool,
}

impl LearnedPolicy {
    pub fn greedy(actors: Vec<Actor<f64>>) -> Self {
        Self {
            hidden: actors.iter().map(|a| a.initial_hidden()).collect(),
            actors,
            sample: false,
        }
    }

    pub fn sampling(actors: Vec<Actor<f64>>) -> Self {
        Self {
            sample: true,
            ..Self::greedy(actors)
        }
    }
}

impl Policy for LearnedPolicy {
    fn name(&self) -> &str {
        "learned"
    }

    fn begin_episode(&mut self, _env: &Env, _state: &WorldState) {
        self.hidden = self.actors.iter().map(|a| a.initial_hidden()).collect();
    }

    fn act(&mut self, env: &Env, state: &WorldState, rng: &mut ChaCha8Rng) -> Result<Vec<Action>, TrainError> {
        if self.actors.len() != state.uavs.len() {
            return Err(TrainError::Config {
                key: "n_uavs",
                message: format!("policy has {} actors for {} UAVs", self.actors.len(), state.uavs.len()),
            });
        }
        let mut joint = Vec::with_capacity(self.actors.len());
        for (j, actor) in self.actors.iter().enumerate() {
            let obs = env.observe(state, j)?;
            let (dist, next) = actor.step(&obs, &self.hidden[j])?;
            self.hidden[j] = next;
            let a = if self.sample {
                sample_action(&dist, rng).0
            } else {
                dist.argmax()
            };
            joint.push(Action::from_index(a).expect("actor emits valid action indices"));
        }
        Ok(joint)
    }
}
