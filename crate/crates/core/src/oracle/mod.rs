//! Exhaustive minimum peak AoI on tiny instances.
//!
//! Every joint action sequence is explored through the real environment with
//! one-shot collection, so the returned optimum is the exact lower bound any
//! policy can reach on the instance.

use std::collections::HashMap;

use thiserror::Error;

use crate::world::{peak_aoi, Action, Env, ScenarioConfig, WorldError, WorldState};

/// Largest joint branching `(|A|^N)^T` the search accepts.
pub const BRANCHING_GUARD: f64 = 1e8;

pub const MAX_UAVS: usize = 2;
pub const MAX_IOTS: usize = 4;
pub const MAX_HORIZON: usize = 8;

/// Quantum for memoized energies in J. One slot of flight drains tens of
/// joules, so two states whose energies agree to 0.1 J over at most eight
/// slots stay on the same side of every energy threshold.
const ENERGY_QUANTUM: f64 = 0.1;
/// Quantum for memoized positions in m.
const POSITION_QUANTUM: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large: {what} is {got}, at most {max}")]
    TooLarge { what: &'static str, got: usize, max: usize },
    #[error("joint branching {0:.3e} exceeds the guard of 1e8")]
    Branching(f64),
    #[error("instance needs a fixed layout")]
    NoLayout,
    #[error("sequence has {got} joint actions, horizon is {expected}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    World(#[from] WorldError),
}

/// A scenario small enough for exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstance {
    config: ScenarioConfig,
}

impl TinyInstance {
    /// Checks the size limits and forces one-shot collection.
    pub fn new(mut config: ScenarioConfig) -> Result<Self, OracleError> {
        config.regenerate_on_collect = false;
        config.validate()?;
        for (what, got, max) in [
            ("n_uavs", config.n_uavs, MAX_UAVS),
            ("n_iots", config.n_iots, MAX_IOTS),
            ("horizon_T", config.horizon, MAX_HORIZON),
        ] {
            if got > max {
                return Err(OracleError::TooLarge { what, got, max });
            }
        }
        if config.layout.is_none() {
            return Err(OracleError::NoLayout);
        }
        let b = branching(&config);
        if b > BRANCHING_GUARD {
            return Err(OracleError::Branching(b));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        let c = &self.config;
        format!(
            "{} UAV(s), {} IoT(s), horizon {}, step {} m, comm radius {} m, {} actions",
            c.n_uavs,
            c.n_iots,
            c.horizon,
            c.step_length(),
            c.comm_radius,
            c.n_actions()
        )
    }
}

/// `(|A|^N)^T` for `config`.
pub fn branching(config: &ScenarioConfig) -> f64 {
    (config.n_actions() as f64).powi((config.n_uavs * config.horizon) as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub optimum: usize,
    /// One optimal joint action per slot.
    pub witness: Vec<Vec<Action>>,
    /// Distinct states expanded.
    pub states: usize,
}

impl OracleResult {
    /// Witness as comma-separated compass letters; UAVs within a slot are
    /// joined with `+`.
    pub fn witness_string(&self) -> String {
        format_sequence(&self.witness)
    }
}

pub fn format_sequence(seq: &[Vec<Action>]) -> String {
    seq.iter()
        .map(|joint| joint.iter().map(|a| a.letter()).collect::<Vec<_>>().join("+"))
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    slot: usize,
    uavs: Vec<(i64, i64, i64, bool)>,
    iots: Vec<(bool, i64, i64)>,
}

fn quantize(v: f64, q: f64) -> i64 {
    (v / q).round() as i64
}

fn key_of(s: &WorldState) -> Key {
    Key {
        slot: s.slot,
        uavs: s
            .uavs
            .iter()
            .map(|u| {
                (
                    quantize(u.pos[0], POSITION_QUANTUM),
                    quantize(u.pos[1], POSITION_QUANTUM),
                    quantize(u.energy, ENERGY_QUANTUM),
                    u.alive,
                )
            })
            .collect(),
        iots: s
            .iots
            .iter()
            .map(|i| {
                (
                    i.has_data,
                    quantize(i.energy, ENERGY_QUANTUM),
                    quantize(i.data_remaining, ENERGY_QUANTUM),
                )
            })
            .collect(),
    }
}

/// Peak contributed by the slot that produced `next`: ages still pending
/// and ages recorded by collections in this slot. Ages recorded earlier were
/// counted when they were recorded.
fn slot_contribution(prev: &WorldState, next: &WorldState) -> usize {
    prev.iots
        .iter()
        .zip(&next.iots)
        .map(|(a, b)| {
            let pending = b.pending_age(next.slot).unwrap_or(0);
            let fresh = if b.collections > a.collections { b.recorded_aoi } else { 0 };
            pending.max(fresh)
        })
        .max()
        .unwrap_or(0)
}

struct Search<'e> {
    env: &'e Env,
    joints: Vec<Vec<Action>>,
    memo: HashMap<Key, (usize, usize)>,
}

impl Search<'_> {
    /// Smallest achievable maximum of the slot contributions from `state`
    /// on, with the index of the joint action achieving it.
    fn best(&mut self, state: &WorldState) -> Result<(usize, usize), OracleError> {
        if state.done {
            return Ok((0, usize::MAX));
        }
        let key = key_of(state);
        if let Some(&hit) = self.memo.get(&key) {
            return Ok(hit);
        }
        let mut best = (usize::MAX, usize::MAX);
        for j in 0..self.joints.len() {
            let out = self.env.step(state, &self.joints[j])?;
            let here = slot_contribution(state, &out.state);
            if here >= best.0 {
                continue;
            }
            let future = if out.state.failed {
                // Nothing collects the remaining packets after a failure.
                terminal_excess(&out.state, self.env.config().horizon)
            } else {
                self.best(&out.state)?.0
            };
            let total = here.max(future);
            if total < best.0 {
                best = (total, j);
            }
        }
        self.memo.insert(key, best);
        Ok(best)
    }
}

fn terminal_excess(state: &WorldState, horizon: usize) -> usize {
    state
        .iots
        .iter()
        .filter_map(|i| i.pending_age(horizon))
        .max()
        .unwrap_or(0)
}

fn joint_actions(n_actions: usize, n_uavs: usize) -> Vec<Vec<Action>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n_uavs {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                Action::ALL[..n_actions].iter().map(move |&a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

/// Minimum peak AoI over every joint action sequence, with a witness.
pub fn exact_min_peak_aoi(instance: &TinyInstance) -> Result<OracleResult, OracleError> {
    let env = Env::new(instance.config.clone())?;
    let c = env.config();
    let start = env.reset(c.rng_seed);
    let mut search = Search {
        env: &env,
        joints: joint_actions(c.n_actions(), c.n_uavs),
        memo: HashMap::new(),
    };
    let (future, _) = search.best(&start)?;
    let optimum = peak_aoi(&start).max(future);

    let mut witness = Vec::with_capacity(c.horizon);
    let mut state = start;
    while !state.done {
        let (_, j) = search.best(&state)?;
        let joint = search.joints[j].clone();
        state = env.step(&state, &joint)?.state;
        witness.push(joint);
    }
    // Pad with hovers (or the first action) if a failure ended the episode
    // early, so the witness always spans the horizon.
    let filler = if c.include_hover_action { Action::Hover } else { Action::N };
    while witness.len() < c.horizon {
        witness.push(vec![filler; c.n_uavs]);
    }
    Ok(OracleResult {
        optimum,
        witness,
        states: search.memo.len(),
    })
}

/// Replays `sequence` through the environment and returns the realized peak
/// AoI, counting packets still pending at the horizon.
pub fn replay_verify(instance: &TinyInstance, sequence: &[Vec<Action>]) -> Result<usize, OracleError> {
    let c = &instance.config;
    if sequence.len() != c.horizon {
        return Err(OracleError::Length {
            expected: c.horizon,
            got: sequence.len(),
        });
    }
    let env = Env::new(c.clone())?;
    let mut state = env.reset(c.rng_seed);
    for joint in sequence {
        if state.done {
            break;
        }
        state = env.step(&state, joint)?.state;
    }
    Ok(crate::world::terminal_peak_aoi(&state, c.horizon).max(state.peak_aoi_so_far))
}

/// Parses a witness string such as `E,W,W` or `N+S,E+E`.
pub fn parse_sequence(text: &str) -> Option<Vec<Vec<Action>>> {
    text.split(',')
        .map(|slot| slot.split('+').map(|l| Action::from_letter(l.trim())).collect())
        .collect()
}

#[cfg(test)]
mod tests;
