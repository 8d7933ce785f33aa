//! Discrete-time multi-UAV data collection environment.
//!
//! A [`WorldState`] is a plain value; [`Env::step`] maps a state and a joint
//! action to the successor state, so search procedures can branch freely by
//! cloning states.

mod config;
mod constraints;
mod events;
mod layout;

pub use config::{CollectReward, Layout, ScenarioConfig};
pub use constraints::{check_constraints, ConstraintReport, EpisodeLog, SlotRecord};
pub use events::{write_event_rows, EntityKind, Event, EventKind, EVENT_CSV_HEADER};
pub use layout::{format_layout, parse_layout, parse_layout_line};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::physics::{laser_power_received, propulsion_power, transmission_rate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid scenario config `{key}`: {message}")]
    Config { key: &'static str, message: String },
    #[error("layout line {line}: {message}")]
    Layout { line: usize, message: String },
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("action index {0} out of range")]
    InvalidAction(usize),
    #[error("episode already finished at slot {0}")]
    EpisodeFinished(usize),
    #[error("agent {0} is not alive")]
    DeadAgent(usize),
    #[error("agent index {0} out of range")]
    NoSuchAgent(usize),
    #[error("physics: {0}")]
    Physics(#[from] crate::physics::PhysicsError),
}

/// Compass heading of one slot's displacement, or hover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
    Hover,
}

impl Action {
    pub const ALL: [Action; 9] = [
        Action::N,
        Action::NE,
        Action::E,
        Action::SE,
        Action::S,
        Action::SW,
        Action::W,
        Action::NW,
        Action::Hover,
    ];

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Unit direction; `(0, 0)` for hover. North is `+y`, east is `+x`.
    pub fn direction(self) -> [f64; 2] {
        let d = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Action::N => [0.0, 1.0],
            Action::NE => [d, d],
            Action::E => [1.0, 0.0],
            Action::SE => [d, -d],
            Action::S => [0.0, -1.0],
            Action::SW => [-d, -d],
            Action::W => [-1.0, 0.0],
            Action::NW => [-d, d],
            Action::Hover => [0.0, 0.0],
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Action::N => "N",
            Action::NE => "NE",
            Action::E => "E",
            Action::SE => "SE",
            Action::S => "S",
            Action::SW => "SW",
            Action::W => "W",
            Action::NW => "NW",
            Action::Hover => "H",
        }
    }

    pub fn from_letter(s: &str) -> Option<Action> {
        Self::ALL.iter().copied().find(|a| a.letter() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub pos: [f64; 2],
    pub energy: f64,
    pub alive: bool,
    pub charging_lbd: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IotState {
    pub pos: [f64; 2],
    /// Slot at which the currently held packet was generated.
    pub gen_time: usize,
    pub has_data: bool,
    /// Age of the most recently collected packet.
    pub recorded_aoi: usize,
    pub energy: f64,
    /// Uplink volume still owed in rate-gated mode (bit).
    pub data_remaining: f64,
    pub collections: usize,
}

impl IotState {
    /// Age of the pending packet at `slot`, if one is waiting.
    pub fn pending_age(&self, slot: usize) -> Option<usize> {
        self.has_data.then(|| slot - self.gen_time)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub slot: usize,
    pub uavs: Vec<UavState>,
    pub iots: Vec<IotState>,
    pub lbds: Vec<[f64; 3]>,
    /// Running maximum of [`peak_aoi`] over the episode so far.
    pub peak_aoi_so_far: usize,
    /// Events of the most recent slot.
    pub events: Vec<Event>,
    pub done: bool,
    /// True when the episode ended because a battery emptied.
    pub failed: bool,
}

/// Per-agent reward components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardBreakdown {
    pub r_a: f64,
    pub r_p: f64,
    pub r_s: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: WorldState,
    pub rewards: Vec<RewardBreakdown>,
    pub done: bool,
}

/// Largest current age over all IoTs: the recorded age of the last collected
/// packet, or the age of a packet still waiting for collection.
pub fn peak_aoi(state: &WorldState) -> usize {
    state
        .iots
        .iter()
        .map(|i| i.recorded_aoi.max(i.pending_age(state.slot).unwrap_or(0)))
        .max()
        .unwrap_or(0)
}

/// Like [`peak_aoi`] but ignoring packets that have not been collected yet.
pub fn peak_aoi_collected_only(state: &WorldState) -> usize {
    state.iots.iter().map(|i| i.recorded_aoi).max().unwrap_or(0)
}

/// Peak AoI credited to a finished episode. An episode cut short by a dead
/// battery is charged the ages its pending packets reach at the horizon,
/// since nothing collects them afterwards.
pub fn terminal_peak_aoi(state: &WorldState, horizon: usize) -> usize {
    let projected = state
        .iots
        .iter()
        .filter_map(|i| i.pending_age(horizon.max(state.slot)))
        .max()
        .unwrap_or(0);
    if state.failed {
        state.peak_aoi_so_far.max(projected)
    } else {
        state.peak_aoi_so_far
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Environment dynamics bound to one scenario.
#[derive(Debug, Clone)]
pub struct Env {
    config: ScenarioConfig,
}

impl Env {
    pub fn new(config: ScenarioConfig) -> Result<Self, WorldError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn n_agents(&self) -> usize {
        self.config.n_uavs
    }

    fn default_uav_positions(&self) -> Vec<[f64; 2]> {
        const BASE: [[f64; 2]; 4] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        (0..self.config.n_uavs)
            .map(|k| {
                let r = (1 + k / 4) as f64;
                [BASE[k % 4][0] * r, BASE[k % 4][1] * r]
            })
            .collect()
    }

    fn default_lbd_positions(&self) -> Vec<[f64; 3]> {
        let n = self.config.n_lbds;
        if n == 1 {
            return vec![[0.0, 0.0, 0.0]];
        }
        let r = self.config.charge_radius;
        (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                [r * a.cos(), r * a.sin(), 0.0]
            })
            .collect()
    }

    /// IoTs are drawn uniformly over the square, restricted to the flight
    /// disc so that every IoT is collectible.
    fn random_iot_positions(&self, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.config.area_half_side;
        let limit = self.config.flight_limit;
        let mut out = Vec::with_capacity(self.config.n_iots);
        while out.len() < self.config.n_iots {
            let p = [rng.random_range(-h..h), rng.random_range(-h..h)];
            if p[0].hypot(p[1]) <= limit {
                out.push(p);
            }
        }
        out
    }

    /// Initial state. `seed` drives the random IoT placement when the
    /// scenario has no fixed layout.
    pub fn reset(&self, seed: u64) -> WorldState {
        let c = &self.config;
        let layout = c.layout.clone().unwrap_or_default();
        let uav_pos = if layout.uavs.is_empty() {
            self.default_uav_positions()
        } else {
            layout.uavs.clone()
        };
        let lbds = if layout.lbds.is_empty() {
            self.default_lbd_positions()
        } else {
            layout.lbds.clone()
        };
        let iot_pos = if layout.iots.is_empty() {
            self.random_iot_positions(seed)
        } else {
            layout.iots.clone()
        };
        WorldState {
            slot: 0,
            uavs: uav_pos
                .into_iter()
                .map(|pos| UavState {
                    pos,
                    energy: c.e_init(),
                    alive: true,
                    charging_lbd: None,
                })
                .collect(),
            iots: iot_pos
                .into_iter()
                .map(|pos| IotState {
                    pos,
                    gen_time: 0,
                    has_data: true,
                    recorded_aoi: 0,
                    energy: c.e_iot_init,
                    data_remaining: c.data_volume,
                    collections: 0,
                })
                .collect(),
            lbds,
            peak_aoi_so_far: 0,
            events: Vec::new(),
            done: false,
            failed: false,
        }
    }

    /// Clips `p` into the square and then into the flight disc.
    fn clip_position(&self, p: [f64; 2]) -> [f64; 2] {
        let h = self.config.area_half_side;
        let mut q = [p[0].clamp(-h, h), p[1].clamp(-h, h)];
        let r = q[0].hypot(q[1]);
        let limit = self.config.flight_limit;
        if r > limit {
            q = [q[0] * limit / r, q[1] * limit / r];
        }
        q
    }

    pub fn step(&self, state: &WorldState, joint_action: &[Action]) -> Result<StepOutcome, WorldError> {
        let c = &self.config;
        if state.done || state.slot >= c.horizon {
            return Err(WorldError::EpisodeFinished(state.slot));
        }
        if joint_action.len() != state.uavs.len() {
            return Err(WorldError::ActionCount {
                expected: state.uavs.len(),
                got: joint_action.len(),
            });
        }
        if let Some(a) = joint_action
            .iter()
            .find(|a| !c.include_hover_action && **a == Action::Hover)
        {
            return Err(WorldError::InvalidAction(a.index()));
        }

        let mut next = state.clone();
        next.slot = state.slot + 1;
        next.events.clear();
        let t = next.slot;
        let step_len = c.step_length();
        let mut events = Vec::new();

        // 1. Movement with boundary clipping.
        let mut moved = vec![0.0; next.uavs.len()];
        for (j, (uav, action)) in next.uavs.iter_mut().zip(joint_action).enumerate() {
            let d = action.direction();
            let target = [uav.pos[0] + d[0] * step_len, uav.pos[1] + d[1] * step_len];
            let clipped = self.clip_position(target);
            if clipped != target {
                events.push(Event {
                    slot: t,
                    entity: EntityKind::Uav,
                    id: j,
                    kind: EventKind::Clip,
                    value: dist(target, clipped),
                    peer: None,
                });
            }
            moved[j] = dist(uav.pos, clipped);
            uav.pos = clipped;
            events.push(Event {
                slot: t,
                entity: EntityKind::Uav,
                id: j,
                kind: EventKind::Move,
                value: moved[j],
                peer: None,
            });
        }

        // 2. Pairwise separation.
        for a in 0..next.uavs.len() {
            for b in (a + 1)..next.uavs.len() {
                let d = dist(next.uavs[a].pos, next.uavs[b].pos);
                if d < c.collision_dist {
                    for (me, other) in [(a, b), (b, a)] {
                        events.push(Event {
                            slot: t,
                            entity: EntityKind::Uav,
                            id: me,
                            kind: EventKind::Collide,
                            value: d,
                            peer: Some(other),
                        });
                    }
                }
            }
        }

        // 3. Charging: greedy nearest-first matching, one UAV per LBD and one
        // LBD per UAV. Ties go to the lower UAV index, then lower LBD index.
        let mut pairs = Vec::new();
        for (l, lbd) in next.lbds.iter().enumerate() {
            for (j, uav) in next.uavs.iter().enumerate() {
                let d = dist(uav.pos, [lbd[0], lbd[1]]);
                if uav.alive && d <= c.charge_radius {
                    pairs.push((d, j, l));
                }
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut charge = vec![0.0; next.uavs.len()];
        let mut lbd_busy = vec![false; next.lbds.len()];
        for uav in next.uavs.iter_mut() {
            uav.charging_lbd = None;
        }
        for (d, j, l) in pairs {
            if lbd_busy[l] || next.uavs[j].charging_lbd.is_some() {
                continue;
            }
            lbd_busy[l] = true;
            next.uavs[j].charging_lbd = Some(l);
            let vertical = c.altitude - next.lbds[l][2];
            charge[j] = laser_power_received(&c.laser, d, vertical) * c.slot_dt;
            events.push(Event {
                slot: t,
                entity: EntityKind::Uav,
                id: j,
                kind: EventKind::Charge,
                value: charge[j],
                peer: Some(l),
            });
        }

        // 4. Propulsion drain and battery update.
        for (j, uav) in next.uavs.iter_mut().enumerate() {
            let speed = moved[j] / c.slot_dt;
            let drain = propulsion_power(&c.propulsion, speed)? * c.slot_dt;
            events.push(Event {
                slot: t,
                entity: EntityKind::Uav,
                id: j,
                kind: EventKind::Drain,
                value: drain,
                peer: None,
            });
            let raw = uav.energy + charge[j] - drain;
            uav.energy = raw.clamp(0.0, c.e_full);
            if uav.energy <= 0.0 {
                uav.alive = false;
                next.failed = true;
                events.push(Event {
                    slot: t,
                    entity: EntityKind::Uav,
                    id: j,
                    kind: EventKind::Die,
                    value: raw,
                    peer: None,
                });
            }
        }

        // 5. Data collection by the nearest live UAV in range.
        let tx_energy = c.channel.tx_power * c.slot_dt;
        for (i, iot) in next.iots.iter_mut().enumerate() {
            if !iot.has_data {
                continue;
            }
            let collector = next
                .uavs
                .iter()
                .enumerate()
                .filter(|(_, u)| u.alive)
                .map(|(j, u)| (dist(u.pos, iot.pos), j))
                .filter(|(d, _)| *d <= c.comm_radius)
                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            let Some((d, j)) = collector else { continue };
            iot.energy = (iot.energy - tx_energy).max(0.0);
            if c.rate_gated {
                let rate = transmission_rate(&c.channel, d, c.altitude)?;
                iot.data_remaining -= rate * c.slot_dt;
                if iot.data_remaining > 0.0 {
                    continue;
                }
            }
            let age = t - iot.gen_time;
            iot.recorded_aoi = age;
            iot.collections += 1;
            iot.data_remaining = c.data_volume;
            if c.regenerate_on_collect {
                iot.gen_time = t;
            } else {
                iot.has_data = false;
            }
            events.push(Event {
                slot: t,
                entity: EntityKind::Iot,
                id: i,
                kind: EventKind::Collect,
                value: age as f64,
                peer: Some(j),
            });
        }

        next.events = events;
        // 6. Peak AoI bookkeeping.
        next.peak_aoi_so_far = state.peak_aoi_so_far.max(peak_aoi(&next));
        next.done = next.failed || next.slot >= c.horizon;

        // 7. Rewards.
        let rewards = (0..next.uavs.len())
            .map(|j| reward_of(state, &next, j, c))
            .collect();
        let done = next.done;
        Ok(StepOutcome {
            state: next,
            rewards,
            done,
        })
    }

    /// Local observation of `agent`; see [`observe`].
    pub fn observe(&self, state: &WorldState, agent: usize) -> Result<Vec<f64>, WorldError> {
        observe(state, agent, &self.config)
    }

    pub fn global_state(&self, state: &WorldState) -> Vec<f64> {
        global_state(state, &self.config)
    }
}

/// Fixed-width local observation:
/// `[x, y, energy_frac, (dx, dy, age, has_data) * K, lbd_dx, lbd_dy]`.
///
/// Positions are divided by the area half-side, relative offsets by the full
/// side, ages by `aoi_norm`. The K rows describe the nearest IoTs in order of
/// distance; missing rows are zero.
pub fn observe(state: &WorldState, agent: usize, c: &ScenarioConfig) -> Result<Vec<f64>, WorldError> {
    let uav = state.uavs.get(agent).ok_or(WorldError::NoSuchAgent(agent))?;
    if !uav.alive {
        return Err(WorldError::DeadAgent(agent));
    }
    let h = c.area_half_side;
    let side = 2.0 * h;
    let mut obs = Vec::with_capacity(c.obs_dim());
    obs.push(uav.pos[0] / h);
    obs.push(uav.pos[1] / h);
    obs.push(uav.energy / c.e_full);

    let mut rows: Vec<[f64; 5]> = state
        .iots
        .iter()
        .map(|iot| {
            let dx = iot.pos[0] - uav.pos[0];
            let dy = iot.pos[1] - uav.pos[1];
            let age = iot.pending_age(state.slot).unwrap_or(0) as f64 / c.aoi_norm;
            [dx.hypot(dy), dx, dy, age, if iot.has_data { 1.0 } else { 0.0 }]
        })
        .collect();
    // Every column takes part in the ordering so the result does not depend
    // on the storage order of the IoTs.
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for k in 0..c.obs_k_nearest {
        match rows.get(k) {
            Some(r) => obs.extend_from_slice(&[r[1] / side, r[2] / side, r[3], r[4]]),
            None => obs.extend_from_slice(&[0.0; 4]),
        }
    }

    let nearest_lbd = state
        .lbds
        .iter()
        .map(|l| [l[0] - uav.pos[0], l[1] - uav.pos[1]])
        .min_by(|a, b| a[0].hypot(a[1]).total_cmp(&b[0].hypot(b[1])))
        .unwrap_or([0.0, 0.0]);
    obs.push(nearest_lbd[0] / side);
    obs.push(nearest_lbd[1] / side);
    Ok(obs)
}

/// Global state vector for the centralized critic:
/// `[(x, y, energy_frac) per UAV, (age, has_data) per IoT, slot / horizon]`.
pub fn global_state(state: &WorldState, c: &ScenarioConfig) -> Vec<f64> {
    let h = c.area_half_side;
    let mut s = Vec::with_capacity(c.global_state_dim());
    for u in &state.uavs {
        s.extend_from_slice(&[u.pos[0] / h, u.pos[1] / h, u.energy / c.e_full]);
    }
    for i in &state.iots {
        s.push(i.pending_age(state.slot).unwrap_or(0) as f64 / c.aoi_norm);
        s.push(if i.has_data { 1.0 } else { 0.0 });
    }
    s.push(state.slot as f64 / c.horizon as f64);
    s
}

/// Horizontal distance from `pos` to the boundary of the nearest charging
/// area; zero inside it.
pub fn charging_area_distance(state: &WorldState, pos: [f64; 2], c: &ScenarioConfig) -> f64 {
    state
        .lbds
        .iter()
        .map(|l| dist(pos, [l[0], l[1]]))
        .fold(f64::INFINITY, f64::min)
        .max(c.charge_radius)
        - c.charge_radius
}

/// Reward components of `agent` for the transition `before -> after`.
pub fn reward_of(
    _before: &WorldState,
    after: &WorldState,
    agent: usize,
    c: &ScenarioConfig,
) -> RewardBreakdown {
    let uav = &after.uavs[agent];
    let d_c = charging_area_distance(after, uav.pos, c);
    let mut r_p = if uav.energy <= c.e_charge_threshold {
        -d_c * c.r_pen1
    } else if uav.energy >= c.e_full - c.e_full_tol {
        -d_c * c.r_pen2
    } else {
        c.r_0
    };
    let mut r_s = 0.0;
    for e in &after.events {
        match e.kind {
            EventKind::Collide | EventKind::Clip if e.id == agent => r_p -= c.event_penalty,
            EventKind::Die if e.id == agent => r_p -= c.death_penalty,
            EventKind::Collect if e.peer == Some(agent) => {
                r_s += match c.collect_reward {
                    CollectReward::Count => 1.0,
                    CollectReward::Age => e.value / c.aoi_norm,
                }
            }
            _ => {}
        }
    }
    let r_a = -(peak_aoi(after) as f64) / c.aoi_norm;
    RewardBreakdown {
        r_a,
        r_p,
        r_s,
        total: c.alpha_a * r_a + c.beta_p * r_p + c.gamma_s * r_s,
    }
}
