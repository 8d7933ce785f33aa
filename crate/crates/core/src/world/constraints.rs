use std::io::{self, Write};

use super::events::{write_event_rows, Event, EventKind, EVENT_CSV_HEADER};
use super::{ScenarioConfig, WorldState};

/// Snapshot taken after each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub events: Vec<Event>,
    pub uav_energy: Vec<f64>,
    pub uav_pos: Vec<[f64; 2]>,
}

/// Full record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub initial: WorldState,
    pub slots: Vec<SlotRecord>,
    pub last: WorldState,
}

impl EpisodeLog {
    pub fn new(initial: WorldState) -> Self {
        Self {
            last: initial.clone(),
            initial,
            slots: Vec::new(),
        }
    }

    pub fn record(&mut self, state: &WorldState) {
        self.slots.push(SlotRecord {
            slot: state.slot,
            events: state.events.clone(),
            uav_energy: state.uavs.iter().map(|u| u.energy).collect(),
            uav_pos: state.uavs.iter().map(|u| u.pos).collect(),
        });
        self.last = state.clone();
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.slots.iter().flat_map(|s| s.events.iter())
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events().filter(|e| e.kind == kind).count()
    }

    /// Collision events counted once per UAV pair.
    pub fn collision_pairs(&self) -> usize {
        self.events()
            .filter(|e| e.kind == EventKind::Collide && e.peer.is_some_and(|p| p > e.id))
            .count()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{EVENT_CSV_HEADER}")?;
        for s in &self.slots {
            write_event_rows(out, &s.events)?;
        }
        Ok(())
    }

    /// Checks, for every UAV and slot, that the battery change equals the
    /// logged charge minus the logged drain, clamped to `[0, e_full]`.
    /// Returns the first `(slot, uav)` that does not balance bit-exactly.
    pub fn energy_imbalance(&self, e_full: f64) -> Option<(usize, usize)> {
        let mut prev: Vec<f64> = self.initial.uavs.iter().map(|u| u.energy).collect();
        for rec in &self.slots {
            for (j, &after) in rec.uav_energy.iter().enumerate() {
                let sum = |kind| {
                    rec.events
                        .iter()
                        .filter(|e| e.id == j && e.kind == kind)
                        .map(|e| e.value)
                        .sum::<f64>()
                };
                let expected = (prev[j] + sum(EventKind::Charge) - sum(EventKind::Drain)).clamp(0.0, e_full);
                if expected.to_bits() != after.to_bits() {
                    return Some((rec.slot, j));
                }
            }
            prev.clone_from(&rec.uav_energy);
        }
        None
    }
}

/// Satisfaction of the scheduling constraints over one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConstraintReport {
    /// IoTs never collected.
    pub uncollected_iots: usize,
    /// IoTs whose residual energy fell below the floor.
    pub iot_energy_violations: usize,
    /// UAV-slots with an empty battery.
    pub uav_energy_violations: usize,
    /// UAV pairs closer than the collision distance, summed over slots.
    pub collisions: usize,
    /// Moves that had to be clipped to the flight area.
    pub boundary_clips: usize,
}

impl ConstraintReport {
    pub fn all_data_collected(&self) -> bool {
        self.uncollected_iots == 0
    }
    pub fn iot_energy_ok(&self) -> bool {
        self.iot_energy_violations == 0
    }
    pub fn uav_energy_ok(&self) -> bool {
        self.uav_energy_violations == 0
    }
    pub fn separation_ok(&self) -> bool {
        self.collisions == 0
    }
    pub fn flight_area_ok(&self) -> bool {
        self.boundary_clips == 0
    }
    pub fn all_satisfied(&self) -> bool {
        self.all_data_collected()
            && self.iot_energy_ok()
            && self.uav_energy_ok()
            && self.separation_ok()
            && self.flight_area_ok()
    }

    pub fn merge(&mut self, other: &ConstraintReport) {
        self.uncollected_iots += other.uncollected_iots;
        self.iot_energy_violations += other.iot_energy_violations;
        self.uav_energy_violations += other.uav_energy_violations;
        self.collisions += other.collisions;
        self.boundary_clips += other.boundary_clips;
    }
}

pub fn check_constraints(log: &EpisodeLog, config: &ScenarioConfig) -> ConstraintReport {
    ConstraintReport {
        uncollected_iots: log.last.iots.iter().filter(|i| i.collections == 0).count(),
        iot_energy_violations: log
            .last
            .iots
            .iter()
            .filter(|i| i.energy < config.e_iot_floor)
            .count(),
        uav_energy_violations: log
            .slots
            .iter()
            .map(|s| s.uav_energy.iter().filter(|&&e| e <= 0.0 || e > config.e_full).count())
            .sum(),
        collisions: log.collision_pairs(),
        boundary_clips: log.count(EventKind::Clip),
    }
}
