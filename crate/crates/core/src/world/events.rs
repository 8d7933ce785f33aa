use std::fmt;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Uav,
    Iot,
    Lbd,
}

impl EntityKind {
    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Uav => "uav",
            EntityKind::Iot => "iot",
            EntityKind::Lbd => "lbd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Value: distance actually flown (m).
    Move,
    /// Value: distance removed by boundary clipping (m).
    Clip,
    /// Value: separation to the peer UAV (m).
    Collide,
    /// Value: energy harvested (J); peer is the LBD index.
    Charge,
    /// Value: propulsion energy spent (J).
    Drain,
    /// Logged on the IoT. Value: age of the collected packet (slots); peer is
    /// the collecting UAV.
    Collect,
    /// Value: battery energy before clamping (J).
    Die,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Move => "move",
            EventKind::Clip => "clip",
            EventKind::Collide => "collide",
            EventKind::Charge => "charge",
            EventKind::Drain => "drain",
            EventKind::Collect => "collect",
            EventKind::Die => "die",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub slot: usize,
    pub entity: EntityKind,
    pub id: usize,
    pub kind: EventKind,
    pub value: f64,
    pub peer: Option<usize>,
}

pub const EVENT_CSV_HEADER: &str = "slot,entity_kind,entity_id,event,value";

/// Writes events as CSV rows (no header).
pub fn write_event_rows<W: Write>(out: &mut W, events: &[Event]) -> io::Result<()> {
    for e in events {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.slot,
            e.entity.name(),
            e.id,
            e.kind.name(),
            e.value
        )?;
    }
    Ok(())
}
