//! Packets, events and the time-ordered event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::Serialize;

use crate::geometry::Point3;

/// Broadcast ranging request, one copy per tower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RequestPacket {
    /// Mobile clock reading at transmission, s.
    pub timestamp: f64,
    pub mob_id: u32,
}

/// Tower acknowledgement carrying the tower's coordinates and the request's
/// original timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AckPacket {
    pub destination: u32,
    pub tower: u32,
    pub tower_coord: Point3,
    pub timestamp: f64,
}

/// Ordering of event kinds at equal times: requests before acks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RequestArrives,
    AckArrives,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RequestArrives => "request_arrives",
            Self::AckArrives => "ack_arrives",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Payload {
    Request(RequestPacket),
    Ack(AckPacket),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// The tower the packet arrives at (requests) or comes from (acks).
    pub tower: u32,
    pub payload: Payload,
}

impl Event {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.kind.cmp(&other.kind)).then(self.tower.cmp(&other.tower))
    }
}

struct Scheduled {
    event: Event,
    seq: u64,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // BinaryHeap is a max-heap; reverse so the earliest event pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.event.key_cmp(&self.event).then(other.seq.cmp(&self.seq))
    }
}

/// Min-queue over `(time, kind, tower)`, FIFO among identical keys.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Scheduled>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { event, seq });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|s| s.event)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(time: f64, kind: EventKind, tower: u32) -> Event {
        let payload = Payload::Request(RequestPacket { timestamp: 0.0, mob_id: 1 });
        Event { time, kind, tower, payload }
    }

    #[test]
    fn pops_in_time_kind_tower_order() {
        let mut q = EventQueue::new();
        q.push(ev(2.0, EventKind::RequestArrives, 0));
        q.push(ev(1.0, EventKind::AckArrives, 0));
        q.push(ev(1.0, EventKind::RequestArrives, 5));
        q.push(ev(1.0, EventKind::RequestArrives, 2));
        q.push(ev(0.5, EventKind::AckArrives, 9));
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).map(|e| (e.time, e.kind, e.tower)).collect();
        assert_eq!(
            order,
            vec![
                (0.5, EventKind::AckArrives, 9),
                (1.0, EventKind::RequestArrives, 2),
                (1.0, EventKind::RequestArrives, 5),
                (1.0, EventKind::AckArrives, 0),
                (2.0, EventKind::RequestArrives, 0),
            ]
        );
        assert!(q.is_empty());
    }
}
