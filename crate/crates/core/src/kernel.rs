//! Discrete-event core: simulation clock, event records and the time-ordered
//! queue that drives a run.
//!
//! Events fire in `(fire_at, sequence)` order. The sequence number is assigned
//! at insertion, so two events scheduled for the same instant are dispatched
//! in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, Sub};

use crate::NodeId;

/// Simulation time with nanosecond resolution.
///
/// Used both for instants and for spans; integer nanoseconds keep event
/// ordering exact and runs reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(nanos: u64) -> Self {
        SimTime(nanos)
    }

    /// Converts seconds to simulation time, rounding to the nearest nanosecond.
    /// Negative and NaN inputs clamp to zero.
    pub fn from_secs(secs: f64) -> Self {
        if secs.is_nan() || secs <= 0.0 {
            return SimTime(0);
        }
        let nanos = (secs * 1e9).round();
        if nanos >= u64::MAX as f64 {
            SimTime(u64::MAX)
        } else {
            SimTime(nanos as u64)
        }
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        self.saturating_sub(rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}

/// Coarse classification of queued work, used for traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    PacketDelivery,
    Timer,
    MobilityUpdate,
    TrafficGeneration,
}

/// A unit of scheduled work.
#[derive(Debug, Clone)]
pub struct SimEvent<P> {
    pub fire_at: SimTime,
    pub sequence: u64,
    pub target: NodeId,
    pub payload: P,
}

/// Returned by [`EventQueue::schedule`]; used to cancel a pending event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    InThePast { at: SimTime, now: SimTime },
}

struct Queued<P>(SimEvent<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.sequence == other.0.sequence
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    // Reversed so the max-heap pops the earliest (time, sequence) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.fire_at, other.0.sequence).cmp(&(self.0.fire_at, self.0.sequence))
    }
}

/// Time-ordered event queue with a monotone clock.
pub struct EventQueue<P> {
    heap: BinaryHeap<Queued<P>>,
    cancelled: HashSet<u64>,
    next_sequence: u64,
    now: SimTime,
    dispatched: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            next_sequence: 0,
            now: SimTime::ZERO,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Pending events, including cancelled ones not yet drained.
    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.len() == self.cancelled.len()
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        target: NodeId,
        payload: P,
    ) -> Result<EventHandle, ScheduleError> {
        if fire_at < self.now {
            return Err(ScheduleError::InThePast {
                at: fire_at,
                now: self.now,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Queued(SimEvent {
            fire_at,
            sequence,
            target,
            payload,
        }));
        Ok(EventHandle(sequence))
    }

    /// Schedules `delay` after the current clock; cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, target: NodeId, payload: P) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, target, payload)
            .expect("relative schedule is never in the past")
    }

    /// Cancels a pending event. Cancelling an already dispatched event is a no-op.
    pub fn cancel(&mut self, handle: EventHandle) {
        if handle.0 < self.next_sequence {
            self.cancelled.insert(handle.0);
        }
    }

    /// Pops the next live event with `fire_at <= end`, advancing the clock to it.
    pub fn pop_due(&mut self, end: SimTime) -> Option<SimEvent<P>> {
        loop {
            let head = self.heap.peek()?;
            if head.0.fire_at > end {
                return None;
            }
            let Queued(event) = self.heap.pop().expect("peeked");
            if self.cancelled.remove(&event.sequence) {
                continue;
            }
            debug_assert!(event.fire_at >= self.now);
            self.now = event.fire_at;
            self.dispatched += 1;
            return Some(event);
        }
    }

    /// Moves the clock forward to `end` without dispatching anything.
    pub fn advance_to(&mut self, end: SimTime) {
        if end > self.now {
            self.now = end;
        }
    }

    /// Dispatches every event due by `end` through `handler` and leaves the
    /// clock at `end`. Returns the number of events dispatched by this call.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, SimEvent<P>),
    {
        let before = self.dispatched;
        while let Some(event) = self.pop_due(end) {
            handler(self, event);
        }
        self.advance_to(end);
        self.dispatched - before
    }

    /// Iterates over live pending events in no particular order.
    pub fn pending(&self) -> impl Iterator<Item = &SimEvent<P>> {
        self.heap
            .iter()
            .map(|q| &q.0)
            .filter(|e| !self.cancelled.contains(&e.sequence))
    }
}
