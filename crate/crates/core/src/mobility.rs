//! Node placement and random-waypoint movement inside a rectangular field.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::kernel::SimTime;
use crate::rng::{self, Stream};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The rectangular simulation area `[0, width] x [0, height]` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Field {
    pub width: f64,
    pub height: f64,
}

impl Field {
    pub fn contains(&self, p: &Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Position {
        Position::new(
            rng.gen::<f64>() * self.width,
            rng.gen::<f64>() * self.height,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MobilityModel {
    Static,
    RandomWaypoint { speed: f64, pause: f64 },
}

/// One leg of random-waypoint motion: travel from `current` to `waypoint`
/// during `[depart_at, arrive_at]`, then hold still until `pause_until`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub current: Position,
    pub waypoint: Position,
    pub speed: f64,
    pub depart_at: SimTime,
    pub arrive_at: SimTime,
    pub pause_until: SimTime,
}

impl MobilityState {
    pub fn stationary(at: Position) -> Self {
        MobilityState {
            current: at,
            waypoint: at,
            speed: 0.0,
            depart_at: SimTime::ZERO,
            arrive_at: SimTime::ZERO,
            pause_until: SimTime::MAX,
        }
    }

    /// A leg leaving `from` at `depart_at`, followed by a pause of `pause` seconds.
    pub fn leg(from: Position, to: Position, speed: f64, depart_at: SimTime, pause: f64) -> Self {
        let travel = from.distance(&to) / speed;
        let arrive_at = depart_at + SimTime::from_secs(travel);
        MobilityState {
            current: from,
            waypoint: to,
            speed,
            depart_at,
            arrive_at,
            pause_until: arrive_at + SimTime::from_secs(pause),
        }
    }

    /// Position on this leg. Times past `pause_until` report the waypoint;
    /// the caller is responsible for starting the next leg.
    pub fn position(&self, t: SimTime) -> Position {
        if t <= self.depart_at {
            return self.current;
        }
        if t >= self.arrive_at {
            return self.waypoint;
        }
        let span = (self.arrive_at - self.depart_at).as_nanos() as f64;
        let frac = (t - self.depart_at).as_nanos() as f64 / span;
        Position::new(
            self.current.x + (self.waypoint.x - self.current.x) * frac,
            self.current.y + (self.waypoint.y - self.current.y) * frac,
        )
    }
}

/// Positions of every node over time. Each node draws its waypoints from its
/// own seeded stream, so query order never affects trajectories.
pub struct Mobility {
    field: Field,
    model: MobilityModel,
    states: Vec<MobilityState>,
    rngs: Vec<ChaCha8Rng>,
}

impl Mobility {
    pub fn new(field: Field, model: MobilityModel, initial: &[Position], seed: u64) -> Self {
        let states = initial
            .iter()
            .map(|p| match model {
                MobilityModel::Static => MobilityState::stationary(*p),
                // Zero-length leg ending at t=0, so the first real leg departs at t=0.
                MobilityModel::RandomWaypoint { speed, .. } => MobilityState {
                    current: *p,
                    waypoint: *p,
                    speed,
                    depart_at: SimTime::ZERO,
                    arrive_at: SimTime::ZERO,
                    pause_until: SimTime::ZERO,
                },
            })
            .collect();
        let rngs = (0..initial.len())
            .map(|i| rng::stream(seed, Stream::Mobility(NodeId(i as u32))))
            .collect();
        Mobility {
            field,
            model,
            states,
            rngs,
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, node: NodeId) -> &MobilityState {
        &self.states[node.index()]
    }

    /// Starts new legs for `node` until `t` falls within the current one.
    pub fn advance(&mut self, node: NodeId, t: SimTime) {
        let MobilityModel::RandomWaypoint { speed, pause } = self.model else {
            return;
        };
        let i = node.index();
        while t > self.states[i].pause_until {
            let from = self.states[i].waypoint;
            let depart = self.states[i].pause_until;
            let to = self.field.random_point(&mut self.rngs[i]);
            self.states[i] = MobilityState::leg(from, to, speed, depart, pause);
        }
    }

    pub fn position_at(&mut self, node: NodeId, t: SimTime) -> Position {
        self.advance(node, t);
        self.states[node.index()].position(t)
    }

    /// When the current leg of `node` ends, if it ever does.
    pub fn leg_end(&self, node: NodeId) -> Option<SimTime> {
        let end = self.states[node.index()].pause_until;
        (end != SimTime::MAX).then_some(end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlacementError {
    #[error("no connected placement of {nodes} nodes found after {attempts} attempts")]
    NotConnected { nodes: usize, attempts: usize },
}

/// True when the unit-disk graph of `positions` with radius `range` is connected.
pub fn is_connected(positions: &[Position], range: f64) -> bool {
    if positions.len() <= 1 {
        return true;
    }
    let mut seen = vec![false; positions.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for v in 0..positions.len() {
            if !seen[v] && positions[u].distance(&positions[v]) <= range {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == positions.len()
}

pub const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// Uniform placement of `n` nodes, redrawn until connected when requested.
pub fn random_placement(
    field: Field,
    n: usize,
    range: f64,
    require_connected: bool,
    seed: u64,
) -> Result<Vec<Position>, PlacementError> {
    let mut rng = rng::stream(seed, Stream::Placement);
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let positions: Vec<Position> = (0..n).map(|_| field.random_point(&mut rng)).collect();
        if !require_connected || is_connected(&positions, range) {
            return Ok(positions);
        }
    }
    Err(PlacementError::NotConnected {
        nodes: n,
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })
}
