//! Contention-free unit-disk broadcast medium.
//!
//! A transmission from `s` starting at `t` is heard by every node within
//! `range` of `s` at `t`. Each copy arrives after the serialization delay
//! (`size * 8 / bandwidth`) plus a fixed per-hop processing delay, and is
//! independently lost with `loss_probability`. Per-node serialization is
//! enforced by [`TxQueue`].

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::kernel::SimTime;
use crate::mobility::Mobility;
use crate::rng::{self, Stream};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct RadioModel {
    /// Meters.
    pub range: f64,
    /// Bits per second.
    pub bandwidth: f64,
    /// Seconds added to every hop after serialization.
    pub per_hop_processing_delay: f64,
    pub loss_probability: f64,
    /// Frames that may wait behind the one being transmitted.
    pub queue_capacity: usize,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel {
            range: 250.0,
            bandwidth: 2_000_000.0,
            per_hop_processing_delay: 0.001,
            loss_probability: 0.0,
            queue_capacity: 50,
        }
    }
}

impl RadioModel {
    pub fn transmission_delay(&self, size_bytes: usize) -> SimTime {
        SimTime::from_secs(size_bytes as f64 * 8.0 / self.bandwidth)
    }

    pub fn processing_delay(&self) -> SimTime {
        SimTime::from_secs(self.per_hop_processing_delay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub to: NodeId,
    pub at: SimTime,
}

/// Result of putting one frame on the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    /// When the sender's transmitter becomes free again.
    pub tx_end: SimTime,
    pub deliveries: Vec<Delivery>,
    /// Receivers in range whose copy was lost.
    pub lost: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnicastOutcome {
    Delivered(Delivery),
    /// Receiver was outside radio range when the frame went out.
    OutOfRange,
    Lost,
}

pub struct Radio {
    model: RadioModel,
    loss_rng: ChaCha8Rng,
}

impl Radio {
    pub fn new(model: RadioModel, seed: u64) -> Self {
        Radio {
            model,
            loss_rng: rng::stream(seed, Stream::Loss),
        }
    }

    pub fn model(&self) -> &RadioModel {
        &self.model
    }

    fn lost(&mut self) -> bool {
        // Lossless runs draw nothing from the stream.
        self.model.loss_probability > 0.0 && self.loss_rng.gen::<f64>() < self.model.loss_probability
    }

    /// Nodes other than `sender` within range at `t`, in id order.
    pub fn neighbors(&self, mobility: &mut Mobility, sender: NodeId, t: SimTime) -> Vec<NodeId> {
        let origin = mobility.position_at(sender, t);
        (0..mobility.len() as u32)
            .map(NodeId)
            .filter(|&n| n != sender)
            .filter(|&n| mobility.position_at(n, t).distance(&origin) <= self.model.range)
            .collect()
    }

    pub fn broadcast(
        &mut self,
        mobility: &mut Mobility,
        sender: NodeId,
        size_bytes: usize,
        t: SimTime,
    ) -> Transmission {
        let tx_end = t + self.model.transmission_delay(size_bytes);
        let arrive = tx_end + self.model.processing_delay();
        let mut deliveries = Vec::new();
        let mut lost = Vec::new();
        for to in self.neighbors(mobility, sender, t) {
            if self.lost() {
                lost.push(to);
            } else {
                deliveries.push(Delivery { to, at: arrive });
            }
        }
        Transmission {
            tx_end,
            deliveries,
            lost,
        }
    }

    pub fn unicast(
        &mut self,
        mobility: &mut Mobility,
        sender: NodeId,
        receiver: NodeId,
        size_bytes: usize,
        t: SimTime,
    ) -> (SimTime, UnicastOutcome) {
        let tx_end = t + self.model.transmission_delay(size_bytes);
        let from = mobility.position_at(sender, t);
        let to = mobility.position_at(receiver, t);
        let outcome = if from.distance(&to) > self.model.range {
            UnicastOutcome::OutOfRange
        } else if self.lost() {
            UnicastOutcome::Lost
        } else {
            UnicastOutcome::Delivered(Delivery {
                to: receiver,
                at: tx_end + self.model.processing_delay(),
            })
        };
        (tx_end, outcome)
    }
}

/// Drop-tail FIFO in front of a node's transmitter.
#[derive(Debug, Clone)]
pub struct TxQueue<F> {
    waiting: VecDeque<F>,
    capacity: usize,
    busy: bool,
}

impl<F> TxQueue<F> {
    pub fn new(capacity: usize) -> Self {
        TxQueue {
            waiting: VecDeque::new(),
            capacity,
            busy: false,
        }
    }

    pub fn is_busy(&self) -> bool {
        self.busy
    }

    pub fn waiting(&self) -> impl Iterator<Item = &F> {
        self.waiting.iter()
    }

    pub fn len(&self) -> usize {
        self.waiting.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waiting.is_empty()
    }

    /// Offers a frame. Returns `Ok(Some(frame))` when the transmitter is idle
    /// and the frame should go out now, `Ok(None)` when queued, and
    /// `Err(frame)` when the queue is full.
    pub fn offer(&mut self, frame: F) -> Result<Option<F>, F> {
        if !self.busy {
            self.busy = true;
            return Ok(Some(frame));
        }
        if self.waiting.len() >= self.capacity {
            return Err(frame);
        }
        self.waiting.push_back(frame);
        Ok(None)
    }

    /// Called when the current transmission ends; yields the next frame to send.
    pub fn complete(&mut self) -> Option<F> {
        let next = self.waiting.pop_front();
        self.busy = next.is_some();
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::{Field, MobilityModel, Position};

    fn mobility(points: &[(f64, f64)]) -> Mobility {
        let pos: Vec<Position> = points.iter().map(|&(x, y)| Position::new(x, y)).collect();
        Mobility::new(
            Field {
                width: 1000.0,
                height: 1000.0,
            },
            MobilityModel::Static,
            &pos,
            1,
        )
    }

    #[test]
    fn serialization_delay_for_512_bytes_at_2mbps() {
        let m = RadioModel::default();
        assert_eq!(m.transmission_delay(512), SimTime::from_nanos(2_048_000));
    }

    #[test]
    fn isolated_sender_reaches_nobody() {
        let mut mob = mobility(&[(0.0, 0.0), (900.0, 900.0)]);
        let mut radio = Radio::new(RadioModel::default(), 1);
        let tx = radio.broadcast(&mut mob, NodeId(0), 64, SimTime::ZERO);
        assert!(tx.deliveries.is_empty());
        assert!(tx.lost.is_empty());
    }

    #[test]
    fn lossless_broadcast_reaches_every_neighbor() {
        let mut mob = mobility(&[(0.0, 0.0), (100.0, 0.0), (0.0, 200.0), (250.0, 0.0), (251.0, 0.0)]);
        let mut radio = Radio::new(RadioModel::default(), 1);
        let t = SimTime::from_secs(1.0);
        let tx = radio.broadcast(&mut mob, NodeId(0), 512, t);
        let to: Vec<_> = tx.deliveries.iter().map(|d| d.to).collect();
        assert_eq!(to, vec![NodeId(1), NodeId(2), NodeId(3)]);
        let expect = t + SimTime::from_nanos(2_048_000) + SimTime::from_secs(0.001);
        assert!(tx.deliveries.iter().all(|d| d.at == expect));
        assert_eq!(tx.tx_end, t + SimTime::from_nanos(2_048_000));
    }

    #[test]
    fn total_loss_drops_every_copy() {
        let mut mob = mobility(&[(0.0, 0.0), (100.0, 0.0)]);
        let model = RadioModel {
            loss_probability: 1.0,
            ..RadioModel::default()
        };
        let mut radio = Radio::new(model, 1);
        let tx = radio.broadcast(&mut mob, NodeId(0), 64, SimTime::ZERO);
        assert!(tx.deliveries.is_empty());
        assert_eq!(tx.lost, vec![NodeId(1)]);
    }

    #[test]
    fn unicast_out_of_range() {
        let mut mob = mobility(&[(0.0, 0.0), (300.0, 0.0)]);
        let mut radio = Radio::new(RadioModel::default(), 1);
        let (_, out) = radio.unicast(&mut mob, NodeId(0), NodeId(1), 64, SimTime::ZERO);
        assert_eq!(out, UnicastOutcome::OutOfRange);
    }

    #[test]
    fn tx_queue_is_drop_tail() {
        let mut q = TxQueue::new(2);
        assert_eq!(q.offer(1), Ok(Some(1)));
        assert_eq!(q.offer(2), Ok(None));
        assert_eq!(q.offer(3), Ok(None));
        assert_eq!(q.offer(4), Err(4));
        assert_eq!(q.complete(), Some(2));
        assert_eq!(q.complete(), Some(3));
        assert_eq!(q.complete(), None);
        assert!(!q.is_busy());
        assert_eq!(q.offer(5), Ok(Some(5)));
    }

    proptest::proptest! {
        #[test]
        fn lossless_delivery_set_matches_geometry(
            pts in proptest::collection::vec((0.0f64..1000.0, 0.0f64..1000.0), 2..30),
            sender in 0usize..30,
        ) {
            let sender = NodeId((sender % pts.len()) as u32);
            let mut mob = mobility(&pts);
            let mut radio = Radio::new(RadioModel::default(), 5);
            let tx = radio.broadcast(&mut mob, sender, 100, SimTime::ZERO);
            let got: Vec<NodeId> = tx.deliveries.iter().map(|d| d.to).collect();
            let s = pts[sender.index()];
            let want: Vec<NodeId> = pts.iter().enumerate()
                .filter(|(i, p)| *i != sender.index() && (p.0 - s.0).hypot(p.1 - s.1) <= 250.0)
                .map(|(i, _)| NodeId(i as u32))
                .collect();
            proptest::prop_assert_eq!(got, want);
        }
    }
}
