//! Line-oriented audit log of every transmission, reception, delivery and
//! drop in a run. Times are integer nanoseconds, so a log can be replayed
//! into exactly the counters the engine kept.
//!
//! ```text
//! <ns> tx-ctl <node> <kind> <bytes> <origin> <seq>
//! <ns> rx-ctl <node> <from> <kind> <origin> <seq>
//! <ns> gen <node> <packet> <dest> <bytes>
//! <ns> tx-data <node> <packet> <next_hop>
//! <ns> rx <node> <packet> <bytes> <delay_ns>
//! <ns> drop <node> <packet> <cause>
//! <ns> census <node> <selectors>
//! ```

use std::fmt;
use std::str::FromStr;

use crate::analytics::Counters;
use crate::kernel::SimTime;
use crate::protocol::ControlKind;
use crate::routing::DropCause;
use crate::wire::ControlPacket;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditEvent {
    ControlTx {
        node: NodeId,
        kind: ControlKind,
        bytes: usize,
        origin: NodeId,
        /// TC sequence number; 0 for other packet types.
        sequence: u64,
    },
    ControlRx {
        node: NodeId,
        from: NodeId,
        kind: ControlKind,
        origin: NodeId,
        sequence: u64,
    },
    Generated {
        node: NodeId,
        packet: u64,
        destination: NodeId,
        bytes: usize,
    },
    DataTx {
        node: NodeId,
        packet: u64,
        next_hop: NodeId,
    },
    Delivered {
        node: NodeId,
        packet: u64,
        bytes: usize,
        delay_ns: u64,
    },
    Dropped {
        node: NodeId,
        packet: u64,
        cause: DropCause,
    },
    Census {
        node: NodeId,
        selectors: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditRecord {
    pub at: SimTime,
    pub event: AuditEvent,
}

/// TC origin and sequence of a control packet, or the origin and 0.
pub fn control_identity(packet: &ControlPacket) -> (NodeId, u64) {
    match packet {
        ControlPacket::Tc(tc) => (tc.origin, tc.sequence),
        other => (other.origin(), 0),
    }
}

impl fmt::Display for AuditRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.at.as_nanos();
        match self.event {
            AuditEvent::ControlTx {
                node,
                kind,
                bytes,
                origin,
                sequence,
            } => write!(f, "{t} tx-ctl {node} {} {bytes} {origin} {sequence}", kind.as_str()),
            AuditEvent::ControlRx {
                node,
                from,
                kind,
                origin,
                sequence,
            } => write!(f, "{t} rx-ctl {node} {from} {} {origin} {sequence}", kind.as_str()),
            AuditEvent::Generated {
                node,
                packet,
                destination,
                bytes,
            } => write!(f, "{t} gen {node} {packet} {destination} {bytes}"),
            AuditEvent::DataTx { node, packet, next_hop } => write!(f, "{t} tx-data {node} {packet} {next_hop}"),
            AuditEvent::Delivered {
                node,
                packet,
                bytes,
                delay_ns,
            } => write!(f, "{t} rx {node} {packet} {bytes} {delay_ns}"),
            AuditEvent::Dropped { node, packet, cause } => write!(f, "{t} drop {node} {packet} {}", cause.as_str()),
            AuditEvent::Census { node, selectors } => write!(f, "{t} census {node} {selectors}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("audit line {line}: {message}")]
pub struct AuditParseError {
    pub line: usize,
    pub message: String,
}

struct Fields<'a> {
    parts: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn next(&mut self) -> Result<&'a str, String> {
        self.parts.next().ok_or_else(|| "missing field".to_string())
    }

    fn num<T: FromStr>(&mut self) -> Result<T, String> {
        let s = self.next()?;
        s.parse().map_err(|_| format!("bad number {s:?}"))
    }

    fn node(&mut self) -> Result<NodeId, String> {
        self.num().map(NodeId)
    }

    fn kind(&mut self) -> Result<ControlKind, String> {
        let s = self.next()?;
        ControlKind::parse(s).ok_or_else(|| format!("unknown control kind {s:?}"))
    }
}

impl FromStr for AuditRecord {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut f = Fields {
            parts: line.split_whitespace(),
        };
        let at = SimTime::from_nanos(f.num()?);
        let tag = f.next()?;
        let event = match tag {
            "tx-ctl" => AuditEvent::ControlTx {
                node: f.node()?,
                kind: f.kind()?,
                bytes: f.num()?,
                origin: f.node()?,
                sequence: f.num()?,
            },
            "rx-ctl" => AuditEvent::ControlRx {
                node: f.node()?,
                from: f.node()?,
                kind: f.kind()?,
                origin: f.node()?,
                sequence: f.num()?,
            },
            "gen" => AuditEvent::Generated {
                node: f.node()?,
                packet: f.num()?,
                destination: f.node()?,
                bytes: f.num()?,
            },
            "tx-data" => AuditEvent::DataTx {
                node: f.node()?,
                packet: f.num()?,
                next_hop: f.node()?,
            },
            "rx" => AuditEvent::Delivered {
                node: f.node()?,
                packet: f.num()?,
                bytes: f.num()?,
                delay_ns: f.num()?,
            },
            "drop" => {
                let node = f.node()?;
                let packet = f.num()?;
                let cause = f.next()?;
                AuditEvent::Dropped {
                    node,
                    packet,
                    cause: DropCause::parse(cause).ok_or_else(|| format!("unknown drop cause {cause:?}"))?,
                }
            }
            "census" => AuditEvent::Census {
                node: f.node()?,
                selectors: f.num()?,
            },
            other => return Err(format!("unknown record type {other:?}")),
        };
        if f.parts.next().is_some() {
            return Err("trailing fields".into());
        }
        Ok(AuditRecord { at, event })
    }
}

pub fn render(records: &[AuditRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

/// Parses a whole log; blank lines are skipped.
pub fn parse_log(text: &str) -> Result<Vec<AuditRecord>, AuditParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.parse().map_err(|message| AuditParseError { line: i + 1, message }))
        .collect()
}

/// Rebuilds run counters from a log.
pub fn replay(records: &[AuditRecord]) -> Counters {
    let mut c = Counters::default();
    for r in records {
        match r.event {
            AuditEvent::ControlTx { kind, .. } => *c.control_tx.entry(kind).or_default() += 1,
            AuditEvent::Generated { .. } => c.generated += 1,
            AuditEvent::Delivered { bytes, delay_ns, .. } => {
                c.delivered += 1;
                c.delivered_bytes += bytes as u64;
                c.delay_sum_ns += u128::from(delay_ns);
            }
            AuditEvent::Dropped { cause, .. } => *c.drops.entry(cause).or_default() += 1,
            AuditEvent::ControlRx { .. } | AuditEvent::DataTx { .. } | AuditEvent::Census { .. } => {}
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_event() -> impl Strategy<Value = AuditEvent> {
        let node = any::<u32>().prop_map(NodeId);
        let kind = prop::sample::select(ControlKind::ALL.to_vec());
        let cause = prop::sample::select(DropCause::ALL.to_vec());
        prop_oneof![
            (node.clone(), kind.clone(), 0usize..100_000, node.clone(), any::<u64>()).prop_map(
                |(node, kind, bytes, origin, sequence)| AuditEvent::ControlTx { node, kind, bytes, origin, sequence }
            ),
            (node.clone(), node.clone(), kind, node.clone(), any::<u64>()).prop_map(
                |(node, from, kind, origin, sequence)| AuditEvent::ControlRx { node, from, kind, origin, sequence }
            ),
            (node.clone(), any::<u64>(), node.clone(), 0usize..100_000).prop_map(
                |(node, packet, destination, bytes)| AuditEvent::Generated { node, packet, destination, bytes }
            ),
            (node.clone(), any::<u64>(), node.clone())
                .prop_map(|(node, packet, next_hop)| AuditEvent::DataTx { node, packet, next_hop }),
            (node.clone(), any::<u64>(), 0usize..100_000, any::<u64>()).prop_map(
                |(node, packet, bytes, delay_ns)| AuditEvent::Delivered { node, packet, bytes, delay_ns }
            ),
            (node.clone(), any::<u64>(), cause).prop_map(|(node, packet, cause)| AuditEvent::Dropped { node, packet, cause }),
            (node, 0usize..1000).prop_map(|(node, selectors)| AuditEvent::Census { node, selectors }),
        ]
    }

    proptest! {
        #[test]
        fn records_round_trip(events in prop::collection::vec((any::<u64>(), arb_event()), 0..30)) {
            let records: Vec<AuditRecord> = events
                .into_iter()
                .map(|(t, event)| AuditRecord { at: SimTime::from_nanos(t), event })
                .collect();
            prop_assert_eq!(parse_log(&render(&records)).unwrap(), records);
        }

        #[test]
        fn parser_never_panics(text in "[0-9a-z -]{0,120}") {
            let _ = parse_log(&text);
        }
    }

    #[test]
    fn replay_counts() {
        let log = "\
10 gen 0 1 3 64
20 tx-data 0 1 2
30 tx-ctl 4 hello 9 4 0
40 rx 3 1 64 30
50 drop 2 2 noroute
";
        let c = replay(&parse_log(log).unwrap());
        assert_eq!((c.generated, c.delivered, c.delivered_bytes, c.delay_sum_ns), (1, 1, 64, 30));
        assert_eq!(c.control(ControlKind::Hello), 1);
        assert_eq!(c.drops(DropCause::NoRoute), 1);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert_eq!(parse_log("1 tx-ctl 0 bogus 1 0 0").unwrap_err().line, 1);
        assert!(parse_log("\n5 drop 1 2 lost").is_err());
        assert!(parse_log("5 census 1 2 3").is_err());
        assert!(parse_log("x census 1 2").is_err());
    }
}
