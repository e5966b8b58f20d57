//! Control packets and their byte encoding.
//!
//! The on-air size of a control packet is its encoded length, so larger
//! tables cost proportionally more bandwidth. All integers are big-endian.
//!
//! ```text
//! DSDV  0x01 origin:u32 flags:u8 count:u16 { dest:u32 metric:i32 seq:u64 }*
//! FSR   0x02 origin:u32 scope:u8 count:u16 { dest:u32 seq:u64 n:u16 { nbr:u32 }* }*
//! HELLO 0x03 origin:u32 n:u16 { nbr:u32 }* m:u16 { mpr:u32 }*
//! TC    0x04 origin:u32 seq:u64 count:u16 { selector:u32 }*
//! ```

use crate::dsdv::{DsdvEntry, DsdvUpdate};
use crate::fsr::{FsrUpdate, LinkStateEntry, Scope};
use crate::olsr::{Hello, TcMessage};
use crate::NodeId;

const TAG_DSDV: u8 = 0x01;
const TAG_FSR: u8 = 0x02;
const TAG_HELLO: u8 = 0x03;
const TAG_TC: u8 = 0x04;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlPacket {
    Dsdv(DsdvUpdate),
    Fsr(FsrUpdate),
    Hello(Hello),
    Tc(TcMessage),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("packet truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown packet type {0:#04x}")]
    UnknownType(u8),
    #[error("unknown FSR scope {0}")]
    UnknownScope(u8),
    #[error("{0} trailing bytes after packet")]
    TrailingBytes(usize),
    #[error("list of {0} items does not fit a u16 length field")]
    TooLong(usize),
}

impl ControlPacket {
    pub fn origin(&self) -> NodeId {
        match self {
            ControlPacket::Dsdv(u) => u.origin,
            ControlPacket::Fsr(u) => u.origin,
            ControlPacket::Hello(h) => h.origin,
            ControlPacket::Tc(tc) => tc.origin,
        }
    }

    /// Encoded size in bytes, computed without encoding.
    pub fn encoded_len(&self) -> usize {
        match self {
            ControlPacket::Dsdv(u) => 1 + 4 + 1 + 2 + 16 * u.entries.len(),
            ControlPacket::Fsr(u) => {
                1 + 4 + 1 + 2 + u.carried.iter().map(|e| 4 + 8 + 2 + 4 * e.neighbors.len()).sum::<usize>()
            }
            ControlPacket::Hello(h) => 1 + 4 + 2 + 4 * h.neighbors.len() + 2 + 4 * h.mprs.len(),
            ControlPacket::Tc(tc) => 1 + 4 + 8 + 2 + 4 * tc.advertised.len(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(self.encoded_len());
        match self {
            ControlPacket::Dsdv(u) => {
                out.push(TAG_DSDV);
                put_u32(&mut out, u.origin.0);
                out.push(u8::from(u.full_dump));
                put_len(&mut out, u.entries.len())?;
                for e in &u.entries {
                    put_u32(&mut out, e.destination.0);
                    out.extend_from_slice(&e.metric.to_be_bytes());
                    out.extend_from_slice(&e.sequence.to_be_bytes());
                }
            }
            ControlPacket::Fsr(u) => {
                out.push(TAG_FSR);
                put_u32(&mut out, u.origin.0);
                out.push(match u.scope {
                    Scope::Inner => 0,
                    Scope::Outer => 1,
                });
                put_len(&mut out, u.carried.len())?;
                for e in &u.carried {
                    put_u32(&mut out, e.destination.0);
                    out.extend_from_slice(&e.sequence.to_be_bytes());
                    put_nodes(&mut out, &e.neighbors)?;
                }
            }
            ControlPacket::Hello(h) => {
                out.push(TAG_HELLO);
                put_u32(&mut out, h.origin.0);
                put_nodes(&mut out, &h.neighbors)?;
                put_nodes(&mut out, &h.mprs)?;
            }
            ControlPacket::Tc(tc) => {
                out.push(TAG_TC);
                put_u32(&mut out, tc.origin.0);
                out.extend_from_slice(&tc.sequence.to_be_bytes());
                put_nodes(&mut out, &tc.advertised)?;
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader { bytes, pos: 0 };
        let packet = match r.u8()? {
            TAG_DSDV => {
                let origin = NodeId(r.u32()?);
                let full_dump = r.u8()? & 1 == 1;
                let count = r.u16()? as usize;
                let mut entries = Vec::with_capacity(count.min(r.remaining() / 16));
                for _ in 0..count {
                    entries.push(DsdvEntry {
                        destination: NodeId(r.u32()?),
                        metric: r.u32()? as i32,
                        sequence: r.u64()?,
                    });
                }
                ControlPacket::Dsdv(DsdvUpdate {
                    origin,
                    full_dump,
                    entries,
                })
            }
            TAG_FSR => {
                let origin = NodeId(r.u32()?);
                let scope = match r.u8()? {
                    0 => Scope::Inner,
                    1 => Scope::Outer,
                    other => return Err(WireError::UnknownScope(other)),
                };
                let count = r.u16()? as usize;
                let mut carried = Vec::with_capacity(count.min(r.remaining() / 14));
                for _ in 0..count {
                    let destination = NodeId(r.u32()?);
                    let sequence = r.u64()?;
                    let neighbors = r.nodes()?;
                    carried.push(LinkStateEntry {
                        destination,
                        neighbors,
                        sequence,
                    });
                }
                ControlPacket::Fsr(FsrUpdate {
                    origin,
                    scope,
                    carried,
                })
            }
            TAG_HELLO => ControlPacket::Hello(Hello {
                origin: NodeId(r.u32()?),
                neighbors: r.nodes()?,
                mprs: r.nodes()?,
            }),
            TAG_TC => ControlPacket::Tc(TcMessage {
                origin: NodeId(r.u32()?),
                sequence: r.u64()?,
                advertised: r.nodes()?,
            }),
            other => return Err(WireError::UnknownType(other)),
        };
        if r.remaining() > 0 {
            return Err(WireError::TrailingBytes(r.remaining()));
        }
        Ok(packet)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_len(out: &mut Vec<u8>, len: usize) -> Result<(), WireError> {
    let len = u16::try_from(len).map_err(|_| WireError::TooLong(len))?;
    out.extend_from_slice(&len.to_be_bytes());
    Ok(())
}

fn put_nodes(out: &mut Vec<u8>, nodes: &[NodeId]) -> Result<(), WireError> {
    put_len(out, nodes.len())?;
    for n in nodes {
        put_u32(out, n.0);
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        let end = self.pos + N;
        let slice = self.bytes.get(self.pos..end).ok_or(WireError::Truncated(self.pos))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take()?))
    }

    fn nodes(&mut self) -> Result<Vec<NodeId>, WireError> {
        let count = self.u16()? as usize;
        if count * 4 > self.remaining() {
            return Err(WireError::Truncated(self.bytes.len()));
        }
        (0..count).map(|_| self.u32().map(NodeId)).collect()
    }
}
