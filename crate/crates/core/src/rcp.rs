//! Three-byte robot command frames.
//!
//! Layout, MSB first: `turn | gimbal | dx sign | dx (9) | dy sign | dy (9) | 00`.
//! Offsets are sign-magnitude with sign bit 1 for non-negative values.
//! On a stream each frame is preceded by a length byte.

use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use thiserror::Error;

pub const FRAME_LEN: usize = 3;
pub const MAX_OFFSET: i16 = 511;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RcpCommand {
    pub turn: bool,
    pub gimbal: bool,
    pub dx: i16,
    pub dy: i16,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RcpError {
    #[error("{field} = {value} does not fit in 9 magnitude bits")]
    OutOfRange { field: &'static str, value: i16 },
    #[error("malformed frame {0:02X?}: pad bits set")]
    PadBits([u8; 3]),
    #[error("unsupported frame length {0}")]
    Length(u8),
}

impl RcpCommand {
    pub fn new(turn: bool, gimbal: bool, dx: i16, dy: i16) -> Self {
        Self { turn, gimbal, dx, dy }
    }
}

fn field(name: &'static str, v: i16) -> Result<u32, RcpError> {
    if !(-MAX_OFFSET..=MAX_OFFSET).contains(&v) {
        return Err(RcpError::OutOfRange { field: name, value: v });
    }
    Ok(u32::from(v >= 0) << 9 | u32::from(v.unsigned_abs()))
}

fn unfield(bits: u32) -> i16 {
    let mag = (bits & 0x1FF) as i16;
    if bits & 0x200 != 0 { mag } else { -mag }
}

pub fn encode(c: &RcpCommand) -> Result<[u8; 3], RcpError> {
    let word = u32::from(c.turn) << 23
        | u32::from(c.gimbal) << 22
        | field("dx", c.dx)? << 12
        | field("dy", c.dy)? << 2;
    let b = word.to_be_bytes();
    Ok([b[1], b[2], b[3]])
}

pub fn decode(b: [u8; 3]) -> Result<RcpCommand, RcpError> {
    let word = u32::from_be_bytes([0, b[0], b[1], b[2]]);
    if word & 0b11 != 0 {
        return Err(RcpError::PadBits(b));
    }
    Ok(RcpCommand {
        turn: word >> 23 & 1 == 1,
        gimbal: word >> 22 & 1 == 1,
        dx: unfield(word >> 12),
        dy: unfield(word >> 2),
    })
}

/// Write one length-prefixed frame.
pub fn write_frame<W: Write>(w: &mut W, c: &RcpCommand) -> io::Result<()> {
    let b = encode(c).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    w.write_all(&[FRAME_LEN as u8, b[0], b[1], b[2]])
}

/// Read one length-prefixed frame. `Ok(None)` at a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<RcpCommand>> {
    let mut len = [0u8; 1];
    match r.read_exact(&mut len) {
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        other => other?,
    }
    if usize::from(len[0]) != FRAME_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidData, RcpError::Length(len[0])));
    }
    let mut b = [0u8; 3];
    r.read_exact(&mut b)?;
    decode(b).map(Some).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
