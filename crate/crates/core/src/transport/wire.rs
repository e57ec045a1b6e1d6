//! Length-prefixed binary frames.
//!
//! ```text
//! magic "PCR1" | type u8 | session id [16] | scheme id u8 | payload_len u32 LE | payload
//! ```
//!
//! The payload is a sequence of field elements, 8 bytes little-endian each,
//! so `payload_len` is always a multiple of 8.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::protocol::SessionId;

pub const MAGIC: [u8; 4] = *b"PCR1";
pub const HEADER_LEN: usize = 26;
/// Largest accepted payload, in bytes.
pub const MAX_PAYLOAD: u32 = 64 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Hello = 0,
    Query = 1,
    Answer = 2,
    Error = 3,
}

impl TryFrom<u8> for MessageType {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(MessageType::Hello),
            1 => Ok(MessageType::Query),
            2 => Ok(MessageType::Answer),
            3 => Ok(MessageType::Error),
            other => Err(Error::Malformed(format!("unknown message type {other}"))),
        }
    }
}

/// Codes carried as the single payload element of an error frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum ErrorCode {
    Malformed = 1,
    UnknownScheme = 2,
    SchemeMismatch = 3,
    BadQuery = 4,
    Internal = 5,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireMessage {
    pub kind: MessageType,
    pub session: SessionId,
    pub scheme_id: u8,
    pub payload: Vec<u64>,
}

impl WireMessage {
    pub fn new(kind: MessageType, session: SessionId, scheme_id: u8, payload: Vec<u64>) -> Self {
        WireMessage {
            kind,
            session,
            scheme_id,
            payload,
        }
    }

    pub fn error(session: SessionId, scheme_id: u8, code: ErrorCode) -> Self {
        WireMessage::new(MessageType::Error, session, scheme_id, vec![code as u64])
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(self.kind as u8);
        out.extend_from_slice(&self.session);
        out.push(self.scheme_id);
        out.extend_from_slice(&((8 * self.payload.len()) as u32).to_le_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Malformed(format!("{} bytes is shorter than a header", bytes.len())));
        }
        let (kind, session, scheme_id, len) = parse_header(bytes[..HEADER_LEN].try_into().unwrap())?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != len {
            return Err(Error::Malformed(format!(
                "payload_len says {len} bytes, frame carries {}",
                body.len()
            )));
        }
        Ok(WireMessage::new(kind, session, scheme_id, parse_payload(body)))
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        let (kind, session, scheme_id, len) = parse_header(&header)?;
        let mut body = vec![0u8; len];
        r.read_exact(&mut body)?;
        Ok(WireMessage::new(kind, session, scheme_id, parse_payload(&body)))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }
}

fn parse_header(h: &[u8; HEADER_LEN]) -> Result<(MessageType, SessionId, u8, usize)> {
    if h[..4] != MAGIC {
        return Err(Error::Malformed("bad magic".into()));
    }
    let kind = MessageType::try_from(h[4])?;
    let session: SessionId = h[5..21].try_into().unwrap();
    let scheme_id = h[21];
    let len = u32::from_le_bytes(h[22..26].try_into().unwrap());
    if len % 8 != 0 {
        return Err(Error::Malformed(format!("payload_len {len} is not a multiple of 8")));
    }
    if len > MAX_PAYLOAD {
        return Err(Error::Malformed(format!("payload_len {len} exceeds {MAX_PAYLOAD}")));
    }
    Ok((kind, session, scheme_id, len as usize))
}

fn parse_payload(body: &[u8]) -> Vec<u64> {
    body.chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}
