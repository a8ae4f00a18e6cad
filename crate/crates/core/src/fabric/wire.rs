use super::HEADER_BYTES;
use crate::error::{Error, Result};

/// Little-endian frame header: `{u32 source, u32 epoch, u64 count, u64 bytes, u64 reserved}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub source: u32,
    pub epoch: u32,
    pub count: u64,
    pub bytes: u64,
}

impl FrameHeader {
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.source.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&self.bytes.to_le_bytes());
        out.extend_from_slice(&0u64.to_le_bytes());
    }

    /// Parses the header at the front of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::Protocol(format!(
                "frame of {} bytes has no header",
                bytes.len()
            )));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        Ok(Self {
            source: u32_at(0),
            epoch: u32_at(4),
            count: u64_at(8),
            bytes: u64_at(16),
        })
    }

    /// Parses a header and checks that the rest of `frame` is its payload.
    pub fn decode(frame: &[u8]) -> Result<(Self, &[u8])> {
        let h = Self::parse(frame)?;
        let payload = &frame[HEADER_BYTES..];
        if payload.len() as u64 != h.bytes {
            return Err(Error::Protocol(format!(
                "header announces {} payload bytes, frame carries {}",
                h.bytes,
                payload.len()
            )));
        }
        Ok((h, payload))
    }
}

/// Frame carrying `values` as little-endian f64.
pub fn encode_f64_frame(source: usize, epoch: u64, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * values.len());
    FrameHeader {
        source: source as u32,
        epoch: epoch as u32,
        count: values.len() as u64,
        bytes: 8 * values.len() as u64,
    }
    .encode_into(&mut out);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_f64_payload(payload: &[u8]) -> impl Iterator<Item = f64> + '_ {
    payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
}
