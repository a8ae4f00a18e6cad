use crate::domain::{ParticleRecord, RECORD_BYTES};
use crate::error::{Error, Result};
use crate::fabric::{FrameHeader, HEADER_BYTES};

/// A header plus densely packed particle records.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrantFrame {
    pub source: usize,
    pub epoch: u64,
    pub records: Vec<ParticleRecord>,
}

impl MigrantFrame {
    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES + RECORD_BYTES * self.records.len()
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        encode_records(self.source, self.epoch, &self.records, out);
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    /// Decodes one frame from the front of `bytes`, returning the rest.
    pub fn decode(bytes: &[u8]) -> Result<(Self, &[u8])> {
        let hdr = FrameHeader::parse(bytes)?;
        if hdr.bytes != hdr.count * RECORD_BYTES as u64 {
            return Err(Error::Protocol(format!(
                "frame announces {} records in {} bytes",
                hdr.count, hdr.bytes
            )));
        }
        let end = HEADER_BYTES + hdr.bytes as usize;
        if bytes.len() < end {
            return Err(Error::Protocol(format!(
                "frame needs {end} bytes, region holds {}",
                bytes.len()
            )));
        }
        let records = bytes[HEADER_BYTES..end]
            .chunks_exact(RECORD_BYTES)
            .map(ParticleRecord::unpack)
            .collect();
        Ok((
            Self {
                source: hdr.source as usize,
                epoch: hdr.epoch as u64,
                records,
            },
            &bytes[end..],
        ))
    }
}

/// Appends one frame of `records` to `out`.
pub fn encode_records(source: usize, epoch: u64, records: &[ParticleRecord], out: &mut Vec<u8>) {
    FrameHeader {
        source: source as u32,
        epoch: epoch as u32,
        count: records.len() as u64,
        bytes: (RECORD_BYTES * records.len()) as u64,
    }
    .encode_into(out);
    let at = out.len();
    out.resize(at + RECORD_BYTES * records.len(), 0);
    for (r, chunk) in records.iter().zip(out[at..].chunks_exact_mut(RECORD_BYTES)) {
        r.pack_into(chunk);
    }
}

/// Encodes a send list as one frame, or two when it exceeds `cap` records.
pub fn encode_with_spill(
    source: usize,
    epoch: u64,
    records: &[ParticleRecord],
    cap: usize,
) -> Result<Vec<u8>> {
    if records.len() > 2 * cap {
        return Err(Error::Protocol(format!(
            "{} migrants exceed two frames of {cap} records",
            records.len()
        )));
    }
    let mut out = Vec::with_capacity(2 * HEADER_BYTES + RECORD_BYTES * records.len());
    let split = records.len().min(cap);
    encode_records(source, epoch, &records[..split], &mut out);
    if records.len() > cap {
        encode_records(source, epoch, &records[split..], &mut out);
    }
    Ok(out)
}

/// Decodes every frame in a region, checking the epoch tag.
pub fn decode_frames(bytes: &[u8], epoch: u64, out: &mut Vec<ParticleRecord>) -> Result<usize> {
    let mut rest = bytes;
    let mut frames = 0;
    while !rest.is_empty() {
        let (f, tail) = MigrantFrame::decode(rest)?;
        if f.epoch != epoch as u32 as u64 {
            return Err(Error::Protocol(format!(
                "frame from rank {} carries epoch {} during epoch {epoch}",
                f.source, f.epoch
            )));
        }
        out.extend(f.records);
        rest = tail;
        frames += 1;
    }
    if frames == 0 {
        return Err(Error::Protocol(
            "empty region: header-only frame expected".into(),
        ));
    }
    Ok(frames)
}
