//! Persistent substrate: append-only posting streams addressed by
//! descriptors, the delta+varint posting codec, and the read counters
//! wired into every stream access.
//!
//! All integers in index files are little-endian; varints use 7 bits per
//! byte with a continuation bit in the high bit.

mod huffman;
mod keystore;
mod segment;

pub use huffman::HuffmanTable;
pub use keystore::{KeyStoreBuilder, KeyStoreReader, NS_BASELINE, NS_EXPANDED, NS_STOP_PHRASE};
pub use segment::{SegmentStore, SegmentWriter};

use crate::error::{Error, Result};
use crate::{DocId, Position};

/// One occurrence of a word: document id plus 0-based token position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Posting {
    pub doc: DocId,
    pub pos: Position,
}

impl Posting {
    pub fn new(doc: DocId, pos: Position) -> Self {
        Posting { doc, pos }
    }
}

/// Locator for one contiguous encoded stream in a segment file.
///
/// `count` is the number of records decodable from exactly `byte_len`
/// bytes at `offset`; what a "record" is depends on the stream kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamDescriptor {
    pub segment: u32,
    pub offset: u64,
    pub byte_len: u64,
    pub count: u64,
}

impl StreamDescriptor {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub(crate) fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.segment.to_le_bytes());
        out.extend_from_slice(&self.offset.to_le_bytes());
        out.extend_from_slice(&self.byte_len.to_le_bytes());
        out.extend_from_slice(&self.count.to_le_bytes());
    }

    pub(crate) fn read_from(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < 28 {
            return Err(Error::IndexCorrupt("truncated descriptor".into()));
        }
        let segment = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let offset = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
        let byte_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let count = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        Ok((
            StreamDescriptor {
                segment,
                offset,
                byte_len,
                count,
            },
            28,
        ))
    }
}

/// Per-query access counters.
///
/// `postings_read` counts every occurrence record materialized for the
/// current query: plain postings, first-occurrence records, expanded
/// postings, and near-stop annotation records all count as one each.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadStats {
    pub postings_read: u64,
    pub keys_probed: u64,
    pub bytes_read: u64,
}

impl ReadStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

pub(crate) fn write_varint(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value != 0 {
            out.push(byte | 0x80);
        } else {
            out.push(byte);
            break;
        }
    }
}

pub(crate) fn read_varint(bytes: &[u8], at: &mut usize) -> Option<u64> {
    let mut value = 0u64;
    let mut shift = 0u32;
    loop {
        let byte = *bytes.get(*at)?;
        *at += 1;
        value |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Some(value);
        }
        shift += 7;
        if shift >= 64 {
            return None;
        }
    }
}

pub(crate) fn zigzag_encode(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

pub(crate) fn zigzag_decode(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

/// Delta-encodes a strictly (doc, pos)-sorted posting list.
///
/// Doc gaps are varint-coded; the position is absolute when the document
/// changes and a gap otherwise.
pub fn encode_postings(postings: &[Posting]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut prev: Option<Posting> = None;
    for (i, p) in postings.iter().enumerate() {
        match prev {
            None => {
                write_varint(&mut out, u64::from(p.doc));
                write_varint(&mut out, u64::from(p.pos));
            }
            Some(q) => {
                if (p.doc, p.pos) <= (q.doc, q.pos) {
                    return Err(Error::OrderViolation(i));
                }
                let gap = u64::from(p.doc - q.doc);
                write_varint(&mut out, gap);
                if gap == 0 {
                    write_varint(&mut out, u64::from(p.pos - q.pos));
                } else {
                    write_varint(&mut out, u64::from(p.pos));
                }
            }
        }
        prev = Some(*p);
    }
    Ok(out)
}

/// Inverse of [`encode_postings`]; `count` comes from the descriptor.
pub fn decode_postings(bytes: &[u8], count: u64) -> Option<Vec<Posting>> {
    let mut out = Vec::with_capacity(count as usize);
    let mut at = 0usize;
    let mut prev: Option<Posting> = None;
    for _ in 0..count {
        let p = match prev {
            None => {
                let doc = read_varint(bytes, &mut at)?;
                let pos = read_varint(bytes, &mut at)?;
                Posting::new(u32::try_from(doc).ok()?, u32::try_from(pos).ok()?)
            }
            Some(q) => {
                let gap = read_varint(bytes, &mut at)?;
                let raw = read_varint(bytes, &mut at)?;
                let doc = q.doc.checked_add(u32::try_from(gap).ok()?)?;
                let pos = if gap == 0 {
                    q.pos.checked_add(u32::try_from(raw).ok()?)?
                } else {
                    u32::try_from(raw).ok()?
                };
                Posting::new(doc, pos)
            }
        };
        prev = Some(p);
        out.push(p);
    }
    if at != bytes.len() {
        return None; // trailing garbage
    }
    Some(out)
}

/// Appends an encoded posting stream and returns its descriptor.
pub fn append_stream(writer: &mut SegmentWriter, postings: &[Posting]) -> Result<StreamDescriptor> {
    let bytes = encode_postings(postings)?;
    Ok(writer.append(&bytes, postings.len() as u64))
}

/// Reads a full posting stream, charging every record to `stats`.
pub fn read_stream(
    store: &SegmentStore,
    d: &StreamDescriptor,
    stats: &mut ReadStats,
) -> Result<Vec<Posting>> {
    let bytes = store.stream_bytes(d)?;
    stats.bytes_read += d.byte_len;
    let postings = decode_postings(bytes, d.count).ok_or_else(|| Error::DecodeError {
        segment: d.segment,
        offset: d.offset,
        msg: "posting stream did not decode cleanly".into(),
    })?;
    stats.postings_read += d.count;
    Ok(postings)
}
