//! Segment files hold the raw encoded streams. The writer keeps segments
//! in memory during a build and flushes them at finalize; the reader loads
//! them back whole, so stream access is a bounds-checked slice.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::StreamDescriptor;

/// Append-only writer over in-memory segment buffers.
///
/// A stream never spans two segments: when the current segment is
/// non-empty and the next stream would push it past the cap, a new
/// segment is started.
pub struct SegmentWriter {
    cap: u64,
    segments: Vec<Vec<u8>>,
}

impl SegmentWriter {
    pub fn new(cap: u64) -> Self {
        SegmentWriter {
            cap: cap.max(1),
            segments: vec![Vec::new()],
        }
    }

    /// Appends raw stream bytes; `count` is the caller's record count.
    pub fn append(&mut self, bytes: &[u8], count: u64) -> StreamDescriptor {
        let roll = {
            let cur = self.segments.last().unwrap();
            !cur.is_empty() && cur.len() as u64 + bytes.len() as u64 > self.cap
        };
        if roll {
            self.segments.push(Vec::new());
        }
        let segment = (self.segments.len() - 1) as u32;
        let cur = self.segments.last_mut().unwrap();
        let offset = cur.len() as u64;
        cur.extend_from_slice(bytes);
        StreamDescriptor {
            segment,
            offset,
            byte_len: bytes.len() as u64,
            count,
        }
    }

    pub fn segment_count(&self) -> u32 {
        self.segments.len() as u32
    }

    /// Writes `segments/NNN.seg` files under `dir`.
    pub fn flush_to(&self, dir: &Path) -> Result<()> {
        let seg_dir = dir.join("segments");
        fs::create_dir_all(&seg_dir)?;
        for (i, seg) in self.segments.iter().enumerate() {
            fs::write(seg_dir.join(format!("{i:03}.seg")), seg)?;
        }
        Ok(())
    }

    /// Converts the writer into an in-memory store (used by tests).
    pub fn into_store(self) -> SegmentStore {
        SegmentStore {
            segments: self.segments,
        }
    }
}

/// Read-only segment set loaded at index open.
pub struct SegmentStore {
    segments: Vec<Vec<u8>>,
}

impl SegmentStore {
    pub fn open(dir: &Path, segment_count: u32) -> Result<Self> {
        let seg_dir = dir.join("segments");
        let mut segments = Vec::with_capacity(segment_count as usize);
        for i in 0..segment_count {
            segments.push(fs::read(seg_dir.join(format!("{i:03}.seg")))?);
        }
        Ok(SegmentStore { segments })
    }

    /// The raw bytes of one stream.
    pub fn stream_bytes(&self, d: &StreamDescriptor) -> Result<&[u8]> {
        let seg = self
            .segments
            .get(d.segment as usize)
            .ok_or_else(|| Error::DecodeError {
                segment: d.segment,
                offset: d.offset,
                msg: "segment does not exist".into(),
            })?;
        let start = d.offset as usize;
        let end = start + d.byte_len as usize;
        seg.get(start..end).ok_or_else(|| Error::DecodeError {
            segment: d.segment,
            offset: d.offset,
            msg: format!(
                "stream range {start}..{end} exceeds segment length {}",
                seg.len()
            ),
        })
    }

    pub fn total_bytes(&self) -> u64 {
        self.segments.iter().map(|s| s.len() as u64).sum()
    }

    #[cfg(test)]
    pub(crate) fn truncate_segment_for_test(&mut self, segment: u32, len: usize) {
        self.segments[segment as usize].truncate(len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cap_rolls_segments() {
        let mut w = SegmentWriter::new(8);
        let a = w.append(&[1; 6], 1);
        let b = w.append(&[2; 6], 1);
        let c = w.append(&[3; 20], 1); // larger than cap, still a single segment
        assert_eq!(a.segment, 0);
        assert_eq!(b.segment, 1);
        assert_eq!(c.segment, 2);
        assert_eq!(w.segment_count(), 3);
        let store = w.into_store();
        assert_eq!(store.stream_bytes(&b).unwrap(), &[2; 6]);
        assert_eq!(store.stream_bytes(&c).unwrap(), &[3; 20]);
    }

    #[test]
    fn flush_and_reopen_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let mut w = SegmentWriter::new(16);
        let a = w.append(b"hello", 1);
        let b = w.append(b"world of streams", 1);
        let n = w.segment_count();
        w.flush_to(tmp.path()).unwrap();
        let store = SegmentStore::open(tmp.path(), n).unwrap();
        assert_eq!(store.stream_bytes(&a).unwrap(), b"hello");
        assert_eq!(store.stream_bytes(&b).unwrap(), b"world of streams");
    }
}
