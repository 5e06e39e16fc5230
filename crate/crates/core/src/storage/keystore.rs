//! Ordered key → stream-descriptor store (`keys.pxkv`).
//!
//! The contract is ordered-map semantics with last-write-wins puts during
//! the build merge. Physically this is a sorted entry array: builds buffer
//! in a BTreeMap and write one sorted file, searches binary-search it.
//! Key namespaces share the file; the first key byte tells them apart
//! (0x01 stop phrases, 0x02 expanded pairs, 0x03 baseline).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{read_varint, write_varint, StreamDescriptor};

pub const NS_STOP_PHRASE: u8 = 0x01;
pub const NS_EXPANDED: u8 = 0x02;
pub const NS_BASELINE: u8 = 0x03;

const MAGIC: &[u8; 4] = b"PXKV";
const VERSION: u8 = 1;

/// Build-phase store; mutable until written out.
#[derive(Default)]
pub struct KeyStoreBuilder {
    map: BTreeMap<Vec<u8>, StreamDescriptor>,
    closed: bool,
}

impl KeyStoreBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, key: &[u8], d: StreamDescriptor) -> Result<()> {
        if self.closed {
            return Err(Error::StoreClosed);
        }
        assert!(!key.is_empty(), "key store keys must be non-empty");
        self.map.insert(key.to_vec(), d);
        Ok(())
    }

    pub fn get(&self, key: &[u8]) -> Option<StreamDescriptor> {
        self.map.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Writes the sorted entry file and closes the builder for writes.
    pub fn write_to(&mut self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.map.len() as u64).to_le_bytes());
        for (key, d) in &self.map {
            write_varint(&mut out, key.len() as u64);
            out.extend_from_slice(key);
            d.write_to(&mut out);
        }
        fs::write(path, out)?;
        self.closed = true;
        Ok(())
    }
}

/// Read-only store loaded from `keys.pxkv`.
pub struct KeyStoreReader {
    entries: Vec<(Box<[u8]>, StreamDescriptor)>,
}

impl KeyStoreReader {
    pub fn open(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 13 || &bytes[0..4] != MAGIC {
            return Err(Error::IndexCorrupt("bad key store magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::IndexCorrupt(format!(
                "unsupported key store version {}",
                bytes[4]
            )));
        }
        let n = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
        let mut at = 13usize;
        let mut entries: Vec<(Box<[u8]>, StreamDescriptor)> = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let klen = read_varint(&bytes, &mut at)
                .ok_or_else(|| Error::IndexCorrupt("key store truncated".into()))?
                as usize;
            let key = bytes
                .get(at..at + klen)
                .ok_or_else(|| Error::IndexCorrupt("key store truncated".into()))?;
            at += klen;
            let (d, used) = StreamDescriptor::read_from(&bytes[at..])?;
            at += used;
            if let Some((prev, _)) = entries.last() {
                if prev.as_ref() >= key {
                    return Err(Error::IndexCorrupt("key store not sorted".into()));
                }
            }
            entries.push((key.to_vec().into_boxed_slice(), d));
        }
        Ok(KeyStoreReader { entries })
    }

    pub fn get(&self, key: &[u8]) -> Option<StreamDescriptor> {
        self.entries
            .binary_search_by(|(k, _)| k.as_ref().cmp(key))
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// All entries whose key starts with `prefix`, in key order.
    pub fn prefix_iter<'a>(
        &'a self,
        prefix: &'a [u8],
    ) -> impl Iterator<Item = (&'a [u8], StreamDescriptor)> + 'a {
        let start = self.entries.partition_point(|(k, _)| k.as_ref() < prefix);
        self.entries[start..]
            .iter()
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(k, d)| (k.as_ref(), *d))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], StreamDescriptor)> {
        self.entries.iter().map(|(k, d)| (k.as_ref(), *d))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: u64) -> StreamDescriptor {
        StreamDescriptor {
            segment: 0,
            offset: n,
            byte_len: n * 2,
            count: n,
        }
    }

    #[test]
    fn put_get_last_write_wins() {
        let mut b = KeyStoreBuilder::new();
        b.put(b"k", d(1)).unwrap();
        assert_eq!(b.get(b"k"), Some(d(1)));
        b.put(b"k", d(2)).unwrap();
        assert_eq!(b.get(b"k"), Some(d(2)));
        assert_eq!(b.get(b"unseen"), None);
    }

    #[test]
    fn closed_builder_rejects_puts() {
        let tmp = tempfile::tempdir().unwrap();
        let mut b = KeyStoreBuilder::new();
        b.put(b"a", d(1)).unwrap();
        b.write_to(&tmp.path().join("keys.pxkv")).unwrap();
        assert!(matches!(b.put(b"b", d(2)), Err(Error::StoreClosed)));
    }

    #[test]
    fn reader_round_trip_and_order() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("keys.pxkv");
        let mut b = KeyStoreBuilder::new();
        b.put(&[2, 9], d(3)).unwrap();
        b.put(&[1, 4], d(1)).unwrap();
        b.put(&[1, 4, 0], d(2)).unwrap();
        b.write_to(&path).unwrap();

        let r = KeyStoreReader::open(&path).unwrap();
        assert_eq!(r.get(&[1, 4]), Some(d(1)));
        assert_eq!(r.get(&[9]), None);
        let keys: Vec<&[u8]> = r.iter().map(|(k, _)| k).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        let pref: Vec<&[u8]> = r.prefix_iter(&[1]).map(|(k, _)| k).collect();
        assert_eq!(pref, vec![&[1u8, 4][..], &[1, 4, 0][..]]);
    }
}
