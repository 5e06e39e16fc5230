//! Expanded word-pair index: for each Frequent word w, the occurrences of
//! w restricted to contexts where another Frequent or Ordinary word v
//! lies strictly within `ProcessingDistance(w)` tokens.
//!
//! The symmetric pair is stored once. The canonical orientation puts the
//! more frequent form first (frequent-list rank ascending, then form id);
//! a Frequent–Ordinary pair is always owned by the Frequent member. The
//! admission window is the canonical owner's processing distance. A pair
//! of a form with itself stores only the positive-distance posting.

use crate::config::IngestConfig;
use crate::error::{Error, Result};
use crate::lexicon::{FrequencyClass, Lexicon};
use crate::storage::{
    read_varint, write_varint, zigzag_decode, zigzag_encode, KeyStoreReader, ReadStats,
    SegmentStore, NS_EXPANDED,
};
use crate::{DocId, Position, WordFormId};

/// Occurrence of the canonical pair: w's position plus the signed offset
/// to v.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExpandedPosting {
    pub doc: DocId,
    pub pos_w: Position,
    pub dist: i32,
}

/// Processing distance of a Frequent form.
pub fn processing_distance(cfg: &IngestConfig, lexicon: &Lexicon, form: WordFormId) -> Result<u32> {
    match lexicon.classify(form)? {
        FrequencyClass::Frequent => {}
        other => {
            return Err(Error::WrongIndex(format!(
                "{form} is {other:?}; only Frequent forms have expanded indexes"
            )))
        }
    }
    let rank = lexicon
        .freq_rank(form)
        .ok_or_else(|| Error::IndexCorrupt(format!("{form} is Frequent but has no rank")))?;
    Ok(cfg.processing_distance_for_rank(rank, lexicon.frequent_count()))
}

/// Canonical storage orientation of a pair. Returns (w, v, swapped):
/// `swapped` is true when the caller's (a, b) is stored as (b, a).
pub fn canonical_pair(
    lexicon: &Lexicon,
    a: WordFormId,
    b: WordFormId,
) -> Result<(WordFormId, WordFormId, bool)> {
    let ca = lexicon.classify(a)?;
    let cb = lexicon.classify(b)?;
    match (
        ca == FrequencyClass::Frequent,
        cb == FrequencyClass::Frequent,
    ) {
        (true, true) => {
            let ra = (lexicon.freq_rank(a).unwrap(), a.0);
            let rb = (lexicon.freq_rank(b).unwrap(), b.0);
            if ra <= rb {
                Ok((a, b, false))
            } else {
                Ok((b, a, true))
            }
        }
        (true, false) => Ok((a, b, false)),
        (false, true) => Ok((b, a, true)),
        (false, false) => Err(Error::WrongIndex(format!(
            "neither {a} nor {b} is Frequent; no expanded index exists"
        ))),
    }
}

/// Key bytes for a canonical pair.
pub fn encode_pair_key(w: WordFormId, v: WordFormId) -> Vec<u8> {
    let mut key = vec![NS_EXPANDED];
    write_varint(&mut key, u64::from(w.0));
    write_varint(&mut key, u64::from(v.0));
    key
}

pub fn decode_pair_key(key: &[u8]) -> Result<(WordFormId, WordFormId)> {
    debug_assert_eq!(key.first(), Some(&NS_EXPANDED));
    let mut at = 1usize;
    let corrupt = || Error::IndexCorrupt("bad expanded pair key".into());
    let w = read_varint(key, &mut at).ok_or_else(corrupt)?;
    let v = read_varint(key, &mut at).ok_or_else(corrupt)?;
    if at != key.len() {
        return Err(corrupt());
    }
    Ok((WordFormId(w as u32), WordFormId(v as u32)))
}

/// Emits all expanded postings for one document window of Frequent and
/// Ordinary entries, sorted by position. Stop forms must not appear.
///
/// Each unordered entry pair is considered once; admission uses the
/// canonical owner's processing distance.
pub fn emit_pairs(
    cfg: &IngestConfig,
    lexicon: &Lexicon,
    doc: DocId,
    window: &[(Position, WordFormId)],
    sink: &mut dyn FnMut((WordFormId, WordFormId), ExpandedPosting),
) -> Result<()> {
    let max_pd = cfg
        .processing_distance_top
        .max(cfg.processing_distance_rest);
    for i in 0..window.len() {
        let (pos_i, form_i) = window[i];
        for &(pos_j, form_j) in &window[i + 1..] {
            debug_assert!(pos_j >= pos_i, "window must be sorted by position");
            if pos_j - pos_i >= max_pd {
                break;
            }
            if pos_j == pos_i {
                continue; // several forms of one token are not a pair
            }
            let fi_frequent = lexicon.classify(form_i)? == FrequencyClass::Frequent;
            let fj_frequent = lexicon.classify(form_j)? == FrequencyClass::Frequent;
            if !fi_frequent && !fj_frequent {
                continue;
            }
            let (w, v, _) = canonical_pair(lexicon, form_i, form_j)?;
            let gap = pos_j - pos_i;
            if gap >= processing_distance(cfg, lexicon, w)? {
                continue;
            }
            // self pairs keep the earlier occurrence as w (positive dist);
            // otherwise w sits wherever the canonical owner occurred
            let posting = if form_i == form_j || w == form_i {
                ExpandedPosting {
                    doc,
                    pos_w: pos_i,
                    dist: gap as i32,
                }
            } else {
                ExpandedPosting {
                    doc,
                    pos_w: pos_j,
                    dist: -(gap as i32),
                }
            };
            sink((w, v), posting);
        }
    }
    Ok(())
}

/// Delta-encodes a (doc, pos_w, dist)-sorted expanded stream.
pub fn encode_expanded(postings: &[ExpandedPosting]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut prev: Option<ExpandedPosting> = None;
    for (i, p) in postings.iter().enumerate() {
        match prev {
            None => {
                write_varint(&mut out, u64::from(p.doc));
                write_varint(&mut out, u64::from(p.pos_w));
            }
            Some(q) => {
                if (p.doc, p.pos_w, p.dist) <= (q.doc, q.pos_w, q.dist) {
                    return Err(Error::OrderViolation(i));
                }
                let gap = u64::from(p.doc - q.doc);
                write_varint(&mut out, gap);
                if gap == 0 {
                    write_varint(&mut out, u64::from(p.pos_w - q.pos_w));
                } else {
                    write_varint(&mut out, u64::from(p.pos_w));
                }
            }
        }
        write_varint(&mut out, zigzag_encode(i64::from(p.dist)));
        prev = Some(*p);
    }
    Ok(out)
}

pub fn decode_expanded(bytes: &[u8], count: u64) -> Option<Vec<ExpandedPosting>> {
    let mut out = Vec::with_capacity(count as usize);
    let mut at = 0usize;
    let mut prev: Option<ExpandedPosting> = None;
    for _ in 0..count {
        let (doc, pos_w) = match prev {
            None => {
                let doc = u32::try_from(read_varint(bytes, &mut at)?).ok()?;
                let pos = u32::try_from(read_varint(bytes, &mut at)?).ok()?;
                (doc, pos)
            }
            Some(q) => {
                let gap = u32::try_from(read_varint(bytes, &mut at)?).ok()?;
                let raw = u32::try_from(read_varint(bytes, &mut at)?).ok()?;
                if gap == 0 {
                    (q.doc, q.pos_w.checked_add(raw)?)
                } else {
                    (q.doc.checked_add(gap)?, raw)
                }
            }
        };
        let dist = i32::try_from(zigzag_decode(read_varint(bytes, &mut at)?)).ok()?;
        let p = ExpandedPosting { doc, pos_w, dist };
        prev = Some(p);
        out.push(p);
    }
    if at != bytes.len() {
        return None;
    }
    Some(out)
}

/// Search-time view over the expanded keyspace.
pub struct ExpandedReader<'a> {
    pub keys: &'a KeyStoreReader,
    pub segments: &'a SegmentStore,
}

impl<'a> ExpandedReader<'a> {
    /// Co-occurrences of (w, v) inside the admission window, expressed in
    /// the caller's orientation as (doc, pos of w, pos of v).
    ///
    /// The stored orientation is resolved internally; for a self pair the
    /// stored posting is yielded in both orientations.
    pub fn lookup_pair(
        &self,
        lexicon: &Lexicon,
        w: WordFormId,
        v: WordFormId,
        stats: &mut ReadStats,
    ) -> Result<Vec<(DocId, Position, Position)>> {
        let (cw, cv, swapped) = canonical_pair(lexicon, w, v)?;
        let key = encode_pair_key(cw, cv);
        stats.keys_probed += 1;
        let d = match self.keys.get(&key) {
            Some(d) => d,
            None => return Ok(Vec::new()),
        };
        let bytes = self.segments.stream_bytes(&d)?;
        stats.bytes_read += d.byte_len;
        let postings = decode_expanded(bytes, d.count).ok_or_else(|| Error::DecodeError {
            segment: d.segment,
            offset: d.offset,
            msg: "expanded stream did not decode cleanly".into(),
        })?;
        stats.postings_read += d.count;
        let mut out = Vec::with_capacity(postings.len());
        for p in postings {
            let pos_v = add_dist(p.pos_w, p.dist)?;
            if w == v {
                out.push((p.doc, p.pos_w, pos_v));
                out.push((p.doc, pos_v, p.pos_w));
            } else if swapped {
                out.push((p.doc, pos_v, p.pos_w));
            } else {
                out.push((p.doc, p.pos_w, pos_v));
            }
        }
        Ok(out)
    }

    /// All (w, v, postings) entries; used by stats and verify.
    pub fn entries(&self) -> Result<Vec<(WordFormId, WordFormId, Vec<ExpandedPosting>)>> {
        let mut out = Vec::new();
        for (key, d) in self.keys.prefix_iter(&[NS_EXPANDED]) {
            let (w, v) = decode_pair_key(key)?;
            let bytes = self.segments.stream_bytes(&d)?;
            let postings = decode_expanded(bytes, d.count).ok_or_else(|| Error::DecodeError {
                segment: d.segment,
                offset: d.offset,
                msg: "expanded stream did not decode cleanly".into(),
            })?;
            out.push((w, v, postings));
        }
        Ok(out)
    }
}

fn add_dist(pos: Position, dist: i32) -> Result<Position> {
    let v = i64::from(pos) + i64::from(dist);
    u32::try_from(v).map_err(|_| Error::IndexCorrupt(format!("bad distance {dist} at {pos}")))
}
