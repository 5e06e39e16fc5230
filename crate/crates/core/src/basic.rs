//! Basic index: all occurrences of Frequent and Ordinary words, stored in
//! up to three streams per word so a query reads only what it needs.
//!
//! Stream 1 holds (doc, first position, occurrence count) records — one
//! per document. Stream 2 holds the remaining positions. Stream 3 holds
//! one near-stop annotation record per occurrence: the stop words no
//! further than the class's `MaxDistance` from the occurrence, as
//! (signed offset, stop index) pairs.
//!
//! Words in fewer documents than `rare_doc_threshold` store everything in
//! one combined stream, flagged in the descriptor table.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexicon::{FrequencyClass, Lexicon};
use crate::storage::{
    read_varint, write_varint, zigzag_decode, zigzag_encode, ReadStats, SegmentStore,
    SegmentWriter, StreamDescriptor,
};
use crate::{DocId, Position, StopIndex, WordFormId};

/// Stream-1 record: document, first position, total occurrences there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirstOccurrenceRecord {
    pub doc: DocId,
    pub first_pos: Position,
    pub count: u32,
}

/// Stop words near one occurrence, sorted by (offset, stop index).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NearStopAnnotation {
    pub neighbors: Vec<(i32, StopIndex)>,
}

const FLAG_PRESENT: u8 = 1;
const FLAG_COMBINED: u8 = 2;
const FLAG_HAS_S2: u8 = 4;
const FLAG_HAS_S3: u8 = 8;

/// Per-word stream layout. Either a combined stream (rare words) or
/// stream 1 plus optional streams 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WordStreams {
    pub flags: u8,
    pub s1: StreamDescriptor,
    pub s2: StreamDescriptor,
    pub s3: StreamDescriptor,
}

impl WordStreams {
    pub fn present(&self) -> bool {
        self.flags & FLAG_PRESENT != 0
    }

    pub fn combined(&self) -> bool {
        self.flags & FLAG_COMBINED != 0
    }

    pub fn has_s2(&self) -> bool {
        self.flags & FLAG_HAS_S2 != 0
    }

    pub fn has_s3(&self) -> bool {
        self.flags & FLAG_HAS_S3 != 0
    }

    pub fn total_bytes(&self) -> u64 {
        self.s1.byte_len + self.s2.byte_len + self.s3.byte_len
    }
}

/// One word's occurrences grouped by document, ready for encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocOccurrences {
    pub doc: DocId,
    pub positions: Vec<Position>,
    pub annotations: Vec<NearStopAnnotation>,
}

fn write_annotation(out: &mut Vec<u8>, ann: &NearStopAnnotation) {
    write_varint(out, ann.neighbors.len() as u64);
    let mut prev_off = 0i64;
    for &(off, stop) in &ann.neighbors {
        write_varint(out, zigzag_encode(i64::from(off) - prev_off));
        write_varint(out, u64::from(stop));
        prev_off = i64::from(off);
    }
}

fn read_annotation(bytes: &[u8], at: &mut usize) -> Option<NearStopAnnotation> {
    let n = read_varint(bytes, at)?;
    let mut neighbors = Vec::with_capacity(n as usize);
    let mut prev_off = 0i64;
    for _ in 0..n {
        let off = prev_off + zigzag_decode(read_varint(bytes, at)?);
        let stop = read_varint(bytes, at)?;
        neighbors.push((i32::try_from(off).ok()?, u32::try_from(stop).ok()?));
        prev_off = off;
    }
    Some(NearStopAnnotation { neighbors })
}

/// Encodes the three separate streams for a non-rare word. Returns
/// (s1 bytes, s2 bytes, s3 bytes, total occurrences).
fn encode_split(docs: &[DocOccurrences]) -> (Vec<u8>, Vec<u8>, Vec<u8>, u64) {
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    let mut s3 = Vec::new();
    let mut total = 0u64;
    let mut prev_doc: Option<DocId> = None;
    let mut prev_rest: Option<(DocId, Position)> = None;
    for d in docs {
        match prev_doc {
            None => write_varint(&mut s1, u64::from(d.doc)),
            Some(p) => write_varint(&mut s1, u64::from(d.doc - p)),
        }
        prev_doc = Some(d.doc);
        write_varint(&mut s1, u64::from(d.positions[0]));
        write_varint(&mut s1, d.positions.len() as u64);
        for &pos in &d.positions[1..] {
            match prev_rest {
                Some((pd, pp)) if pd == d.doc => {
                    write_varint(&mut s2, 0);
                    write_varint(&mut s2, u64::from(pos - pp));
                }
                Some((pd, _)) => {
                    write_varint(&mut s2, u64::from(d.doc - pd));
                    write_varint(&mut s2, u64::from(pos));
                }
                None => {
                    write_varint(&mut s2, u64::from(d.doc));
                    write_varint(&mut s2, u64::from(pos));
                }
            }
            prev_rest = Some((d.doc, pos));
        }
        for ann in &d.annotations {
            write_annotation(&mut s3, ann);
        }
        total += d.positions.len() as u64;
    }
    (s1, s2, s3, total)
}

/// Combined rare-word layout: per document, the doc gap, count, first
/// position, remaining position gaps, then the per-occurrence
/// annotations.
fn encode_combined(docs: &[DocOccurrences]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut prev_doc: Option<DocId> = None;
    for d in docs {
        match prev_doc {
            None => write_varint(&mut out, u64::from(d.doc)),
            Some(p) => write_varint(&mut out, u64::from(d.doc - p)),
        }
        prev_doc = Some(d.doc);
        write_varint(&mut out, d.positions.len() as u64);
        write_varint(&mut out, u64::from(d.positions[0]));
        for w in d.positions.windows(2) {
            write_varint(&mut out, u64::from(w[1] - w[0]));
        }
        for ann in &d.annotations {
            write_annotation(&mut out, ann);
        }
    }
    out
}

/// Accumulates one word's occurrences and writes its streams.
pub fn write_word_streams(
    writer: &mut SegmentWriter,
    docs: &[DocOccurrences],
    rare_doc_threshold: u32,
) -> Result<WordStreams> {
    if docs.is_empty() {
        return Ok(WordStreams::default());
    }
    for d in docs {
        if d.positions.is_empty() || d.annotations.len() != d.positions.len() {
            return Err(Error::IndexCorrupt(
                "word stream document with mismatched positions/annotations".into(),
            ));
        }
    }
    if (docs.len() as u32) < rare_doc_threshold {
        let bytes = encode_combined(docs);
        let d = writer.append(&bytes, docs.len() as u64);
        return Ok(WordStreams {
            flags: FLAG_PRESENT | FLAG_COMBINED,
            s1: d,
            ..WordStreams::default()
        });
    }
    let (b1, b2, b3, total) = encode_split(docs);
    let s1 = writer.append(&b1, docs.len() as u64);
    let mut flags = FLAG_PRESENT;
    let mut s2 = StreamDescriptor::default();
    if !b2.is_empty() {
        s2 = writer.append(&b2, total - docs.len() as u64);
        flags |= FLAG_HAS_S2;
    }
    let s3 = writer.append(&b3, total);
    flags |= FLAG_HAS_S3;
    Ok(WordStreams { flags, s1, s2, s3 })
}

/// Search-time reader over the basic index.
pub struct BasicReader<'a> {
    pub table: &'a DescriptorTable,
    pub segments: &'a SegmentStore,
}

impl<'a> BasicReader<'a> {
    fn streams_for(&self, lexicon: &Lexicon, form: WordFormId) -> Result<Option<WordStreams>> {
        if lexicon.classify(form)? == FrequencyClass::Stop {
            return Err(Error::WrongIndex(format!(
                "{form} is a stop form; stop words are not in the basic index"
            )));
        }
        Ok(self.table.get(form).filter(|ws| ws.present()))
    }

    /// Stream 1 only: one record per document containing the word.
    pub fn first_occurrences(
        &self,
        lexicon: &Lexicon,
        form: WordFormId,
        stats: &mut ReadStats,
    ) -> Result<Vec<FirstOccurrenceRecord>> {
        let ws = match self.streams_for(lexicon, form)? {
            Some(ws) => ws,
            None => return Ok(Vec::new()),
        };
        let decode_err = |d: &StreamDescriptor| Error::DecodeError {
            segment: d.segment,
            offset: d.offset,
            msg: "first-occurrence stream did not decode cleanly".into(),
        };
        if ws.combined() {
            let docs = self.read_combined(&ws, stats)?;
            stats.postings_read += docs.len() as u64;
            return Ok(docs
                .iter()
                .map(|d| FirstOccurrenceRecord {
                    doc: d.doc,
                    first_pos: d.positions[0],
                    count: d.positions.len() as u32,
                })
                .collect());
        }
        let bytes = self.segments.stream_bytes(&ws.s1)?;
        stats.bytes_read += ws.s1.byte_len;
        let mut at = 0usize;
        let mut out = Vec::with_capacity(ws.s1.count as usize);
        let mut prev_doc: Option<DocId> = None;
        for _ in 0..ws.s1.count {
            let gap = read_varint(bytes, &mut at).ok_or_else(|| decode_err(&ws.s1))?;
            let doc = match prev_doc {
                None => u32::try_from(gap).map_err(|_| decode_err(&ws.s1))?,
                Some(p) => p
                    .checked_add(u32::try_from(gap).map_err(|_| decode_err(&ws.s1))?)
                    .ok_or_else(|| decode_err(&ws.s1))?,
            };
            prev_doc = Some(doc);
            let first_pos = read_varint(bytes, &mut at).ok_or_else(|| decode_err(&ws.s1))?;
            let count = read_varint(bytes, &mut at).ok_or_else(|| decode_err(&ws.s1))?;
            out.push(FirstOccurrenceRecord {
                doc,
                first_pos: u32::try_from(first_pos).map_err(|_| decode_err(&ws.s1))?,
                count: u32::try_from(count).map_err(|_| decode_err(&ws.s1))?,
            });
        }
        if at != bytes.len() {
            return Err(decode_err(&ws.s1));
        }
        stats.postings_read += ws.s1.count;
        Ok(out)
    }

    /// Streams 1+2 merged: the word's full sorted occurrence list.
    /// Stream 3 stays untouched.
    pub fn all_occurrences(
        &self,
        lexicon: &Lexicon,
        form: WordFormId,
        stats: &mut ReadStats,
    ) -> Result<Vec<crate::storage::Posting>> {
        let ws = match self.streams_for(lexicon, form)? {
            Some(ws) => ws,
            None => return Ok(Vec::new()),
        };
        if ws.combined() {
            let docs = self.read_combined(&ws, stats)?;
            let mut out = Vec::new();
            for d in &docs {
                for &pos in &d.positions {
                    out.push(crate::storage::Posting::new(d.doc, pos));
                }
            }
            stats.postings_read += out.len() as u64;
            return Ok(out);
        }
        let firsts = self.first_occurrences(lexicon, form, stats)?;
        let rest = if ws.has_s2() {
            crate::storage::read_stream(self.segments, &ws.s2, stats)?
        } else {
            Vec::new()
        };
        // merge: firsts give each doc's head position, rest interleaves
        let mut out = Vec::with_capacity(firsts.len() + rest.len());
        let mut ri = 0usize;
        for f in &firsts {
            out.push(crate::storage::Posting::new(f.doc, f.first_pos));
            for _ in 1..f.count {
                let p = rest.get(ri).ok_or_else(|| {
                    Error::IndexCorrupt(format!("stream 2 of {form} shorter than counts claim"))
                })?;
                if p.doc != f.doc {
                    return Err(Error::IndexCorrupt(format!(
                        "stream 2 of {form} misaligned at doc {}",
                        f.doc
                    )));
                }
                out.push(*p);
                ri += 1;
            }
        }
        if ri != rest.len() {
            return Err(Error::IndexCorrupt(format!(
                "stream 2 of {form} longer than counts claim"
            )));
        }
        Ok(out)
    }

    /// Full occurrence list zipped with stream-3 annotations.
    pub fn occurrences_with_stops(
        &self,
        lexicon: &Lexicon,
        form: WordFormId,
        stats: &mut ReadStats,
    ) -> Result<Vec<(crate::storage::Posting, NearStopAnnotation)>> {
        let ws = match self.streams_for(lexicon, form)? {
            Some(ws) => ws,
            None => return Ok(Vec::new()),
        };
        if ws.combined() {
            let docs = self.read_combined(&ws, stats)?;
            let mut out = Vec::new();
            for d in docs {
                for (pos, ann) in d.positions.into_iter().zip(d.annotations) {
                    out.push((crate::storage::Posting::new(d.doc, pos), ann));
                }
            }
            stats.postings_read += 2 * out.len() as u64;
            return Ok(out);
        }
        let occurrences = self.all_occurrences(lexicon, form, stats)?;
        let bytes = self.segments.stream_bytes(&ws.s3)?;
        stats.bytes_read += ws.s3.byte_len;
        let mut at = 0usize;
        let mut anns = Vec::with_capacity(ws.s3.count as usize);
        for _ in 0..ws.s3.count {
            anns.push(
                read_annotation(bytes, &mut at).ok_or_else(|| Error::DecodeError {
                    segment: ws.s3.segment,
                    offset: ws.s3.offset,
                    msg: "annotation stream did not decode cleanly".into(),
                })?,
            );
        }
        stats.postings_read += ws.s3.count;
        if at != bytes.len() || anns.len() != occurrences.len() {
            return Err(Error::IndexCorrupt(format!(
                "annotation stream of {form} does not match its occurrence count"
            )));
        }
        Ok(occurrences.into_iter().zip(anns).collect())
    }

    fn read_combined(
        &self,
        ws: &WordStreams,
        stats: &mut ReadStats,
    ) -> Result<Vec<DocOccurrences>> {
        let d = &ws.s1;
        let bytes = self.segments.stream_bytes(d)?;
        stats.bytes_read += d.byte_len;
        let decode_err = || Error::DecodeError {
            segment: d.segment,
            offset: d.offset,
            msg: "combined stream did not decode cleanly".into(),
        };
        let mut at = 0usize;
        let mut out = Vec::with_capacity(d.count as usize);
        let mut prev_doc: Option<DocId> = None;
        for _ in 0..d.count {
            let gap = read_varint(bytes, &mut at).ok_or_else(decode_err)?;
            let doc = match prev_doc {
                None => u32::try_from(gap).map_err(|_| decode_err())?,
                Some(p) => p
                    .checked_add(u32::try_from(gap).map_err(|_| decode_err())?)
                    .ok_or_else(decode_err)?,
            };
            prev_doc = Some(doc);
            let count = read_varint(bytes, &mut at).ok_or_else(decode_err)? as usize;
            if count == 0 {
                return Err(decode_err());
            }
            let mut positions = Vec::with_capacity(count);
            let first = read_varint(bytes, &mut at).ok_or_else(decode_err)?;
            positions.push(u32::try_from(first).map_err(|_| decode_err())?);
            for _ in 1..count {
                let g = read_varint(bytes, &mut at).ok_or_else(decode_err)?;
                let next = positions
                    .last()
                    .unwrap()
                    .checked_add(u32::try_from(g).map_err(|_| decode_err())?)
                    .ok_or_else(decode_err)?;
                positions.push(next);
            }
            let mut annotations = Vec::with_capacity(count);
            for _ in 0..count {
                annotations.push(read_annotation(bytes, &mut at).ok_or_else(decode_err)?);
            }
            out.push(DocOccurrences {
                doc,
                positions,
                annotations,
            });
        }
        if at != bytes.len() {
            return Err(decode_err());
        }
        Ok(out)
    }
}

const MAGIC: &[u8; 4] = b"PXBT";
const VERSION: u8 = 1;
const RECORD_LEN: usize = 1 + 3 * 28;

/// Fixed-width descriptor table (`basic.pxbt`), indexed by form id.
pub struct DescriptorTable {
    records: Vec<WordStreams>,
}

impl DescriptorTable {
    pub fn new(records: Vec<WordStreams>) -> Self {
        DescriptorTable { records }
    }

    pub fn get(&self, form: WordFormId) -> Option<WordStreams> {
        self.records.get(form.0 as usize).copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordFormId, &WordStreams)> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, ws)| (WordFormId(i as u32), ws))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(9 + self.records.len() * RECORD_LEN);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for ws in &self.records {
            out.push(ws.flags);
            ws.s1.write_to(&mut out);
            ws.s2.write_to(&mut out);
            ws.s3.write_to(&mut out);
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 9 || &bytes[0..4] != MAGIC {
            return Err(Error::IndexCorrupt("bad descriptor table magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::IndexCorrupt(format!(
                "unsupported descriptor table version {}",
                bytes[4]
            )));
        }
        let n = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        if bytes.len() != 9 + n * RECORD_LEN {
            return Err(Error::IndexCorrupt("descriptor table truncated".into()));
        }
        let mut records = Vec::with_capacity(n);
        let mut at = 9usize;
        for _ in 0..n {
            let flags = bytes[at];
            at += 1;
            let (s1, used) = StreamDescriptor::read_from(&bytes[at..])?;
            at += used;
            let (s2, used) = StreamDescriptor::read_from(&bytes[at..])?;
            at += used;
            let (s3, used) = StreamDescriptor::read_from(&bytes[at..])?;
            at += used;
            records.push(WordStreams { flags, s1, s2, s3 });
        }
        Ok(DescriptorTable { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_lexicon, LemmaTable};
    use crate::storage::Posting;

    fn lexicon() -> Lexicon {
        let counts = [("the", 1000u64), ("war", 900), ("gallic", 3), ("x", 2)];
        build_lexicon(
            &LemmaTable::empty(),
            counts.iter().map(|(s, n)| (*s, *n)),
            2,
            0,
        )
        .unwrap()
    }

    fn id(lex: &Lexicon, s: &str) -> WordFormId {
        lex.analyze(s).unwrap()[0]
    }

    fn ann(neighbors: &[(i32, StopIndex)]) -> NearStopAnnotation {
        NearStopAnnotation {
            neighbors: neighbors.to_vec(),
        }
    }

    /// Builds a one-word index: doc 0 positions {2,5,9}, doc 3 position {1}.
    fn build_two_doc_word(rare_threshold: u32) -> (Lexicon, DescriptorTable, SegmentStore) {
        let lex = lexicon();
        let gallic = id(&lex, "gallic");
        let docs = vec![
            DocOccurrences {
                doc: 0,
                positions: vec![2, 5, 9],
                annotations: vec![ann(&[(-1, 0), (1, 1)]), ann(&[]), ann(&[(2, 0)])],
            },
            DocOccurrences {
                doc: 3,
                positions: vec![1],
                annotations: vec![ann(&[])],
            },
        ];
        let mut writer = SegmentWriter::new(1 << 20);
        let ws = write_word_streams(&mut writer, &docs, rare_threshold).unwrap();
        let mut records = vec![WordStreams::default(); gallic.0 as usize + 1];
        records[gallic.0 as usize] = ws;
        (lex, DescriptorTable::new(records), writer.into_store())
    }

    #[test]
    fn first_occurrences_reads_stream_one_only() {
        for rare in [1u32, 16] {
            let (lex, table, segments) = build_two_doc_word(rare);
            let reader = BasicReader {
                table: &table,
                segments: &segments,
            };
            let mut stats = ReadStats::new();
            let got = reader
                .first_occurrences(&lex, id(&lex, "gallic"), &mut stats)
                .unwrap();
            assert_eq!(
                got,
                vec![
                    FirstOccurrenceRecord {
                        doc: 0,
                        first_pos: 2,
                        count: 3
                    },
                    FirstOccurrenceRecord {
                        doc: 3,
                        first_pos: 1,
                        count: 1
                    },
                ]
            );
            assert_eq!(stats.postings_read, 2, "rare_threshold={rare}");
        }
    }

    #[test]
    fn all_occurrences_merges_both_streams() {
        for rare in [1u32, 16] {
            let (lex, table, segments) = build_two_doc_word(rare);
            let reader = BasicReader {
                table: &table,
                segments: &segments,
            };
            let mut stats = ReadStats::new();
            let got = reader
                .all_occurrences(&lex, id(&lex, "gallic"), &mut stats)
                .unwrap();
            assert_eq!(
                got,
                vec![
                    Posting::new(0, 2),
                    Posting::new(0, 5),
                    Posting::new(0, 9),
                    Posting::new(3, 1),
                ]
            );
            assert_eq!(stats.postings_read, 4);
        }
    }

    #[test]
    fn occurrences_with_stops_zips_annotations() {
        for rare in [1u32, 16] {
            let (lex, table, segments) = build_two_doc_word(rare);
            let reader = BasicReader {
                table: &table,
                segments: &segments,
            };
            let mut stats = ReadStats::new();
            let got = reader
                .occurrences_with_stops(&lex, id(&lex, "gallic"), &mut stats)
                .unwrap();
            assert_eq!(got.len(), 4);
            assert_eq!(got[0].0, Posting::new(0, 2));
            assert_eq!(got[0].1, ann(&[(-1, 0), (1, 1)]));
            assert_eq!(got[1].1, ann(&[]));
            assert_eq!(got[2].1, ann(&[(2, 0)]));
            assert_eq!(stats.postings_read, 8);
        }
    }

    #[test]
    fn stop_forms_are_rejected() {
        let (lex, table, segments) = build_two_doc_word(16);
        let reader = BasicReader {
            table: &table,
            segments: &segments,
        };
        let mut stats = ReadStats::new();
        assert!(matches!(
            reader.first_occurrences(&lex, id(&lex, "the"), &mut stats),
            Err(Error::WrongIndex(_))
        ));
    }

    #[test]
    fn absent_word_yields_empty() {
        let (lex, table, segments) = build_two_doc_word(16);
        let reader = BasicReader {
            table: &table,
            segments: &segments,
        };
        let mut stats = ReadStats::new();
        let got = reader
            .first_occurrences(&lex, id(&lex, "x"), &mut stats)
            .unwrap();
        assert!(got.is_empty());
        assert_eq!(stats.postings_read, 0);
    }

    #[test]
    fn single_occurrence_word_has_empty_stream_two() {
        let lex = lexicon();
        let gallic = id(&lex, "gallic");
        let docs = vec![DocOccurrences {
            doc: 4,
            positions: vec![7],
            annotations: vec![ann(&[])],
        }];
        let mut writer = SegmentWriter::new(1 << 20);
        let ws = write_word_streams(&mut writer, &docs, 1).unwrap();
        assert!(!ws.combined());
        assert!(!ws.has_s2());
        let mut records = vec![WordStreams::default(); gallic.0 as usize + 1];
        records[gallic.0 as usize] = ws;
        let table = DescriptorTable::new(records);
        let segments = writer.into_store();
        let reader = BasicReader {
            table: &table,
            segments: &segments,
        };
        let mut stats = ReadStats::new();
        let all = reader.all_occurrences(&lex, gallic, &mut stats).unwrap();
        assert_eq!(all, vec![Posting::new(4, 7)]);
    }

    #[test]
    fn descriptor_table_round_trips() {
        let (_, table, _) = build_two_doc_word(16);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("basic.pxbt");
        table.save(&path).unwrap();
        let back = DescriptorTable::load(&path).unwrap();
        assert_eq!(back.len(), table.len());
        for (form, ws) in table.iter() {
            assert_eq!(back.get(form).unwrap(), *ws);
        }
    }
}
