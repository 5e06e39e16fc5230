//! On-disk index directory and its read-side façade.
//!
//! Layout:
//!   header.pxhd    magic, format version, build parameters, Huffman table
//!   lexicon.pxlx   forms, classes, ranks, surface map
//!   keys.pxkv      ordered key → descriptor store (all namespaces)
//!   basic.pxbt     per-word stream descriptor table
//!   segments/      raw encoded streams
//!   manifest.tsv   document list and corpus totals

use std::fs;
use std::path::{Path, PathBuf};

use crate::baseline::{BaselineMode, BaselineReader};
use crate::basic::{BasicReader, DescriptorTable};
use crate::config::IngestConfig;
use crate::error::{Error, Result};
use crate::expanded::ExpandedReader;
use crate::indexer::Manifest;
use crate::lexicon::Lexicon;
use crate::planner::{search_forms, Match, QueryOptions};
use crate::stop_phrase::StopPhraseReader;
use crate::storage::{HuffmanTable, KeyStoreReader, ReadStats, SegmentStore};
use crate::WordFormId;

const MAGIC: &[u8; 4] = b"PXHD";
const VERSION: u8 = 1;

pub(crate) struct Header {
    pub config: IngestConfig,
    pub segment_count: u32,
    pub huffman_lengths: Vec<u8>,
}

impl Header {
    pub fn save(&self, path: &Path) -> Result<()> {
        let c = &self.config;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        for v in [
            c.min_length,
            c.max_length,
            c.max_distance_frequent,
            c.max_distance_ordinary,
            c.processing_distance_top,
            c.processing_distance_rest,
            c.rare_doc_threshold,
            c.default_join_distance,
            c.product_cap,
            c.stop_size,
            c.frequent_size,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(u8::from(c.plain_keys));
        out.push(u8::from(c.build_baseline));
        out.extend_from_slice(&c.segment_cap.to_le_bytes());
        out.extend_from_slice(&self.segment_count.to_le_bytes());
        out.extend_from_slice(&(self.huffman_lengths.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.huffman_lengths);
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let corrupt = || Error::IndexCorrupt("header truncated".into());
        if bytes.len() < 5 || &bytes[0..4] != MAGIC {
            return Err(Error::IndexCorrupt("bad header magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::IndexCorrupt(format!(
                "unsupported index format version {}",
                bytes[4]
            )));
        }
        let mut at = 5usize;
        let next_u32 = |at: &mut usize| -> Result<u32> {
            let v = bytes
                .get(*at..*at + 4)
                .ok_or_else(corrupt)?
                .try_into()
                .unwrap();
            *at += 4;
            Ok(u32::from_le_bytes(v))
        };
        let min_length = next_u32(&mut at)?;
        let max_length = next_u32(&mut at)?;
        let max_distance_frequent = next_u32(&mut at)?;
        let max_distance_ordinary = next_u32(&mut at)?;
        let processing_distance_top = next_u32(&mut at)?;
        let processing_distance_rest = next_u32(&mut at)?;
        let rare_doc_threshold = next_u32(&mut at)?;
        let default_join_distance = next_u32(&mut at)?;
        let product_cap = next_u32(&mut at)?;
        let stop_size = next_u32(&mut at)?;
        let frequent_size = next_u32(&mut at)?;
        let plain_keys = *bytes.get(at).ok_or_else(corrupt)? != 0;
        let build_baseline = *bytes.get(at + 1).ok_or_else(corrupt)? != 0;
        at += 2;
        let segment_cap = u64::from_le_bytes(
            bytes
                .get(at..at + 8)
                .ok_or_else(corrupt)?
                .try_into()
                .unwrap(),
        );
        at += 8;
        let segment_count = next_u32(&mut at)?;
        let n = next_u32(&mut at)? as usize;
        let huffman_lengths = bytes.get(at..at + n).ok_or_else(corrupt)?.to_vec();
        Ok(Header {
            config: IngestConfig {
                min_length,
                max_length,
                max_distance_frequent,
                max_distance_ordinary,
                processing_distance_top,
                processing_distance_rest,
                rare_doc_threshold,
                default_join_distance,
                product_cap,
                plain_keys,
                build_baseline,
                segment_cap,
                stop_size,
                frequent_size,
                lemma_table: None,
            },
            segment_count,
            huffman_lengths,
        })
    }
}

/// An opened, read-only index.
pub struct Index {
    dir: PathBuf,
    config: IngestConfig,
    lexicon: Lexicon,
    huffman: HuffmanTable,
    keys: KeyStoreReader,
    segments: SegmentStore,
    basic_table: DescriptorTable,
    manifest: Manifest,
}

impl Index {
    pub fn open(dir: &Path) -> Result<Self> {
        let header = Header::load(&dir.join("header.pxhd"))?;
        let lexicon = Lexicon::load(&dir.join("lexicon.pxlx"))?;
        let keys = KeyStoreReader::open(&dir.join("keys.pxkv"))?;
        let segments = SegmentStore::open(dir, header.segment_count)?;
        let basic_table = DescriptorTable::load(&dir.join("basic.pxbt"))?;
        let manifest = Manifest::load(&dir.join("manifest.tsv"))?;
        Ok(Index {
            dir: dir.to_path_buf(),
            config: header.config,
            huffman: HuffmanTable::from_lengths(header.huffman_lengths),
            lexicon,
            keys,
            segments,
            basic_table,
            manifest,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &IngestConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn keys(&self) -> &KeyStoreReader {
        &self.keys
    }

    pub fn huffman(&self) -> &HuffmanTable {
        &self.huffman
    }

    pub fn stop_phrase_reader(&self) -> StopPhraseReader<'_> {
        StopPhraseReader {
            keys: &self.keys,
            segments: &self.segments,
            huffman: &self.huffman,
            plain_keys: self.config.plain_keys,
            min_length: self.config.min_length,
            max_length: self.config.max_length,
        }
    }

    pub fn expanded_reader(&self) -> ExpandedReader<'_> {
        ExpandedReader {
            keys: &self.keys,
            segments: &self.segments,
        }
    }

    pub fn basic_reader(&self) -> BasicReader<'_> {
        BasicReader {
            table: &self.basic_table,
            segments: &self.segments,
        }
    }

    pub fn basic_table(&self) -> &DescriptorTable {
        &self.basic_table
    }

    pub fn baseline_reader(&self) -> BaselineReader<'_> {
        BaselineReader {
            keys: &self.keys,
            segments: &self.segments,
        }
    }

    /// Analyzes a raw query string into per-word basic-form lists.
    pub fn analyze_query(&self, query: &str) -> Result<Vec<Vec<WordFormId>>> {
        let words = crate::tokenize::tokenize(query);
        if words.is_empty() {
            return Err(Error::EmptyQuery);
        }
        words.iter().map(|w| self.lexicon.analyze(w)).collect()
    }

    /// Runs the full additional-index pipeline on a query string.
    /// `stats` is reset first; it ends up holding this query's counts.
    pub fn search(
        &self,
        query: &str,
        opts: &QueryOptions,
        stats: &mut ReadStats,
    ) -> Result<Vec<Match>> {
        let raw = self.analyze_query(query)?;
        self.search_raw(&raw, opts, stats)
    }

    /// As [`Index::search`] over pre-tokenized words.
    pub fn search_words<S: AsRef<str>>(
        &self,
        words: &[S],
        opts: &QueryOptions,
        stats: &mut ReadStats,
    ) -> Result<Vec<Match>> {
        if words.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let raw = words
            .iter()
            .map(|w| self.lexicon.analyze(w.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.search_raw(&raw, opts, stats)
    }

    fn search_raw(
        &self,
        raw: &[Vec<WordFormId>],
        opts: &QueryOptions,
        stats: &mut ReadStats,
    ) -> Result<Vec<Match>> {
        stats.reset();
        search_forms(self, raw, opts, stats)
    }

    /// Runs the baseline index on a query string; `stats` is reset first.
    pub fn baseline_search_words<S: AsRef<str>>(
        &self,
        words: &[S],
        mode: BaselineMode,
        stats: &mut ReadStats,
    ) -> Result<Vec<Match>> {
        stats.reset();
        let raw = words
            .iter()
            .map(|w| self.lexicon.analyze(w.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.baseline_reader()
            .search(&self.lexicon, &raw, mode, stats)
    }

    /// Component sizes in bytes, mirroring the index size table:
    /// (stop-phrase, expanded, basic, baseline).
    pub fn component_sizes(&self) -> ComponentSizes {
        use crate::storage::{NS_BASELINE, NS_EXPANDED, NS_STOP_PHRASE};
        let sum_ns = |ns: u8| -> (u64, u64) {
            self.keys
                .prefix_iter(&[ns])
                .fold((0u64, 0u64), |(bytes, entries), (key, d)| {
                    (bytes + d.byte_len + key.len() as u64 + 28, entries + 1)
                })
        };
        let (stop_bytes, stop_keys) = sum_ns(NS_STOP_PHRASE);
        let (expanded_bytes, expanded_keys) = sum_ns(NS_EXPANDED);
        let (baseline_bytes, baseline_keys) = sum_ns(NS_BASELINE);
        let mut basic_bytes = 0u64;
        let mut basic_words = 0u64;
        for (_, ws) in self.basic_table.iter() {
            if ws.present() {
                basic_bytes += ws.total_bytes();
                basic_words += 1;
            }
        }
        ComponentSizes {
            stop_phrase_bytes: stop_bytes,
            stop_phrase_keys: stop_keys,
            expanded_bytes,
            expanded_keys,
            basic_bytes,
            basic_words,
            baseline_bytes,
            baseline_words: baseline_keys,
            segment_bytes: self.segments.total_bytes(),
        }
    }
}

/// Size breakdown for the `stats` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentSizes {
    pub stop_phrase_bytes: u64,
    pub stop_phrase_keys: u64,
    pub expanded_bytes: u64,
    pub expanded_keys: u64,
    pub basic_bytes: u64,
    pub basic_words: u64,
    pub baseline_bytes: u64,
    pub baseline_words: u64,
    pub segment_bytes: u64,
}
