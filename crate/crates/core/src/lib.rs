//! phrasex: a full-text phrase-search engine that speeds up queries
//! containing very frequent words via three additional index structures —
//! a stop-phrase index, an expanded word-pair index, and a multi-stream
//! basic index — plus a query planner that selects among them. A standard
//! positional inverted index over all words is built alongside as the
//! correctness oracle and postings-read baseline.
//!
//! The unit of accounting everywhere is the *posting*: one occurrence
//! record read while answering a query. See [`storage::ReadStats`].

pub mod baseline;
pub mod bench;
pub mod config;
pub mod error;
pub mod expanded;
pub mod index;
pub mod indexer;
pub mod lexicon;
pub mod planner;
pub mod stop_phrase;
pub mod storage;
pub mod tokenize;

mod basic;

pub use basic::{FirstOccurrenceRecord, NearStopAnnotation, WordStreams};
pub use config::IngestConfig;
pub use error::{Error, Result};
pub use index::Index;
pub use lexicon::{build_lexicon, FrequencyClass, LemmaTable, Lexicon};
pub use planner::{Match, QueryOptions};
pub use storage::{Posting, ReadStats, StreamDescriptor};

/// Document identifier, dense and assigned in ingest order.
pub type DocId = u32;

/// 0-based token ordinal within a document; every token counts, stop
/// words included, so distances agree across all index structures.
pub type Position = u32;

/// Rank in the stop list (0 = most frequent stop form).
pub type StopIndex = u32;

/// Dense basic-form identifier assigned by the lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordFormId(pub u32);

impl std::fmt::Display for WordFormId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "w{}", self.0)
    }
}
