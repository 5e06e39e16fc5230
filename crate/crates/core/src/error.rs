use crate::{DocId, Position};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("token is empty after case folding")]
    InvalidToken,

    #[error("unknown word form id {0}")]
    UnknownForm(u32),

    #[error("lemma table parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("postings not strictly increasing at record {0}")]
    OrderViolation(usize),

    #[error("stream decode failed (segment {segment}, offset {offset}): {msg}")]
    DecodeError {
        segment: u32,
        offset: u64,
        msg: String,
    },

    #[error("key store is closed for writes")]
    StoreClosed,

    #[error("symbol {0} outside the huffman alphabet")]
    UnknownSymbol(u32),

    #[error("wrong index for this word class: {0}")]
    WrongIndex(String),

    #[error("index corrupt: {0}")]
    IndexCorrupt(String),

    #[error("stop queue requires consecutive tokens; got doc {doc} pos {pos} without a flush")]
    SequenceError { doc: DocId, pos: Position },

    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),

    #[error("empty query")]
    EmptyQuery,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("benchmark self-match failed: query {query:?} drawn from doc {doc} did not find it")]
    SelfMatchFailed { query: Vec<String>, doc: DocId },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
