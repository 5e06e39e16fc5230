//! Baseline: a standard single-stream positional inverted index over ALL
//! basic forms, stop words included, plus a raw-text scanner.
//!
//! This is the correctness oracle and the postings-read comparison
//! baseline. Its accounting follows the classic engine model: answering a
//! query reads every query word's full posting list, so `postings_read`
//! is exactly the sum of those list lengths.

use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::planner::Match;
use crate::storage::{
    read_stream, write_varint, KeyStoreReader, Posting, ReadStats, SegmentStore, NS_BASELINE,
};
use crate::{DocId, Position, WordFormId};

/// Query evaluation modes; all three are positional-list intersections
/// with different positional predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    /// Word i must sit at `start + i`.
    ExactPhrase,
    /// Every word within `d` tokens (strictly less) of the least-frequent
    /// word's occurrence.
    Proximity(u32),
    /// Document-level conjunction; positions reported as per-word first
    /// occurrences.
    DocConjunction,
}

pub fn encode_baseline_key(form: WordFormId) -> Vec<u8> {
    let mut key = vec![NS_BASELINE];
    write_varint(&mut key, u64::from(form.0));
    key
}

/// Search-time view over the baseline keyspace.
pub struct BaselineReader<'a> {
    pub keys: &'a KeyStoreReader,
    pub segments: &'a SegmentStore,
}

impl<'a> BaselineReader<'a> {
    /// True when the baseline component was built.
    pub fn available(&self) -> bool {
        self.keys.prefix_iter(&[NS_BASELINE]).next().is_some()
    }

    /// Full posting list of one form; counts every posting read.
    pub fn posting_list(&self, form: WordFormId, stats: &mut ReadStats) -> Result<Vec<Posting>> {
        stats.keys_probed += 1;
        match self.keys.get(&encode_baseline_key(form)) {
            Some(d) => read_stream(self.segments, &d, stats),
            None => Ok(Vec::new()),
        }
    }

    /// Evaluates a query given per-position form lists. Every position's
    /// list is the union of its forms' posting lists; the full list of
    /// every (position, form) is read, mirroring an ordinary engine.
    pub fn search(
        &self,
        lexicon: &Lexicon,
        positions: &[Vec<WordFormId>],
        mode: BaselineMode,
        stats: &mut ReadStats,
    ) -> Result<Vec<Match>> {
        if positions.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let mut lists: Vec<Vec<Posting>> = Vec::with_capacity(positions.len());
        for forms in positions {
            let mut merged: Vec<Posting> = Vec::new();
            for &f in forms {
                merged.extend(self.posting_list(f, stats)?);
            }
            merged.sort_unstable();
            merged.dedup();
            lists.push(merged);
        }
        Ok(match_posting_lists(lexicon, positions, &lists, mode))
    }
}

/// Pure matching over per-position occurrence lists; shared by the
/// baseline index and the raw-text scanner so the two stay equivalent by
/// construction of everything except list retrieval.
pub fn match_posting_lists(
    lexicon: &Lexicon,
    positions: &[Vec<WordFormId>],
    lists: &[Vec<Posting>],
    mode: BaselineMode,
) -> Vec<Match> {
    let mut out = Vec::new();
    match mode {
        BaselineMode::ExactPhrase => {
            // anchor on the first word; every other must sit at +i
            for p in &lists[0] {
                let mut ok = true;
                for (i, list) in lists.iter().enumerate().skip(1) {
                    let want = Posting::new(p.doc, p.pos + i as u32);
                    if list.binary_search(&want).is_err() {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    let ps: Vec<Option<Position>> =
                        (0..lists.len()).map(|i| Some(p.pos + i as u32)).collect();
                    out.push(Match::distance_aware(p.doc, ps));
                }
            }
        }
        BaselineMode::Proximity(d) => {
            let basic = least_frequent_position(lexicon, positions);
            for anchor in &lists[basic] {
                let mut chosen: Vec<Option<Position>> = vec![None; lists.len()];
                chosen[basic] = Some(anchor.pos);
                let mut ok = true;
                for (k, list) in lists.iter().enumerate() {
                    if k == basic {
                        continue;
                    }
                    match closest_within(list, anchor.doc, anchor.pos, d) {
                        Some(q) => chosen[k] = Some(q),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    out.push(Match::distance_aware(anchor.doc, chosen));
                }
            }
        }
        BaselineMode::DocConjunction => {
            let mut docs: Option<Vec<DocId>> = None;
            for list in lists {
                let mut ds: Vec<DocId> = list.iter().map(|p| p.doc).collect();
                ds.dedup();
                docs = Some(match docs {
                    None => ds,
                    Some(prev) => intersect_sorted(&prev, &ds),
                });
            }
            for doc in docs.unwrap_or_default() {
                let ps: Vec<Option<Position>> = lists
                    .iter()
                    .map(|list| list.iter().find(|p| p.doc == doc).map(|p| p.pos))
                    .collect();
                out.push(Match::fallback(doc, ps));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// The query position whose least-frequent form has the smallest corpus
/// count; ties go to the leftmost position.
pub fn least_frequent_position(lexicon: &Lexicon, positions: &[Vec<WordFormId>]) -> usize {
    let mut best = 0usize;
    let mut best_count = u64::MAX;
    for (i, forms) in positions.iter().enumerate() {
        let c = forms
            .iter()
            .map(|&f| lexicon.freq_count(f))
            .min()
            .unwrap_or(0);
        if c < best_count {
            best_count = c;
            best = i;
        }
    }
    best
}

/// Closest occurrence to (doc, pos) strictly within `d`, excluding the
/// anchor position itself. Ties prefer the smaller position.
fn closest_within(list: &[Posting], doc: DocId, pos: Position, d: u32) -> Option<Position> {
    let lo = pos.saturating_sub(d.saturating_sub(1));
    let start = list.partition_point(|p| (p.doc, p.pos) < (doc, lo));
    let mut best: Option<(u32, Position)> = None;
    for p in &list[start..] {
        if p.doc != doc || p.pos >= pos.saturating_add(d) {
            break;
        }
        if p.pos == pos {
            continue;
        }
        let cand = (p.pos.abs_diff(pos), p.pos);
        best = Some(match best {
            None => cand,
            Some(b) => b.min(cand),
        });
    }
    best.map(|(_, q)| q)
}

fn intersect_sorted(a: &[DocId], b: &[DocId]) -> Vec<DocId> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Brute-force scanner over raw token sequences: the ground truth for all
/// equivalence checks. No index is involved; per-position occurrence
/// lists are gathered by a direct corpus scan.
pub fn scan_search(
    lexicon: &Lexicon,
    docs: &[Vec<String>],
    positions: &[Vec<WordFormId>],
    mode: BaselineMode,
) -> Result<Vec<Match>> {
    if positions.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let mut lists: Vec<Vec<Posting>> = vec![Vec::new(); positions.len()];
    for (doc, tokens) in docs.iter().enumerate() {
        for (pos, token) in tokens.iter().enumerate() {
            let forms = lexicon.analyze(token)?;
            for (i, wanted) in positions.iter().enumerate() {
                if forms.iter().any(|f| wanted.contains(f)) {
                    lists[i].push(Posting::new(doc as u32, pos as u32));
                }
            }
        }
    }
    Ok(match_posting_lists(lexicon, positions, &lists, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_lexicon, LemmaTable};
    use crate::storage::{KeyStoreBuilder, SegmentWriter};
    use crate::tokenize::tokenize;
    use std::collections::BTreeMap;

    fn lexicon() -> Lexicon {
        let counts = [
            ("not", 100u64),
            ("only", 90),
            ("that", 80),
            ("but", 70),
            ("river", 30),
            ("define", 20),
            ("boundary", 10),
        ];
        build_lexicon(
            &LemmaTable::empty(),
            counts.iter().map(|(s, n)| (*s, *n)),
            4,
            2,
        )
        .unwrap()
    }

    fn id(lex: &Lexicon, s: &str) -> WordFormId {
        lex.analyze(s).unwrap()[0]
    }

    /// Builds baseline posting lists straight from token sequences.
    fn build_baseline(
        lex: &Lexicon,
        docs: &[&str],
    ) -> (Vec<Vec<String>>, KeyStoreBuilder, SegmentWriter) {
        let mut writer = SegmentWriter::new(1 << 20);
        let mut keys = KeyStoreBuilder::new();
        let mut lists: BTreeMap<WordFormId, Vec<Posting>> = BTreeMap::new();
        let token_docs: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d)).collect();
        for (doc, tokens) in token_docs.iter().enumerate() {
            for (pos, tok) in tokens.iter().enumerate() {
                for f in lex.analyze(tok).unwrap() {
                    lists
                        .entry(f)
                        .or_default()
                        .push(Posting::new(doc as u32, pos as u32));
                }
            }
        }
        for (form, postings) in lists {
            let d = crate::storage::append_stream(&mut writer, &postings).unwrap();
            keys.put(&encode_baseline_key(form), d).unwrap();
        }
        (token_docs, keys, writer)
    }

    fn finish(keys: &mut KeyStoreBuilder, writer: SegmentWriter) -> (KeyStoreReader, SegmentStore) {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("keys.pxkv");
        keys.write_to(&path).unwrap();
        (KeyStoreReader::open(&path).unwrap(), writer.into_store())
    }

    #[test]
    fn exact_phrase_finds_the_verbatim_window() {
        let lex = lexicon();
        let docs = ["not only that but rivers", "that but not only"];
        let (token_docs, mut keys, writer) = build_baseline(&lex, &docs);
        let (kr, segs) = finish(&mut keys, writer);
        let reader = BaselineReader {
            keys: &kr,
            segments: &segs,
        };
        let q: Vec<Vec<WordFormId>> = ["not", "only", "that", "but"]
            .iter()
            .map(|w| vec![id(&lex, w)])
            .collect();
        let mut stats = ReadStats::new();
        let got = reader
            .search(&lex, &q, BaselineMode::ExactPhrase, &mut stats)
            .unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].doc, 0);
        assert_eq!(got[0].positions, vec![Some(0), Some(1), Some(2), Some(3)]);
        // every query word's list was read in full
        let expected: u64 = q
            .iter()
            .flat_map(|forms| forms.iter())
            .map(|f| {
                token_docs
                    .iter()
                    .flatten()
                    .filter(|t| lex.analyze(t).unwrap().contains(f))
                    .count() as u64
            })
            .sum();
        assert_eq!(stats.postings_read, expected);
        // scanner agrees
        let scanned = scan_search(&lex, &token_docs, &q, BaselineMode::ExactPhrase).unwrap();
        assert_eq!(got, scanned);
    }

    #[test]
    fn doc_conjunction_ignores_positions() {
        let lex = lexicon();
        let docs = ["river define nothing", "define the boundary of river"];
        let (token_docs, mut keys, writer) = build_baseline(&lex, &docs);
        let (kr, segs) = finish(&mut keys, writer);
        let reader = BaselineReader {
            keys: &kr,
            segments: &segs,
        };
        let q: Vec<Vec<WordFormId>> = ["river", "define", "boundary"]
            .iter()
            .map(|w| vec![id(&lex, w)])
            .collect();
        let mut stats = ReadStats::new();
        let got = reader
            .search(&lex, &q, BaselineMode::DocConjunction, &mut stats)
            .unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].doc, 1);
        assert!(got[0].span.is_none());
        let scanned = scan_search(&lex, &token_docs, &q, BaselineMode::DocConjunction).unwrap();
        assert_eq!(got, scanned);
    }

    #[test]
    fn proximity_mode_agrees_with_scanner_on_random_corpora() {
        use rand::{Rng, SeedableRng};
        let lex = lexicon();
        let vocab = ["not", "only", "that", "but", "river", "define", "boundary"];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let docs: Vec<String> = (0..30)
            .map(|_| {
                (0..rng.gen_range(5..40))
                    .map(|_| vocab[rng.gen_range(0..vocab.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let doc_refs: Vec<&str> = docs.iter().map(|s| s.as_str()).collect();
        let (token_docs, mut keys, writer) = build_baseline(&lex, &doc_refs);
        let (kr, segs) = finish(&mut keys, writer);
        let reader = BaselineReader {
            keys: &kr,
            segments: &segs,
        };
        for _ in 0..200 {
            let n = rng.gen_range(1..4);
            let q: Vec<Vec<WordFormId>> = (0..n)
                .map(|_| vec![id(&lex, vocab[rng.gen_range(0..vocab.len())])])
                .collect();
            for mode in [
                BaselineMode::ExactPhrase,
                BaselineMode::Proximity(5),
                BaselineMode::DocConjunction,
            ] {
                let mut stats = ReadStats::new();
                let got = reader.search(&lex, &q, mode, &mut stats).unwrap();
                let scanned = scan_search(&lex, &token_docs, &q, mode).unwrap();
                assert_eq!(got, scanned, "mode {mode:?} query {q:?}");
            }
        }
    }

    #[test]
    fn empty_corpus_matches_nothing() {
        let lex = lexicon();
        let q = vec![vec![id(&lex, "river")]];
        let got = scan_search(&lex, &[], &q, BaselineMode::ExactPhrase).unwrap();
        assert!(got.is_empty());
    }
}
