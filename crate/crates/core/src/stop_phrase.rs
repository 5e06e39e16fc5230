//! Stop-phrase index: every run of consecutive stop-bearing tokens is
//! indexed as all its sub-phrases of length `min_length..=max_length`,
//! keyed by the sorted multiset of stop-list indices.
//!
//! Creation slides a queue over the token stream. Phrases starting at the
//! front item are emitted exactly once, at the moment the front item is
//! evicted (queue overflow past `max_length`, or a flush at a non-stop
//! token, a position gap, or a document boundary). For a maximal run of S
//! single-form stop tokens this yields exactly max(0, S−L+1) postings per
//! length L.
//!
//! Tokens with several stop basic forms fan out over the cartesian
//! product of the per-token form lists; the product is capped and
//! deduplicated per window.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

use crate::storage::{
    read_varint, write_varint, HuffmanTable, KeyStoreReader, Posting, ReadStats, SegmentStore,
    NS_STOP_PHRASE,
};
use crate::{DocId, Position, StopIndex, WordFormId};

/// One queued stop-bearing token with its stop-class basic forms.
#[derive(Debug, Clone)]
pub struct QueueItem {
    pub doc: DocId,
    pub pos: Position,
    pub forms: Vec<WordFormId>,
}

/// Sliding enumeration queue; at rest it holds at most `max_length`
/// items, transiently one more during an overflow emission.
pub struct StopPhraseQueue {
    items: VecDeque<QueueItem>,
    min_length: u32,
    max_length: u32,
    product_cap: u32,
    cap_warned: bool,
}

impl StopPhraseQueue {
    pub fn new(min_length: u32, max_length: u32, product_cap: u32) -> Self {
        StopPhraseQueue {
            items: VecDeque::new(),
            min_length,
            max_length,
            product_cap,
            cap_warned: false,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends a consecutive stop-bearing token. Emits and evicts the
    /// front item once the queue exceeds `max_length`.
    ///
    /// The caller must flush before any position gap or document change.
    pub fn push_stop_token(
        &mut self,
        lexicon: &Lexicon,
        doc: DocId,
        pos: Position,
        forms: Vec<WordFormId>,
        sink: &mut dyn FnMut(Vec<StopIndex>, Posting),
    ) -> Result<()> {
        assert!(!forms.is_empty(), "stop queue items need at least one form");
        if let Some(last) = self.items.back() {
            if doc != last.doc || pos != last.pos + 1 {
                return Err(Error::SequenceError { doc, pos });
            }
        }
        self.items.push_back(QueueItem { doc, pos, forms });
        if self.items.len() as u32 > self.max_length {
            self.emit_front(lexicon, sink)?;
            self.items.pop_front();
        }
        Ok(())
    }

    /// Emits everything still pending and empties the queue. Called at
    /// non-stop tokens, position gaps, and document boundaries.
    pub fn flush(
        &mut self,
        lexicon: &Lexicon,
        sink: &mut dyn FnMut(Vec<StopIndex>, Posting),
    ) -> Result<()> {
        while !self.items.is_empty() {
            self.emit_front(lexicon, sink)?;
            self.items.pop_front();
        }
        Ok(())
    }

    /// Emits all phrases that start at the front item: for each length L
    /// in range, every combination of one stop form per token, as the
    /// sorted stop-index multiset plus a posting at the front position.
    pub fn emit_front(
        &mut self,
        lexicon: &Lexicon,
        sink: &mut dyn FnMut(Vec<StopIndex>, Posting),
    ) -> Result<()> {
        let front = match self.items.front() {
            Some(f) => f,
            None => return Ok(()),
        };
        let (doc, pos) = (front.doc, front.pos);
        let longest = (self.items.len() as u32).min(self.max_length);
        for len in self.min_length..=longest {
            let mut chosen: Vec<StopIndex> = Vec::with_capacity(len as usize);
            let mut emitted: BTreeSet<Vec<StopIndex>> = BTreeSet::new();
            let mut budget = self.product_cap;
            emit_combos(
                &self.items,
                lexicon,
                len as usize,
                0,
                &mut chosen,
                &mut emitted,
                &mut budget,
                sink,
            )?;
            if budget == 0 && !self.cap_warned {
                self.cap_warned = true;
                log::warn!(
                    "stop-phrase combination cap {} hit at doc {doc} pos {pos}; further \
                     form combinations in this window were dropped",
                    self.product_cap
                );
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn emit_combos(
    items: &VecDeque<QueueItem>,
    lexicon: &Lexicon,
    len: usize,
    depth: usize,
    chosen: &mut Vec<StopIndex>,
    emitted: &mut BTreeSet<Vec<StopIndex>>,
    budget: &mut u32,
    sink: &mut dyn FnMut(Vec<StopIndex>, Posting),
) -> Result<()> {
    if *budget == 0 {
        return Ok(());
    }
    if depth == len {
        *budget -= 1;
        let mut key = chosen.clone();
        key.sort_unstable();
        if emitted.insert(key.clone()) {
            let front = items.front().unwrap();
            sink(key, Posting::new(front.doc, front.pos));
        }
        return Ok(());
    }
    let item = &items[depth];
    for &form in &item.forms {
        let rank = lexicon.stop_rank(form).ok_or_else(|| {
            Error::IndexCorrupt(format!("form {form} in the stop queue has no stop rank"))
        })?;
        chosen.push(rank);
        emit_combos(
            items,
            lexicon,
            len,
            depth + 1,
            chosen,
            emitted,
            budget,
            sink,
        )?;
        chosen.pop();
        if *budget == 0 {
            return Ok(());
        }
    }
    Ok(())
}

/// Serializes a sorted stop-index multiset into key-store bytes under the
/// stop-phrase namespace.
pub fn encode_phrase_key(
    word_ids: &[StopIndex],
    huffman: &HuffmanTable,
    plain: bool,
) -> Result<Vec<u8>> {
    debug_assert!(word_ids.windows(2).all(|w| w[0] <= w[1]));
    let mut key = vec![NS_STOP_PHRASE];
    if plain {
        write_varint(&mut key, word_ids.len() as u64);
        for &id in word_ids {
            write_varint(&mut key, u64::from(id));
        }
    } else {
        key.extend_from_slice(&huffman.encode(word_ids)?);
    }
    Ok(key)
}

/// Decodes a key-store key back into the sorted stop-index multiset.
pub fn decode_phrase_key(
    key: &[u8],
    huffman: &HuffmanTable,
    plain: bool,
) -> Result<Vec<StopIndex>> {
    debug_assert_eq!(key.first(), Some(&NS_STOP_PHRASE));
    let body = &key[1..];
    if plain {
        let mut at = 0usize;
        let corrupt = || Error::IndexCorrupt("bad plain phrase key".into());
        let n = read_varint(body, &mut at).ok_or_else(corrupt)?;
        let mut out = Vec::with_capacity(n as usize);
        for _ in 0..n {
            out.push(read_varint(body, &mut at).ok_or_else(corrupt)? as StopIndex);
        }
        Ok(out)
    } else {
        huffman.decode(body)
    }
}

/// Search-time view over the stop-phrase keyspace.
pub struct StopPhraseReader<'a> {
    pub keys: &'a KeyStoreReader,
    pub segments: &'a SegmentStore,
    pub huffman: &'a HuffmanTable,
    pub plain_keys: bool,
    pub min_length: u32,
    pub max_length: u32,
}

impl<'a> StopPhraseReader<'a> {
    /// Looks up a stop phrase given per-position stop-form lists.
    ///
    /// Every combination of one form per position becomes a sorted key;
    /// the posting streams of all distinct keys are unioned. Order is
    /// disregarded: any token order matching the multiset is returned.
    pub fn lookup_phrase(
        &self,
        lexicon: &Lexicon,
        stop_forms: &[Vec<WordFormId>],
        stats: &mut ReadStats,
    ) -> Result<Vec<Posting>> {
        let n = stop_forms.len() as u32;
        if n < self.min_length || n > self.max_length {
            return Err(Error::UnsupportedQuery(format!(
                "stop phrase length {n} outside {}..={}",
                self.min_length, self.max_length
            )));
        }
        let mut keys: BTreeSet<Vec<StopIndex>> = BTreeSet::new();
        let mut chosen = Vec::with_capacity(stop_forms.len());
        collect_query_keys(lexicon, stop_forms, 0, &mut chosen, &mut keys)?;
        let mut postings: BTreeSet<Posting> = BTreeSet::new();
        for key in keys {
            let bytes = encode_phrase_key(&key, self.huffman, self.plain_keys)?;
            stats.keys_probed += 1;
            if let Some(d) = self.keys.get(&bytes) {
                for p in crate::storage::read_stream(self.segments, &d, stats)? {
                    postings.insert(p);
                }
            }
        }
        Ok(postings.into_iter().collect())
    }

    /// All (multiset key, postings) entries; used by stats and verify.
    pub fn entries(&self) -> Result<Vec<(Vec<StopIndex>, Vec<Posting>)>> {
        let mut out = Vec::new();
        let mut stats = ReadStats::new();
        for (key, d) in self.keys.prefix_iter(&[NS_STOP_PHRASE]) {
            let ids = decode_phrase_key(key, self.huffman, self.plain_keys)?;
            let postings = crate::storage::read_stream(self.segments, &d, &mut stats)?;
            out.push((ids, postings));
        }
        Ok(out)
    }
}

fn collect_query_keys(
    lexicon: &Lexicon,
    stop_forms: &[Vec<WordFormId>],
    depth: usize,
    chosen: &mut Vec<StopIndex>,
    keys: &mut BTreeSet<Vec<StopIndex>>,
) -> Result<()> {
    if depth == stop_forms.len() {
        let mut key = chosen.clone();
        key.sort_unstable();
        keys.insert(key);
        return Ok(());
    }
    let forms = &stop_forms[depth];
    if forms.is_empty() {
        return Err(Error::UnsupportedQuery(
            "stop phrase position with no stop forms".into(),
        ));
    }
    for &form in forms {
        let rank = lexicon
            .stop_rank(form)
            .ok_or_else(|| Error::WrongIndex(format!("{form} is not a stop form")))?;
        chosen.push(rank);
        collect_query_keys(lexicon, stop_forms, depth + 1, chosen, keys)?;
        chosen.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_lexicon, LemmaTable};

    /// Lexicon with stop forms s0..s9 ranked in that order, plus one
    /// multi-form surface "dual" → s0, s1.
    fn stop_lexicon() -> Lexicon {
        let lt = LemmaTable::parse("dual\ts0,s1\n".as_bytes()).unwrap();
        let counts: Vec<(String, u64)> = (0..10u64)
            .map(|i| (format!("s{i}"), 1000 - i * 10))
            .chain([("plain".to_string(), 1)])
            .collect();
        build_lexicon(&lt, counts.iter().map(|(s, n)| (s.as_str(), *n)), 10, 0).unwrap()
    }

    fn forms(lex: &Lexicon, word: &str) -> Vec<WordFormId> {
        lex.analyze(word).unwrap()
    }

    fn run_tokens(
        lex: &Lexicon,
        queue: &mut StopPhraseQueue,
        words: &[&str],
    ) -> Vec<(Vec<StopIndex>, Posting)> {
        let mut out = Vec::new();
        let mut sink = |k: Vec<StopIndex>, p: Posting| out.push((k, p));
        for (pos, w) in words.iter().enumerate() {
            queue
                .push_stop_token(lex, 0, pos as u32, forms(lex, w), &mut sink)
                .unwrap();
        }
        queue.flush(lex, &mut sink).unwrap();
        out
    }

    #[test]
    fn ten_token_run_matches_window_counts() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 5, 64);
        let words: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let refs: Vec<&str> = words.iter().map(|s| s.as_str()).collect();
        let emitted = run_tokens(&lex, &mut q, &refs);
        for (len, expect) in [(2usize, 9usize), (3, 8), (4, 7), (5, 6)] {
            let got = emitted.iter().filter(|(k, _)| k.len() == len).count();
            assert_eq!(got, expect, "length {len}");
        }
        assert_eq!(emitted.len(), 30);
    }

    #[test]
    fn single_token_emits_nothing() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 5, 64);
        assert!(run_tokens(&lex, &mut q, &["s0"]).is_empty());
    }

    #[test]
    fn run_of_exactly_min_length_emits_once() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 5, 64);
        let emitted = run_tokens(&lex, &mut q, &["s3", "s7"]);
        assert_eq!(emitted.len(), 1);
        assert_eq!(emitted[0].0, vec![3, 7]);
        assert_eq!(emitted[0].1, Posting::new(0, 0));
    }

    #[test]
    fn flush_of_three_items_emits_window_counts() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 5, 64);
        let emitted = run_tokens(&lex, &mut q, &["s0", "s1", "s2"]);
        // S=3: two length-2 phrases, one length-3 phrase
        let by_len = |l: usize| emitted.iter().filter(|(k, _)| k.len() == l).count();
        assert_eq!(by_len(2), 2);
        assert_eq!(by_len(3), 1);
        assert!(run_tokens(&lex, &mut StopPhraseQueue::new(2, 5, 64), &[]).is_empty());
    }

    #[test]
    fn five_items_emit_ten_phrases() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 5, 64);
        let words: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let refs: Vec<&str> = words.iter().map(|s| s.as_str()).collect();
        assert_eq!(run_tokens(&lex, &mut q, &refs).len(), 10);
    }

    #[test]
    fn keys_are_sorted_multisets() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 3, 64);
        // s9 (rank 9) before s2 (rank 2): key must come out sorted
        let emitted = run_tokens(&lex, &mut q, &["s9", "s2"]);
        assert_eq!(emitted.len(), 1);
        assert_eq!(emitted[0].0, vec![2, 9]);
    }

    #[test]
    fn repeated_form_keeps_multiset_length() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 5, 64);
        let emitted = run_tokens(&lex, &mut q, &["s4", "s4"]);
        assert_eq!(emitted.len(), 1);
        assert_eq!(emitted[0].0, vec![4, 4]);
    }

    #[test]
    fn multi_form_token_fans_out() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 2, 64);
        // "dual" has stop forms {s0, s1}: two distinct keys, same posting
        let emitted = run_tokens(&lex, &mut q, &["dual", "s2"]);
        let keys: Vec<&Vec<StopIndex>> = emitted.iter().map(|(k, _)| k).collect();
        assert_eq!(keys, vec![&vec![0, 2], &vec![1, 2]]);
        assert!(emitted.iter().all(|(_, p)| *p == Posting::new(0, 0)));
    }

    #[test]
    fn duplicate_keys_within_a_window_are_emitted_once() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 2, 64);
        // both tokens have forms {s0, s1}: product is 4, distinct sorted
        // multisets are {0,0}, {0,1}, {1,1}
        let emitted = run_tokens(&lex, &mut q, &["dual", "dual"]);
        let keys: Vec<&Vec<StopIndex>> = emitted.iter().map(|(k, _)| k).collect();
        assert_eq!(keys, vec![&vec![0, 0], &vec![0, 1], &vec![1, 1]]);
    }

    #[test]
    fn product_cap_limits_combinations() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 2, 2);
        let emitted = run_tokens(&lex, &mut q, &["dual", "dual"]);
        // first two combinations in recursion order: (s0,s0), (s0,s1)
        let keys: Vec<&Vec<StopIndex>> = emitted.iter().map(|(k, _)| k).collect();
        assert_eq!(keys, vec![&vec![0, 0], &vec![0, 1]]);
    }

    #[test]
    fn position_gap_without_flush_is_an_error() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 5, 64);
        let mut sink = |_k: Vec<StopIndex>, _p: Posting| {};
        q.push_stop_token(&lex, 0, 0, forms(&lex, "s0"), &mut sink)
            .unwrap();
        assert!(matches!(
            q.push_stop_token(&lex, 0, 2, forms(&lex, "s1"), &mut sink),
            Err(Error::SequenceError { .. })
        ));
        assert!(matches!(
            q.push_stop_token(&lex, 1, 1, forms(&lex, "s1"), &mut sink),
            Err(Error::SequenceError { .. })
        ));
    }

    #[test]
    fn non_stop_form_in_queue_is_index_corruption() {
        let lex = stop_lexicon();
        let mut q = StopPhraseQueue::new(2, 5, 64);
        let mut sink = |_k: Vec<StopIndex>, _p: Posting| {};
        q.push_stop_token(&lex, 0, 0, forms(&lex, "s0"), &mut sink)
            .unwrap();
        q.push_stop_token(&lex, 0, 1, forms(&lex, "plain"), &mut sink)
            .unwrap();
        let mut sink2 = |_k: Vec<StopIndex>, _p: Posting| {};
        assert!(matches!(
            q.flush(&lex, &mut sink2),
            Err(Error::IndexCorrupt(_))
        ));
    }

    proptest::proptest! {
        /// A run of S single-form stop tokens yields exactly
        /// max(0, S-L+1) emissions per length L, whatever S is.
        #[test]
        fn prop_window_counts_over_random_runs(s in 0usize..40) {
            let lex = stop_lexicon();
            let mut q = StopPhraseQueue::new(2, 5, 64);
            let words: Vec<String> = (0..s).map(|i| format!("s{}", i % 10)).collect();
            let refs: Vec<&str> = words.iter().map(|w| w.as_str()).collect();
            let emitted = run_tokens(&lex, &mut q, &refs);
            for len in 2usize..=5 {
                let got = emitted.iter().filter(|(k, _)| k.len() == len).count();
                let expect = (s as i64 - len as i64 + 1).max(0) as usize;
                proptest::prop_assert_eq!(got, expect, "S={} L={}", s, len);
            }
            // every emission starts inside the run
            proptest::prop_assert!(emitted
                .iter()
                .all(|(k, p)| (p.pos as usize) + k.len() <= s));
        }

        /// Keys depend on window multisets alone: a reversed run emits
        /// the same key set, byte for byte.
        #[test]
        fn prop_reversed_runs_emit_identical_key_sets(
            ranks in proptest::collection::vec(0usize..10, 2..20),
        ) {
            let lex = stop_lexicon();
            let table = HuffmanTable::from_weights(&lex.stop_weights());
            let words: Vec<String> = ranks.iter().map(|r| format!("s{r}")).collect();
            let reversed: Vec<String> = words.iter().rev().cloned().collect();
            let key_set = |tokens: &[String]| -> BTreeSet<Vec<u8>> {
                let refs: Vec<&str> = tokens.iter().map(|w| w.as_str()).collect();
                let mut q = StopPhraseQueue::new(2, 5, 64);
                run_tokens(&lex, &mut q, &refs)
                    .into_iter()
                    .map(|(ids, _)| encode_phrase_key(&ids, &table, false).unwrap())
                    .collect()
            };
            proptest::prop_assert_eq!(key_set(&words), key_set(&reversed));
        }
    }

    #[test]
    fn phrase_key_round_trips_through_huffman_and_plain() {
        let lex = stop_lexicon();
        let t = HuffmanTable::from_weights(&lex.stop_weights());
        for plain in [false, true] {
            let ids = vec![0u32, 2, 2, 9];
            let key = encode_phrase_key(&ids, &t, plain).unwrap();
            assert_eq!(key[0], NS_STOP_PHRASE);
            assert_eq!(decode_phrase_key(&key, &t, plain).unwrap(), ids);
        }
    }
}
