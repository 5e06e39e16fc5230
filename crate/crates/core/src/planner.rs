//! Query planner: splits a raw query into typed sub-queries, classifies
//! each as Type 1–4, executes it against whichever indexes it needs, and
//! combines the results.
//!
//! Type 1: every word is a stop word → one stop-phrase lookup.
//! Type 2: every word is frequently used → expanded pair lookups joined
//!         on the least-frequent ("basic") word's occurrences.
//! Type 3: no stop words, at least one ordinary word → expanded pairs
//!         where one side is Frequent; Ordinary–Ordinary pairs fall back
//!         to full basic-index posting lists with the default join
//!         distance.
//! Type 4: stop and non-stop words mixed → iterate the basic word's
//!         occurrences with their near-stop annotations; stop words must
//!         appear among the annotations, other words confirm as in
//!         Types 2/3.
//!
//! Types 2–4 retry distance-free when the distance-aware pass finds
//! nothing and fallback is enabled: a document-level conjunction over the
//! first-occurrence streams of the non-stop words.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::index::Index;
use crate::lexicon::{FrequencyClass, Lexicon};
use crate::storage::{Posting, ReadStats};
use crate::{DocId, Position, StopIndex, WordFormId};

/// A sub-query whose every position holds forms of a single frequency
/// class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedQuery {
    pub positions: Vec<Vec<WordFormId>>,
    pub classes: Vec<FrequencyClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryType {
    Type1,
    Type2,
    Type3,
    Type4,
}

/// Execution strategy for one typed sub-query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub qtype: QueryType,
    /// Position of the least-frequent (non-stop) word; absent for Type 1.
    pub basic_word: Option<usize>,
    /// (other position, basic position) pairs to confirm.
    pub pair_lookups: Vec<(usize, usize)>,
    /// Whether the distance-free retry is armed.
    pub fallback: bool,
}

/// One result: a document plus one position per query word. Distance-free
/// fallback matches carry no span and may leave stop-word positions
/// unresolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub doc: DocId,
    pub positions: Vec<Option<Position>>,
    pub span: Option<u32>,
}

impl Match {
    /// A full positional match; the span is the covering extent.
    pub fn distance_aware(doc: DocId, positions: Vec<Option<Position>>) -> Self {
        let mut min = u32::MAX;
        let mut max = 0u32;
        for p in positions.iter().flatten() {
            min = min.min(*p);
            max = max.max(*p);
        }
        debug_assert!(positions.iter().all(|p| p.is_some()));
        Match {
            doc,
            positions,
            span: Some(max - min),
        }
    }

    pub fn fallback(doc: DocId, positions: Vec<Option<Position>>) -> Self {
        Match {
            doc,
            positions,
            span: None,
        }
    }

    pub fn first_position(&self) -> Position {
        self.positions
            .iter()
            .flatten()
            .copied()
            .min()
            .unwrap_or(Position::MAX)
    }

    fn sort_key(&self) -> (bool, u32, DocId, Position) {
        (
            self.span.is_none(),
            self.span.unwrap_or(0),
            self.doc,
            self.first_position(),
        )
    }
}

impl Ord for Match {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key()
            .cmp(&other.sort_key())
            .then_with(|| self.positions.cmp(&other.positions))
    }
}

impl PartialOrd for Match {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-query execution switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryOptions {
    /// Retry distance-free when the distance-aware pass is empty
    /// (Types 2–4). Off under `exact_order`.
    pub fallback: bool,
    /// Keep only matches whose words sit consecutively in query order.
    pub exact_order: bool,
    /// Split over-long all-stop queries into overlapping windows.
    pub chunk_long: bool,
    pub max_results: Option<usize>,
}

impl Default for QueryOptions {
    fn default() -> Self {
        QueryOptions {
            fallback: true,
            exact_order: false,
            chunk_long: true,
            max_results: None,
        }
    }
}

/// Splits per-word form lists so that each output query has positions
/// homogeneous in frequency class. The output size is the product over
/// positions of the number of distinct classes among that word's forms.
pub fn split_query(lexicon: &Lexicon, raw: &[Vec<WordFormId>]) -> Result<Vec<TypedQuery>> {
    if raw.is_empty() {
        return Err(Error::EmptyQuery);
    }
    // per position: class groups in order of first appearance
    let mut groups: Vec<Vec<(FrequencyClass, Vec<WordFormId>)>> = Vec::with_capacity(raw.len());
    for forms in raw {
        if forms.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let mut g: Vec<(FrequencyClass, Vec<WordFormId>)> = Vec::new();
        for &f in forms {
            let class = lexicon.classify(f)?;
            match g.iter_mut().find(|(c, _)| *c == class) {
                Some((_, list)) => list.push(f),
                None => g.push((class, vec![f])),
            }
        }
        groups.push(g);
    }
    let mut out = Vec::new();
    let mut positions: Vec<Vec<WordFormId>> = Vec::with_capacity(raw.len());
    let mut classes: Vec<FrequencyClass> = Vec::with_capacity(raw.len());
    expand_splits(&groups, 0, &mut positions, &mut classes, &mut out);
    Ok(out)
}

fn expand_splits(
    groups: &[Vec<(FrequencyClass, Vec<WordFormId>)>],
    depth: usize,
    positions: &mut Vec<Vec<WordFormId>>,
    classes: &mut Vec<FrequencyClass>,
    out: &mut Vec<TypedQuery>,
) {
    if depth == groups.len() {
        out.push(TypedQuery {
            positions: positions.clone(),
            classes: classes.clone(),
        });
        return;
    }
    for (class, forms) in &groups[depth] {
        positions.push(forms.clone());
        classes.push(*class);
        expand_splits(groups, depth + 1, positions, classes, out);
        positions.pop();
        classes.pop();
    }
}

/// Assigns the query type and picks the basic word: the non-stop position
/// whose least-frequent form has the smallest corpus count, leftmost on
/// ties.
pub fn classify_query(lexicon: &Lexicon, q: &TypedQuery, opts: &QueryOptions) -> QueryPlan {
    let any_stop = q.classes.contains(&FrequencyClass::Stop);
    let all_stop = q.classes.iter().all(|c| *c == FrequencyClass::Stop);
    let any_ordinary = q.classes.contains(&FrequencyClass::Ordinary);
    let qtype = if all_stop {
        QueryType::Type1
    } else if any_stop {
        QueryType::Type4
    } else if any_ordinary {
        QueryType::Type3
    } else {
        QueryType::Type2
    };
    let basic_word = if qtype == QueryType::Type1 {
        None
    } else {
        let mut best: Option<(u64, usize)> = None;
        for (i, forms) in q.positions.iter().enumerate() {
            if q.classes[i] == FrequencyClass::Stop {
                continue;
            }
            let count = forms.iter().map(|&f| lexicon.freq_count(f)).min().unwrap();
            if best.is_none_or(|(c, _)| count < c) {
                best = Some((count, i));
            }
        }
        best.map(|(_, i)| i)
    };
    let pair_lookups = match basic_word {
        Some(b) => (0..q.positions.len())
            .filter(|&k| k != b && q.classes[k] != FrequencyClass::Stop)
            .map(|k| (k, b))
            .collect(),
        None => Vec::new(),
    };
    QueryPlan {
        qtype,
        basic_word,
        pair_lookups,
        fallback: opts.fallback,
    }
}

/// Runs one typed sub-query: the distance-aware strategy for its type,
/// then the distance-free retry if armed and nothing matched.
pub fn execute(
    index: &Index,
    plan: &QueryPlan,
    q: &TypedQuery,
    opts: &QueryOptions,
    stats: &mut ReadStats,
) -> Result<Vec<Match>> {
    let mut matches = match plan.qtype {
        QueryType::Type1 => execute_stop_phrase(index, q, opts, stats)?,
        QueryType::Type2 | QueryType::Type3 => execute_proximity(index, plan, q, stats)?,
        QueryType::Type4 => execute_with_stops(index, plan, q, stats)?,
    };
    if opts.exact_order && plan.qtype != QueryType::Type1 {
        matches.retain(is_exact_order);
    }
    if matches.is_empty() && plan.fallback && !opts.exact_order && plan.qtype != QueryType::Type1 {
        matches = execute_fallback(index, q, stats)?;
    }
    matches.sort();
    Ok(matches)
}

fn is_exact_order(m: &Match) -> bool {
    let first = match m.positions.first().copied().flatten() {
        Some(p) => p,
        None => return false,
    };
    m.positions
        .iter()
        .enumerate()
        .all(|(i, p)| *p == Some(first + i as u32))
}

/// Type 1: one multiset lookup per window; over-long queries chunk into
/// overlapping max-length windows joined on consistent offsets.
fn execute_stop_phrase(
    index: &Index,
    q: &TypedQuery,
    opts: &QueryOptions,
    stats: &mut ReadStats,
) -> Result<Vec<Match>> {
    let n = q.positions.len();
    let (min_len, max_len) = (
        index.config().min_length as usize,
        index.config().max_length as usize,
    );
    if n < min_len {
        return Err(Error::UnsupportedQuery(format!(
            "all-stop query of length {n} is below the indexed minimum {min_len} \
             (stop words have no standalone posting lists)"
        )));
    }
    let reader = index.stop_phrase_reader();
    let starts: Vec<(DocId, Position)> = if n <= max_len {
        reader
            .lookup_phrase(index.lexicon(), &q.positions, stats)?
            .into_iter()
            .map(|p| (p.doc, p.pos))
            .collect()
    } else if opts.chunk_long {
        let mut acc: BTreeSet<(DocId, Position)> = reader
            .lookup_phrase(index.lexicon(), &q.positions[0..max_len], stats)?
            .into_iter()
            .map(|p| (p.doc, p.pos))
            .collect();
        for i in 1..=(n - max_len) {
            if acc.is_empty() {
                break;
            }
            let window: BTreeSet<(DocId, Position)> = reader
                .lookup_phrase(index.lexicon(), &q.positions[i..i + max_len], stats)?
                .into_iter()
                .map(|p| (p.doc, p.pos))
                .collect();
            acc.retain(|&(doc, p)| window.contains(&(doc, p + i as u32)));
        }
        acc.into_iter().collect()
    } else {
        return Err(Error::UnsupportedQuery(format!(
            "all-stop query of length {n} exceeds the indexed maximum {max_len} and \
             chunking is disabled"
        )));
    };
    let mut matches: Vec<Match> = starts
        .into_iter()
        .map(|(doc, p)| Match::distance_aware(doc, (0..n).map(|i| Some(p + i as u32)).collect()))
        .collect();
    if opts.exact_order {
        matches = filter_exact_order_via_baseline(index, q, matches, stats)?;
    }
    Ok(matches)
}

/// The stop-phrase key is order-insensitive, so exact-order filtering
/// re-checks each window against the baseline posting lists.
fn filter_exact_order_via_baseline(
    index: &Index,
    q: &TypedQuery,
    matches: Vec<Match>,
    stats: &mut ReadStats,
) -> Result<Vec<Match>> {
    let baseline = index.baseline_reader();
    if !baseline.available() {
        return Err(Error::UnsupportedQuery(
            "exact-order filtering of all-stop queries needs the baseline component".into(),
        ));
    }
    let mut sets: Vec<BTreeSet<Posting>> = Vec::with_capacity(q.positions.len());
    for forms in &q.positions {
        let mut set = BTreeSet::new();
        for &f in forms {
            set.extend(baseline.posting_list(f, stats)?);
        }
        sets.push(set);
    }
    Ok(matches
        .into_iter()
        .filter(|m| {
            let start = m.first_position();
            sets.iter()
                .enumerate()
                .all(|(i, set)| set.contains(&Posting::new(m.doc, start + i as u32)))
        })
        .collect())
}

/// Candidate occurrences of one non-basic word, keyed by the basic-word
/// anchor they confirm.
type CandidateMap = BTreeMap<(DocId, Position), Vec<Position>>;

fn candidate_map(
    index: &Index,
    q: &TypedQuery,
    k: usize,
    b: usize,
    stats: &mut ReadStats,
) -> Result<CandidateMap> {
    let lexicon = index.lexicon();
    let mut m = CandidateMap::new();
    let pairable =
        q.classes[k] == FrequencyClass::Frequent || q.classes[b] == FrequencyClass::Frequent;
    if pairable {
        let expanded = index.expanded_reader();
        for &fk in &q.positions[k] {
            for &fb in &q.positions[b] {
                for (doc, pos_k, pos_b) in expanded.lookup_pair(lexicon, fk, fb, stats)? {
                    m.entry((doc, pos_b)).or_default().push(pos_k);
                }
            }
        }
    } else {
        // no expanded index on either side: join full posting lists from
        // the basic index at the default distance
        let d = index.config().default_join_distance;
        let occ_k = merged_occurrences(index, &q.positions[k], stats)?;
        let occ_b = merged_occurrences(index, &q.positions[b], stats)?;
        for pb in &occ_b {
            let lo = pb.pos.saturating_sub(d - 1);
            let start = occ_k.partition_point(|p| (p.doc, p.pos) < (pb.doc, lo));
            for pk in &occ_k[start..] {
                if pk.doc != pb.doc || pk.pos > pb.pos.saturating_add(d - 1) {
                    break;
                }
                if pk.pos == pb.pos {
                    continue;
                }
                m.entry((pb.doc, pb.pos)).or_default().push(pk.pos);
            }
        }
    }
    Ok(m)
}

/// Union of `all_occurrences` across a position's forms, sorted.
fn merged_occurrences(
    index: &Index,
    forms: &[WordFormId],
    stats: &mut ReadStats,
) -> Result<Vec<Posting>> {
    let basic = index.basic_reader();
    let mut out: Vec<Posting> = Vec::new();
    for &f in forms {
        out.extend(basic.all_occurrences(index.lexicon(), f, stats)?);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Picks the candidate closest to the anchor; ties prefer the smaller
/// position.
fn closest_to(anchor: Position, candidates: &[Position]) -> Position {
    *candidates
        .iter()
        .min_by_key(|&&p| (p.abs_diff(anchor), p))
        .expect("candidate lists are never empty")
}

/// Types 2 and 3: anchors come from the pair lookups themselves (or the
/// basic word's own occurrences for single-word queries).
fn execute_proximity(
    index: &Index,
    plan: &QueryPlan,
    q: &TypedQuery,
    stats: &mut ReadStats,
) -> Result<Vec<Match>> {
    let b = plan.basic_word.expect("Types 2/3 always have a basic word");
    let n = q.positions.len();
    let mut per_k: BTreeMap<usize, CandidateMap> = BTreeMap::new();
    for &(k, bb) in &plan.pair_lookups {
        debug_assert_eq!(b, bb);
        per_k.insert(k, candidate_map(index, q, k, bb, stats)?);
    }
    let mut matches = Vec::new();
    if per_k.is_empty() {
        // single-word query: every occurrence is a match
        for p in merged_occurrences(index, &q.positions[b], stats)? {
            matches.push(Match::distance_aware(p.doc, vec![Some(p.pos)]));
        }
        return Ok(matches);
    }
    let (&smallest_k, smallest) = per_k
        .iter()
        .min_by_key(|(_, m)| m.len())
        .expect("per_k is non-empty");
    'anchors: for &(doc, p) in smallest.keys() {
        let mut positions: Vec<Option<Position>> = vec![None; n];
        positions[b] = Some(p);
        positions[smallest_k] = Some(closest_to(p, &smallest[&(doc, p)]));
        for (&k, m) in &per_k {
            if k == smallest_k {
                continue;
            }
            match m.get(&(doc, p)) {
                Some(cands) => positions[k] = Some(closest_to(p, cands)),
                None => continue 'anchors,
            }
        }
        matches.push(Match::distance_aware(doc, positions));
    }
    Ok(matches)
}

/// Type 4: iterate the basic word's occurrences with near-stop
/// annotations; each stop word must appear among the annotated neighbors,
/// the remaining words confirm through candidate maps.
fn execute_with_stops(
    index: &Index,
    plan: &QueryPlan,
    q: &TypedQuery,
    stats: &mut ReadStats,
) -> Result<Vec<Match>> {
    let lexicon = index.lexicon();
    let b = plan.basic_word.expect("Type 4 always has a basic word");
    let n = q.positions.len();
    let mut per_k: BTreeMap<usize, CandidateMap> = BTreeMap::new();
    for &(k, bb) in &plan.pair_lookups {
        per_k.insert(k, candidate_map(index, q, k, bb, stats)?);
    }
    // stop positions resolve through the anchor's annotation
    let stop_ranks: BTreeMap<usize, BTreeSet<StopIndex>> = q
        .classes
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == FrequencyClass::Stop)
        .map(|(s, _)| {
            let ranks = q.positions[s]
                .iter()
                .map(|&f| {
                    lexicon.stop_rank(f).ok_or_else(|| {
                        Error::IndexCorrupt(format!("{f} classed Stop but has no rank"))
                    })
                })
                .collect::<Result<BTreeSet<StopIndex>>>()?;
            Ok((s, ranks))
        })
        .collect::<Result<_>>()?;

    let basic_reader = index.basic_reader();
    let mut anchors: BTreeMap<(DocId, Position), crate::basic::NearStopAnnotation> =
        BTreeMap::new();
    for &fb in &q.positions[b] {
        for (posting, ann) in basic_reader.occurrences_with_stops(lexicon, fb, stats)? {
            anchors.insert((posting.doc, posting.pos), ann);
        }
    }

    let mut matches = Vec::new();
    'anchors: for (&(doc, p), ann) in &anchors {
        let mut positions: Vec<Option<Position>> = vec![None; n];
        positions[b] = Some(p);
        for (&s, ranks) in &stop_ranks {
            let mut best: Option<(u32, i32)> = None;
            for &(off, rank) in &ann.neighbors {
                if ranks.contains(&rank) {
                    let cand = (off.unsigned_abs(), off);
                    best = Some(match best {
                        None => cand,
                        Some(cur) => cur.min(cand),
                    });
                }
            }
            match best {
                Some((_, off)) => positions[s] = Some((i64::from(p) + i64::from(off)) as Position),
                None => continue 'anchors,
            }
        }
        for (&k, m) in &per_k {
            match m.get(&(doc, p)) {
                Some(cands) => positions[k] = Some(closest_to(p, cands)),
                None => continue 'anchors,
            }
        }
        matches.push(Match::distance_aware(doc, positions));
    }
    Ok(matches)
}

/// Distance-free retry: document-level conjunction over the
/// first-occurrence streams of all non-stop words. Stop words are left
/// unconstrained and unresolved.
fn execute_fallback(index: &Index, q: &TypedQuery, stats: &mut ReadStats) -> Result<Vec<Match>> {
    let lexicon = index.lexicon();
    let basic_reader = index.basic_reader();
    let n = q.positions.len();
    let mut doc_maps: Vec<Option<BTreeMap<DocId, Position>>> = Vec::with_capacity(n);
    for (i, forms) in q.positions.iter().enumerate() {
        if q.classes[i] == FrequencyClass::Stop {
            doc_maps.push(None);
            continue;
        }
        let mut m: BTreeMap<DocId, Position> = BTreeMap::new();
        for &f in forms {
            for rec in basic_reader.first_occurrences(lexicon, f, stats)? {
                m.entry(rec.doc)
                    .and_modify(|p| *p = (*p).min(rec.first_pos))
                    .or_insert(rec.first_pos);
            }
        }
        doc_maps.push(Some(m));
    }
    let mut docs: Option<BTreeSet<DocId>> = None;
    for m in doc_maps.iter().flatten() {
        let ds: BTreeSet<DocId> = m.keys().copied().collect();
        docs = Some(match docs {
            None => ds,
            Some(prev) => prev.intersection(&ds).copied().collect(),
        });
    }
    let docs = match docs {
        Some(d) => d,
        None => return Ok(Vec::new()), // no non-stop words to constrain
    };
    Ok(docs
        .into_iter()
        .map(|doc| {
            let positions = doc_maps
                .iter()
                .map(|m| m.as_ref().and_then(|m| m.get(&doc).copied()))
                .collect();
            Match::fallback(doc, positions)
        })
        .collect())
}

/// Union of per-sub-query results, deduplicated on (doc, positions),
/// distance-aware matches first, then by (span, doc, first position).
pub fn combine(results: Vec<Vec<Match>>) -> Vec<Match> {
    let mut all: Vec<Match> = results.into_iter().flatten().collect();
    all.sort();
    let mut seen: BTreeSet<(DocId, Vec<Option<Position>>)> = BTreeSet::new();
    all.retain(|m| seen.insert((m.doc, m.positions.clone())));
    all
}

/// Full pipeline over analyzed per-word form lists: split, classify,
/// execute, combine. Sub-queries that are individually unsupportable
/// (all-stop and too short or too long) are dropped unless every
/// sub-query is.
pub fn search_forms(
    index: &Index,
    raw: &[Vec<WordFormId>],
    opts: &QueryOptions,
    stats: &mut ReadStats,
) -> Result<Vec<Match>> {
    let typed = split_query(index.lexicon(), raw)?;
    let mut results = Vec::new();
    let mut first_unsupported: Option<Error> = None;
    for q in &typed {
        let plan = classify_query(index.lexicon(), q, opts);
        match execute(index, &plan, q, opts, stats) {
            Ok(matches) => results.push(matches),
            Err(e @ Error::UnsupportedQuery(_)) => {
                if first_unsupported.is_none() {
                    first_unsupported = Some(e);
                }
            }
            Err(e) => return Err(e),
        }
    }
    if results.is_empty() {
        if let Some(e) = first_unsupported {
            return Err(e);
        }
    }
    let mut combined = combine(results);
    if let Some(max) = opts.max_results {
        combined.truncate(max);
    }
    Ok(combined)
}
