//! Benchmark harness: draws phrase queries from indexed documents, runs
//! each on both the additional-index system and the baseline, and
//! aggregates postings-read and latency statistics.
//!
//! Query selection follows the experiment procedure: pick a random
//! document, then take token windows of length 3, 4, and 5, both
//! contiguous and with every other word omitted. Skip-one queries that
//! contain a word with a stop basic form are not emitted; such queries
//! are confined to sequential words.
//!
//! Because every query is drawn from an indexed document, that document
//! must appear in the query's own results on both systems. A miss aborts
//! the run: it is a correctness bug, not a bench statistic.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::BaselineMode;
use crate::error::{Error, Result};
use crate::index::Index;
use crate::lexicon::Lexicon;
use crate::planner::QueryOptions;
use crate::storage::ReadStats;
use crate::DocId;

pub const BENCH_LENGTHS: [usize; 3] = [3, 4, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SelectionMode {
    Contiguous,
    SkipOne,
}

impl SelectionMode {
    pub fn label(&self) -> &'static str {
        match self {
            SelectionMode::Contiguous => "contiguous",
            SelectionMode::SkipOne => "skip-one",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedQuery {
    pub words: Vec<String>,
    pub mode: SelectionMode,
    pub length: usize,
    pub doc: DocId,
}

/// All queries the procedure draws from one document. Documents shorter
/// than 2·max(lengths)−1 tokens yield nothing.
pub fn select_queries(
    lexicon: &Lexicon,
    doc: DocId,
    tokens: &[String],
    lengths: &[usize],
) -> Vec<SelectedQuery> {
    let max_len = lengths.iter().copied().max().unwrap_or(0);
    if max_len == 0 || tokens.len() < 2 * max_len - 1 {
        return Vec::new();
    }
    let has_stop_form = |word: &str| -> bool {
        lexicon
            .analyze(word)
            .map(|forms| forms.iter().any(|&f| lexicon.stop_rank(f).is_some()))
            .unwrap_or(false)
    };
    let mut out = Vec::new();
    for &n in lengths {
        for i in 0..tokens.len() {
            if i + n <= tokens.len() {
                out.push(SelectedQuery {
                    words: tokens[i..i + n].to_vec(),
                    mode: SelectionMode::Contiguous,
                    length: n,
                    doc,
                });
            }
            if i + 2 * (n - 1) < tokens.len() {
                let words: Vec<String> = (0..n).map(|k| tokens[i + 2 * k].clone()).collect();
                if !words.iter().any(|w| has_stop_form(w)) {
                    out.push(SelectedQuery {
                        words,
                        mode: SelectionMode::SkipOne,
                        length: n,
                        doc,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SystemStats {
    pub postings_mean: f64,
    pub postings_max: u64,
    pub latency_mean_s: f64,
    pub latency_max_s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BucketStats {
    pub count: u64,
    pub additional_mean: f64,
    pub additional_max: u64,
    pub baseline_mean: f64,
    pub baseline_max: u64,
}

/// Aggregated outcome of one bench run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub queries: u64,
    pub seed: u64,
    pub additional: SystemStats,
    pub baseline: SystemStats,
    pub buckets: BTreeMap<(usize, SelectionMode), BucketStats>,
}

#[derive(Default)]
struct Agg {
    n: u64,
    sum: u64,
    max: u64,
    lat_sum: f64,
    lat_max: f64,
}

impl Agg {
    fn add(&mut self, postings: u64, latency_s: f64) {
        self.n += 1;
        self.sum += postings;
        self.max = self.max.max(postings);
        self.lat_sum += latency_s;
        self.lat_max = self.lat_max.max(latency_s);
    }

    fn stats(&self) -> SystemStats {
        SystemStats {
            postings_mean: if self.n == 0 {
                0.0
            } else {
                self.sum as f64 / self.n as f64
            },
            postings_max: self.max,
            latency_mean_s: if self.n == 0 {
                0.0
            } else {
                self.lat_sum / self.n as f64
            },
            latency_max_s: self.lat_max,
        }
    }
}

/// Runs `n_queries` seeded random queries sequentially in this thread.
///
/// Documents are re-read through the manifest, so the corpus must still
/// be where the build found it. The baseline runs in exact-phrase mode
/// for contiguous queries and document-conjunction mode for skip-one
/// queries.
pub fn run_bench(index: &Index, n_queries: usize, seed: u64) -> Result<BenchReport> {
    let token_docs = index.manifest().load_token_docs(None)?;
    let max_len = BENCH_LENGTHS.into_iter().max().unwrap();
    let eligible: Vec<usize> = token_docs
        .iter()
        .enumerate()
        .filter(|(_, t)| t.len() >= 2 * max_len - 1)
        .map(|(i, _)| i)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Config(format!(
            "no document has the {} tokens query selection needs",
            2 * max_len - 1
        )));
    }
    let mut query_cache: Vec<Option<Vec<SelectedQuery>>> = vec![None; token_docs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = QueryOptions::default();

    let mut add_agg = Agg::default();
    let mut base_agg = Agg::default();
    let mut bucket_aggs: BTreeMap<(usize, SelectionMode), (Agg, Agg)> = BTreeMap::new();

    let mut done = 0usize;
    while done < n_queries {
        let doc = eligible[rng.gen_range(0..eligible.len())];
        let queries = query_cache[doc].get_or_insert_with(|| {
            select_queries(
                index.lexicon(),
                doc as DocId,
                &token_docs[doc],
                &BENCH_LENGTHS,
            )
        });
        if queries.is_empty() {
            continue;
        }
        let q = &queries[rng.gen_range(0..queries.len())];

        let mut stats = ReadStats::new();
        let t0 = Instant::now();
        let matches = index.search_words(&q.words, &opts, &mut stats)?;
        let add_latency = t0.elapsed().as_secs_f64();
        if !matches.iter().any(|m| m.doc == q.doc) {
            return Err(Error::SelfMatchFailed {
                query: q.words.clone(),
                doc: q.doc,
            });
        }
        let add_postings = stats.postings_read;

        let mode = match q.mode {
            SelectionMode::Contiguous => BaselineMode::ExactPhrase,
            SelectionMode::SkipOne => BaselineMode::DocConjunction,
        };
        let t0 = Instant::now();
        let matches = index.baseline_search_words(&q.words, mode, &mut stats)?;
        let base_latency = t0.elapsed().as_secs_f64();
        if !matches.iter().any(|m| m.doc == q.doc) {
            return Err(Error::SelfMatchFailed {
                query: q.words.clone(),
                doc: q.doc,
            });
        }
        let base_postings = stats.postings_read;

        add_agg.add(add_postings, add_latency);
        base_agg.add(base_postings, base_latency);
        let (a, b) = bucket_aggs.entry((q.length, q.mode)).or_default();
        a.add(add_postings, add_latency);
        b.add(base_postings, base_latency);
        done += 1;
    }

    Ok(BenchReport {
        queries: done as u64,
        seed,
        additional: add_agg.stats(),
        baseline: base_agg.stats(),
        buckets: bucket_aggs
            .into_iter()
            .map(|(k, (a, b))| {
                let sa = a.stats();
                let sb = b.stats();
                (
                    k,
                    BucketStats {
                        count: a.n,
                        additional_mean: sa.postings_mean,
                        additional_max: sa.postings_max,
                        baseline_mean: sb.postings_mean,
                        baseline_max: sb.postings_max,
                    },
                )
            })
            .collect(),
    })
}

impl BenchReport {
    /// Machine-readable tab-separated form.
    pub fn to_tsv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("# phrasex-bench\tv1\n");
        writeln!(out, "queries\t{}", self.queries).unwrap();
        writeln!(out, "seed\t{}", self.seed).unwrap();
        for (name, s) in [
            ("additional", &self.additional),
            ("baseline", &self.baseline),
        ] {
            writeln!(
                out,
                "system\t{name}\tpostings_mean\t{:.3}\tpostings_max\t{}",
                s.postings_mean, s.postings_max
            )
            .unwrap();
            writeln!(
                out,
                "system\t{name}\tlatency_mean_s\t{:.6}\tlatency_max_s\t{:.6}",
                s.latency_mean_s, s.latency_max_s
            )
            .unwrap();
        }
        for ((len, mode), b) in &self.buckets {
            writeln!(
                out,
                "bucket\t{len}\t{}\tcount\t{}\tadditional_mean\t{:.3}\tadditional_max\t{}\
                 \tbaseline_mean\t{:.3}\tbaseline_max\t{}",
                mode.label(),
                b.count,
                b.additional_mean,
                b.additional_max,
                b.baseline_mean,
                b.baseline_max
            )
            .unwrap();
        }
        out
    }

    /// Human-readable table.
    pub fn render_table(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "{} queries (seed {})", self.queries, self.seed).unwrap();
        writeln!(
            out,
            "{:<12} {:>16} {:>14} {:>14} {:>12}",
            "system", "postings mean", "postings max", "latency mean", "latency max"
        )
        .unwrap();
        for (name, s) in [
            ("additional", &self.additional),
            ("baseline", &self.baseline),
        ] {
            writeln!(
                out,
                "{:<12} {:>16.1} {:>14} {:>13.4}s {:>11.4}s",
                name, s.postings_mean, s.postings_max, s.latency_mean_s, s.latency_max_s
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<12} {:>10} {:>8} {:>16} {:>16}",
            "bucket", "mode", "count", "additional mean", "baseline mean"
        )
        .unwrap();
        for ((len, mode), b) in &self.buckets {
            writeln!(
                out,
                "{:<12} {:>10} {:>8} {:>16.1} {:>16.1}",
                format!("length {len}"),
                mode.label(),
                b.count,
                b.additional_mean,
                b.baseline_mean
            )
            .unwrap();
        }
        out
    }

    /// Invariants the report itself must satisfy.
    pub fn consistent(&self) -> bool {
        let counts: u64 = self.buckets.values().map(|b| b.count).sum();
        counts == self.queries
            && self.additional.postings_max as f64 >= self.additional.postings_mean
            && self.baseline.postings_max as f64 >= self.baseline.postings_mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_lexicon, LemmaTable};
    use crate::tokenize::tokenize;

    fn lexicon_with_stops(stops: &[&str], others: &[&str]) -> Lexicon {
        let mut counts: Vec<(String, u64)> = Vec::new();
        for (i, s) in stops.iter().enumerate() {
            counts.push((s.to_string(), 1000 - i as u64));
        }
        for (i, s) in others.iter().enumerate() {
            counts.push((s.to_string(), 100 - i as u64));
        }
        build_lexicon(
            &LemmaTable::empty(),
            counts.iter().map(|(s, n)| (s.as_str(), *n)),
            stops.len() as u32,
            0,
        )
        .unwrap()
    }

    #[test]
    fn selection_follows_the_two_modes() {
        let lex = lexicon_with_stops(
            &[],
            &[
                "gaul", "taken", "as", "a", "whole", "is", "divided", "into", "three", "parts",
            ],
        );
        let tokens = tokenize("Gaul, taken as a whole, is divided into three parts");
        let qs = select_queries(&lex, 0, &tokens, &[3]);
        let words: Vec<(&'static str, Vec<&str>)> = vec![
            ("2.1", vec!["gaul", "taken", "as"]),
            ("2.2", vec!["gaul", "as", "whole"]),
            ("2.1", vec!["taken", "as", "a"]),
            ("2.2", vec!["taken", "a", "is"]),
        ];
        for (i, (_, expect)) in words.iter().enumerate() {
            assert_eq!(
                qs[i].words,
                expect.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                "query {i}"
            );
        }
        assert_eq!(qs[0].mode, SelectionMode::Contiguous);
        assert_eq!(qs[1].mode, SelectionMode::SkipOne);
    }

    #[test]
    fn short_documents_yield_nothing() {
        let lex = lexicon_with_stops(&[], &["a", "b", "c", "d", "e"]);
        let tokens: Vec<String> = "a b c d e".split(' ').map(String::from).collect();
        // 5 tokens < 2*5-1 = 9
        assert!(select_queries(&lex, 0, &tokens, &[3, 4, 5]).is_empty());
        // but with max length 3 the same doc qualifies
        assert!(!select_queries(&lex, 0, &tokens, &[3]).is_empty());
    }

    #[test]
    fn five_token_doc_gets_exactly_one_length_five_window() {
        let lex = lexicon_with_stops(&[], &["a", "b", "c", "d", "e", "f", "g", "h", "i"]);
        let tokens: Vec<String> = "a b c d e f g h i".split(' ').map(String::from).collect();
        let qs = select_queries(&lex, 0, &tokens, &[5]);
        let contiguous: Vec<_> = qs
            .iter()
            .filter(|q| q.mode == SelectionMode::Contiguous)
            .collect();
        assert_eq!(contiguous.len(), 5); // windows starting at 0..=4
        assert_eq!(contiguous[0].words.join(" "), "a b c d e");
        let skip: Vec<_> = qs
            .iter()
            .filter(|q| q.mode == SelectionMode::SkipOne)
            .collect();
        assert_eq!(skip.len(), 1); // positions 0,2,4,6,8
        assert_eq!(skip[0].words.join(" "), "a c e g i");
    }

    #[test]
    fn stop_words_suppress_skip_one_queries() {
        let lex = lexicon_with_stops(&["the"], &["a", "b", "c", "d", "e", "f", "g", "h"]);
        let tokens: Vec<String> = "the a b c d e f g h".split(' ').map(String::from).collect();
        let qs = select_queries(&lex, 0, &tokens, &[3]);
        for q in &qs {
            if q.mode == SelectionMode::SkipOne {
                assert!(
                    !q.words.iter().any(|w| w == "the"),
                    "skip-one query {q:?} contains a stop word"
                );
            }
        }
        // the all-stop-free suffix still produces skip-one queries
        assert!(qs.iter().any(|q| q.mode == SelectionMode::SkipOne));
        // contiguous queries may contain the stop word
        assert!(qs
            .iter()
            .any(|q| q.mode == SelectionMode::Contiguous && q.words.contains(&"the".to_string())));
    }
}
