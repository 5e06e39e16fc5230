//! Ingestion pipeline: streams documents, tokenizes, routes every token
//! occurrence to the stop-phrase queue, the expanded-pair window, the
//! basic index, and (optionally) the baseline index, then finalizes all
//! streams, key entries, and the header.
//!
//! The build is two passes. Pass one tokenizes and counts basic forms so
//! the lexicon (and with it the stop list and the Huffman weights) exists
//! before any index structure is filled. Pass two routes occurrences.
//! Everything is accumulated in sorted containers and written in a fixed
//! order, so two builds from identical inputs are byte-identical apart
//! from the manifest timestamp.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::baseline::encode_baseline_key;
use crate::basic::{DescriptorTable, DocOccurrences, NearStopAnnotation, WordStreams};
use crate::config::IngestConfig;
use crate::error::{Error, Result};
use crate::expanded::{encode_expanded, encode_pair_key, ExpandedPosting};
use crate::index::{Header, Index};
use crate::lexicon::{build_lexicon, FrequencyClass, LemmaTable, Lexicon};
use crate::stop_phrase::{encode_phrase_key, StopPhraseQueue};
use crate::storage::{append_stream, HuffmanTable, KeyStoreBuilder, Posting, SegmentWriter};
use crate::tokenize::tokenize;
use crate::{DocId, Position, StopIndex, WordFormId};

/// Where the documents came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    /// Directory of plain-text files, one document each.
    Dir,
    /// Single file, one document per line.
    Lines,
}

/// One ingested document as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestDoc {
    pub doc: DocId,
    pub path: String,
    pub tokens: u32,
}

/// `manifest.tsv`: the document list plus corpus totals. Paths are
/// relative to `corpus_root` so `verify --corpus` can point elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub built_at: u64,
    pub corpus_root: PathBuf,
    pub corpus_kind: CorpusKind,
    pub docs: Vec<ManifestDoc>,
    pub total_tokens: u64,
    pub stop_bearing_tokens: u64,
    pub skipped: Vec<(String, String)>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("# phrasex-manifest\tv1\n");
        writeln!(out, "# built_at\t{}", self.built_at).unwrap();
        writeln!(out, "# corpus_root\t{}", self.corpus_root.display()).unwrap();
        writeln!(
            out,
            "# corpus_kind\t{}",
            match self.corpus_kind {
                CorpusKind::Dir => "dir",
                CorpusKind::Lines => "lines",
            }
        )
        .unwrap();
        writeln!(out, "# documents\t{}", self.docs.len()).unwrap();
        writeln!(out, "# tokens\t{}", self.total_tokens).unwrap();
        writeln!(out, "# stop_bearing_tokens\t{}", self.stop_bearing_tokens).unwrap();
        for (path, reason) in &self.skipped {
            writeln!(out, "# skipped\t{path}\t{reason}").unwrap();
        }
        for d in &self.docs {
            writeln!(out, "{}\t{}\t{}", d.doc, d.path, d.tokens).unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let corrupt = |msg: &str| Error::IndexCorrupt(format!("manifest: {msg}"));
        let mut m = Manifest {
            built_at: 0,
            corpus_root: PathBuf::new(),
            corpus_kind: CorpusKind::Dir,
            docs: Vec::new(),
            total_tokens: 0,
            stop_bearing_tokens: 0,
            skipped: Vec::new(),
        };
        for line in text.lines() {
            if let Some(meta) = line.strip_prefix("# ") {
                let mut parts = meta.split('\t');
                let key = parts.next().unwrap_or("");
                let value = parts.next().unwrap_or("");
                match key {
                    "phrasex-manifest" => {}
                    "built_at" => m.built_at = value.parse().map_err(|_| corrupt("built_at"))?,
                    "corpus_root" => m.corpus_root = PathBuf::from(value),
                    "corpus_kind" => {
                        m.corpus_kind = match value {
                            "dir" => CorpusKind::Dir,
                            "lines" => CorpusKind::Lines,
                            _ => return Err(corrupt("corpus_kind")),
                        }
                    }
                    "documents" => {}
                    "tokens" => m.total_tokens = value.parse().map_err(|_| corrupt("tokens"))?,
                    "stop_bearing_tokens" => {
                        m.stop_bearing_tokens =
                            value.parse().map_err(|_| corrupt("stop_bearing_tokens"))?
                    }
                    "skipped" => m
                        .skipped
                        .push((value.to_string(), parts.next().unwrap_or("").to_string())),
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let doc = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| corrupt("doc id"))?;
            let path = parts.next().ok_or_else(|| corrupt("doc path"))?.to_string();
            let tokens = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| corrupt("doc tokens"))?;
            m.docs.push(ManifestDoc { doc, path, tokens });
        }
        Ok(m)
    }

    /// Re-reads and re-tokenizes every document, in doc-id order.
    /// `root_override` relocates the corpus (the `verify --corpus` flag).
    pub fn load_token_docs(&self, root_override: Option<&Path>) -> Result<Vec<Vec<String>>> {
        let root = root_override.unwrap_or(&self.corpus_root);
        match self.corpus_kind {
            CorpusKind::Dir => self
                .docs
                .iter()
                .map(|d| Ok(tokenize(&fs::read_to_string(root.join(&d.path))?)))
                .collect(),
            CorpusKind::Lines => {
                let text = fs::read_to_string(root)?;
                let lines: Vec<&str> = text.lines().collect();
                self.docs
                    .iter()
                    .map(|d| {
                        let n: usize = d
                            .path
                            .strip_prefix('#')
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| {
                                Error::IndexCorrupt("manifest: bad line-doc path".into())
                            })?;
                        lines.get(n).map(|l| tokenize(l)).ok_or_else(|| {
                            Error::IndexCorrupt("manifest: line out of range".into())
                        })
                    })
                    .collect()
            }
        }
    }
}

/// (relative path or #line, text) pairs plus skipped files.
type CorpusDocs = (CorpusKind, Vec<(String, String)>, Vec<(String, String)>);

/// Reads the corpus in deterministic order.
fn read_corpus(corpus: &Path) -> Result<CorpusDocs> {
    if corpus.is_dir() {
        let mut paths = Vec::new();
        collect_files(corpus, corpus, &mut paths)?;
        paths.sort();
        let mut docs = Vec::new();
        let mut skipped = Vec::new();
        for rel in paths {
            match fs::read_to_string(corpus.join(&rel)) {
                Ok(text) => docs.push((rel, text)),
                Err(e) => {
                    log::warn!("skipping unreadable document {rel}: {e}");
                    skipped.push((rel, e.to_string()));
                }
            }
        }
        Ok((CorpusKind::Dir, docs, skipped))
    } else {
        let text = fs::read_to_string(corpus)?;
        let docs = text
            .lines()
            .enumerate()
            .map(|(i, line)| (format!("#{i}"), line.to_string()))
            .collect();
        Ok((CorpusKind::Lines, docs, Vec::new()))
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("walk stays under the root")
                .to_string_lossy()
                .into_owned();
            out.push(rel);
        }
    }
    Ok(())
}

/// Build summary returned by [`ingest`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSummary {
    pub documents: u64,
    pub tokens: u64,
    pub stop_size: u32,
    pub frequent_size: u32,
    pub segment_count: u32,
}

/// Builds a complete index directory from a corpus.
///
/// The output directory must be empty or absent; a failed build removes
/// whatever it wrote.
pub fn ingest(corpus: &Path, out_dir: &Path, cfg: &IngestConfig) -> Result<IngestSummary> {
    cfg.validate()?;
    if out_dir.exists() && out_dir.read_dir()?.next().is_some() {
        return Err(Error::Config(format!(
            "output directory {} is not empty",
            out_dir.display()
        )));
    }
    fs::create_dir_all(out_dir)?;
    match ingest_inner(corpus, out_dir, cfg) {
        Ok(summary) => Ok(summary),
        Err(e) => {
            // leave no partial index behind
            let _ = fs::remove_dir_all(out_dir);
            Err(e)
        }
    }
}

fn ingest_inner(corpus: &Path, out_dir: &Path, cfg: &IngestConfig) -> Result<IngestSummary> {
    let lemma_table = match &cfg.lemma_table {
        Some(path) => LemmaTable::load(path)?,
        None => LemmaTable::empty(),
    };
    let (kind, raw_docs, skipped) = read_corpus(corpus)?;

    // pass one: tokenize and count
    let token_docs: Vec<Vec<String>> = raw_docs.iter().map(|(_, text)| tokenize(text)).collect();
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for tokens in &token_docs {
        for t in tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let distinct_hint = counts.len() as u32;
    let stop_size = cfg.stop_size.min(distinct_hint);
    let frequent_size = cfg
        .frequent_size
        .min(distinct_hint.saturating_sub(stop_size));
    if stop_size != cfg.stop_size || frequent_size != cfg.frequent_size {
        log::warn!(
            "corpus has only {distinct_hint} distinct tokens; clamping stop/frequent list \
             sizes to {stop_size}/{frequent_size}"
        );
    }
    let lexicon = build_lexicon(
        &lemma_table,
        counts.iter().map(|(s, n)| (*s, *n)),
        stop_size,
        frequent_size,
    )?;
    let words_count = lexicon.words_count() as usize;
    let huffman = HuffmanTable::from_weights(&lexicon.stop_weights());

    // pass two: route occurrences
    let mut basic_acc: Vec<Vec<(DocId, Position, NearStopAnnotation)>> =
        vec![Vec::new(); words_count];
    let mut baseline_acc: Vec<Vec<Posting>> = vec![Vec::new(); words_count];
    let mut expanded_acc: BTreeMap<(WordFormId, WordFormId), Vec<ExpandedPosting>> =
        BTreeMap::new();
    let mut stop_acc: BTreeMap<Vec<StopIndex>, Vec<Posting>> = BTreeMap::new();
    let mut stop_bearing_tokens = 0u64;
    let mut total_tokens = 0u64;
    let mut manifest_docs = Vec::with_capacity(raw_docs.len());

    for (doc_idx, ((rel, _), tokens)) in raw_docs.iter().zip(&token_docs).enumerate() {
        let doc = doc_idx as DocId;
        total_tokens += tokens.len() as u64;
        manifest_docs.push(ManifestDoc {
            doc,
            path: rel.clone(),
            tokens: tokens.len() as u32,
        });

        let forms_at: Vec<Vec<WordFormId>> = tokens
            .iter()
            .map(|t| lexicon.analyze(t))
            .collect::<Result<_>>()?;
        let stop_ranks_at: Vec<Vec<StopIndex>> = forms_at
            .iter()
            .map(|forms| {
                let mut ranks: Vec<StopIndex> =
                    forms.iter().filter_map(|&f| lexicon.stop_rank(f)).collect();
                ranks.sort_unstable();
                ranks
            })
            .collect();

        let mut queue = StopPhraseQueue::new(cfg.min_length, cfg.max_length, cfg.product_cap);
        let mut sink = |key: Vec<StopIndex>, posting: Posting| {
            stop_acc.entry(key).or_default().push(posting);
        };
        let mut pair_window: Vec<(Position, WordFormId)> = Vec::new();

        for (pos, forms) in forms_at.iter().enumerate() {
            let pos = pos as Position;
            let stop_forms: Vec<WordFormId> = forms
                .iter()
                .copied()
                .filter(|&f| lexicon.stop_rank(f).is_some())
                .collect();
            if stop_forms.is_empty() {
                queue.flush(&lexicon, &mut sink)?;
            } else {
                stop_bearing_tokens += 1;
                queue.push_stop_token(&lexicon, doc, pos, stop_forms, &mut sink)?;
            }
            for &f in forms {
                match lexicon.classify(f)? {
                    FrequencyClass::Stop => {}
                    _ => {
                        let ann = annotate(cfg, &lexicon, &stop_ranks_at, pos, f)?;
                        basic_acc[f.0 as usize].push((doc, pos, ann));
                        pair_window.push((pos, f));
                    }
                }
                if cfg.build_baseline {
                    baseline_acc[f.0 as usize].push(Posting::new(doc, pos));
                }
            }
        }
        queue.flush(&lexicon, &mut sink)?;
        crate::expanded::emit_pairs(cfg, &lexicon, doc, &pair_window, &mut |key, p| {
            expanded_acc.entry(key).or_default().push(p);
        })?;
    }

    // finalize: fixed write order keeps builds reproducible
    let mut writer = SegmentWriter::new(cfg.segment_cap);
    let mut keys = KeyStoreBuilder::new();

    let mut records = vec![WordStreams::default(); words_count];
    for (form, occs) in basic_acc.into_iter().enumerate() {
        if occs.is_empty() {
            continue;
        }
        let mut docs: Vec<DocOccurrences> = Vec::new();
        for (doc, pos, ann) in occs {
            match docs.last_mut() {
                Some(d) if d.doc == doc => {
                    d.positions.push(pos);
                    d.annotations.push(ann);
                }
                _ => docs.push(DocOccurrences {
                    doc,
                    positions: vec![pos],
                    annotations: vec![ann],
                }),
            }
        }
        records[form] =
            crate::basic::write_word_streams(&mut writer, &docs, cfg.rare_doc_threshold)?;
    }

    for ((w, v), mut postings) in expanded_acc {
        postings.sort_unstable();
        let bytes = encode_expanded(&postings)?;
        let d = writer.append(&bytes, postings.len() as u64);
        keys.put(&encode_pair_key(w, v), d)?;
    }

    for (ids, mut postings) in stop_acc {
        postings.sort_unstable();
        postings.dedup();
        let key = encode_phrase_key(&ids, &huffman, cfg.plain_keys)?;
        let d = append_stream(&mut writer, &postings)?;
        keys.put(&key, d)?;
    }

    if cfg.build_baseline {
        for (form, postings) in baseline_acc.into_iter().enumerate() {
            if postings.is_empty() {
                continue;
            }
            let d = append_stream(&mut writer, &postings)?;
            keys.put(&encode_baseline_key(WordFormId(form as u32)), d)?;
        }
    }

    writer.flush_to(out_dir)?;
    keys.write_to(&out_dir.join("keys.pxkv"))?;
    DescriptorTable::new(records).save(&out_dir.join("basic.pxbt"))?;
    lexicon.save(&out_dir.join("lexicon.pxlx"))?;
    let header = Header {
        config: IngestConfig {
            stop_size,
            frequent_size,
            lemma_table: None,
            ..cfg.clone()
        },
        segment_count: writer.segment_count(),
        huffman_lengths: huffman.lengths().to_vec(),
    };
    header.save(&out_dir.join("header.pxhd"))?;
    let manifest = Manifest {
        built_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        corpus_root: fs::canonicalize(corpus).unwrap_or_else(|_| corpus.to_path_buf()),
        corpus_kind: kind,
        docs: manifest_docs,
        total_tokens,
        stop_bearing_tokens,
        skipped,
    };
    manifest.save(&out_dir.join("manifest.tsv"))?;

    Ok(IngestSummary {
        documents: manifest.docs.len() as u64,
        tokens: total_tokens,
        stop_size,
        frequent_size,
        segment_count: writer.segment_count(),
    })
}

/// Stop words within the class's annotation window of one occurrence,
/// sorted by (offset, stop index).
fn annotate(
    cfg: &IngestConfig,
    lexicon: &Lexicon,
    stop_ranks_at: &[Vec<StopIndex>],
    pos: Position,
    form: WordFormId,
) -> Result<NearStopAnnotation> {
    let d = cfg.max_distance(lexicon.classify(form)?) as i64;
    let mut neighbors = Vec::new();
    for off in -d..=d {
        if off == 0 {
            continue;
        }
        let at = i64::from(pos) + off;
        if at < 0 || at >= stop_ranks_at.len() as i64 {
            continue;
        }
        for &rank in &stop_ranks_at[at as usize] {
            neighbors.push((off as i32, rank));
        }
    }
    Ok(NearStopAnnotation { neighbors })
}

/// One verification check outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub details: String,
}

/// Report from [`verify`]; failures carry a located counterexample.
#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn run(
        &mut self,
        name: &'static str,
        f: impl FnOnce() -> Result<std::result::Result<(), String>>,
    ) {
        let (pass, details) = match f() {
            Ok(Ok(())) => (true, String::new()),
            Ok(Err(counterexample)) => (false, counterexample),
            Err(e) => (false, format!("error: {e}")),
        };
        self.checks.push(CheckResult {
            name,
            pass,
            details,
        });
    }
}

/// Re-checks the full invariant suite of a built index against the raw
/// corpus. Failures become report entries, not errors.
pub fn verify(index: &Index, corpus_override: Option<&Path>) -> Result<VerifyReport> {
    let lexicon = index.lexicon();
    let cfg = index.config();
    let token_docs = index.manifest().load_token_docs(corpus_override)?;
    let forms_at: Vec<Vec<Vec<WordFormId>>> = token_docs
        .iter()
        .map(|doc| doc.iter().map(|t| lexicon.analyze(t)).collect())
        .collect::<Result<_>>()?;
    let stop_ranks_at: Vec<Vec<Vec<StopIndex>>> = forms_at
        .iter()
        .map(|doc| {
            doc.iter()
                .map(|forms| {
                    let mut ranks: Vec<StopIndex> =
                        forms.iter().filter_map(|&f| lexicon.stop_rank(f)).collect();
                    ranks.sort_unstable();
                    ranks
                })
                .collect()
        })
        .collect();

    let mut report = VerifyReport::default();

    report.run("manifest-totals", || {
        let want: u64 = token_docs.iter().map(|d| d.len() as u64).sum();
        if index.manifest().total_tokens != want {
            return Ok(Err(format!(
                "manifest says {} tokens, corpus has {want}",
                index.manifest().total_tokens
            )));
        }
        for (d, tokens) in index.manifest().docs.iter().zip(&token_docs) {
            if d.tokens as usize != tokens.len() {
                return Ok(Err(format!(
                    "doc {} length {} != manifest {}",
                    d.doc,
                    tokens.len(),
                    d.tokens
                )));
            }
        }
        Ok(Ok(()))
    });

    // ground-truth occurrence lists per form
    let mut scan_occ: BTreeMap<WordFormId, Vec<Posting>> = BTreeMap::new();
    let mut nonstop_occurrences = 0u64;
    let mut stop_bearing = 0u64;
    for (doc, doc_forms) in forms_at.iter().enumerate() {
        for (pos, forms) in doc_forms.iter().enumerate() {
            if forms.iter().any(|&f| lexicon.stop_rank(f).is_some()) {
                stop_bearing += 1;
            }
            for &f in forms {
                scan_occ
                    .entry(f)
                    .or_default()
                    .push(Posting::new(doc as DocId, pos as Position));
                if lexicon.stop_rank(f).is_none() {
                    nonstop_occurrences += 1;
                }
            }
        }
    }

    report.run("token-conservation", || {
        if index.manifest().stop_bearing_tokens != stop_bearing {
            return Ok(Err(format!(
                "manifest stop-bearing count {} != corpus {stop_bearing}",
                index.manifest().stop_bearing_tokens
            )));
        }
        let mut stats = crate::storage::ReadStats::new();
        let basic = index.basic_reader();
        let mut indexed = 0u64;
        for form in lexicon.form_ids() {
            if lexicon.classify(form)? == FrequencyClass::Stop {
                continue;
            }
            indexed += basic.all_occurrences(lexicon, form, &mut stats)?.len() as u64;
        }
        if indexed != nonstop_occurrences {
            return Ok(Err(format!(
                "basic index stores {indexed} occurrences, corpus has {nonstop_occurrences}"
            )));
        }
        Ok(Ok(()))
    });

    report.run("basic-streams", || {
        let basic = index.basic_reader();
        let mut stats = crate::storage::ReadStats::new();
        for form in lexicon.form_ids() {
            if lexicon.classify(form)? == FrequencyClass::Stop {
                continue;
            }
            let want = scan_occ.get(&form).cloned().unwrap_or_default();
            let got = basic.all_occurrences(lexicon, form, &mut stats)?;
            if got != want {
                return Ok(Err(format!("occurrence list of {form} diverges")));
            }
            let firsts = basic.first_occurrences(lexicon, form, &mut stats)?;
            let mut by_doc: BTreeMap<DocId, (Position, u32)> = BTreeMap::new();
            for p in &want {
                let e = by_doc.entry(p.doc).or_insert((p.pos, 0));
                e.1 += 1;
            }
            if firsts.len() != by_doc.len() {
                return Ok(Err(format!(
                    "{form}: stream 1 has {} records, corpus has {} docs",
                    firsts.len(),
                    by_doc.len()
                )));
            }
            for rec in &firsts {
                match by_doc.get(&rec.doc) {
                    Some(&(first, count)) if rec.first_pos == first && rec.count == count => {}
                    _ => {
                        return Ok(Err(format!(
                            "{form}: stream 1 record for doc {} diverges",
                            rec.doc
                        )))
                    }
                }
            }
        }
        Ok(Ok(()))
    });

    report.run("near-stop-annotations", || {
        let basic = index.basic_reader();
        let mut stats = crate::storage::ReadStats::new();
        for form in lexicon.form_ids() {
            if lexicon.classify(form)? == FrequencyClass::Stop {
                continue;
            }
            let got = basic.occurrences_with_stops(lexicon, form, &mut stats)?;
            for (posting, ann) in got {
                let want = annotate(
                    cfg,
                    lexicon,
                    &stop_ranks_at[posting.doc as usize],
                    posting.pos,
                    form,
                )?;
                if ann != want {
                    return Ok(Err(format!(
                        "{form}: annotation at doc {} pos {} diverges",
                        posting.doc, posting.pos
                    )));
                }
            }
        }
        Ok(Ok(()))
    });

    report.run("expanded-completeness", || {
        let mut want: BTreeMap<(WordFormId, WordFormId), Vec<ExpandedPosting>> = BTreeMap::new();
        for (doc, doc_forms) in forms_at.iter().enumerate() {
            let mut window: Vec<(Position, WordFormId)> = Vec::new();
            for (pos, forms) in doc_forms.iter().enumerate() {
                for &f in forms {
                    if lexicon.classify(f)? != FrequencyClass::Stop {
                        window.push((pos as Position, f));
                    }
                }
            }
            crate::expanded::emit_pairs(cfg, lexicon, doc as DocId, &window, &mut |k, p| {
                want.entry(k).or_default().push(p);
            })?;
        }
        for postings in want.values_mut() {
            postings.sort_unstable();
        }
        let mut got: BTreeMap<(WordFormId, WordFormId), Vec<ExpandedPosting>> = BTreeMap::new();
        for (w, v, postings) in index.expanded_reader().entries()? {
            got.insert((w, v), postings);
        }
        for (w, v) in got.keys() {
            if got.contains_key(&(*v, *w)) && w != v {
                return Ok(Err(format!("both orientations of ({w}, {v}) stored")));
            }
        }
        if got != want {
            let diff = want
                .keys()
                .find(|k| got.get(*k) != want.get(*k))
                .or_else(|| got.keys().find(|k| !want.contains_key(*k)));
            return Ok(Err(format!("expanded postings diverge at {diff:?}")));
        }
        Ok(Ok(()))
    });

    report.run("stop-phrase-soundness", || {
        for (ids, postings) in index.stop_phrase_reader().entries()? {
            let len = ids.len();
            if len < cfg.min_length as usize || len > cfg.max_length as usize {
                return Ok(Err(format!("key {ids:?} has out-of-range length")));
            }
            for p in postings {
                let doc = p.doc as usize;
                let start = p.pos as usize;
                let ranks_at = match stop_ranks_at.get(doc) {
                    Some(d) if start + len <= d.len() => &d[start..start + len],
                    _ => return Ok(Err(format!("posting {p:?} outside doc for {ids:?}"))),
                };
                if !multiset_assignable(&ids, ranks_at) {
                    return Ok(Err(format!(
                        "window at doc {} pos {} cannot produce key {ids:?}",
                        p.doc, p.pos
                    )));
                }
            }
        }
        Ok(Ok(()))
    });

    report.run("stop-phrase-completeness", || {
        // independent window enumeration over maximal stop runs
        let mut want: BTreeMap<Vec<StopIndex>, Vec<Posting>> = BTreeMap::new();
        for (doc, ranks) in stop_ranks_at.iter().enumerate() {
            let mut run_start = 0usize;
            let mut i = 0usize;
            while i <= ranks.len() {
                let in_run = i < ranks.len() && !ranks[i].is_empty();
                if !in_run {
                    let run = &ranks[run_start..i];
                    for len in cfg.min_length as usize..=cfg.max_length as usize {
                        for s in 0..run.len().saturating_sub(len - 1) {
                            enumerate_window_keys(&run[s..s + len], cfg.product_cap, &mut |key| {
                                want.entry(key)
                                    .or_default()
                                    .push(Posting::new(doc as DocId, (run_start + s) as Position));
                            });
                        }
                    }
                    run_start = i + 1;
                }
                i += 1;
            }
        }
        for postings in want.values_mut() {
            postings.sort_unstable();
            postings.dedup();
        }
        let got: BTreeMap<Vec<StopIndex>, Vec<Posting>> =
            index.stop_phrase_reader().entries()?.into_iter().collect();
        if got != want {
            let diff = want
                .keys()
                .find(|k| got.get(*k) != want.get(*k))
                .or_else(|| got.keys().find(|k| !want.contains_key(*k)));
            return Ok(Err(format!("stop-phrase postings diverge at key {diff:?}")));
        }
        Ok(Ok(()))
    });

    if index.config().build_baseline {
        report.run("baseline-lists", || {
            let reader = index.baseline_reader();
            let mut stats = crate::storage::ReadStats::new();
            for form in lexicon.form_ids() {
                let want = scan_occ.get(&form).cloned().unwrap_or_default();
                let got = reader.posting_list(form, &mut stats)?;
                if got != want {
                    return Ok(Err(format!("baseline list of {form} diverges")));
                }
            }
            Ok(Ok(()))
        });
    }

    Ok(report)
}

/// Can the per-token stop-rank lists cover the key multiset, one pick per
/// token? Window lengths are tiny, so backtracking is plenty.
fn multiset_assignable(key: &[StopIndex], ranks_at: &[Vec<StopIndex>]) -> bool {
    fn go(remaining: &mut Vec<StopIndex>, ranks_at: &[Vec<StopIndex>]) -> bool {
        let slot = match ranks_at.first() {
            None => return remaining.is_empty(),
            Some(s) => s,
        };
        for &r in slot {
            if let Some(i) = remaining.iter().position(|&x| x == r) {
                remaining.remove(i);
                if go(remaining, &ranks_at[1..]) {
                    remaining.insert(i, r);
                    return true;
                }
                remaining.insert(i, r);
            }
        }
        false
    }
    if ranks_at.iter().any(|s| s.is_empty()) || key.len() != ranks_at.len() {
        return false;
    }
    go(&mut key.to_vec(), ranks_at)
}

/// Cartesian product of per-token rank lists, capped and deduplicated the
/// same way the build-side queue does it.
fn enumerate_window_keys(
    window: &[Vec<StopIndex>],
    cap: u32,
    sink: &mut dyn FnMut(Vec<StopIndex>),
) {
    fn go(
        window: &[Vec<StopIndex>],
        depth: usize,
        chosen: &mut Vec<StopIndex>,
        seen: &mut std::collections::BTreeSet<Vec<StopIndex>>,
        budget: &mut u32,
        sink: &mut dyn FnMut(Vec<StopIndex>),
    ) {
        if *budget == 0 {
            return;
        }
        if depth == window.len() {
            *budget -= 1;
            let mut key = chosen.clone();
            key.sort_unstable();
            if seen.insert(key.clone()) {
                sink(key);
            }
            return;
        }
        for &r in &window[depth] {
            chosen.push(r);
            go(window, depth + 1, chosen, seen, budget, sink);
            chosen.pop();
            if *budget == 0 {
                return;
            }
        }
    }
    let mut chosen = Vec::with_capacity(window.len());
    let mut seen = std::collections::BTreeSet::new();
    let mut budget = cap;
    go(window, 0, &mut chosen, &mut seen, &mut budget, sink);
}
