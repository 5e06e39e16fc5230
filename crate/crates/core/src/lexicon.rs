//! Surface token → basic-form mapping plus the frequency classification
//! that drives index routing.
//!
//! Basic forms get dense ids. A surface may map to several forms
//! ("rose" → rise, rose); a token absent from the lemma table is its own
//! basic form. Forms are split into three disjoint classes by corpus
//! count: the top `stop_size` are Stop (and get a stop-list rank), the
//! next `frequent_size` are Frequent (and get a frequent-list rank),
//! everything else is Ordinary.

use std::collections::HashMap;
use std::fs;
use std::io::BufRead;
use std::path::Path;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::storage::{read_varint, write_varint};
use crate::{StopIndex, WordFormId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrequencyClass {
    Stop,
    Frequent,
    Ordinary,
}

impl FrequencyClass {
    fn to_byte(self) -> u8 {
        match self {
            FrequencyClass::Stop => 0,
            FrequencyClass::Frequent => 1,
            FrequencyClass::Ordinary => 2,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(FrequencyClass::Stop),
            1 => Ok(FrequencyClass::Frequent),
            2 => Ok(FrequencyClass::Ordinary),
            _ => Err(Error::IndexCorrupt(format!("bad class byte {b}"))),
        }
    }
}

/// Parsed lemma table: one line per surface,
/// `surface<TAB>lemma1,lemma2,...`.
#[derive(Debug, Default, Clone)]
pub struct LemmaTable {
    entries: Vec<(String, Vec<String>)>,
}

impl LemmaTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, lemmas) = line.split_once('\t').ok_or_else(|| Error::ParseError {
                line: i + 1,
                msg: "expected surface<TAB>lemma1,lemma2,...".into(),
            })?;
            let surface = surface.trim().to_lowercase();
            if surface.is_empty() {
                return Err(Error::ParseError {
                    line: i + 1,
                    msg: "empty surface".into(),
                });
            }
            let mut forms = Vec::new();
            for lemma in lemmas.split(',') {
                let lemma = lemma.trim().to_lowercase();
                if lemma.is_empty() {
                    return Err(Error::ParseError {
                        line: i + 1,
                        msg: "empty lemma".into(),
                    });
                }
                if !forms.contains(&lemma) {
                    forms.push(lemma);
                }
            }
            entries.push((surface, forms));
        }
        Ok(LemmaTable { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(std::io::BufReader::new(fs::File::open(path)?))
    }
}

struct FormInfo {
    surface: String,
    count: u64,
    class: FrequencyClass,
    stop_rank: Option<StopIndex>,
    freq_rank: Option<u32>,
}

#[derive(Default)]
struct SyntheticForms {
    by_surface: HashMap<String, u32>,
    surfaces: Vec<String>,
}

/// Immutable after build; tokens unseen at build time are interned on the
/// fly behind a lock and are always Ordinary with zero count.
pub struct Lexicon {
    forms: Vec<FormInfo>,
    surface_map: HashMap<String, Vec<WordFormId>>,
    canonical_map: HashMap<String, WordFormId>,
    stop_by_rank: Vec<WordFormId>,
    stop_size: u32,
    frequent_size: u32,
    synthetic: RwLock<SyntheticForms>,
}

impl Lexicon {
    /// Interned form count at build time (synthetic query-time forms are
    /// appended past this).
    pub fn words_count(&self) -> u32 {
        self.forms.len() as u32
    }

    pub fn stop_count(&self) -> u32 {
        self.stop_size
    }

    pub fn frequent_count(&self) -> u32 {
        self.frequent_size
    }

    /// All basic forms of a token, in lemma-table order; unknown tokens
    /// intern a synthetic form whose canonical surface is the token.
    pub fn analyze(&self, token: &str) -> Result<Vec<WordFormId>> {
        let folded = match crate::tokenize::fold_token(token) {
            Some(t) => t,
            None => return Err(Error::InvalidToken),
        };
        if let Some(ids) = self.surface_map.get(&folded) {
            return Ok(ids.clone());
        }
        if let Some(&id) = self.canonical_map.get(&folded) {
            return Ok(vec![id]);
        }
        // synthetic interning, stable across repeated calls
        {
            let syn = self.synthetic.read().unwrap();
            if let Some(&off) = syn.by_surface.get(&folded) {
                return Ok(vec![WordFormId(self.forms.len() as u32 + off)]);
            }
        }
        let mut syn = self.synthetic.write().unwrap();
        if let Some(&off) = syn.by_surface.get(&folded) {
            return Ok(vec![WordFormId(self.forms.len() as u32 + off)]);
        }
        let off = syn.surfaces.len() as u32;
        syn.surfaces.push(folded.clone());
        syn.by_surface.insert(folded, off);
        Ok(vec![WordFormId(self.forms.len() as u32 + off)])
    }

    pub fn classify(&self, form: WordFormId) -> Result<FrequencyClass> {
        if let Some(info) = self.forms.get(form.0 as usize) {
            return Ok(info.class);
        }
        let syn = self.synthetic.read().unwrap();
        if (form.0 as usize) < self.forms.len() + syn.surfaces.len() {
            Ok(FrequencyClass::Ordinary)
        } else {
            Err(Error::UnknownForm(form.0))
        }
    }

    /// Canonical surface string of a form.
    pub fn surface(&self, form: WordFormId) -> Result<String> {
        if let Some(info) = self.forms.get(form.0 as usize) {
            return Ok(info.surface.clone());
        }
        let syn = self.synthetic.read().unwrap();
        syn.surfaces
            .get(form.0 as usize - self.forms.len())
            .cloned()
            .ok_or(Error::UnknownForm(form.0))
    }

    pub fn freq_count(&self, form: WordFormId) -> u64 {
        self.forms.get(form.0 as usize).map_or(0, |f| f.count)
    }

    /// Stop-list rank; defined exactly for Stop-class forms.
    pub fn stop_rank(&self, form: WordFormId) -> Option<StopIndex> {
        self.forms.get(form.0 as usize).and_then(|f| f.stop_rank)
    }

    /// Frequent-list rank; defined exactly for Frequent-class forms.
    pub fn freq_rank(&self, form: WordFormId) -> Option<u32> {
        self.forms.get(form.0 as usize).and_then(|f| f.freq_rank)
    }

    /// Per-stop-rank corpus occurrence counts (Huffman weights).
    pub fn stop_weights(&self) -> Vec<u64> {
        self.stop_by_rank
            .iter()
            .map(|&f| self.freq_count(f))
            .collect()
    }

    pub fn form_ids(&self) -> impl Iterator<Item = WordFormId> + '_ {
        (0..self.forms.len() as u32).map(WordFormId)
    }
}

impl Lexicon {
    fn assemble(
        forms: Vec<FormInfo>,
        surface_map: HashMap<String, Vec<WordFormId>>,
        stop_size: u32,
        frequent_size: u32,
    ) -> Self {
        let canonical_map = forms
            .iter()
            .enumerate()
            .map(|(i, f)| (f.surface.clone(), WordFormId(i as u32)))
            .collect();
        let mut stop_by_rank = vec![WordFormId(0); stop_size as usize];
        for (i, f) in forms.iter().enumerate() {
            if let Some(r) = f.stop_rank {
                stop_by_rank[r as usize] = WordFormId(i as u32);
            }
        }
        Lexicon {
            forms,
            surface_map,
            canonical_map,
            stop_size,
            frequent_size,
            stop_by_rank,
            synthetic: RwLock::new(SyntheticForms::default()),
        }
    }
}

/// Builds a lexicon from a lemma table and per-token corpus counts.
///
/// Forms are ranked by (count descending, surface ascending); the top
/// `stop_size` with nonzero counts become Stop, the next `frequent_size`
/// Frequent, the rest Ordinary. The surface tiebreak keeps builds
/// reproducible under permuted input order.
pub fn build_lexicon<'a>(
    lemma_table: &LemmaTable,
    token_counts: impl IntoIterator<Item = (&'a str, u64)>,
    stop_size: u32,
    frequent_size: u32,
) -> Result<Lexicon> {
    let mut interner = Interner::default();
    for (surface, lemmas) in &lemma_table.entries {
        let ids: Vec<WordFormId> = lemmas.iter().map(|l| interner.intern(l)).collect();
        interner.surface_map.insert(surface.clone(), ids);
    }
    let mut counts: Vec<u64> = vec![0; interner.surfaces.len()];
    for (token, n) in token_counts {
        let token = token.to_lowercase();
        let ids = match interner.surface_map.get(&token) {
            Some(ids) => ids.clone(),
            None => vec![interner.intern(&token)],
        };
        counts.resize(interner.surfaces.len(), 0);
        for id in ids {
            counts[id.0 as usize] += n;
        }
    }
    counts.resize(interner.surfaces.len(), 0);

    let with_counts = counts.iter().filter(|&&c| c > 0).count() as u32;
    if stop_size + frequent_size > with_counts {
        return Err(Error::Config(format!(
            "stop_size + frequent_size = {} exceeds the {} distinct forms with counts",
            stop_size + frequent_size,
            with_counts
        )));
    }

    let mut ranked: Vec<u32> = (0..interner.surfaces.len() as u32)
        .filter(|&i| counts[i as usize] > 0)
        .collect();
    ranked.sort_by(|&a, &b| {
        counts[b as usize]
            .cmp(&counts[a as usize])
            .then_with(|| interner.surfaces[a as usize].cmp(&interner.surfaces[b as usize]))
    });

    let mut forms: Vec<FormInfo> = interner
        .surfaces
        .into_iter()
        .enumerate()
        .map(|(i, surface)| FormInfo {
            surface,
            count: counts[i],
            class: FrequencyClass::Ordinary,
            stop_rank: None,
            freq_rank: None,
        })
        .collect();
    for (rank, &id) in ranked.iter().enumerate() {
        let rank = rank as u32;
        let info = &mut forms[id as usize];
        if rank < stop_size {
            info.class = FrequencyClass::Stop;
            info.stop_rank = Some(rank);
        } else if rank < stop_size + frequent_size {
            info.class = FrequencyClass::Frequent;
            info.freq_rank = Some(rank - stop_size);
        }
    }

    Ok(Lexicon::assemble(
        forms,
        interner.surface_map,
        stop_size,
        frequent_size,
    ))
}

#[derive(Default)]
struct Interner {
    by_surface: HashMap<String, WordFormId>,
    surfaces: Vec<String>,
    surface_map: HashMap<String, Vec<WordFormId>>,
}

impl Interner {
    fn intern(&mut self, surface: &str) -> WordFormId {
        if let Some(&id) = self.by_surface.get(surface) {
            return id;
        }
        let id = WordFormId(self.surfaces.len() as u32);
        self.surfaces.push(surface.to_string());
        self.by_surface.insert(surface.to_string(), id);
        id
    }
}

const MAGIC: &[u8; 4] = b"PXLX";
const VERSION: u8 = 1;

impl Lexicon {
    /// Persists the build-time tables (synthetic forms are not saved).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&(self.forms.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.stop_size.to_le_bytes());
        out.extend_from_slice(&self.frequent_size.to_le_bytes());
        for f in &self.forms {
            write_varint(&mut out, f.surface.len() as u64);
            out.extend_from_slice(f.surface.as_bytes());
            write_varint(&mut out, f.count);
            out.push(f.class.to_byte());
            match f.class {
                FrequencyClass::Stop => write_varint(&mut out, u64::from(f.stop_rank.unwrap())),
                FrequencyClass::Frequent => write_varint(&mut out, u64::from(f.freq_rank.unwrap())),
                FrequencyClass::Ordinary => {}
            }
        }
        let mut surfaces: Vec<(&String, &Vec<WordFormId>)> = self.surface_map.iter().collect();
        surfaces.sort_by(|a, b| a.0.cmp(b.0));
        out.extend_from_slice(&(surfaces.len() as u32).to_le_bytes());
        for (s, ids) in surfaces {
            write_varint(&mut out, s.len() as u64);
            out.extend_from_slice(s.as_bytes());
            write_varint(&mut out, ids.len() as u64);
            for id in ids {
                write_varint(&mut out, u64::from(id.0));
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 17 || &bytes[0..4] != MAGIC {
            return Err(Error::IndexCorrupt("bad lexicon magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::IndexCorrupt(format!(
                "unsupported lexicon version {}",
                bytes[4]
            )));
        }
        let n_forms = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let stop_size = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
        let frequent_size = u32::from_le_bytes(bytes[13..17].try_into().unwrap());
        let mut at = 17usize;
        let corrupt = || Error::IndexCorrupt("lexicon file truncated".into());
        let mut forms = Vec::with_capacity(n_forms);
        for _ in 0..n_forms {
            let slen = read_varint(&bytes, &mut at).ok_or_else(corrupt)? as usize;
            let surface = std::str::from_utf8(bytes.get(at..at + slen).ok_or_else(corrupt)?)
                .map_err(|_| corrupt())?
                .to_string();
            at += slen;
            let count = read_varint(&bytes, &mut at).ok_or_else(corrupt)?;
            let class = FrequencyClass::from_byte(*bytes.get(at).ok_or_else(corrupt)?)?;
            at += 1;
            let (stop_rank, freq_rank) = match class {
                FrequencyClass::Stop => (
                    Some(read_varint(&bytes, &mut at).ok_or_else(corrupt)? as u32),
                    None,
                ),
                FrequencyClass::Frequent => (
                    None,
                    Some(read_varint(&bytes, &mut at).ok_or_else(corrupt)? as u32),
                ),
                FrequencyClass::Ordinary => (None, None),
            };
            forms.push(FormInfo {
                surface,
                count,
                class,
                stop_rank,
                freq_rank,
            });
        }
        let n_surfaces = u32::from_le_bytes(
            bytes
                .get(at..at + 4)
                .ok_or_else(corrupt)?
                .try_into()
                .unwrap(),
        ) as usize;
        at += 4;
        let mut surface_map = HashMap::with_capacity(n_surfaces);
        for _ in 0..n_surfaces {
            let slen = read_varint(&bytes, &mut at).ok_or_else(corrupt)? as usize;
            let surface = std::str::from_utf8(bytes.get(at..at + slen).ok_or_else(corrupt)?)
                .map_err(|_| corrupt())?
                .to_string();
            at += slen;
            let n = read_varint(&bytes, &mut at).ok_or_else(corrupt)? as usize;
            let mut ids = Vec::with_capacity(n);
            for _ in 0..n {
                let id = read_varint(&bytes, &mut at).ok_or_else(corrupt)? as u32;
                if id as usize >= n_forms {
                    return Err(Error::IndexCorrupt("surface maps to unknown form".into()));
                }
                ids.push(WordFormId(id));
            }
            surface_map.insert(surface, ids);
        }
        Ok(Lexicon::assemble(
            forms,
            surface_map,
            stop_size,
            frequent_size,
        ))
    }
}
