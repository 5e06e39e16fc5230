//! Build configuration, its flat `key=value` file format, and the derived
//! per-class distance tables.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lexicon::FrequencyClass;

/// Everything the indexer needs to know, persisted in the index header so
/// searches and verification see the exact build parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestConfig {
    /// Shortest indexed stop phrase.
    pub min_length: u32,
    /// Longest indexed stop phrase.
    pub max_length: u32,
    /// Near-stop annotation window for Frequent words.
    pub max_distance_frequent: u32,
    /// Near-stop annotation window for Ordinary words.
    pub max_distance_ordinary: u32,
    /// Expanded-pair admission window for top-tier Frequent words
    /// (first third of the frequent list).
    pub processing_distance_top: u32,
    /// Admission window for the rest of the frequent list.
    pub processing_distance_rest: u32,
    /// Words in fewer documents than this store one combined stream.
    pub rare_doc_threshold: u32,
    /// Proximity window for Ordinary–Ordinary query joins, which have no
    /// expanded index on either side.
    pub default_join_distance: u32,
    /// Cap on multi-form combinations per phrase window.
    pub product_cap: u32,
    /// Encode stop-phrase keys as plain varints instead of Huffman.
    pub plain_keys: bool,
    /// Build the baseline single-stream index alongside.
    pub build_baseline: bool,
    /// Segment file size cap in bytes.
    pub segment_cap: u64,
    /// Stop-list size (top-K by corpus count).
    pub stop_size: u32,
    /// Frequent-list size (next K by corpus count).
    pub frequent_size: u32,
    /// Optional lemma table path (not persisted in the header).
    pub lemma_table: Option<PathBuf>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            min_length: 2,
            max_length: 5,
            max_distance_frequent: 5,
            max_distance_ordinary: 7,
            processing_distance_top: 7,
            processing_distance_rest: 5,
            rare_doc_threshold: 16,
            default_join_distance: 5,
            product_cap: 64,
            plain_keys: false,
            build_baseline: true,
            segment_cap: 1 << 30,
            stop_size: 700,
            frequent_size: 2100,
            lemma_table: None,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_length < 2 || self.min_length > self.max_length {
            return Err(Error::Config(format!(
                "need 2 <= min_length <= max_length, got {}..{}",
                self.min_length, self.max_length
            )));
        }
        for (name, v) in [
            ("max_distance_frequent", self.max_distance_frequent),
            ("max_distance_ordinary", self.max_distance_ordinary),
            ("processing_distance_top", self.processing_distance_top),
            ("processing_distance_rest", self.processing_distance_rest),
            ("default_join_distance", self.default_join_distance),
        ] {
            if v < 2 {
                return Err(Error::Config(format!("{name} must be at least 2, got {v}")));
            }
        }
        if self.product_cap == 0 {
            return Err(Error::Config("product_cap must be positive".into()));
        }
        Ok(())
    }

    /// Annotation window by the anchor word's class.
    pub fn max_distance(&self, class: FrequencyClass) -> u32 {
        match class {
            FrequencyClass::Frequent => self.max_distance_frequent,
            _ => self.max_distance_ordinary,
        }
    }

    /// Expanded-pair admission window for a Frequent word with the given
    /// frequent-list rank; the top third of the list gets the wider tier.
    pub fn processing_distance_for_rank(&self, freq_rank: u32, frequent_count: u32) -> u32 {
        if freq_rank * 3 < frequent_count {
            self.processing_distance_top
        } else {
            self.processing_distance_rest
        }
    }

    /// Parses the flat `key=value` config format. Unknown keys are
    /// rejected so typos do not silently fall back to defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = IngestConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {raw:?}", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad =
                |what: &str| Error::Config(format!("line {}: bad {what} value {value:?}", i + 1));
            match key {
                "min_length" => cfg.min_length = value.parse().map_err(|_| bad(key))?,
                "max_length" => cfg.max_length = value.parse().map_err(|_| bad(key))?,
                "max_distance_frequent" => {
                    cfg.max_distance_frequent = value.parse().map_err(|_| bad(key))?
                }
                "max_distance_ordinary" => {
                    cfg.max_distance_ordinary = value.parse().map_err(|_| bad(key))?
                }
                "processing_distance_top" => {
                    cfg.processing_distance_top = value.parse().map_err(|_| bad(key))?
                }
                "processing_distance_rest" => {
                    cfg.processing_distance_rest = value.parse().map_err(|_| bad(key))?
                }
                "rare_doc_threshold" => {
                    cfg.rare_doc_threshold = value.parse().map_err(|_| bad(key))?
                }
                "default_join_distance" => {
                    cfg.default_join_distance = value.parse().map_err(|_| bad(key))?
                }
                "product_cap" => cfg.product_cap = value.parse().map_err(|_| bad(key))?,
                "plain_keys" => cfg.plain_keys = parse_bool(value).ok_or_else(|| bad(key))?,
                "build_baseline" => {
                    cfg.build_baseline = parse_bool(value).ok_or_else(|| bad(key))?
                }
                "segment_cap" => cfg.segment_cap = value.parse().map_err(|_| bad(key))?,
                "stop_size" => cfg.stop_size = value.parse().map_err(|_| bad(key))?,
                "frequent_size" => cfg.frequent_size = value.parse().map_err(|_| bad(key))?,
                "lemma_table" => cfg.lemma_table = Some(PathBuf::from(value)),
                _ => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key {key:?}",
                        i + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        IngestConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_rejects_unknown_keys() {
        let cfg = IngestConfig::parse("min_length=3\nmax_length=4\nplain_keys=true\n").unwrap();
        assert_eq!(cfg.min_length, 3);
        assert_eq!(cfg.max_length, 4);
        assert!(cfg.plain_keys);
        assert!(IngestConfig::parse("no_such_key=1\n").is_err());
        assert!(IngestConfig::parse("min_length=1\n").is_err());
    }

    #[test]
    fn tier_split_is_the_top_third() {
        let cfg = IngestConfig::default();
        // six frequent forms: ranks 0,1 in the top third
        assert_eq!(cfg.processing_distance_for_rank(0, 6), 7);
        assert_eq!(cfg.processing_distance_for_rank(1, 6), 7);
        assert_eq!(cfg.processing_distance_for_rank(2, 6), 5);
        assert_eq!(cfg.processing_distance_for_rank(5, 6), 5);
    }
}
