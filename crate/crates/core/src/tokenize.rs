//! Unicode-aware tokenization shared by indexing and query parsing.
//!
//! A token is a maximal run of alphanumeric characters, case-folded to
//! lowercase. Positions are 0-based token ordinals within one document and
//! count every token, so offsets stay consistent across all index
//! structures.

/// Splits `text` into lowercase tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                cur.push(lc);
            }
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Case-folds a single query word. Returns `None` when nothing
/// alphanumeric survives.
pub fn fold_token(word: &str) -> Option<String> {
    let toks = tokenize(word);
    if toks.len() == 1 {
        toks.into_iter().next()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_folds_case() {
        assert_eq!(
            tokenize("Gaul, taken as a whole, is divided into three parts..."),
            ["gaul", "taken", "as", "a", "whole", "is", "divided", "into", "three", "parts"]
        );
    }

    #[test]
    fn keeps_digits_and_unicode_letters() {
        assert_eq!(tokenize("B-tree über 42"), ["b", "tree", "über", "42"]);
    }

    #[test]
    fn empty_input_yields_no_tokens() {
        assert!(tokenize("  ,;! ").is_empty());
    }
}
