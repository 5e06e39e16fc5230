//! Canonical Huffman coding for stop-phrase keys.
//!
//! The alphabet is the stop-list indices `0..S` plus an end marker `S`.
//! Codes are canonical: lengths come from the Huffman tree, then codes are
//! assigned in (length, symbol) order, so the table round-trips through
//! the per-symbol length list persisted in the index header.

use crate::error::{Error, Result};
use crate::StopIndex;

const MAX_CODE_LEN: u8 = 58;

/// Canonical prefix code over `0..=stop_count` (the last symbol is the
/// end marker).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTable {
    lengths: Vec<u8>,
    codes: Vec<u64>,
    // decode side, derived from lengths
    first_code: Vec<u64>,  // per length 1..=max
    first_index: Vec<u32>, // index into symbols_by_code per length
    symbols_by_code: Vec<u32>,
}

impl HuffmanTable {
    /// Builds the table from per-stop-index occurrence weights. The end
    /// marker is paid once per encoded key, roughly once per handful of
    /// symbols, and is weighted accordingly.
    pub fn from_weights(weights: &[u64]) -> Self {
        let total: u64 = weights.iter().sum();
        let mut w: Vec<u64> = weights.iter().map(|&x| x.max(1)).collect();
        w.push((total / 4).max(1));
        loop {
            let lengths = code_lengths(&w);
            if lengths.iter().all(|&l| l <= MAX_CODE_LEN) {
                return Self::from_lengths(lengths);
            }
            // Flatten pathological weight skews until the depth fits the
            // 64-bit decode accumulator.
            for x in w.iter_mut() {
                *x = (*x >> 1).max(1);
            }
        }
    }

    /// Rebuilds the table from persisted code lengths.
    pub fn from_lengths(lengths: Vec<u8>) -> Self {
        assert!(!lengths.is_empty());
        let max_len = *lengths.iter().max().unwrap() as usize;
        let mut by_len: Vec<Vec<u32>> = vec![Vec::new(); max_len + 1];
        for (sym, &l) in lengths.iter().enumerate() {
            by_len[l as usize].push(sym as u32);
        }
        let mut codes = vec![0u64; lengths.len()];
        let mut first_code = vec![0u64; max_len + 1];
        let mut first_index = vec![0u32; max_len + 1];
        let mut symbols_by_code = Vec::with_capacity(lengths.len());
        let mut code = 0u64;
        for len in 1..=max_len {
            code <<= 1;
            first_code[len] = code;
            first_index[len] = symbols_by_code.len() as u32;
            for &sym in &by_len[len] {
                codes[sym as usize] = code;
                symbols_by_code.push(sym);
                code += 1;
            }
        }
        HuffmanTable {
            lengths,
            codes,
            first_code,
            first_index,
            symbols_by_code,
        }
    }

    /// Number of symbols excluding the end marker.
    pub fn stop_count(&self) -> u32 {
        (self.lengths.len() - 1) as u32
    }

    fn end_marker(&self) -> u32 {
        self.stop_count()
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    pub fn code_len(&self, symbol: u32) -> Option<u8> {
        self.lengths.get(symbol as usize).copied()
    }

    /// Encodes a symbol sequence, appends the end marker, and pads with
    /// zero bits to a byte boundary.
    pub fn encode(&self, symbols: &[StopIndex]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let mut acc = 0u64;
        let mut bits = 0u8;
        let mut push = |sym: u32, out: &mut Vec<u8>| -> Result<()> {
            let len = *self
                .lengths
                .get(sym as usize)
                .ok_or(Error::UnknownSymbol(sym))?;
            let code = self.codes[sym as usize];
            for i in (0..len).rev() {
                acc = (acc << 1) | ((code >> i) & 1);
                bits += 1;
                if bits == 8 {
                    out.push(acc as u8);
                    acc = 0;
                    bits = 0;
                }
            }
            Ok(())
        };
        for &sym in symbols {
            if sym >= self.end_marker() {
                return Err(Error::UnknownSymbol(sym));
            }
            push(sym, &mut out)?;
        }
        push(self.end_marker(), &mut out)?;
        if bits > 0 {
            out.push((acc << (8 - bits)) as u8);
        }
        Ok(out)
    }

    /// Decodes up to the end marker. Fails on codes that fall outside the
    /// canonical ranges or when the marker never appears.
    pub fn decode(&self, bytes: &[u8]) -> Result<Vec<StopIndex>> {
        let mut out = Vec::new();
        let mut code = 0u64;
        let mut len = 0usize;
        let max_len = self.first_code.len() - 1;
        for (byte_i, &byte) in bytes.iter().enumerate() {
            for bit_i in (0..8).rev() {
                code = (code << 1) | u64::from((byte >> bit_i) & 1);
                len += 1;
                if len > max_len {
                    return Err(Error::IndexCorrupt(format!(
                        "huffman code longer than {max_len} bits at byte {byte_i}"
                    )));
                }
                let candidates = self.count_at(len);
                if candidates > 0 && code >= self.first_code[len] {
                    let rank = code - self.first_code[len];
                    if rank < u64::from(candidates) {
                        let sym =
                            self.symbols_by_code[self.first_index[len] as usize + rank as usize];
                        if sym == self.end_marker() {
                            return Ok(out);
                        }
                        out.push(sym);
                        code = 0;
                        len = 0;
                    }
                }
            }
        }
        Err(Error::IndexCorrupt(
            "huffman stream ended before the end marker".into(),
        ))
    }

    fn count_at(&self, len: usize) -> u32 {
        let next = if len + 1 < self.first_index.len() {
            self.first_index[len + 1]
        } else {
            self.symbols_by_code.len() as u32
        };
        next - self.first_index[len]
    }
}

/// Heap-based Huffman code length assignment.
fn code_lengths(weights: &[u64]) -> Vec<u8> {
    let n = weights.len();
    if n == 1 {
        return vec![1];
    }
    // Nodes: 0..n leaves, then internal. parent[] links children upward.
    let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<(u64, u32)>> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| std::cmp::Reverse((w, i as u32)))
        .collect();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    let mut node_weight: Vec<u64> = weights.to_vec();
    while heap.len() > 1 {
        let std::cmp::Reverse((wa, a)) = heap.pop().unwrap();
        let std::cmp::Reverse((wb, b)) = heap.pop().unwrap();
        let id = node_weight.len() as u32;
        node_weight.push(wa + wb);
        parent.push(id);
        parent[a as usize] = id;
        parent[b as usize] = id;
        heap.push(std::cmp::Reverse((wa + wb, id)));
    }
    let mut lengths = vec![0u8; n];
    for (i, len) in lengths.iter_mut().enumerate() {
        let mut depth = 0u8;
        let mut node = i as u32;
        while parent[node as usize] != node {
            node = parent[node as usize];
            depth = depth.saturating_add(1);
        }
        *len = depth.max(1);
    }
    lengths
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_sequence_is_just_the_end_marker() {
        let t = HuffmanTable::from_weights(&[10, 1]);
        let bytes = t.encode(&[]).unwrap();
        assert!(!bytes.is_empty());
        assert_eq!(t.decode(&bytes).unwrap(), Vec::<u32>::new());
    }

    #[test]
    fn heavier_symbol_gets_no_longer_code() {
        let t = HuffmanTable::from_weights(&[10, 1]);
        assert!(t.code_len(0).unwrap() <= t.code_len(1).unwrap());
        let bytes = t.encode(&[0, 0, 1]).unwrap();
        assert_eq!(t.decode(&bytes).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn out_of_alphabet_symbol_is_rejected() {
        let t = HuffmanTable::from_weights(&[3, 2]);
        assert!(matches!(t.encode(&[7]), Err(Error::UnknownSymbol(7))));
        // the end marker itself is not encodable as data
        assert!(matches!(t.encode(&[2]), Err(Error::UnknownSymbol(2))));
    }

    #[test]
    fn table_round_trips_through_lengths() {
        let t = HuffmanTable::from_weights(&[100, 20, 20, 5, 1, 1, 1]);
        let t2 = HuffmanTable::from_lengths(t.lengths().to_vec());
        let data = vec![0, 3, 6, 0, 2, 2, 1];
        assert_eq!(t2.decode(&t.encode(&data).unwrap()).unwrap(), data);
    }

    #[test]
    fn fibonacci_weights_stay_within_depth_cap() {
        let mut w = vec![1u64, 1];
        for i in 2..90 {
            let next: u64 = w[i - 1].saturating_add(w[i - 2]);
            w.push(next);
        }
        let t = HuffmanTable::from_weights(&w);
        assert!(t.lengths().iter().all(|&l| l <= MAX_CODE_LEN));
        let data: Vec<u32> = (0..90).collect();
        assert_eq!(t.decode(&t.encode(&data).unwrap()).unwrap(), data);
    }

    proptest! {
        #[test]
        fn prop_round_trip_over_700_symbol_alphabet(
            seq in prop::collection::vec(0u32..700, 0..1000),
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let weights: Vec<u64> = (0..700).map(|_| rng.gen_range(1..10_000)).collect();
            let t = HuffmanTable::from_weights(&weights);
            let bytes = t.encode(&seq).unwrap();
            prop_assert_eq!(t.decode(&bytes).unwrap(), seq);
        }
    }
}
