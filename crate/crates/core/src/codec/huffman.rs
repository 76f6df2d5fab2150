//! Canonical Huffman codes.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Optimal prefix code lengths for `weights`. A single symbol gets length 0.
/// Ties are broken by node creation order, so the result is deterministic.
pub fn code_lengths(weights: &[u64]) -> Result<Vec<u32>> {
    let k = weights.len();
    if k == 0 {
        return Err(Error::param("weights", "need at least one symbol"));
    }
    if k == 1 {
        return Ok(vec![0]);
    }
    // nodes 0..k are leaves; internal nodes record their parent
    let mut parent = vec![usize::MAX; 2 * k - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        weights.iter().enumerate().map(|(i, &w)| Reverse((w, i))).collect();
    let mut next = k;
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().unwrap();
        let Reverse((wb, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((wa + wb, next)));
        next += 1;
    }
    let root = next - 1;
    let mut depth = vec![0u32; 2 * k - 1];
    for node in (0..root).rev() {
        depth[node] = depth[parent[node]] + 1;
    }
    Ok(depth[..k].to_vec())
}

/// Canonical codewords, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    lengths: Vec<u32>,
    codes: Vec<u64>,
}

impl Codebook {
    pub fn from_lengths(lengths: Vec<u32>) -> Result<Self> {
        if lengths.iter().any(|&l| l > 64) {
            return Err(Error::Unsupported("codeword longer than 64 bits".into()));
        }
        let mut order: Vec<usize> = (0..lengths.len()).collect();
        order.sort_by_key(|&i| (lengths[i], i));
        let mut codes = vec![0u64; lengths.len()];
        let mut code = 0u64;
        let mut prev = 0u32;
        for (j, &i) in order.iter().enumerate() {
            let l = lengths[i];
            if j > 0 {
                code = (code + 1) << (l - prev);
            } else {
                code = 0;
            }
            codes[i] = code;
            prev = l;
        }
        Ok(Self { lengths, codes })
    }

    pub fn from_weights(weights: &[u64]) -> Result<Self> {
        Self::from_lengths(code_lengths(weights)?)
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn length(&self, symbol: usize) -> u32 {
        self.lengths[symbol]
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    /// Append the codeword of `symbol` to `out`.
    pub fn encode(&self, symbol: usize, out: &mut Vec<bool>) {
        let l = self.lengths[symbol];
        for b in (0..l).rev() {
            out.push(self.codes[symbol] >> b & 1 == 1);
        }
    }

    /// Decode a whole bit string.
    pub fn decode(&self, bits: &[bool]) -> Result<Vec<usize>> {
        if self.lengths.len() == 1 {
            return Err(Error::Unsupported("a one-symbol code carries no bits".into()));
        }
        let mut out = Vec::new();
        let mut code = 0u64;
        let mut len = 0u32;
        for &b in bits {
            code = code << 1 | b as u64;
            len += 1;
            if let Some(s) = (0..self.lengths.len()).find(|&s| self.lengths[s] == len && self.codes[s] == code) {
                out.push(s);
                code = 0;
                len = 0;
            }
        }
        if len != 0 {
            return Err(Error::param("bits", "trailing partial codeword"));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dyadic_weights_give_exact_lengths() {
        assert_eq!(code_lengths(&[8, 4, 2, 1, 1]).unwrap(), vec![1, 2, 3, 4, 4]);
        assert_eq!(code_lengths(&[5; 8]).unwrap(), vec![3; 8]);
        assert_eq!(code_lengths(&[7]).unwrap(), vec![0]);
    }

    #[test]
    fn round_trip() {
        let book = Codebook::from_weights(&[10, 3, 3, 1, 20]).unwrap();
        let msg = [0usize, 4, 4, 1, 3, 2, 0];
        let mut bits = Vec::new();
        for &s in &msg {
            book.encode(s, &mut bits);
        }
        assert_eq!(book.decode(&bits).unwrap(), msg);
    }

    proptest! {
        #[test]
        fn kraft_equality_and_optimal_bracket(w in proptest::collection::vec(1u64..1000, 2..40)) {
            let l = code_lengths(&w).unwrap();
            let kraft: f64 = l.iter().map(|&x| 2f64.powi(-(x as i32))).sum();
            prop_assert!((kraft - 1.0).abs() < 1e-12);
            let total: u64 = w.iter().sum();
            let h: f64 = w.iter().map(|&x| { let p = x as f64 / total as f64; -p * p.log2() }).sum();
            let avg: f64 = w.iter().zip(&l).map(|(&x, &li)| x as f64 * li as f64).sum::<f64>() / total as f64;
            prop_assert!(avg >= h - 1e-12 && avg < h + 1.0);
        }

        #[test]
        fn codes_are_prefix_free(w in proptest::collection::vec(1u64..50, 2..20)) {
            let b = Codebook::from_weights(&w).unwrap();
            for i in 0..w.len() {
                for j in 0..w.len() {
                    if i != j && b.lengths[i] <= b.lengths[j] {
                        let shift = b.lengths[j] - b.lengths[i];
                        prop_assert!(b.codes[j] >> shift != b.codes[i]);
                    }
                }
            }
        }
    }
}
