//! Greedy Varshamov–Gilbert codes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{out_of_range, Error, Result};

/// Default number of candidate words drawn before giving up.
pub const DEFAULT_CANDIDATE_BUDGET: usize = 2_000_000;

/// Hamming distance between two equal-length 0/1 words.
pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// A binary code of length `k` with pairwise distance at least `k/4`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BinaryCode {
    pub k: usize,
    pub words: Vec<Vec<u8>>,
}

/// `⌈exp(k/8)⌉`.
pub fn vg_target(k: usize) -> f64 {
    (k as f64 / 8.0).exp().ceil()
}

fn packed_distance(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as usize).sum()
}

impl BinaryCode {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Smallest pairwise Hamming distance (`k` for a single word).
    pub fn min_distance(&self) -> usize {
        let mut best = self.k;
        for i in 0..self.words.len() {
            for j in i + 1..self.words.len() {
                best = best.min(hamming(&self.words[i], &self.words[j]));
            }
        }
        best
    }

    /// Exhaustively checks the size target and the `k/4` distance floor.
    pub fn verify(&self) -> Result<()> {
        let target = vg_target(self.k);
        if (self.words.len() as f64) < target {
            return Err(Error::CodeBudgetExhausted {
                budget: 0,
                found: self.words.len(),
                target: target as usize,
            });
        }
        if self.words.iter().any(|w| w.len() != self.k || w.iter().any(|&b| b > 1)) {
            return Err(Error::Unsupported("code words must be 0/1 of length k".into()));
        }
        let d = self.min_distance();
        if 4 * d < self.k {
            return Err(out_of_range("min distance", d as f64, format!(">= {}/4", self.k)));
        }
        Ok(())
    }
}

/// Greedy code: words are drawn in seeded random order and kept when they are
/// at distance `≥ k/4` from every kept word, until `⌈exp(k/8)⌉` are kept.
pub fn vg_code(k: usize, seed: u64) -> Result<BinaryCode> {
    vg_code_with_budget(k, seed, DEFAULT_CANDIDATE_BUDGET)
}

/// [`vg_code`] with an explicit cap on the number of candidates drawn.
pub fn vg_code_with_budget(k: usize, seed: u64, budget: usize) -> Result<BinaryCode> {
    if k < 8 {
        return Err(out_of_range("k", k as f64, "k >= 8"));
    }
    let target = vg_target(k);
    if target > 1e7 {
        return Err(out_of_range("k", k as f64, "exp(k/8) <= 1e7"));
    }
    let target = target as usize;
    let chunks = k.div_ceil(64);
    let tail_mask = if k.is_multiple_of(64) {
        u64::MAX
    } else {
        (1u64 << (k % 64)) - 1
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<Vec<u64>> = Vec::with_capacity(target);
    for _ in 0..budget {
        let mut w: Vec<u64> = (0..chunks).map(|_| rng.random()).collect();
        w[chunks - 1] &= tail_mask;
        if kept.iter().all(|v| 4 * packed_distance(v, &w) >= k) {
            kept.push(w);
            if kept.len() == target {
                break;
            }
        }
    }
    if kept.len() < target {
        return Err(Error::CodeBudgetExhausted {
            budget,
            found: kept.len(),
            target,
        });
    }
    let words = kept
        .iter()
        .map(|w| (0..k).map(|i| ((w[i / 64] >> (i % 64)) & 1) as u8).collect())
        .collect();
    let code = BinaryCode { k, words };
    code.verify()?;
    Ok(code)
}
