//! Sign quantization for candidate pre-selection.
//!
//! Each embedding is turned into a `num_bits`-bit signature: the coordinates
//! are permuted, multiplied by random signs, split into equal-sized bins and
//! each bin's sum contributes one bit (its sign). When `num_bits` exceeds the
//! embedding dimension, independent rounds (fresh permutation and signs) are
//! concatenated until enough bits have been produced.
//!
//! Two signatures are compared by counting matching bits. The score is only
//! used to cut the candidate list down before exact scoring, so it does not
//! have to be accurate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::term_match::Messenger;

/// Default signature width.
pub const DEFAULT_NUM_BITS: usize = 512;

/// Default multiplier applied to `k` to get the pre-selection budget.
pub const DEFAULT_QUANT_K_MULTIPLIER: usize = 200;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuantError {
    #[error("invalid codec parameters: {0}")]
    InvalidParams(String),
    #[error("embedding has {found} dimensions, codec expects {expected}")]
    Dimension { expected: usize, found: usize },
}

/// One permutation/sign/bin layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Round {
    perm: Vec<u32>,
    signs: Vec<i8>,
    /// Bin boundaries into the permuted vector, `bins + 1` entries.
    bounds: Vec<u32>,
}

impl Round {
    pub fn permutation(&self) -> &[u32] {
        &self.perm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn bin_bounds(&self) -> &[u32] {
        &self.bounds
    }

    pub fn num_bins(&self) -> usize {
        self.bounds.len() - 1
    }
}

/// Parameters and random material of the sign quantizer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantCodec {
    dim: usize,
    num_bits: usize,
    seed: u64,
    rounds: Vec<Round>,
}

/// Splits `[0, len)` into `bins` contiguous ranges whose sizes differ by at most one.
fn equal_bins(len: usize, bins: usize) -> Vec<u32> {
    (0..=bins).map(|b| (b * len / bins) as u32).collect()
}

impl QuantCodec {
    /// Builds a codec deterministically from `(dim, num_bits, seed)`.
    pub fn new(dim: usize, num_bits: usize, seed: u64) -> Result<Self, QuantError> {
        if dim == 0 || num_bits == 0 {
            return Err(QuantError::InvalidParams(format!(
                "dim and num_bits must be positive (dim={dim}, num_bits={num_bits})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rounds = Vec::with_capacity(num_bits.div_ceil(dim));
        let mut remaining = num_bits;
        while remaining > 0 {
            let bins = remaining.min(dim);
            let mut perm: Vec<u32> = (0..dim as u32).collect();
            perm.shuffle(&mut rng);
            let signs = (0..dim)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect();
            rounds.push(Round {
                perm,
                signs,
                bounds: equal_bins(dim, bins),
            });
            remaining -= bins;
        }
        Ok(Self {
            dim,
            num_bits,
            seed,
            rounds,
        })
    }

    /// Reassembles a codec from stored material, checking its invariants.
    pub fn from_parts(
        dim: usize,
        num_bits: usize,
        seed: u64,
        rounds: Vec<(Vec<u32>, Vec<i8>, Vec<u32>)>,
    ) -> Result<Self, QuantError> {
        if dim == 0 || num_bits == 0 {
            return Err(QuantError::InvalidParams("zero dim or num_bits".into()));
        }
        let mut total = 0usize;
        let mut out = Vec::with_capacity(rounds.len());
        for (perm, signs, bounds) in rounds {
            let mut seen = vec![false; dim];
            if perm.len() != dim || signs.len() != dim {
                return Err(QuantError::InvalidParams("round length mismatch".into()));
            }
            for &p in &perm {
                let p = p as usize;
                if p >= dim || seen[p] {
                    return Err(QuantError::InvalidParams("permutation is not a bijection".into()));
                }
                seen[p] = true;
            }
            if signs.iter().any(|&s| s != 1 && s != -1) {
                return Err(QuantError::InvalidParams("signs must be +1 or -1".into()));
            }
            let well_formed = bounds.len() >= 2
                && bounds[0] == 0
                && *bounds.last().unwrap() as usize == dim
                && bounds.windows(2).all(|w| w[0] < w[1]);
            if !well_formed {
                return Err(QuantError::InvalidParams("bins do not partition the round".into()));
            }
            total += bounds.len() - 1;
            out.push(Round {
                perm,
                signs,
                bounds,
            });
        }
        if total != num_bits {
            return Err(QuantError::InvalidParams(format!(
                "rounds emit {total} bits, expected {num_bits}"
            )));
        }
        Ok(Self {
            dim,
            num_bits,
            seed,
            rounds: out,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    /// Number of 64-bit words per signature.
    pub fn words(&self) -> usize {
        self.num_bits.div_ceil(64)
    }

    /// Encodes into a caller-provided word buffer of length [`Self::words`].
    pub fn encode_into(&self, embedding: &[f64], out: &mut [u64]) -> Result<(), QuantError> {
        if embedding.len() != self.dim {
            return Err(QuantError::Dimension {
                expected: self.dim,
                found: embedding.len(),
            });
        }
        debug_assert_eq!(out.len(), self.words());
        out.fill(0);
        let mut bit = 0usize;
        for round in &self.rounds {
            for bin in round.bounds.windows(2) {
                let mut acc = 0.0f64;
                for i in bin[0] as usize..bin[1] as usize {
                    acc += f64::from(round.signs[i]) * embedding[round.perm[i] as usize];
                }
                // sign(0) = +1
                if acc >= 0.0 {
                    out[bit / 64] |= 1u64 << (bit % 64);
                }
                bit += 1;
            }
        }
        Ok(())
    }

    pub fn encode(&self, embedding: &[f64]) -> Result<Signature, QuantError> {
        let mut words = vec![0u64; self.words()];
        self.encode_into(embedding, &mut words)?;
        Ok(Signature {
            words,
            num_bits: self.num_bits,
        })
    }
}

/// Packed sign bits; bits past `num_bits` in the last word are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    words: Vec<u64>,
    num_bits: usize,
}

impl Signature {
    /// Builds a signature from explicit bits (bit 0 first).
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Self {
            words,
            num_bits: bits.len(),
        }
    }

    pub fn from_words(words: Vec<u64>, num_bits: usize) -> Self {
        assert_eq!(words.len(), num_bits.div_ceil(64));
        let mut sig = Self { words, num_bits };
        sig.mask_tail();
        sig
    }

    fn mask_tail(&mut self) {
        let rem = self.num_bits % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.num_bits);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn complement(&self) -> Self {
        let mut sig = Self {
            words: self.words.iter().map(|w| !w).collect(),
            num_bits: self.num_bits,
        };
        sig.mask_tail();
        sig
    }
}

/// Number of agreeing bits between two packed signatures of `num_bits` bits.
///
/// Counts ones in `!(a ^ b)` word by word; the tail of the last word is
/// masked so that padding never counts as agreement.
#[inline]
pub fn sign_matches(a: &[u64], b: &[u64], num_bits: usize) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    let full = num_bits / 64;
    let mut score = 0u32;
    for i in 0..full {
        score += (!(a[i] ^ b[i])).count_ones();
    }
    let rem = num_bits % 64;
    if rem != 0 {
        let mask = (1u64 << rem) - 1;
        score += (!(a[full] ^ b[full]) & mask).count_ones();
    }
    score
}

/// Sign-match score between two signatures.
pub fn quant_score(a: &Signature, b: &Signature) -> u32 {
    assert_eq!(a.num_bits, b.num_bits, "signature widths differ");
    sign_matches(&a.words, &b.words, a.num_bits)
}

/// Scratch for [`preselect_with`]; sized once, reused across calls.
#[derive(Debug, Default)]
pub(crate) struct PreselectScratch {
    pub(crate) scores: Vec<u32>,
    pub(crate) histogram: Vec<u32>,
}

impl PreselectScratch {
    pub(crate) fn with_capacity(num_candidates: usize, num_bits: usize) -> Self {
        Self {
            scores: Vec::with_capacity(num_candidates),
            histogram: vec![0; num_bits + 1],
        }
    }
}

/// Given a histogram of scores, returns the threshold score `t` and the number
/// of items scoring exactly `t` that should be kept so that `keep` items
/// survive in total.
pub(crate) fn threshold_from_histogram(histogram: &[u32], keep: usize) -> (u32, usize) {
    let mut above = 0usize;
    for score in (0..histogram.len()).rev() {
        let here = histogram[score] as usize;
        if above + here >= keep {
            return (score as u32, keep - above);
        }
        above += here;
    }
    (0, histogram[0] as usize)
}

/// Keeps the `quant_k` candidates with the highest sign-match score against
/// `query`, ties resolved toward lower row ids. Candidates must be in
/// ascending row order; the output keeps that order. When there are no more
/// than `quant_k` candidates, they are returned untouched.
pub fn preselect(
    index: &crate::corpus::FrozenIndex,
    query: &Signature,
    candidates: Vec<Messenger>,
    quant_k: usize,
) -> Vec<Messenger> {
    let mut scratch = PreselectScratch::with_capacity(candidates.len(), index.codec().num_bits());
    let mut out = Vec::with_capacity(quant_k.min(candidates.len()));
    preselect_with(index, query, &candidates, quant_k, &mut scratch, &mut out);
    out
}

pub(crate) fn preselect_with(
    index: &crate::corpus::FrozenIndex,
    query: &Signature,
    candidates: &[Messenger],
    quant_k: usize,
    scratch: &mut PreselectScratch,
    out: &mut Vec<Messenger>,
) {
    out.clear();
    if candidates.len() <= quant_k {
        out.extend_from_slice(candidates);
        return;
    }
    let num_bits = index.codec().num_bits();
    assert_eq!(query.num_bits(), num_bits, "query signature width differs from index");
    scratch.scores.clear();
    scratch.histogram.clear();
    scratch.histogram.resize(num_bits + 1, 0);
    for m in candidates {
        let s = sign_matches(index.signature(m.row_id), query.words(), num_bits);
        scratch.scores.push(s);
        scratch.histogram[s as usize] += 1;
    }
    let (threshold, mut at_threshold) = threshold_from_histogram(&scratch.histogram, quant_k);
    for (m, &s) in candidates.iter().zip(&scratch.scores) {
        if s > threshold {
            out.push(*m);
        } else if s == threshold && at_threshold > 0 {
            at_threshold -= 1;
            out.push(*m);
        }
    }
}
