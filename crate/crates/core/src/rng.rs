//! Randomness sources.
//!
//! Protocol code draws through [`RandomSource`], which has two
//! implementations: [`Rng`], a seeded ChaCha20 stream with labeled
//! sub-streams, and [`Replay`], which drives [`enumerate`] so that the
//! exact output distribution of a randomized procedure can be computed by
//! walking every branch.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub trait RandomSource {
    /// Uniform integer in `[0, bound)`. `bound` must be positive.
    fn below(&mut self, bound: usize) -> usize;

    fn bit(&mut self) -> bool {
        self.below(2) == 1
    }

    /// Overwrites every bit of `bits` with a uniform bit.
    fn fill(&mut self, bits: &mut BitString) {
        for i in 0..bits.len() {
            let b = self.bit();
            bits.set(i, b);
        }
    }
}

/// Deterministic ChaCha20 stream. Sub-streams are derived by hashing the
/// parent key with a label and an index, so consumers never share draws.
#[derive(Clone)]
pub struct Rng {
    key: [u8; 32],
    stream: ChaCha20Rng,
}

impl Rng {
    pub fn from_key(key: [u8; 32]) -> Self {
        Self {
            key,
            stream: ChaCha20Rng::from_seed(key),
        }
    }

    /// Root stream for `seed` under a domain-separation label.
    pub fn labeled(seed: u64, label: &str) -> Self {
        Self::from_key(derive_key(&seed.to_le_bytes(), label, 0))
    }

    /// Independent child stream; does not advance `self`.
    pub fn substream(&self, label: &str, index: u64) -> Self {
        Self::from_key(derive_key(&self.key, label, index))
    }

    pub fn fill_bytes(&mut self, out: &mut [u8]) {
        self.stream.fill_bytes(out);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.stream.next_u64()
    }
}

fn derive_key(parent: &[u8], label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"dapac/rng/v1");
    h.update((parent.len() as u64).to_le_bytes());
    h.update(parent);
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

impl RandomSource for Rng {
    fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "below(0)");
        if bound == 1 {
            return 0;
        }
        self.stream.gen_range(0..bound)
    }

    fn bit(&mut self) -> bool {
        self.stream.next_u32() & 1 == 1
    }

    fn fill(&mut self, bits: &mut BitString) {
        for w in bits.words_mut() {
            *w = self.stream.next_u64();
        }
        bits.clear_padding();
    }
}

/// Replays a recorded prefix of choices and extends it with zeros; used by
/// [`enumerate`].
#[derive(Debug, Default)]
pub struct Replay {
    decisions: Vec<(usize, usize)>,
    cursor: usize,
}

impl RandomSource for Replay {
    fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "below(0)");
        if let Some(&(choice, recorded)) = self.decisions.get(self.cursor) {
            assert_eq!(recorded, bound, "branching changed between replays");
            self.cursor += 1;
            choice
        } else {
            self.decisions.push((0, bound));
            self.cursor += 1;
            0
        }
    }
}

impl Replay {
    fn probability(&self) -> BigRational {
        let den = self
            .decisions
            .iter()
            .fold(BigInt::one(), |acc, &(_, b)| acc * BigInt::from(b));
        BigRational::new(BigInt::one(), den)
    }

    // Odometer step over the decision tree; false once every path is done.
    fn advance(&mut self) -> bool {
        self.cursor = 0;
        while let Some((choice, bound)) = self.decisions.pop() {
            if choice + 1 < bound {
                self.decisions.push((choice + 1, bound));
                return true;
            }
        }
        false
    }
}

/// Runs `f` once per path through its random choices and returns every
/// outcome with its exact probability. `f` must consume randomness only
/// through the [`Replay`] it is given and must be deterministic otherwise.
pub fn enumerate<T>(max_paths: usize, mut f: impl FnMut(&mut Replay) -> T) -> Result<Vec<(T, BigRational)>> {
    let mut replay = Replay::default();
    let mut out = Vec::new();
    loop {
        let value = f(&mut replay);
        out.push((value, replay.probability()));
        if out.len() > max_paths {
            return Err(Error::TooLarge(format!("more than {max_paths} random paths")));
        }
        if !replay.advance() {
            return Ok(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn labeled_streams_are_reproducible_and_separated() {
        let mut a = Rng::labeled(42, "client");
        let mut b = Rng::labeled(42, "client");
        let mut c = Rng::labeled(42, "dealer");
        let xa: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..4).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        let s0 = a.substream("sample", 0).next_u64();
        let s1 = a.substream("sample", 1).next_u64();
        assert_ne!(s0, s1);
    }

    #[test]
    fn fill_respects_length() {
        let mut rng = Rng::labeled(3, "fill");
        let mut bits = BitString::zeros(70);
        rng.fill(&mut bits);
        assert_eq!(BitString::from_bytes(&bits.to_bytes(), 70).unwrap(), bits);
    }

    #[test]
    fn enumeration_covers_all_paths_with_exact_mass() {
        // one bit, then a draw from {0,1,2} only when the bit is set
        let outcomes = enumerate(100, |r| {
            let b = r.bit();
            if b { 1 + r.below(3) } else { 0 }
        })
        .unwrap();
        let mut values: Vec<usize> = outcomes.iter().map(|(v, _)| *v).collect();
        values.sort();
        assert_eq!(values, vec![0, 1, 2, 3]);
        let total = outcomes
            .iter()
            .fold(BigRational::zero(), |acc, (_, p)| acc + p);
        assert!(total.is_one());
        let zero = outcomes.iter().find(|(v, _)| *v == 0).unwrap();
        assert_eq!(zero.1, BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn enumeration_limit() {
        assert!(enumerate(3, |r| r.below(8)).is_err());
    }
}
