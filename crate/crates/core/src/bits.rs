//! Fixed-length bit strings over GF(2).
//!
//! Bits are stored most-significant-first inside 64-bit words so that the
//! byte encoding (bit 0 = most significant bit of the first byte) is a plain
//! big-endian dump of the words, truncated to `ceil(len / 8)` bytes.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            out.set(i, b);
        }
        out
    }

    /// Builds a bit string from its byte encoding. Padding bits in the last
    /// byte must be zero so that the encoding stays a bijection.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Length {
                what: "bit string bytes",
                expected: len.div_ceil(8),
                actual: bytes.len(),
            });
        }
        let mut out = Self::zeros(len);
        for (i, &byte) in bytes.iter().enumerate() {
            let word = i / 8;
            let shift = 56 - 8 * (i % 8);
            out.words[word] |= u64::from(byte) << shift;
        }
        if out.clone().masked() != out {
            return Err(Error::NonZeroPadding);
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let shift = 56 - 8 * (i % 8);
            out.push((self.words[i / 8] >> shift) as u8);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD] >> (WORD - 1 - i % WORD)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (WORD - 1 - i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let v = self.get(i);
        self.set(i, !v);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Copies `len` bits starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        assert!(start + len <= self.len);
        let mut out = Self::zeros(len);
        if start % WORD == 0 {
            let first = start / WORD;
            let n = out.words.len();
            out.words.copy_from_slice(&self.words[first..first + n]);
            return out.masked();
        }
        for i in 0..len {
            if self.get(start + i) {
                out.set(i, true);
            }
        }
        out
    }

    /// Concatenates bit strings in order.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> Self {
        let parts: Vec<&BitString> = parts.into_iter().collect();
        let total = parts.iter().map(|p| p.len).sum();
        let mut out = Self::zeros(total);
        let mut at = 0;
        for part in parts {
            for i in 0..part.len {
                if part.get(i) {
                    out.set(at + i, true);
                }
            }
            at += part.len;
        }
        out
    }

    /// XORs `other` into `self`. Both operands must have the same length.
    pub fn xor_in(&mut self, other: &BitString) -> Result<()> {
        if self.len != other.len {
            return Err(Error::Length {
                what: "xor operand",
                expected: self.len,
                actual: other.len,
            });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    fn masked(mut self) -> Self {
        self.clear_padding();
        self
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub(crate) fn clear_padding(&mut self) {
        let tail = self.len % WORD;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (WORD - tail);
            }
        }
    }
}

impl BitXorAssign<&BitString> for BitString {
    fn bitxor_assign(&mut self, rhs: &BitString) {
        self.xor_in(rhs).expect("xor of bit strings with different lengths");
    }
}

impl BitXor<&BitString> for &BitString {
    type Output = BitString;

    fn bitxor(self, rhs: &BitString) -> BitString {
        let mut out = self.clone();
        out ^= rhs;
        out
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(")?;
        for b in self.iter().take(128) {
            write!(f, "{}", u8::from(b))?;
        }
        if self.len > 128 {
            write!(f, "...")?;
        }
        write!(f, ")")
    }
}
