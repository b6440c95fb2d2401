//! Messages, chunks and coefficient vectors, plus GF(2) linear combinations.

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::params::SystemParams;

macro_rules! sized_bits {
    ($(#[$doc:meta])* $name:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq, Eq, Hash)]
        pub struct $name(BitString);

        impl $name {
            pub fn new(bits: BitString, expected_len: usize) -> Result<Self> {
                if bits.len() != expected_len {
                    return Err(Error::Length {
                        what: $what,
                        expected: expected_len,
                        actual: bits.len(),
                    });
                }
                Ok(Self(bits))
            }

            pub fn zeros(len: usize) -> Self {
                Self(BitString::zeros(len))
            }

            pub fn bits(&self) -> &BitString {
                &self.0
            }

            pub fn bits_mut(&mut self) -> &mut BitString {
                &mut self.0
            }

            pub fn into_bits(self) -> BitString {
                self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }
        }
    };
}

sized_bits!(
    /// A full `L`-bit message.
    Message,
    "message"
);
sized_bits!(
    /// One of the `N(N-1)/2` equal slices of a message.
    Chunk,
    "chunk"
);
sized_bits!(
    /// Binary coefficients of one query item, `K^(N-2)` bits.
    CoefficientVector,
    "coefficient vector"
);

impl Chunk {
    pub fn xor_in(&mut self, other: &Chunk) -> Result<()> {
        self.0.xor_in(&other.0)
    }
}

/// Sum over GF(2) of the chunks whose coefficient bit is set.
pub fn xor_combine(coeffs: &CoefficientVector, chunks: &[&Chunk]) -> Result<Chunk> {
    if coeffs.len() != chunks.len() {
        return Err(Error::Length {
            what: "combination terms",
            expected: coeffs.len(),
            actual: chunks.len(),
        });
    }
    let Some(first) = chunks.first() else {
        return Err(Error::InvalidArgument("empty combination".into()));
    };
    let mut acc = Chunk::zeros(first.len());
    for (i, chunk) in chunks.iter().enumerate() {
        if chunk.len() != acc.len() {
            return Err(Error::Length {
                what: "chunk",
                expected: acc.len(),
                actual: chunk.len(),
            });
        }
        if coeffs.bits().get(i) {
            acc.xor_in(chunk)?;
        }
    }
    Ok(acc)
}

/// Cuts a message into `N(N-1)/2` consecutive chunks.
pub fn split_message(m: &Message, params: &SystemParams) -> Result<Vec<Chunk>> {
    if m.len() != params.msg_len_bits() {
        return Err(Error::Length {
            what: "message",
            expected: params.msg_len_bits(),
            actual: m.len(),
        });
    }
    let c = params.chunk_len_bits();
    Ok((0..params.n_chunks())
        .map(|i| Chunk(m.bits().slice(i * c, c)))
        .collect())
}

/// Inverse of [`split_message`].
pub fn join_chunks(chunks: &[Chunk], params: &SystemParams) -> Result<Message> {
    if chunks.len() != params.n_chunks() {
        return Err(Error::Length {
            what: "chunk count",
            expected: params.n_chunks(),
            actual: chunks.len(),
        });
    }
    if let Some(bad) = chunks.iter().find(|c| c.len() != params.chunk_len_bits()) {
        return Err(Error::Length {
            what: "chunk",
            expected: params.chunk_len_bits(),
            actual: bad.len(),
        });
    }
    Ok(Message(BitString::concat(chunks.iter().map(|c| &c.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RandomSource, Rng};
    use proptest::prelude::*;

    fn chunk(bits: &[bool]) -> Chunk {
        Chunk(BitString::from_bits(bits))
    }

    fn coeffs(bits: &[bool]) -> CoefficientVector {
        CoefficientVector(BitString::from_bits(bits))
    }

    // bit-by-bit reference evaluation of sum_i a_i * c_i over GF(2)
    fn brute_force(a: &[bool], cs: &[Vec<bool>]) -> Vec<bool> {
        let width = cs[0].len();
        (0..width)
            .map(|bit| {
                let mut acc = false;
                for (i, c) in cs.iter().enumerate() {
                    acc ^= a[i] & c[bit];
                }
                acc
            })
            .collect()
    }

    #[test]
    fn zero_coefficients_give_zero_chunk() {
        let c1 = chunk(&[true, true, false]);
        let c2 = chunk(&[false, true, true]);
        let out = xor_combine(&coeffs(&[false, false]), &[&c1, &c2]).unwrap();
        assert!(out.bits().is_zero());
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn unit_coefficient_is_identity() {
        let c = chunk(&[true, false, true, true]);
        assert_eq!(xor_combine(&coeffs(&[true]), &[&c]).unwrap(), c);
    }

    #[test]
    fn matches_bit_loop_on_random_bytes() {
        let mut rng = Rng::labeled(7, "xor-combine");
        for _ in 0..200 {
            let c1: Vec<bool> = (0..8).map(|_| rng.bit()).collect();
            let c2: Vec<bool> = (0..8).map(|_| rng.bit()).collect();
            let expected = brute_force(&[true, true], &[c1.clone(), c2.clone()]);
            let got = xor_combine(&coeffs(&[true, true]), &[&chunk(&c1), &chunk(&c2)]).unwrap();
            assert_eq!(got, chunk(&expected));
        }
    }

    #[test]
    fn length_mismatch() {
        let c = chunk(&[true]);
        assert!(xor_combine(&coeffs(&[true, false]), &[&c]).is_err());
        let d = chunk(&[true, false]);
        assert!(xor_combine(&coeffs(&[true, true]), &[&c, &d]).is_err());
    }

    #[test]
    fn split_matches_concatenation_order() {
        let params = SystemParams::new(3, 2, 6).unwrap();
        let m = Message(BitString::from_bits(&[true, false, false, true, true, true]));
        let parts = split_message(&m, &params).unwrap();
        assert_eq!(parts, vec![chunk(&[true, false]), chunk(&[false, true]), chunk(&[true, true])]);

        let params = SystemParams::new(2, 2, 5).unwrap();
        let m = Message(BitString::from_bits(&[true, false, true, true, false]));
        assert_eq!(split_message(&m, &params).unwrap(), vec![Chunk(m.bits().clone())]);

        assert!(split_message(&Message::zeros(4), &params).is_err());
    }

    #[test]
    fn join_inverts_split() {
        let params = SystemParams::new(4, 2, 60).unwrap();
        let mut rng = Rng::labeled(1, "split");
        for _ in 0..1000 {
            let mut bits = BitString::zeros(60);
            rng.fill(&mut bits);
            let m = Message(bits);
            let back = join_chunks(&split_message(&m, &params).unwrap(), &params).unwrap();
            assert_eq!(back, m);
        }
    }

    proptest! {
        #[test]
        fn combination_is_linear(
            a in proptest::collection::vec(any::<bool>(), 4),
            b in proptest::collection::vec(any::<bool>(), 4),
            words in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 13), 4),
        ) {
            let chunks: Vec<Chunk> = words.iter().map(|w| chunk(w)).collect();
            let refs: Vec<&Chunk> = chunks.iter().collect();
            let ab: Vec<bool> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let lhs = xor_combine(&coeffs(&ab), &refs).unwrap();
            let mut rhs = xor_combine(&coeffs(&a), &refs).unwrap();
            rhs.xor_in(&xor_combine(&coeffs(&b), &refs).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
