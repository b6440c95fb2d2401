//! Attribute vectors, message types and their canonical orderings.
//!
//! Positions and values are 1-based: position `n` in `[1, N]` is the
//! attribute checked by server `n`, and value `v` in `[1, K]` indexes the
//! fixed list of that attribute's values.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Attribute vector `(v_1, ..., v_N)`. Labels exactly one message.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccessPolicy(Vec<u16>);

impl AccessPolicy {
    pub fn new(values: Vec<u16>, params: &SystemParams) -> Result<Self> {
        if values.len() != params.n_servers() {
            return Err(Error::Policy(format!(
                "expected {} attributes, got {}",
                params.n_servers(),
                values.len()
            )));
        }
        if let Some(&bad) = values
            .iter()
            .find(|&&v| v == 0 || v as usize > params.n_values())
        {
            return Err(Error::Policy(format!(
                "attribute value {bad} outside [1, {}]",
                params.n_values()
            )));
        }
        Ok(Self(values))
    }

    /// Policy with the given lexicographic rank (position 1 most significant).
    pub fn from_index(mut index: usize, params: &SystemParams) -> Self {
        let k = params.n_values();
        let mut values = vec![0u16; params.n_servers()];
        for slot in values.iter_mut().rev() {
            *slot = (index % k) as u16 + 1;
            index /= k;
        }
        Self(values)
    }

    /// Lexicographic rank among all `K^N` policies.
    pub fn index(&self, params: &SystemParams) -> usize {
        let k = params.n_values();
        self.0
            .iter()
            .fold(0, |acc, &v| acc * k + (v as usize - 1))
    }

    pub fn values(&self) -> &[u16] {
        &self.0
    }

    /// Value at a 1-based position.
    pub fn at(&self, pos: usize) -> u16 {
        self.0[pos - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn from_raw(values: Vec<u16>) -> Self {
        Self(values)
    }
}

impl fmt::Debug for AccessPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for AccessPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One fixed attribute: `(position, value)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Attribute {
    pub pos: u8,
    pub value: u16,
}

impl Attribute {
    pub fn new(pos: usize, value: u16) -> Self {
        Self {
            pos: pos as u8,
            value,
        }
    }

    pub fn position(&self) -> usize {
        self.pos as usize
    }
}

/// A message type: the set of policies sharing two fixed attributes.
///
/// Stored canonically with `a.pos < b.pos`, so both servers of a pair derive
/// the same key. Ordered by `(pos_a, pos_b, val_a, val_b)`, which is also the
/// order of [`TypeId::index`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TypeId {
    a: Attribute,
    b: Attribute,
}

impl TypeId {
    pub fn new(x: Attribute, y: Attribute, params: &SystemParams) -> Result<Self> {
        if x.pos == y.pos {
            return Err(Error::SamePosition(x.position()));
        }
        for attr in [x, y] {
            params.check_position(attr.position())?;
            if attr.value == 0 || attr.value as usize > params.n_values() {
                return Err(Error::Policy(format!(
                    "type value {} outside [1, {}]",
                    attr.value,
                    params.n_values()
                )));
            }
        }
        let (a, b) = if x.pos < y.pos { (x, y) } else { (y, x) };
        Ok(Self { a, b })
    }

    pub fn first(&self) -> Attribute {
        self.a
    }

    pub fn second(&self) -> Attribute {
        self.b
    }

    /// The fixed value at `pos`, if `pos` is one of the two fixed positions.
    pub fn value_at(&self, pos: usize) -> Option<u16> {
        [self.a, self.b]
            .into_iter()
            .find(|attr| attr.position() == pos)
            .map(|attr| attr.value)
    }

    pub fn contains(&self, policy: &AccessPolicy) -> bool {
        policy.at(self.a.position()) == self.a.value && policy.at(self.b.position()) == self.b.value
    }

    /// Rank in canonical order among the `C(N,2) K^2` types.
    pub fn index(&self, params: &SystemParams) -> usize {
        let k = params.n_values();
        params.pair_rank(self.a.position(), self.b.position()) * k * k
            + (self.a.value as usize - 1) * k
            + (self.b.value as usize - 1)
    }

    fn key(&self) -> (u8, u8, u16, u16) {
        (self.a.pos, self.b.pos, self.a.value, self.b.value)
    }
}

impl Ord for TypeId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for TypeId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{{({},{}),({},{})}}",
            self.a.pos, self.a.value, self.b.pos, self.b.value
        )
    }
}

/// All `K^N` policies in lexicographic order, position 1 most significant.
pub fn enumerate_policies(params: &SystemParams) -> Vec<AccessPolicy> {
    (0..params.n_policies())
        .map(|i| AccessPolicy::from_index(i, params))
        .collect()
}

/// All types in canonical order.
pub fn enumerate_types(params: &SystemParams) -> Vec<TypeId> {
    let k = params.n_values() as u16;
    let mut out = Vec::with_capacity(params.n_types());
    for (pa, pb) in params.server_pairs() {
        for va in 1..=k {
            for vb in 1..=k {
                out.push(TypeId {
                    a: Attribute::new(pa, va),
                    b: Attribute::new(pb, vb),
                });
            }
        }
    }
    out
}

/// The `K^(N-2)` policies of a type, in lexicographic order.
pub fn policies_of_type(t: &TypeId, params: &SystemParams) -> Vec<AccessPolicy> {
    let n = params.n_servers();
    let k = params.n_values();
    let free: Vec<usize> = (1..=n)
        .filter(|&p| p != t.a.position() && p != t.b.position())
        .collect();
    let mut out = Vec::with_capacity(params.type_size());
    for mut rank in 0..params.type_size() {
        let mut values = vec![0u16; n];
        values[t.a.position() - 1] = t.a.value;
        values[t.b.position() - 1] = t.b.value;
        for &pos in free.iter().rev() {
            values[pos - 1] = (rank % k) as u16 + 1;
            rank /= k;
        }
        out.push(AccessPolicy(values));
    }
    out
}

/// The type fixing `policy`'s values at two distinct positions.
pub fn type_of(policy: &AccessPolicy, pos_a: usize, pos_b: usize, params: &SystemParams) -> Result<TypeId> {
    if pos_a == pos_b {
        return Err(Error::SamePosition(pos_a));
    }
    params.check_position(pos_a)?;
    params.check_position(pos_b)?;
    TypeId::new(
        Attribute::new(pos_a, policy.at(pos_a)),
        Attribute::new(pos_b, policy.at(pos_b)),
        params,
    )
}
