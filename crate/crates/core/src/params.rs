use serde::Serialize;

use crate::error::{Error, Result};

/// Upper bound on `K^N`, the number of messages. Keeps databases in memory
/// and every policy index inside a `usize` on 32-bit targets.
pub const MAX_POLICIES: u64 = 1 << 24;

/// System parameters `(N, K, L)` and the counts derived from them.
///
/// `N` servers, one attribute each, every attribute taking one of `K`
/// values, and messages of `L` bits. Messages are cut into `N(N-1)/2`
/// chunks of `2L / (N(N-1))` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SystemParams {
    n_servers: usize,
    n_values: usize,
    msg_len_bits: usize,
}

impl SystemParams {
    pub fn new(n_servers: usize, n_values: usize, msg_len_bits: usize) -> Result<Self> {
        if n_servers < 2 {
            return Err(Error::Params(format!("need N >= 2, got {n_servers}")));
        }
        if n_servers > u8::MAX as usize {
            return Err(Error::Params(format!("N = {n_servers} exceeds 255")));
        }
        if n_values < 2 {
            return Err(Error::Params(format!("need K >= 2, got {n_values}")));
        }
        if n_values > u16::MAX as usize {
            return Err(Error::Params(format!("K = {n_values} exceeds 65535")));
        }
        let policies = (n_values as u64).checked_pow(n_servers as u32);
        if policies.is_none_or(|p| p > MAX_POLICIES) {
            return Err(Error::Params(format!(
                "K^N = {n_values}^{n_servers} exceeds {MAX_POLICIES} messages"
            )));
        }
        let chunks = n_servers * (n_servers - 1) / 2;
        if chunks > u16::MAX as usize {
            return Err(Error::Params(format!("{chunks} chunks exceed 65535")));
        }
        if msg_len_bits == 0 || msg_len_bits % chunks != 0 {
            return Err(Error::Params(format!(
                "L = {msg_len_bits} must be a positive multiple of N(N-1)/2 = {chunks}"
            )));
        }
        Ok(Self {
            n_servers,
            n_values,
            msg_len_bits,
        })
    }

    /// Smallest valid `L >= bits`, i.e. `bits` rounded up to a multiple of `N(N-1)/2`.
    pub fn padded_len(n_servers: usize, bits: usize) -> usize {
        let chunks = n_servers * n_servers.saturating_sub(1) / 2;
        let chunks = chunks.max(1);
        bits.max(1).div_ceil(chunks) * chunks
    }

    /// `N`
    pub fn n_servers(&self) -> usize {
        self.n_servers
    }

    /// `K`
    pub fn n_values(&self) -> usize {
        self.n_values
    }

    /// `L`
    pub fn msg_len_bits(&self) -> usize {
        self.msg_len_bits
    }

    /// `N(N-1)/2`, also the number of server pairs.
    pub fn n_chunks(&self) -> usize {
        self.n_servers * (self.n_servers - 1) / 2
    }

    pub fn chunk_len_bits(&self) -> usize {
        self.msg_len_bits / self.n_chunks()
    }

    /// `K^N`
    pub fn n_policies(&self) -> usize {
        self.n_values.pow(self.n_servers as u32)
    }

    /// `K^(N-2)`: policies per type and coefficients per query item.
    pub fn type_size(&self) -> usize {
        self.n_values.pow(self.n_servers as u32 - 2)
    }

    /// `C(N,2) K^2`
    pub fn n_types(&self) -> usize {
        self.n_chunks() * self.n_values * self.n_values
    }

    /// `K(N-1)`
    pub fn items_per_server(&self) -> usize {
        self.n_values * (self.n_servers - 1)
    }

    /// `K N (N-1)`
    pub fn total_equations(&self) -> usize {
        self.items_per_server() * self.n_servers
    }

    /// Messages one server unlocks after verifying its attribute, `K^(N-1)`.
    pub fn accessible_per_server(&self) -> usize {
        self.n_values.pow(self.n_servers as u32 - 1)
    }

    /// Server pairs `(m, n)` with `1 <= m < n <= N`, in lexicographic order.
    pub fn server_pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let n = self.n_servers;
        (1..=n).flat_map(move |a| (a + 1..=n).map(move |b| (a, b)))
    }

    /// 0-based rank of the pair `(a, b)`, `a < b`, in [`Self::server_pairs`] order.
    pub fn pair_rank(&self, a: usize, b: usize) -> usize {
        debug_assert!(1 <= a && a < b && b <= self.n_servers);
        let n = self.n_servers;
        // pairs with first element < a, then offset within row a
        (a - 1) * n - (a - 1) * a / 2 + (b - a - 1)
    }

    pub fn check_position(&self, pos: usize) -> Result<()> {
        if pos == 0 || pos > self.n_servers {
            return Err(Error::Policy(format!(
                "position {pos} outside [1, {}]",
                self.n_servers
            )));
        }
        Ok(())
    }
}
