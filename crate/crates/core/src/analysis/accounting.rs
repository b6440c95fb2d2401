//! Transcripts of retrieval sessions and the rate / download accounting
//! derived from them.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::SystemParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Dapac,
    Naive,
}

/// One server's share of a session: the exact bytes exchanged and the
/// item-level counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Exchange {
    pub server: usize,
    #[serde(with = "hex::serde")]
    pub query: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub answer: Vec<u8>,
    pub accepted: bool,
    /// Query frame size in bits.
    pub bits_up: usize,
    /// Sum of the returned items' bit lengths; framing is not counted.
    pub bits_down: usize,
    /// Number of returned items.
    pub equations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub scheme: Scheme,
    pub params: SystemParams,
    pub exchanges: Vec<Exchange>,
}

impl Transcript {
    pub fn bits_up(&self) -> usize {
        self.exchanges.iter().map(|e| e.bits_up).sum()
    }

    pub fn bits_down(&self) -> usize {
        self.exchanges.iter().map(|e| e.bits_down).sum()
    }

    pub fn equations(&self) -> usize {
        self.exchanges.iter().map(|e| e.equations).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measurement {
    pub msg_bits: usize,
    pub download_bits: usize,
    pub equations: usize,
    /// `L / D`, reduced.
    pub rate: Ratio<u64>,
}

impl Measurement {
    pub fn rate_f64(&self) -> f64 {
        *self.rate.numer() as f64 / *self.rate.denom() as f64
    }
}

/// Closed-form download and equation counts for a scheme.
pub fn expected_download(scheme: Scheme, params: &SystemParams) -> (usize, usize) {
    let (n, k, l) = (params.n_servers(), params.n_values(), params.msg_len_bits());
    match scheme {
        // K(N-1) items of L / C(N,2) bits at each of N servers
        Scheme::Dapac => (2 * k * l, params.total_equations()),
        Scheme::Naive => {
            let per_server = k.pow(n as u32 - 1);
            (n * per_server * l, n * per_server)
        }
    }
}

/// Rate of a completed session. Fails unless every server answered and the
/// totals equal the scheme's closed forms.
pub fn measure(t: &Transcript) -> Result<Measurement> {
    let params = &t.params;
    if t.exchanges.len() != params.n_servers() {
        return Err(Error::Transcript(format!(
            "{} exchanges for {} servers",
            t.exchanges.len(),
            params.n_servers()
        )));
    }
    if let Some(e) = t.exchanges.iter().find(|e| !e.accepted) {
        return Err(Error::Transcript(format!("server {} rejected", e.server)));
    }
    let (bits, equations) = (t.bits_down(), t.equations());
    let (want_bits, want_eq) = expected_download(t.scheme, params);
    if bits != want_bits || equations != want_eq {
        return Err(Error::Transcript(format!(
            "downloaded {bits} bits in {equations} items, closed form is {want_bits} bits in {want_eq}"
        )));
    }
    Ok(Measurement {
        msg_bits: params.msg_len_bits(),
        download_bits: bits,
        equations,
        rate: Ratio::new(params.msg_len_bits() as u64, bits as u64),
    })
}
