//! Secrecy of the other messages against the user.
//!
//! Fix the client's randomness and `W^{v*}`; for every assignment of the
//! other `K^N - 1` messages, walk all pad values and collect the multiset
//! of answer tuples. Secrecy holds iff that multiset, i.e. the law of the
//! answers given uniform pads, does not depend on the other messages.

use std::sync::Arc;

use serde::Serialize;

use super::ServerMutation;
use crate::bits::BitString;
use crate::client::{generate_queries, Query};
use crate::dealer::{CommonRandomness, CredentialAuthority, MessageDatabase};
use crate::error::{Error, Result};
use crate::message::{Chunk, Message};
use crate::params::SystemParams;
use crate::policy::AccessPolicy;
use crate::rng::{enumerate, RandomSource, Replay, Rng};
use crate::server::{Answer, ServerState};

/// Largest total pad length the check will enumerate.
pub const MAX_PAD_BITS: usize = 16;

/// How much of each randomness source to cover. A source is enumerated
/// when it is no larger than the limit below and sampled otherwise.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SecrecyBudget {
    /// Client random paths enumerated up to this many, else this many sampled.
    pub client_paths: usize,
    /// Bits of other-message content enumerated up to this, else
    /// `other_samples` random assignments.
    pub max_other_bits: usize,
    pub other_samples: usize,
    /// `W^{v*}` values enumerated up to this many bits, else `desired_samples`.
    pub max_desired_bits: usize,
    pub desired_samples: usize,
}

impl Default for SecrecyBudget {
    fn default() -> Self {
        Self {
            client_paths: 64,
            max_other_bits: 12,
            other_samples: 8,
            max_desired_bits: 4,
            desired_samples: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SecrecyReport {
    pub holds: bool,
    pub v_star: AccessPolicy,
    pub client_paths: usize,
    pub client_enumerated: bool,
    pub desired_values: usize,
    pub other_assignments: usize,
    pub other_enumerated: bool,
    pub pad_assignments: usize,
    pub violation: Option<String>,
}

pub fn secrecy_bruteforce(params: &SystemParams, v_star: &AccessPolicy) -> Result<SecrecyReport> {
    secrecy_bruteforce_with(params, v_star, ServerMutation::Honest, &SecrecyBudget::default(), 0)
}

// All 2^bits values, or `samples` random ones when that is too many.
fn bit_assignments(bits: usize, max_bits: usize, samples: usize, rng: &mut Rng) -> (Vec<BitString>, bool) {
    if bits <= max_bits {
        let all = (0u64..1 << bits)
            .map(|x| BitString::from_bits(&(0..bits).map(|i| x >> (bits - 1 - i) & 1 == 1).collect::<Vec<_>>()))
            .collect();
        (all, true)
    } else {
        let some = (0..samples)
            .map(|_| {
                let mut b = BitString::zeros(bits);
                rng.fill(&mut b);
                b
            })
            .collect();
        (some, false)
    }
}

fn client_paths(
    v_star: &AccessPolicy,
    creds: &[crate::dealer::Credential],
    params: &SystemParams,
    budget: &SecrecyBudget,
    rng: &mut Rng,
) -> Result<(Vec<Vec<Query>>, bool)> {
    let gen = |r: &mut Replay| generate_queries(v_star, creds, params, r).map(|(q, _)| q);
    match enumerate(budget.client_paths, gen) {
        Ok(paths) => Ok((paths.into_iter().map(|(q, _)| q).collect::<Result<_>>()?, true)),
        Err(Error::TooLarge(_)) => {
            let sampled = (0..budget.client_paths)
                .map(|i| generate_queries(v_star, creds, params, &mut rng.substream("client", i as u64)).map(|(q, _)| q))
                .collect::<Result<_>>()?;
            Ok((sampled, false))
        }
        Err(e) => Err(e),
    }
}

pub fn secrecy_bruteforce_with(
    params: &SystemParams,
    v_star: &AccessPolicy,
    mutation: ServerMutation,
    budget: &SecrecyBudget,
    seed: u64,
) -> Result<SecrecyReport> {
    let v_star = AccessPolicy::new(v_star.values().to_vec(), params)?;
    let pad_bits = params.n_types() * params.chunk_len_bits();
    if pad_bits > MAX_PAD_BITS {
        return Err(Error::TooLarge(format!(
            "{pad_bits} pad bits; at most {MAX_PAD_BITS} can be enumerated"
        )));
    }
    let l = params.msg_len_bits();
    let c = params.chunk_len_bits();
    let star = v_star.index(params);
    let mut rng = Rng::labeled(seed, "analysis/secrecy");

    let mut authority = CredentialAuthority::new(*params);
    let creds = authority.issue_credentials(&v_star, &mut rng.substream("credentials", 0))?;
    let tables = authority.into_tables();
    let (paths, client_enumerated) = client_paths(&v_star, &creds, params, budget, &mut rng)?;

    let mut fixed = rng.substream("desired", 0);
    let (desired, _) = bit_assignments(l, budget.max_desired_bits, budget.desired_samples, &mut fixed);
    let mut others_rng = rng.substream("others", 0);
    let (others, other_enumerated) = bit_assignments(
        (params.n_policies() - 1) * l,
        budget.max_other_bits,
        budget.other_samples,
        &mut others_rng,
    );
    let pad_sets: Vec<Arc<CommonRandomness>> = (0u64..1 << pad_bits)
        .map(|x| {
            let pads = (0..params.n_types())
                .map(|t| {
                    let bits = (0..c)
                        .map(|i| x >> (pad_bits - 1 - (t * c + i)) & 1 == 1)
                        .collect::<Vec<_>>();
                    Chunk::new(BitString::from_bits(&bits), c).expect("pad length")
                })
                .collect();
            Arc::new(CommonRandomness::from_pads(*params, pads).expect("pad count"))
        })
        .collect();

    let faults = mutation.faults();
    let mut violation = None;
    'search: for (p, queries) in paths.iter().enumerate() {
        for w in &desired {
            let mut reference: Option<Vec<Vec<u8>>> = None;
            for (o, rest) in others.iter().enumerate() {
                let messages: Vec<Message> = (0..params.n_policies())
                    .map(|i| {
                        let bits = match i.cmp(&star) {
                            std::cmp::Ordering::Equal => w.clone(),
                            std::cmp::Ordering::Less => rest.slice(i * l, l),
                            std::cmp::Ordering::Greater => rest.slice((i - 1) * l, l),
                        };
                        Message::new(bits, l).expect("message length")
                    })
                    .collect();
                let db = Arc::new(MessageDatabase::from_messages(*params, messages)?);
                let mut law: Vec<Vec<u8>> = pad_sets
                    .iter()
                    .map(|pads| answer_tuple(params, &db, pads, &tables, queries, faults))
                    .collect();
                law.sort_unstable();
                match &reference {
                    None => reference = Some(law),
                    Some(r) if *r != law => {
                        violation = Some(format!(
                            "client path {p}, W^v* = {}: other-message assignment {o} changes the answer law",
                            w.to_hex()
                        ));
                        break 'search;
                    }
                    Some(_) => {}
                }
            }
        }
    }

    Ok(SecrecyReport {
        holds: violation.is_none(),
        v_star,
        client_paths: paths.len(),
        client_enumerated,
        desired_values: desired.len(),
        other_assignments: others.len(),
        other_enumerated,
        pad_assignments: pad_sets.len(),
        violation,
    })
}

fn answer_tuple(
    params: &SystemParams,
    db: &Arc<MessageDatabase>,
    pads: &Arc<CommonRandomness>,
    tables: &[crate::dealer::TokenTable],
    queries: &[Query],
    faults: crate::server::ServerFaults,
) -> Vec<u8> {
    let mut out = Vec::new();
    for (i, q) in queries.iter().enumerate() {
        let server = ServerState::new(i + 1, Arc::clone(db), Arc::clone(pads), tables[i].clone())
            .expect("per-position table");
        match server.answer_with_faults(q, faults) {
            Answer::Items(items) => {
                for item in items {
                    out.extend_from_slice(&item.bits().to_bytes());
                }
            }
            Answer::Rejected(r) => panic!("honest query rejected: {r}"),
        }
    }
    debug_assert_eq!(out.len(), params.total_equations() * params.chunk_len_bits().div_ceil(8));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::enumerate_policies;

    #[test]
    fn holds_at_smallest_point_for_every_user() {
        let p = SystemParams::new(2, 2, 1).unwrap();
        for v in enumerate_policies(&p) {
            let r = secrecy_bruteforce(&p, &v).unwrap();
            assert!(r.holds, "{v}: {:?}", r.violation);
            assert!(r.client_enumerated && r.other_enumerated);
            assert_eq!((r.desired_values, r.other_assignments, r.pad_assignments), (2, 8, 16));
        }
    }

    #[test]
    fn server_mutations_are_caught() {
        let p = SystemParams::new(2, 2, 1).unwrap();
        let v = AccessPolicy::new(vec![1, 2], &p).unwrap();
        for m in [ServerMutation::ReusePad, ServerMutation::OmitPads] {
            let r = secrecy_bruteforce_with(&p, &v, m, &SecrecyBudget::default(), 0).unwrap();
            assert!(!r.holds, "{m:?}");
        }
    }

    #[test]
    fn refuses_large_parameters() {
        let p = SystemParams::new(3, 2, 6).unwrap();
        let v = AccessPolicy::new(vec![1, 1, 1], &p).unwrap();
        assert!(matches!(secrecy_bruteforce(&p, &v), Err(Error::TooLarge(_))));
    }

    #[test]
    fn three_servers_with_sampled_databases() {
        let p = SystemParams::new(3, 2, 3).unwrap();
        let v = AccessPolicy::new(vec![2, 1, 2], &p).unwrap();
        let budget = SecrecyBudget {
            client_paths: 2,
            other_samples: 3,
            desired_samples: 2,
            max_desired_bits: 0,
            ..SecrecyBudget::default()
        };
        let r = secrecy_bruteforce_with(&p, &v, ServerMutation::Honest, &budget, 1).unwrap();
        assert!(r.holds, "{:?}", r.violation);
        assert!(!r.client_enumerated && !r.other_enumerated);
        assert_eq!(r.pad_assignments, 4096);
        let r = secrecy_bruteforce_with(&p, &v, ServerMutation::OmitPads, &budget, 1).unwrap();
        assert!(!r.holds);
    }
}
