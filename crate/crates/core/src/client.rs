//! User side: one query per server for the attribute vector `v*`, the
//! private plan needed to decode, and the decoder itself.
//!
//! Server `n` is asked for one masked combination per type
//! `{(n, v*_n), (j, k)}`, iterating `k` outer and `j` inner. The type fixing
//! both `v*_m` and `v*_n` is asked of both servers `m < n` with the same
//! references and coefficients that differ only at the desired message, so
//! the XOR of the two answers cancels the shared pad and every other term and
//! leaves one chunk of `W^{v*}`.

use std::collections::{BTreeMap, HashMap};

use crate::bits::BitString;
use crate::dealer::Credential;
use crate::error::{Error, Result};
use crate::message::{join_chunks, Chunk, CoefficientVector, Message};
use crate::params::SystemParams;
use crate::policy::{policies_of_type, AccessPolicy, Attribute, TypeId};
use crate::rng::RandomSource;
use crate::server::Answer;

/// Reference to chunk `chunk` (1-based) of the message labeled `policy`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChunkRef {
    pub policy: AccessPolicy,
    pub chunk: u16,
}

/// One requested combination: `coeffs . (refs) + pad(type_id)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryItem {
    pub type_id: TypeId,
    pub coeffs: CoefficientVector,
    pub refs: Vec<ChunkRef>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub credential: Credential,
    pub items: Vec<QueryItem>,
}

impl Query {
    pub fn type_ids(&self) -> Vec<TypeId> {
        self.items.iter().map(|i| i.type_id).collect()
    }
}

/// Item positions (0-based) of a matched pair and the offset `gamma` of
/// the desired message inside their shared reference list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairItems {
    pub lower_item: usize,
    pub upper_item: usize,
    pub gamma: usize,
}

/// Client-private bookkeeping. Never sent to any server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetrievalPlan {
    pub params: SystemParams,
    pub v_star: AccessPolicy,
    /// Server pair `(m, n)`, `m < n`, to the chunk of `W^{v*}` it yields.
    pub pair_chunk: BTreeMap<(usize, usize), u16>,
    pub pair_items: BTreeMap<(usize, usize), PairItems>,
    /// Chunk indices handed out per message, in assignment order.
    pub perm_state: BTreeMap<AccessPolicy, Vec<(TypeId, u16)>>,
}

/// Deliberate protocol violations, used to show the analyzers can see them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct ClientFaults {
    /// First fresh coefficient bit at every server carries the parity of `v*_2`.
    pub leak_coefficient: bool,
    /// The desired message takes chunk indices 1, 2, 3, ... in order.
    pub fixed_desired_chunks: bool,
    /// Omit the iteration `k = v*_j`, i.e. every matched-pair type.
    pub skip_matched_value: bool,
}

/// Builds the `N` queries for `v_star` and the plan to decode their answers.
pub fn generate_queries(
    v_star: &AccessPolicy,
    credentials: &[Credential],
    params: &SystemParams,
    rng: &mut impl RandomSource,
) -> Result<(Vec<Query>, RetrievalPlan)> {
    generate_with_faults(v_star, credentials, params, rng, ClientFaults::default())
}

pub(crate) fn generate_with_faults(
    v_star: &AccessPolicy,
    credentials: &[Credential],
    params: &SystemParams,
    rng: &mut impl RandomSource,
    faults: ClientFaults,
) -> Result<(Vec<Query>, RetrievalPlan)> {
    let v_star = AccessPolicy::new(v_star.values().to_vec(), params)?;
    check_credentials(&v_star, credentials, params)?;

    let n_servers = params.n_servers();
    let n_chunks = params.n_chunks();
    let mut emitted: HashMap<TypeId, (usize, usize)> = HashMap::new();
    let mut queries: Vec<Vec<QueryItem>> = Vec::with_capacity(n_servers);
    let mut used: HashMap<AccessPolicy, Vec<u16>> = HashMap::new();
    let mut plan = RetrievalPlan {
        params: *params,
        v_star: v_star.clone(),
        pair_chunk: BTreeMap::new(),
        pair_items: BTreeMap::new(),
        perm_state: BTreeMap::new(),
    };

    for n in 1..=n_servers {
        let own = Attribute::new(n, v_star.at(n));
        let mut items = Vec::with_capacity(params.items_per_server());
        for k in 1..=params.n_values() as u16 {
            for j in (1..=n_servers).filter(|&j| j != n) {
                if faults.skip_matched_value && k == v_star.at(j) {
                    continue;
                }
                let type_id = TypeId::new(own, Attribute::new(j, k), params)?;
                let beta = items.len();
                if let Some(&(m, alpha)) = emitted.get(&type_id) {
                    let first: &QueryItem = &queries[m - 1][alpha];
                    let refs = first.refs.clone();
                    let mut coeffs = first.coeffs.clone();
                    let gamma = refs
                        .iter()
                        .position(|r| r.policy == v_star)
                        .expect("matched type contains the desired policy");
                    coeffs.bits_mut().flip(gamma);
                    plan.pair_chunk.insert((m, n), refs[gamma].chunk);
                    plan.pair_items.insert(
                        (m, n),
                        PairItems {
                            lower_item: alpha,
                            upper_item: beta,
                            gamma,
                        },
                    );
                    items.push(QueryItem {
                        type_id,
                        coeffs,
                        refs,
                    });
                } else {
                    let mut bits = BitString::zeros(params.type_size());
                    rng.fill(&mut bits);
                    if faults.leak_coefficient && beta == 0 {
                        bits.set(0, (v_star.at(2) - 1) % 2 == 1);
                    }
                    let coeffs = CoefficientVector::new(bits, params.type_size())?;
                    let mut refs = Vec::with_capacity(params.type_size());
                    for policy in policies_of_type(&type_id, params) {
                        let taken = used.entry(policy.clone()).or_default();
                        let chunk = if faults.fixed_desired_chunks && policy == v_star {
                            taken.len() as u16 + 1
                        } else {
                            draw_unused(taken, n_chunks, rng)
                        };
                        taken.push(chunk);
                        plan.perm_state
                            .entry(policy.clone())
                            .or_default()
                            .push((type_id, chunk));
                        refs.push(ChunkRef { policy, chunk });
                    }
                    emitted.insert(type_id, (n, beta));
                    items.push(QueryItem {
                        type_id,
                        coeffs,
                        refs,
                    });
                }
            }
        }
        queries.push(items);
    }

    let queries = queries
        .into_iter()
        .zip(credentials)
        .map(|(items, credential)| Query {
            credential: *credential,
            items,
        })
        .collect();
    Ok((queries, plan))
}

// Uniform draw from the chunk indices in [1, n_chunks] not yet taken.
fn draw_unused(taken: &[u16], n_chunks: usize, rng: &mut impl RandomSource) -> u16 {
    let free: Vec<u16> = (1..=n_chunks as u16).filter(|c| !taken.contains(c)).collect();
    assert!(!free.is_empty(), "more appearances than chunks");
    free[rng.below(free.len())]
}

fn check_credentials(v_star: &AccessPolicy, credentials: &[Credential], params: &SystemParams) -> Result<()> {
    if credentials.len() != params.n_servers() {
        return Err(Error::Credential(format!(
            "expected {} credentials, got {}",
            params.n_servers(),
            credentials.len()
        )));
    }
    for (i, c) in credentials.iter().enumerate() {
        if c.position != i + 1 || c.value != v_star.at(i + 1) {
            return Err(Error::Credential(format!(
                "credential {} is for ({}, {}), need ({}, {})",
                i + 1,
                c.position,
                c.value,
                i + 1,
                v_star.at(i + 1)
            )));
        }
    }
    Ok(())
}

/// Recovers `W^{v*}` from all `N` answers.
pub fn decode(plan: &RetrievalPlan, answers: &[Answer], params: &SystemParams) -> Result<Message> {
    if answers.len() != params.n_servers() {
        return Err(Error::Length {
            what: "answers",
            expected: params.n_servers(),
            actual: answers.len(),
        });
    }
    let mut accepted = Vec::with_capacity(answers.len());
    for (i, answer) in answers.iter().enumerate() {
        match answer {
            Answer::Rejected(reason) => {
                return Err(Error::Rejected {
                    server: i + 1,
                    reason: *reason,
                })
            }
            Answer::Items(items) => {
                if items.len() != params.items_per_server() {
                    return Err(Error::MalformedAnswer {
                        server: i + 1,
                        detail: format!("{} items, expected {}", items.len(), params.items_per_server()),
                    });
                }
                accepted.push(items);
            }
        }
    }

    let mut chunks: Vec<Option<Chunk>> = vec![None; params.n_chunks()];
    for (&(m, n), pair) in &plan.pair_items {
        let index = plan.pair_chunk[&(m, n)] as usize;
        let mut chunk = accepted[m - 1][pair.lower_item].clone();
        chunk.xor_in(&accepted[n - 1][pair.upper_item])?;
        chunks[index - 1] = Some(chunk);
    }
    let chunks = chunks
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| Error::InvalidArgument(format!("plan never recovers chunk {}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    join_chunks(&chunks, params)
}
