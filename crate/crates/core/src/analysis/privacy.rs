//! Privacy of the hidden attributes against a single server.
//!
//! Server `n` knows `v*_n`. For a fixed database and pads the only thing in
//! its query that can depend on the other attributes is the client's
//! randomness, so the checks fix `v*_n`, vary the hidden attributes, and
//! compare what the server sees: the list of requested types (exactly), and
//! the coefficient bits and chunk indices (by enumeration or sampling).

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::{blank_credentials, ClientMutation};
use crate::client::{generate_with_faults, Query};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::policy::{enumerate_policies, AccessPolicy, TypeId};
use crate::rng::{enumerate, RandomSource, Rng};

/// Sampled TV below this counts as indistinguishable.
pub const TV_THRESHOLD: f64 = 0.02;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const MIN_SAMPLES: usize = 10_000;

/// Every `v*` with `v*_server = own_value`, in lexicographic order.
pub fn hidden_settings(params: &SystemParams, server: usize, own_value: u16) -> Vec<AccessPolicy> {
    enumerate_policies(params)
        .into_iter()
        .filter(|p| p.at(server) == own_value)
        .collect()
}

fn query_at<R: RandomSource>(
    v: &AccessPolicy,
    server: usize,
    params: &SystemParams,
    rng: &mut R,
    mutation: ClientMutation,
) -> Query {
    let creds = blank_credentials(v);
    let (mut queries, _) =
        generate_with_faults(v, &creds, params, rng, mutation.faults()).expect("valid user and credentials");
    queries.swap_remove(server - 1)
}

/// True iff, for every own value, all hidden settings produce the same
/// ordered type list at `server`.
pub fn privacy_structural_check(params: &SystemParams, server: usize) -> bool {
    structural_check_with(params, server, ClientMutation::Honest)
}

pub fn structural_check_with(params: &SystemParams, server: usize, mutation: ClientMutation) -> bool {
    (1..=params.n_values() as u16).all(|own| {
        let mut structures = hidden_settings(params, server, own).into_iter().map(|v| {
            // the type list does not read the randomness; any stream will do
            let q = query_at(&v, server, params, &mut Rng::labeled(0, "structure"), mutation);
            q.type_ids()
        });
        let first: Vec<TypeId> = structures.next().expect("at least one setting");
        structures.all(|s| s == first)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairTv {
    pub a: AccessPolicy,
    pub b: AccessPolicy,
    pub tv: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PrivacyReport {
    pub server: usize,
    pub own_value: u16,
    pub samples: usize,
    pub structural_equal: bool,
    /// One entry per unordered pair of hidden settings: the largest TV over
    /// all views.
    pub tv_distances: Vec<PairTv>,
    pub max_tv: f64,
}

impl PrivacyReport {
    /// Symmetric lookup.
    pub fn tv(&self, a: &AccessPolicy, b: &AccessPolicy) -> Option<f64> {
        if a == b {
            return Some(0.0);
        }
        self.tv_distances
            .iter()
            .find(|p| (&p.a == a && &p.b == b) || (&p.a == b && &p.b == a))
            .map(|p| p.tv)
    }

    pub fn passes(&self) -> bool {
        self.structural_equal && self.max_tv < TV_THRESHOLD
    }
}

// Numeric projections of a query: one per item (its coefficient bits) and
// one per accessible message (its chunk indices in item order). Every view
// has a small support, so 10^5 samples estimate its law to within ~0.01 TV.
fn views(q: &Query, server: usize, params: &SystemParams) -> Vec<u64> {
    let items = q.items.len();
    let k = params.n_values();
    let base = params.n_chunks() as u64 + 1;
    let mut out = vec![0u64; items + params.accessible_per_server()];
    for (beta, item) in q.items.iter().enumerate() {
        out[beta] = item
            .coeffs
            .bits()
            .iter()
            .fold(0u64, |acc, b| acc << 1 | b as u64);
        for r in &item.refs {
            // rank among policies with v_n fixed: drop position n's digit
            let rank = r
                .policy
                .values()
                .iter()
                .enumerate()
                .filter(|&(i, _)| i + 1 != server)
                .fold(0usize, |acc, (_, &v)| acc * k + (v as usize - 1));
            let slot = &mut out[items + rank];
            *slot = *slot * base + r.chunk as u64;
        }
    }
    out
}

fn views_fit(params: &SystemParams) -> bool {
    let base = params.n_chunks() as f64 + 1.0;
    params.type_size() <= 63 && base.powi(params.n_servers() as i32 - 1) < 2f64.powi(63)
}

type ViewCounts = Vec<HashMap<u64, u32>>;

fn sample_counts(
    v: &AccessPolicy,
    server: usize,
    params: &SystemParams,
    n_samples: usize,
    stream: &Rng,
    mutation: ClientMutation,
) -> ViewCounts {
    let mut counts: ViewCounts = Vec::new();
    for t in 0..n_samples {
        let mut rng = stream.substream("sample", t as u64);
        let q = query_at(v, server, params, &mut rng, mutation);
        let vs = views(&q, server, params);
        if counts.is_empty() {
            counts = vec![HashMap::new(); vs.len()];
        }
        for (c, x) in counts.iter_mut().zip(vs) {
            *c.entry(x).or_default() += 1;
        }
    }
    counts
}

fn empirical_tv(a: &HashMap<u64, u32>, b: &HashMap<u64, u32>, n: usize) -> f64 {
    let mut diff: i64 = 0;
    for (x, &ca) in a {
        diff += (ca as i64 - b.get(x).copied().unwrap_or(0) as i64).abs();
    }
    for (x, &cb) in b {
        if !a.contains_key(x) {
            diff += cb as i64;
        }
    }
    diff as f64 / (2.0 * n as f64)
}

/// Pairwise sampled TV between hidden settings at `server`, with the
/// server's own attribute fixed to `own_value`. Every sample draws from its
/// own sub-stream of `seed`, so results do not depend on scheduling.
pub fn privacy_distribution_test(
    params: &SystemParams,
    server: usize,
    own_value: u16,
    n_samples: usize,
    seed: u64,
) -> Result<PrivacyReport> {
    privacy_distribution_test_with(params, server, own_value, n_samples, seed, ClientMutation::Honest)
}

pub fn privacy_distribution_test_with(
    params: &SystemParams,
    server: usize,
    own_value: u16,
    n_samples: usize,
    seed: u64,
    mutation: ClientMutation,
) -> Result<PrivacyReport> {
    params.check_position(server)?;
    if own_value == 0 || own_value as usize > params.n_values() {
        return Err(Error::InvalidArgument(format!("own value {own_value} outside [1, {}]", params.n_values())));
    }
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    if !views_fit(params) {
        return Err(Error::TooLarge("query views do not fit in 64 bits".into()));
    }
    let settings = hidden_settings(params, server, own_value);
    let root = Rng::labeled(seed, "analysis/privacy");
    let counts: Vec<ViewCounts> = settings
        .par_iter()
        .enumerate()
        .map(|(i, v)| sample_counts(v, server, params, n_samples, &root.substream("setting", i as u64), mutation))
        .collect();

    let mut tv_distances = Vec::new();
    for i in 0..settings.len() {
        for j in i + 1..settings.len() {
            let tv = counts[i]
                .iter()
                .zip(&counts[j])
                .map(|(a, b)| empirical_tv(a, b, n_samples))
                .fold(0.0, f64::max);
            tv_distances.push(PairTv {
                a: settings[i].clone(),
                b: settings[j].clone(),
                tv,
            });
        }
    }
    let max_tv = tv_distances.iter().map(|p| p.tv).fold(0.0, f64::max);
    Ok(PrivacyReport {
        server,
        own_value,
        samples: n_samples,
        structural_equal: structural_check_with(params, server, mutation),
        tv_distances,
        max_tv,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PrivacyVerdict {
    pub passed: bool,
    pub attempts: Vec<PrivacyReport>,
}

/// Sampled check with one retry: a run at or above the threshold is
/// repeated with ten times the samples on a fresh stream, and that run
/// decides.
pub fn privacy_verdict(
    params: &SystemParams,
    server: usize,
    own_value: u16,
    n_samples: usize,
    seed: u64,
    mutation: ClientMutation,
) -> Result<PrivacyVerdict> {
    let first = privacy_distribution_test_with(params, server, own_value, n_samples, seed, mutation)?;
    if first.passes() || !first.structural_equal {
        return Ok(PrivacyVerdict {
            passed: first.passes(),
            attempts: vec![first],
        });
    }
    let retry_seed = Rng::labeled(seed, "analysis/privacy/retry").next_u64();
    let second = privacy_distribution_test_with(params, server, own_value, 10 * n_samples, retry_seed, mutation)?;
    Ok(PrivacyVerdict {
        passed: second.passes(),
        attempts: vec![first, second],
    })
}

#[derive(Clone, Debug)]
pub struct ExhaustiveTv {
    pub settings: Vec<AccessPolicy>,
    /// `(i, j, tv)` for `i < j`, exact.
    pub pairs: Vec<(usize, usize, BigRational)>,
    pub paths: usize,
}

impl ExhaustiveTv {
    pub fn max(&self) -> BigRational {
        self.pairs
            .iter()
            .map(|(_, _, tv)| tv.clone())
            .max()
            .unwrap_or_else(BigRational::zero)
    }
}

// Everything in a query except the token and the type structure.
fn full_view(q: &Query) -> Vec<u8> {
    let mut out = Vec::new();
    for item in &q.items {
        out.extend_from_slice(&item.coeffs.bits().to_bytes());
        for r in &item.refs {
            out.extend_from_slice(&r.chunk.to_le_bytes());
        }
    }
    out
}

/// Exact TV between the laws of the full view under every pair of hidden
/// settings, by walking all of the client's random choices.
pub fn privacy_exhaustive_tv(
    params: &SystemParams,
    server: usize,
    own_value: u16,
    mutation: ClientMutation,
    max_paths: usize,
) -> Result<ExhaustiveTv> {
    params.check_position(server)?;
    let settings = hidden_settings(params, server, own_value);
    let mut laws = Vec::with_capacity(settings.len());
    let mut paths = 0;
    for v in &settings {
        let outcomes = enumerate(max_paths, |r| full_view(&query_at(v, server, params, r, mutation)))?;
        paths += outcomes.len();
        let mut law: BTreeMap<Vec<u8>, BigRational> = BTreeMap::new();
        for (view, p) in outcomes {
            *law.entry(view).or_insert_with(BigRational::zero) += p;
        }
        laws.push(law);
    }
    let mut pairs = Vec::new();
    for i in 0..laws.len() {
        for j in i + 1..laws.len() {
            pairs.push((i, j, exact_tv(&laws[i], &laws[j])));
        }
    }
    Ok(ExhaustiveTv { settings, pairs, paths })
}

fn exact_tv(a: &BTreeMap<Vec<u8>, BigRational>, b: &BTreeMap<Vec<u8>, BigRational>) -> BigRational {
    let zero = BigRational::zero();
    let mut sum = BigRational::zero();
    for (x, pa) in a {
        sum += (pa - b.get(x).unwrap_or(&zero)).abs();
    }
    for (x, pb) in b {
        if !a.contains_key(x) {
            sum += pb;
        }
    }
    sum / BigRational::from_integer(2.into())
}
