//! Server side: verify the attribute credential, check that the query asks
//! for exactly one combination of every admissible type, and answer each
//! item with its combination masked by the type's pad.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::client::{Query, QueryItem};
use crate::dealer::{CommonRandomness, Credential, Deployment, MessageDatabase, TokenTable};
use crate::error::{Error, Result};
use crate::message::{xor_combine, Chunk};
use crate::params::SystemParams;
use crate::policy::{AccessPolicy, Attribute, TypeId};

/// Why a server refused to answer. The numeric code travels in reject frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[repr(u8)]
pub enum Rejection {
    UnknownToken = 1,
    PositionMismatch = 2,
    ValueMismatch = 3,
    ItemCount = 4,
    CoefficientLength = 5,
    ChunkIndexRange = 6,
    MalformedPolicy = 7,
    AttributeMismatch = 8,
    IncompleteType = 9,
    DuplicateType = 10,
    TypeLabelMismatch = 11,
}

impl Rejection {
    pub const ALL: [Rejection; 11] = [
        Rejection::UnknownToken,
        Rejection::PositionMismatch,
        Rejection::ValueMismatch,
        Rejection::ItemCount,
        Rejection::CoefficientLength,
        Rejection::ChunkIndexRange,
        Rejection::MalformedPolicy,
        Rejection::AttributeMismatch,
        Rejection::IncompleteType,
        Rejection::DuplicateType,
        Rejection::TypeLabelMismatch,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Rejection::UnknownToken => "unknown-token",
            Rejection::PositionMismatch => "position-mismatch",
            Rejection::ValueMismatch => "value-mismatch",
            Rejection::ItemCount => "item-count",
            Rejection::CoefficientLength => "coefficient-length",
            Rejection::ChunkIndexRange => "chunk-index-range",
            Rejection::MalformedPolicy => "malformed-policy",
            Rejection::AttributeMismatch => "attribute-mismatch",
            Rejection::IncompleteType => "incomplete-type",
            Rejection::DuplicateType => "duplicate-type",
            Rejection::TypeLabelMismatch => "type-label-mismatch",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Either one chunk per query item, aligned with the query, or nothing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Items(Vec<Chunk>),
    Rejected(Rejection),
}

impl Answer {
    pub fn is_rejected(&self) -> bool {
        matches!(self, Answer::Rejected(_))
    }

    pub fn items(&self) -> &[Chunk] {
        match self {
            Answer::Items(items) => items,
            Answer::Rejected(_) => &[],
        }
    }
}

/// Messages read while answering one query, in read order.
pub type AccessLog = Vec<AccessPolicy>;

/// Server-side protocol violations for analyzer sensitivity checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct ServerFaults {
    /// Item 1 is masked with item 0's pad.
    pub reuse_pad: bool,
    /// No item is masked.
    pub omit_pads: bool,
}

#[derive(Clone, Debug)]
pub struct ServerState {
    index: usize,
    params: SystemParams,
    db: Arc<MessageDatabase>,
    pads: Arc<CommonRandomness>,
    tokens: TokenTable,
}

impl ServerState {
    /// `index` is 1-based. Every token entry must name position `index`.
    pub fn new(
        index: usize,
        db: Arc<MessageDatabase>,
        pads: Arc<CommonRandomness>,
        tokens: TokenTable,
    ) -> Result<Self> {
        let params = *db.params();
        params.check_position(index)?;
        if let Some((_, attr)) = tokens.iter().find(|(_, a)| a.position() != index) {
            return Err(Error::Credential(format!(
                "server {index} table holds a token for position {}",
                attr.position()
            )));
        }
        Ok(Self {
            index,
            params,
            db,
            pads,
            tokens,
        })
    }

    pub fn from_deployment(dep: &Deployment, index: usize) -> Self {
        Self::new(
            index,
            Arc::clone(&dep.db),
            Arc::clone(&dep.pads),
            dep.authority.table(index).clone(),
        )
        .expect("deployment tables are per position")
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn tokens(&self) -> &TokenTable {
        &self.tokens
    }

    /// Accepts iff the token was registered here for exactly this value;
    /// returns the verified attribute value.
    pub fn verify_credential(&self, credential: &Credential) -> Result<u16, Rejection> {
        let attr = self.tokens.lookup(&credential.token).ok_or(Rejection::UnknownToken)?;
        if credential.position != self.index || attr.position() != self.index {
            return Err(Rejection::PositionMismatch);
        }
        if attr.value != credential.value {
            return Err(Rejection::ValueMismatch);
        }
        Ok(attr.value)
    }

    /// Structural checks on a query from a user verified to hold `value`.
    /// Returns the type of every item, recomputed from its references.
    pub fn validate_query(&self, query: &Query, value: u16) -> Result<Vec<TypeId>, Rejection> {
        let params = &self.params;
        if query.items.len() != params.items_per_server() {
            return Err(Rejection::ItemCount);
        }
        let mut seen = HashSet::with_capacity(query.items.len());
        let mut types = Vec::with_capacity(query.items.len());
        for item in &query.items {
            let t = self.validate_item(item, value)?;
            if !seen.insert(t) {
                return Err(Rejection::DuplicateType);
            }
            types.push(t);
        }
        Ok(types)
    }

    fn validate_item(&self, item: &QueryItem, value: u16) -> Result<TypeId, Rejection> {
        let params = &self.params;
        let n = self.index;
        if item.coeffs.len() != params.type_size() {
            return Err(Rejection::CoefficientLength);
        }
        if item.refs.len() != params.type_size() {
            return Err(Rejection::IncompleteType);
        }
        for r in &item.refs {
            if r.chunk == 0 || r.chunk as usize > params.n_chunks() {
                return Err(Rejection::ChunkIndexRange);
            }
            let values = r.policy.values();
            if values.len() != params.n_servers()
                || values.iter().any(|&v| v == 0 || v as usize > params.n_values())
            {
                return Err(Rejection::MalformedPolicy);
            }
            if r.policy.at(n) != value {
                return Err(Rejection::AttributeMismatch);
            }
        }

        // the one other position on which every reference agrees
        let first = &item.refs[0].policy;
        let constant: Vec<usize> = (1..=params.n_servers())
            .filter(|&j| j != n && item.refs.iter().all(|r| r.policy.at(j) == first.at(j)))
            .collect();
        let [j] = constant[..] else {
            return Err(Rejection::IncompleteType);
        };
        let distinct: HashSet<&AccessPolicy> = item.refs.iter().map(|r| &r.policy).collect();
        if distinct.len() != params.type_size() {
            return Err(Rejection::IncompleteType);
        }
        let t = TypeId::new(Attribute::new(n, value), Attribute::new(j, first.at(j)), params)
            .map_err(|_| Rejection::IncompleteType)?;
        if t != item.type_id {
            return Err(Rejection::TypeLabelMismatch);
        }
        Ok(t)
    }

    pub fn answer_query(&self, query: &Query) -> Answer {
        self.answer_inner(query, None, ServerFaults::default())
    }

    /// Like [`Self::answer_query`], also returning every message it read.
    pub fn answer_query_logged(&self, query: &Query) -> (Answer, AccessLog) {
        let mut log = Vec::new();
        let answer = self.answer_inner(query, Some(&mut log), ServerFaults::default());
        (answer, log)
    }

    pub(crate) fn answer_with_faults(&self, query: &Query, faults: ServerFaults) -> Answer {
        self.answer_inner(query, None, faults)
    }

    fn answer_inner(&self, query: &Query, log: Option<&mut AccessLog>, faults: ServerFaults) -> Answer {
        let value = match self.verify_credential(&query.credential) {
            Ok(v) => v,
            Err(r) => return Answer::Rejected(r),
        };
        let types = match self.validate_query(query, value) {
            Ok(t) => t,
            Err(r) => return Answer::Rejected(r),
        };
        let mut view = Accessible {
            db: &self.db,
            position: self.index,
            value,
            log,
        };
        Answer::Items(mask_items(&query.items, &types, &mut view, &self.pads, faults))
    }
}

/// The messages `W^{v_n}` a verified user unlocks at server `n`. Reads of
/// anything else panic.
pub(crate) struct Accessible<'a> {
    pub db: &'a MessageDatabase,
    pub position: usize,
    pub value: u16,
    pub log: Option<&'a mut AccessLog>,
}

impl<'a> Accessible<'a> {
    fn chunk(&mut self, policy: &AccessPolicy, index: u16) -> &'a Chunk {
        assert_eq!(
            policy.at(self.position),
            self.value,
            "read outside the accessible message set"
        );
        if let Some(log) = self.log.as_deref_mut() {
            log.push(policy.clone());
        }
        self.db.chunk(policy, index as usize)
    }
}

/// `coeffs . chunks + pad(type)` for every validated item.
pub(crate) fn mask_items(
    items: &[QueryItem],
    types: &[TypeId],
    view: &mut Accessible<'_>,
    pads: &CommonRandomness,
    faults: ServerFaults,
) -> Vec<Chunk> {
    items
        .iter()
        .zip(types)
        .enumerate()
        .map(|(beta, (item, t))| {
            let chunks: Vec<&Chunk> = item.refs.iter().map(|r| view.chunk(&r.policy, r.chunk)).collect();
            let mut out = xor_combine(&item.coeffs, &chunks).expect("validated item");
            if !faults.omit_pads {
                let pad_type = if faults.reuse_pad && beta == 1 { &types[0] } else { t };
                out.xor_in(pads.pad(pad_type)).expect("pad length");
            }
            out
        })
        .collect()
}
