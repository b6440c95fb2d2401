//! System setup: the replicated message database, one independent pad per
//! message type, and per-server credential registration.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::message::{split_message, Chunk, Message};
use crate::params::SystemParams;
use crate::policy::{enumerate_types, AccessPolicy, Attribute, TypeId};
use crate::rng::{RandomSource, Rng};

pub const TOKEN_LEN: usize = 16;

/// The database every server holds: one `L`-bit message per policy, kept in
/// canonical policy order together with its pre-cut chunks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageDatabase {
    params: SystemParams,
    messages: Vec<Message>,
    chunks: Vec<Vec<Chunk>>,
}

impl MessageDatabase {
    /// `messages` must be in canonical policy order.
    pub fn from_messages(params: SystemParams, messages: Vec<Message>) -> Result<Self> {
        if messages.len() != params.n_policies() {
            return Err(Error::Length {
                what: "database",
                expected: params.n_policies(),
                actual: messages.len(),
            });
        }
        let chunks = messages
            .iter()
            .map(|m| split_message(m, &params))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            messages,
            chunks,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn message(&self, policy: &AccessPolicy) -> &Message {
        &self.messages[policy.index(&self.params)]
    }

    /// Chunk `index` (1-based) of the message labeled `policy`.
    pub fn chunk(&self, policy: &AccessPolicy, index: usize) -> &Chunk {
        &self.chunks[policy.index(&self.params)][index - 1]
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// Pads shared by all servers, one per type, in canonical type order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommonRandomness {
    params: SystemParams,
    pads: Vec<Chunk>,
}

impl CommonRandomness {
    /// `pads` must be in canonical type order.
    pub fn from_pads(params: SystemParams, pads: Vec<Chunk>) -> Result<Self> {
        if pads.len() != params.n_types() {
            return Err(Error::Length {
                what: "pad count",
                expected: params.n_types(),
                actual: pads.len(),
            });
        }
        if let Some(bad) = pads.iter().find(|p| p.len() != params.chunk_len_bits()) {
            return Err(Error::Length {
                what: "pad",
                expected: params.chunk_len_bits(),
                actual: bad.len(),
            });
        }
        Ok(Self { params, pads })
    }

    pub fn pad(&self, t: &TypeId) -> &Chunk {
        &self.pads[t.index(&self.params)]
    }

    pub fn pads(&self) -> &[Chunk] {
        &self.pads
    }

    pub fn iter(&self) -> impl Iterator<Item = (TypeId, &Chunk)> {
        enumerate_types(&self.params).into_iter().zip(&self.pads)
    }

    pub fn len(&self) -> usize {
        self.pads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pads.is_empty()
    }

    pub fn total_bits(&self) -> usize {
        self.pads.iter().map(Chunk::len).sum()
    }
}

/// Builds the database and deals one fresh pad per type.
///
/// With `contents`, every policy needs an entry of at most `L` bits; shorter
/// entries are zero-padded at the end. Without it, messages are uniform.
pub fn setup(
    params: SystemParams,
    contents: Option<&BTreeMap<AccessPolicy, BitString>>,
    rng: &Rng,
) -> Result<(MessageDatabase, CommonRandomness)> {
    let l = params.msg_len_bits();
    let mut message_rng = rng.substream("dealer/messages", 0);
    let messages = (0..params.n_policies())
        .map(|i| {
            let policy = AccessPolicy::from_index(i, &params);
            match contents {
                Some(map) => {
                    let bits = map
                        .get(&policy)
                        .ok_or_else(|| Error::MissingContent(policy.to_string()))?;
                    if bits.len() > l {
                        return Err(Error::Length {
                            what: "message content",
                            expected: l,
                            actual: bits.len(),
                        });
                    }
                    let padded = BitString::concat([bits, &BitString::zeros(l - bits.len())]);
                    Message::new(padded, l)
                }
                None => {
                    let mut bits = BitString::zeros(l);
                    message_rng.fill(&mut bits);
                    Message::new(bits, l)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(map) = contents {
        if map.len() != params.n_policies() {
            return Err(Error::InvalidArgument(format!(
                "contents has {} entries for {} policies",
                map.len(),
                params.n_policies()
            )));
        }
    }
    let db = MessageDatabase::from_messages(params, messages)?;
    let pads = deal_pads(params, &mut rng.substream("dealer/pads", 0));
    let k = params.n_values();
    assert_eq!(pads.total_bits(), k * k * l, "common randomness is K^2 L bits");
    Ok((db, pads))
}

pub(crate) fn deal_pads(params: SystemParams, rng: &mut impl RandomSource) -> CommonRandomness {
    let pads = (0..params.n_types())
        .map(|_| {
            let mut bits = BitString::zeros(params.chunk_len_bits());
            rng.fill(&mut bits);
            Chunk::new(bits, params.chunk_len_bits()).expect("pad length")
        })
        .collect();
    CommonRandomness { params, pads }
}

/// Opaque bearer token issued by the dealer.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(pub [u8; TOKEN_LEN]);

impl Token {
    pub fn random(rng: &mut Rng) -> Self {
        let mut bytes = [0u8; TOKEN_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Credential(format!("bad token hex: {e}")))?;
        let arr: [u8; TOKEN_LEN] = bytes
            .try_into()
            .map_err(|_| Error::Credential("token must be 16 bytes".into()))?;
        Ok(Self(arr))
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token({})", self.to_hex())
    }
}

impl Serialize for Token {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Token::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Proof of one attribute, presented to the server checking that position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Credential {
    pub position: usize,
    pub value: u16,
    pub token: Token,
}

/// A server's registration table. Every entry names that server's position.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenTable {
    entries: HashMap<Token, Attribute>,
}

impl TokenTable {
    pub fn register(&mut self, token: Token, attr: Attribute) {
        self.entries.insert(token, attr);
    }

    pub fn lookup(&self, token: &Token) -> Option<Attribute> {
        self.entries.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, &Attribute)> {
        self.entries.iter()
    }
}

/// Issues credentials and keeps one registration table per server.
#[derive(Clone, Debug)]
pub struct CredentialAuthority {
    params: SystemParams,
    tables: Vec<TokenTable>,
}

impl CredentialAuthority {
    pub fn new(params: SystemParams) -> Self {
        Self {
            params,
            tables: vec![TokenTable::default(); params.n_servers()],
        }
    }

    /// One credential per position; token `n` is registered with server `n` only.
    pub fn issue_credentials(&mut self, user: &AccessPolicy, rng: &mut Rng) -> Result<Vec<Credential>> {
        let user = AccessPolicy::new(user.values().to_vec(), &self.params)?;
        Ok((1..=self.params.n_servers())
            .map(|pos| {
                let token = Token::random(rng);
                let value = user.at(pos);
                self.tables[pos - 1].register(token, Attribute::new(pos, value));
                Credential {
                    position: pos,
                    value,
                    token,
                }
            })
            .collect())
    }

    /// Registration table of server `index` (1-based).
    pub fn table(&self, index: usize) -> &TokenTable {
        &self.tables[index - 1]
    }

    pub fn into_tables(self) -> Vec<TokenTable> {
        self.tables
    }
}

/// Everything one deployment needs, shared read-only by all servers.
#[derive(Clone, Debug)]
pub struct Deployment {
    pub params: SystemParams,
    pub db: Arc<MessageDatabase>,
    pub pads: Arc<CommonRandomness>,
    pub authority: CredentialAuthority,
}

impl Deployment {
    pub fn new(params: SystemParams, rng: &Rng) -> Result<Self> {
        let (db, pads) = setup(params, None, rng)?;
        Ok(Self {
            params,
            db: Arc::new(db),
            pads: Arc::new(pads),
            authority: CredentialAuthority::new(params),
        })
    }
}
