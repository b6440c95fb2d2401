//! Naive comparison scheme: every message is split into `N` XOR shares, one
//! per server, and the user downloads every share its attribute unlocks.
//!
//! A message gathers all `N` shares only if the user matches it everywhere,
//! so everything else stays hidden, at rate `1/(N K^(N-1))`.

use std::sync::Arc;

use crate::bits::BitString;
use crate::dealer::{Credential, MessageDatabase, TokenTable};
use crate::error::{Error, Result};
use crate::message::Message;
use crate::params::SystemParams;
use crate::policy::{enumerate_policies, AccessPolicy};
use crate::rng::RandomSource;
use crate::server::Rejection;

/// `shares[n-1][policy index]` is server `n`'s share of that message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareDatabase {
    params: SystemParams,
    shares: Vec<Vec<Message>>,
}

impl ShareDatabase {
    pub fn from_shares(params: SystemParams, shares: Vec<Vec<Message>>) -> Result<Self> {
        if shares.len() != params.n_servers() {
            return Err(Error::Length {
                what: "share groups",
                expected: params.n_servers(),
                actual: shares.len(),
            });
        }
        for group in &shares {
            if group.len() != params.n_policies() {
                return Err(Error::Length {
                    what: "shares",
                    expected: params.n_policies(),
                    actual: group.len(),
                });
            }
            if let Some(bad) = group.iter().find(|m| m.len() != params.msg_len_bits()) {
                return Err(Error::Length {
                    what: "share",
                    expected: params.msg_len_bits(),
                    actual: bad.len(),
                });
            }
        }
        Ok(Self { params, shares })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn share(&self, server: usize, policy: &AccessPolicy) -> &Message {
        &self.shares[server - 1][policy.index(&self.params)]
    }

    pub fn server_shares(&self, server: usize) -> &[Message] {
        &self.shares[server - 1]
    }

    pub fn groups(&self) -> &[Vec<Message>] {
        &self.shares
    }
}

/// `N-1` uniform shares per message plus one that completes the XOR.
pub fn naive_setup(db: &MessageDatabase, rng: &mut impl RandomSource) -> ShareDatabase {
    let params = *db.params();
    let n = params.n_servers();
    let mut shares = vec![Vec::with_capacity(params.n_policies()); n];
    for m in db.messages() {
        let mut last = m.bits().clone();
        for group in shares.iter_mut().take(n - 1) {
            let mut s = BitString::zeros(params.msg_len_bits());
            rng.fill(&mut s);
            last ^= &s;
            group.push(Message::new(s, params.msg_len_bits()).expect("length"));
        }
        shares[n - 1].push(Message::new(last, params.msg_len_bits()).expect("length"));
    }
    ShareDatabase { params, shares }
}

#[derive(Clone, Debug)]
pub struct ShareServer {
    index: usize,
    shares: Arc<ShareDatabase>,
    tokens: TokenTable,
}

impl ShareServer {
    pub fn new(index: usize, shares: Arc<ShareDatabase>, tokens: TokenTable) -> Result<Self> {
        shares.params().check_position(index)?;
        Ok(Self { index, shares, tokens })
    }

    /// Every share whose policy has the verified value at this position,
    /// in policy-index order.
    pub fn answer(&self, credential: &Credential) -> Result<Vec<(AccessPolicy, Message)>, Rejection> {
        let attr = self.tokens.lookup(&credential.token).ok_or(Rejection::UnknownToken)?;
        if credential.position != self.index || attr.position() != self.index {
            return Err(Rejection::PositionMismatch);
        }
        if attr.value != credential.value {
            return Err(Rejection::ValueMismatch);
        }
        let params = self.shares.params();
        Ok(enumerate_policies(params)
            .into_iter()
            .filter(|p| p.at(self.index) == attr.value)
            .map(|p| {
                let s = self.shares.share(self.index, &p).clone();
                (p, s)
            })
            .collect())
    }
}

/// Downloads every accessible share from every server and XORs the `N`
/// shares of `v_star`. Returns the message and the downloaded bit count.
pub fn naive_retrieve(
    v_star: &AccessPolicy,
    credentials: &[Credential],
    servers: &[ShareServer],
) -> Result<(Message, usize)> {
    let Some(first) = servers.first() else {
        return Err(Error::InvalidArgument("no share servers".into()));
    };
    let params = *first.shares.params();
    if servers.len() != params.n_servers() || credentials.len() != params.n_servers() {
        return Err(Error::Credential("need one credential and one server per position".into()));
    }
    let mut acc = BitString::zeros(params.msg_len_bits());
    let mut download = 0;
    for (i, (server, cred)) in servers.iter().zip(credentials).enumerate() {
        let got = server
            .answer(cred)
            .map_err(|reason| Error::Rejected { server: i + 1, reason })?;
        download += got.iter().map(|(_, s)| s.len()).sum::<usize>();
        let (_, share) = got
            .iter()
            .find(|(p, _)| p == v_star)
            .ok_or_else(|| Error::Credential(format!("server {} does not grant {v_star}", i + 1)))?;
        acc ^= share.bits();
    }
    Ok((Message::new(acc, params.msg_len_bits())?, download))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::{setup, CredentialAuthority};
    use crate::rng::{enumerate, Rng};
    use num_rational::BigRational;
    use std::collections::BTreeMap;

    fn servers(shares: ShareDatabase, authority: &CredentialAuthority) -> Vec<ShareServer> {
        let shares = Arc::new(shares);
        (1..=shares.params().n_servers())
            .map(|n| ShareServer::new(n, Arc::clone(&shares), authority.table(n).clone()).unwrap())
            .collect()
    }

    #[test]
    fn shares_reconstruct_every_message() {
        let params = SystemParams::new(3, 2, 3).unwrap();
        let rng = Rng::labeled(4, "dealer");
        let (db, _) = setup(params, None, &rng).unwrap();
        let shares = naive_setup(&db, &mut rng.substream("shares", 0));
        for p in enumerate_policies(&params) {
            let mut acc = BitString::zeros(3);
            for n in 1..=3 {
                assert_eq!(shares.share(n, &p).len(), 3);
                acc ^= shares.share(n, &p).bits();
            }
            assert_eq!(&acc, db.message(&p).bits());
        }
    }

    #[test]
    fn retrieval_downloads_every_accessible_share() {
        let params = SystemParams::new(3, 2, 3).unwrap();
        let rng = Rng::labeled(9, "dealer");
        let (db, _) = setup(params, None, &rng).unwrap();
        let mut authority = CredentialAuthority::new(params);
        let v = AccessPolicy::new(vec![1, 2, 2], &params).unwrap();
        let creds = authority.issue_credentials(&v, &mut rng.substream("creds", 0)).unwrap();
        let servers = servers(naive_setup(&db, &mut rng.substream("shares", 0)), &authority);
        let (m, bits) = naive_retrieve(&v, &creds, &servers).unwrap();
        assert_eq!(&m, db.message(&v));
        assert_eq!(bits, 12 * 3);

        let mut bad = creds.clone();
        bad[1].value = 1;
        assert!(matches!(
            naive_retrieve(&v, &bad, &servers),
            Err(Error::Rejected { server: 2, reason: Rejection::ValueMismatch })
        ));
    }

    // over all setup randomness, each single server's share vector is
    // uniform on {0,1}^4 regardless of the messages
    #[test]
    fn single_server_shares_are_uniform() {
        let params = SystemParams::new(2, 2, 1).unwrap();
        for contents in 0u8..16 {
            let messages = (0..4)
                .map(|i| Message::new(BitString::from_bits(&[contents >> i & 1 == 1]), 1).unwrap())
                .collect();
            let db = MessageDatabase::from_messages(params, messages).unwrap();
            for server in 1..=2 {
                let outcomes = enumerate(64, |r| {
                    let s = naive_setup(&db, r);
                    s.server_shares(server).iter().map(|m| m.bits().get(0)).collect::<Vec<_>>()
                })
                .unwrap();
                let mut dist: BTreeMap<Vec<bool>, BigRational> = BTreeMap::new();
                for (v, p) in outcomes {
                    *dist.entry(v).or_insert_with(|| BigRational::from_integer(0.into())) += p;
                }
                assert_eq!(dist.len(), 16);
                let sixteenth = BigRational::new(1.into(), 16.into());
                assert!(dist.values().all(|p| *p == sixteenth));
            }
        }
    }
}
