//! One retrieval session end to end: build the queries, send them to all
//! servers at once (in process or over TCP), wait for every answer, decode,
//! and keep a byte-exact transcript.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread;

use crate::analysis::{Exchange, Scheme, Transcript};
use crate::baseline::ShareServer;
use crate::bits::BitString;
use crate::client::{decode, generate_queries, RetrievalPlan};
use crate::dealer::Credential;
use crate::error::{Error, Result};
use crate::message::Message;
use crate::net::{remote_request, ServerHost};
use crate::params::SystemParams;
use crate::policy::AccessPolicy;
use crate::rng::RandomSource;
use crate::server::Answer;
use crate::wire::{answer_from_frame, encode_query, Frame, FrameKind};

#[derive(Clone, Debug)]
pub enum Endpoint {
    Local(Arc<ServerHost>),
    Remote(SocketAddr),
}

impl Endpoint {
    pub fn request(&self, bytes: &[u8]) -> Result<Vec<u8>> {
        match self {
            Endpoint::Local(host) => Ok(host.handle_request(bytes)),
            Endpoint::Remote(addr) => remote_request(addr, bytes),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SessionOutcome {
    pub message: Message,
    pub plan: RetrievalPlan,
    pub answers: Vec<Answer>,
    pub transcript: Transcript,
}

/// `endpoints[i]` must serve position `i + 1`.
pub fn run_session(
    v_star: &AccessPolicy,
    credentials: &[Credential],
    params: &SystemParams,
    endpoints: &[Endpoint],
    rng: &mut impl RandomSource,
) -> Result<SessionOutcome> {
    if endpoints.len() != params.n_servers() {
        return Err(Error::InvalidArgument(format!(
            "{} endpoints for {} servers",
            endpoints.len(),
            params.n_servers()
        )));
    }
    let (queries, plan) = generate_queries(v_star, credentials, params, rng)?;
    let requests = queries
        .iter()
        .map(|q| Ok(Frame::new(FrameKind::Query, encode_query(&q.credential.token, &q.items)?).encode()?))
        .collect::<Result<Vec<_>>>()?;

    let responses: Vec<Result<Vec<u8>>> = thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .iter()
            .zip(&requests)
            .map(|(e, r)| s.spawn(move || e.request(r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("request thread"))
            .collect()
    });

    let mut answers = Vec::with_capacity(responses.len());
    let mut exchanges = Vec::with_capacity(responses.len());
    for (i, (request, response)) in requests.into_iter().zip(responses).enumerate() {
        let response = response?;
        let answer = answer_from_frame(&Frame::decode(&response)?, params)?;
        let items = answer.items().len();
        exchanges.push(Exchange {
            server: i + 1,
            bits_up: 8 * request.len(),
            query: request,
            answer: response,
            accepted: !answer.is_rejected(),
            bits_down: items * params.chunk_len_bits(),
            equations: items,
        });
        answers.push(answer);
    }
    let message = decode(&plan, &answers, params)?;
    Ok(SessionOutcome {
        message,
        plan,
        answers,
        transcript: Transcript {
            scheme: Scheme::Dapac,
            params: *params,
            exchanges,
        },
    })
}

/// Naive-scheme session against in-process share servers. The request is
/// a credential-check frame; the response lists the shares.
pub fn run_naive_session(
    v_star: &AccessPolicy,
    credentials: &[Credential],
    params: &SystemParams,
    servers: &[ShareServer],
) -> Result<(Message, Transcript)> {
    if servers.len() != params.n_servers() || credentials.len() != params.n_servers() {
        return Err(Error::InvalidArgument("need one credential and one server per position".into()));
    }
    let mut acc = BitString::zeros(params.msg_len_bits());
    let mut exchanges = Vec::with_capacity(servers.len());
    for (i, (server, cred)) in servers.iter().zip(credentials).enumerate() {
        let query = Frame::new(FrameKind::CredentialCheck, cred.token.0.to_vec()).encode()?;
        let shares = server
            .answer(cred)
            .map_err(|reason| Error::Rejected { server: i + 1, reason })?;
        let mut payload = (shares.len() as u32).to_le_bytes().to_vec();
        for (policy, share) in &shares {
            if policy == v_star {
                acc ^= share.bits();
            }
            payload.extend_from_slice(&share.bits().to_bytes());
        }
        exchanges.push(Exchange {
            server: i + 1,
            bits_up: 8 * query.len(),
            query,
            answer: Frame::new(FrameKind::Answer, payload).encode()?,
            accepted: true,
            bits_down: shares.iter().map(|(_, s)| s.len()).sum(),
            equations: shares.len(),
        });
    }
    Ok((
        Message::new(acc, params.msg_len_bits())?,
        Transcript {
            scheme: Scheme::Naive,
            params: *params,
            exchanges,
        },
    ))
}
