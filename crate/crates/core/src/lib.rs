//! Distributed attribute-based private access control (DAPAC) over GF(2).
//!
//! A dealer stores `K^N` messages, one per access policy, at each of `N`
//! servers and hands them shared one-time pads. Server `n` verifies only
//! attribute `n` of a user. With one query per server the user recovers the
//! message whose policy equals their full attribute vector, at rate
//! `1/(2K)`, while no single server learns the other attributes and the
//! user learns nothing about any other message.

pub mod analysis;
pub mod baseline;
pub mod bits;
pub mod client;
pub mod dealer;
pub mod error;
pub mod message;
pub mod net;
pub mod params;
pub mod policy;
pub mod rng;
pub mod server;
pub mod session;
pub mod wire;

pub use bits::BitString;
pub use client::{decode, generate_queries, ChunkRef, Query, QueryItem, RetrievalPlan};
pub use dealer::{setup, CommonRandomness, Credential, Deployment, MessageDatabase, Token};
pub use error::{Error, Result};
pub use message::{Chunk, CoefficientVector, Message};
pub use params::SystemParams;
pub use policy::{AccessPolicy, Attribute, TypeId};
pub use rng::{RandomSource, Rng};
pub use server::{Answer, Rejection, ServerState};
