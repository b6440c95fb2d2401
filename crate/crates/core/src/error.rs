use thiserror::Error;

use crate::server::Rejection;
use crate::wire::WireError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("{what}: expected length {expected}, got {actual}")]
    Length {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-zero padding bits in bit string encoding")]
    NonZeroPadding,

    #[error("invalid access policy: {0}")]
    Policy(String),

    #[error("type needs two distinct positions, got {0} twice")]
    SamePosition(usize),

    #[error("missing content for policy {0}")]
    MissingContent(String),

    #[error("credential mismatch: {0}")]
    Credential(String),

    #[error("server {server} rejected the query: {reason}")]
    Rejected { server: usize, reason: Rejection },

    #[error("malformed answer from server {server}: {detail}")]
    MalformedAnswer { server: usize, detail: String },

    #[error("enumeration too large: {0}")]
    TooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("transcript check failed: {0}")]
    Transcript(String),

    #[error(transparent)]
    Wire(#[from] WireError),

    #[error("transport: {0}")]
    Io(#[from] std::io::Error),
}
