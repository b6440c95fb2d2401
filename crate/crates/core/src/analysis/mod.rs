//! Verification harness: rate accounting and executable checks for
//! correctness, secrecy of the other messages, privacy of the hidden
//! attributes, and misbehaving clients.
//!
//! The information-theoretic conditions are checked as distribution
//! equalities: exactly where the randomness can be enumerated, by sampled
//! total-variation distance otherwise. Each check can run against a
//! deliberately broken client or server to show it notices.

mod accounting;
mod deviation;
mod privacy;
mod report;
mod secrecy;

pub use accounting::{expected_download, measure, Exchange, Measurement, Scheme, Transcript};
pub use deviation::{deviating_client_check, deviation_cases, DeviationReport};
pub use privacy::{
    hidden_settings, privacy_distribution_test, privacy_distribution_test_with, privacy_exhaustive_tv,
    privacy_structural_check, privacy_verdict, structural_check_with, ExhaustiveTv, PairTv, PrivacyReport,
    PrivacyVerdict, DEFAULT_SAMPLES, MIN_SAMPLES, TV_THRESHOLD,
};
pub use report::Report;
pub use secrecy::{secrecy_bruteforce, secrecy_bruteforce_with, SecrecyBudget, SecrecyReport};

use crate::client::ClientFaults;
use crate::dealer::{Credential, Token, TOKEN_LEN};
use crate::policy::AccessPolicy;
use crate::server::ServerFaults;

/// Client-side protocol violations the privacy checks must detect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClientMutation {
    Honest,
    /// One coefficient bit carries the parity of `v*_2`.
    LeakCoefficient,
    /// The desired message's chunk indices are handed out in order, not permuted.
    FixedDesiredChunks,
    /// The `k = v*_j` iterations are skipped, so the type list depends on `v*`.
    SkipMatchedValue,
}

impl ClientMutation {
    pub const ALL: [ClientMutation; 4] = [
        ClientMutation::Honest,
        ClientMutation::LeakCoefficient,
        ClientMutation::FixedDesiredChunks,
        ClientMutation::SkipMatchedValue,
    ];

    pub(crate) fn faults(self) -> ClientFaults {
        ClientFaults {
            leak_coefficient: self == ClientMutation::LeakCoefficient,
            fixed_desired_chunks: self == ClientMutation::FixedDesiredChunks,
            skip_matched_value: self == ClientMutation::SkipMatchedValue,
        }
    }
}

/// Server-side violations the secrecy check must detect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ServerMutation {
    Honest,
    /// Two items of a query are masked with the same pad.
    ReusePad,
    /// Answers are sent unmasked.
    OmitPads,
}

impl ServerMutation {
    pub const ALL: [ServerMutation; 3] = [ServerMutation::Honest, ServerMutation::ReusePad, ServerMutation::OmitPads];

    pub(crate) fn faults(self) -> ServerFaults {
        ServerFaults {
            reuse_pad: self == ServerMutation::ReusePad,
            omit_pads: self == ServerMutation::OmitPads,
        }
    }
}

// Query generation only checks that credentials match `v`; analyzers that
// never talk to a server use blank tokens.
pub(crate) fn blank_credentials(v: &AccessPolicy) -> Vec<Credential> {
    v.values()
        .iter()
        .enumerate()
        .map(|(i, &value)| Credential {
            position: i + 1,
            value,
            token: Token([0; TOKEN_LEN]),
        })
        .collect()
}
