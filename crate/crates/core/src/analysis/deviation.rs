//! A client that holds valid credentials for `v*` but, at one server,
//! sends the query it would have sent for some other `v_bar` agreeing with
//! `v*` there. The server cannot tell, but the answers no longer align with
//! the plan for `v*`, so the user should not recover `W^{v*}`.

use serde::Serialize;

use crate::client::{decode, generate_queries};
use crate::dealer::Deployment;
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::policy::AccessPolicy;
use crate::rng::Rng;
use crate::server::ServerState;

#[derive(Clone, Debug, Serialize)]
pub struct DeviationReport {
    pub v_star: AccessPolicy,
    pub v_bar: AccessPolicy,
    pub server: usize,
    pub trials: usize,
    /// Trials in which the decoded message equaled `W^{v*}` exactly.
    pub recovered: usize,
}

impl DeviationReport {
    /// The user cannot reliably recover: exact recovery in under half the trials.
    pub fn recovery_fails(&self) -> bool {
        self.recovered * 2 < self.trials
    }

    pub fn recovery_succeeds(&self) -> bool {
        self.recovered == self.trials
    }
}

/// Runs `trials` sessions on fresh random deployments. In each, the client
/// builds its honest queries and plan for `v_star` and, from a copy of the
/// same random stream, the queries for `v_bar`; server `server` receives
/// the latter. With `v_bar = v_star` this is the honest protocol.
pub fn deviating_client_check(
    params: &SystemParams,
    v_star: &AccessPolicy,
    v_bar: &AccessPolicy,
    server: usize,
    trials: usize,
    seed: u64,
) -> Result<DeviationReport> {
    params.check_position(server)?;
    let v_star = AccessPolicy::new(v_star.values().to_vec(), params)?;
    let v_bar = AccessPolicy::new(v_bar.values().to_vec(), params)?;
    if v_bar.at(server) != v_star.at(server) {
        return Err(Error::InvalidArgument(format!(
            "{v_bar} and {v_star} differ at the deviating server's position {server}"
        )));
    }
    let root = Rng::labeled(seed, "analysis/deviation");
    let mut recovered = 0;
    for t in 0..trials as u64 {
        let trial = root.substream("trial", t);
        let mut dep = Deployment::new(*params, &trial.substream("dealer", 0))?;
        let mut cred_rng = trial.substream("credentials", 0);
        let creds = dep.authority.issue_credentials(&v_star, &mut cred_rng)?;
        let bar_creds = dep.authority.issue_credentials(&v_bar, &mut cred_rng)?;

        let client = trial.substream("client", 0);
        let (mut queries, plan) = generate_queries(&v_star, &creds, params, &mut client.clone())?;
        let (mut fake, _) = generate_queries(&v_bar, &bar_creds, params, &mut client.clone())?;
        let mut deviant = fake.swap_remove(server - 1);
        // the credential presented is the user's own; it carries the same value
        deviant.credential = creds[server - 1];
        queries[server - 1] = deviant;

        let answers: Vec<_> = queries
            .iter()
            .enumerate()
            .map(|(i, q)| ServerState::from_deployment(&dep, i + 1).answer_query(q))
            .collect();
        if let Ok(m) = decode(&plan, &answers, params) {
            if &m == dep.db.message(&v_star) {
                recovered += 1;
            }
        }
    }
    Ok(DeviationReport {
        v_star,
        v_bar,
        server,
        trials,
        recovered,
    })
}

fn other_value(v: u16, k: usize) -> u16 {
    v % k as u16 + 1
}

/// The two deviations considered at `server`: (i) `v_bar` shares only
/// position `server` with `v_star`; (ii) it also shares the first other
/// position.
pub fn deviation_cases(params: &SystemParams, v_star: &AccessPolicy, server: usize) -> (AccessPolicy, AccessPolicy) {
    let k = params.n_values();
    let flip_all: Vec<u16> = (1..=params.n_servers())
        .map(|j| if j == server { v_star.at(j) } else { other_value(v_star.at(j), k) })
        .collect();
    let keep = (1..=params.n_servers()).find(|&j| j != server).expect("N >= 2");
    let mut case_ii = flip_all.clone();
    case_ii[keep - 1] = v_star.at(keep);
    (
        AccessPolicy::new(flip_all, params).expect("valid values"),
        AccessPolicy::new(case_ii, params).expect("valid values"),
    )
}
