use serde::Serialize;
use serde_json::Value;

use crate::params::SystemParams;

/// One line of a JSON-lines check log.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub check: String,
    pub params: SystemParams,
    pub verdict: bool,
    pub metrics: Value,
    pub seed: u64,
}

impl Report {
    pub fn new(check: &str, params: SystemParams, verdict: bool, metrics: impl Serialize, seed: u64) -> Self {
        Self {
            check: check.to_owned(),
            params,
            verdict,
            metrics: serde_json::to_value(metrics).unwrap_or(Value::Null),
            seed,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}
