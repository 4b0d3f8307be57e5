//! The two-party intersection protocol as a pair of state machines.
//!
//! ```text
//! client                                   server
//!   StartRequest{spec, public keys}  ───▶
//!                                    ◀───  ServerShuffledSet{H(y)^ks}
//!   ClientRoundOne{H(y)^ks^kc,
//!                  rows (H(x)^kc, Enc(v))} ───▶
//!                                    ◀───  ServerResult{|X∩Y|, Enc(Σ)}
//! ```
//!
//! Aggregates are computed over the client's columns. The client learns the
//! cardinality and the aggregates; the server learns the cardinality.

mod client;
mod dataset;
mod messages;
mod server;
mod spec;

use thiserror::Error;

pub use client::{client_finalize, client_round_one, client_start, ClientOptions, ClientState};
pub use dataset::{Dataset, DatasetError, Record};
pub use messages::{
    BfvEvaluationKeys, ClientRoundOne, ClientRow, EncryptedValue, ServerResult, ServerShuffledSet,
    StartRequest, PROTOCOL_VERSION,
};
pub use server::{server_on_start, server_round_two, ServerState};
pub use spec::{validate_request, AggregationSpec, Limits, Operator, SpecEntry, MAX_COLUMNS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("value {value} exceeds bound {bound}")]
    BoundExceeded { value: u64, bound: u64 },
    #[error("{count} records exceed the limit of {max}")]
    TooManyRecords { count: usize, max: usize },
    #[error("column mismatch: {0}")]
    ColumnMismatch(&'static str),
    #[error("worst-case sum of squares {worst} does not fit below plaintext modulus {modulus}")]
    CapacityExceeded { worst: u128, modulus: u64 },
    #[error("unsupported key: {0}")]
    UnsupportedKey(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("validation failed: {0}")]
    Validation(#[from] ValidationError),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u16),
    #[error("message arrived out of order")]
    PhaseViolation,
    #[error("malformed message: {0}")]
    MalformedMessage(&'static str),
    #[error("peer violated the protocol: {0}")]
    ProtocolViolation(&'static str),
    #[error("aggregate ciphertext exhausted its noise budget")]
    NoiseOverflow,
    #[error("aggregate ciphertext is invalid")]
    InvalidCiphertext,
    #[error("key generation failed: {0}")]
    KeyGeneration(String),
    #[error("internal error: {0}")]
    Internal(&'static str),
    #[error("randomness source failed")]
    RngError,
}

/// What the client learns: intersection size and one exact integer per spec entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolOutput {
    pub cardinality: u64,
    pub aggregates: Vec<(SpecEntry, u128)>,
}

impl ProtocolOutput {
    pub fn get(&self, column: u8, operator: Operator) -> Option<u128> {
        self.aggregates
            .iter()
            .find(|(e, _)| *e == SpecEntry::new(column, operator))
            .map(|&(_, v)| v)
    }

    /// `cardinality=N` followed by one `colC.op=V` line per aggregate.
    pub fn to_lines(&self) -> String {
        let mut out = format!("cardinality={}\n", self.cardinality);
        for (entry, value) in &self.aggregates {
            out.push_str(&format!("{entry}={value}\n"));
        }
        out
    }
}

impl PartialEq<crate::oracle::OracleResult> for ProtocolOutput {
    fn eq(&self, other: &crate::oracle::OracleResult) -> bool {
        self.cardinality == other.cardinality && self.aggregates == other.aggregates
    }
}
