//! Server side: contributes identifiers and evaluates aggregates under the
//! client's public keys, which it can use but never open.

use std::collections::HashSet;

use rand::{CryptoRng, RngCore};

use super::dataset::Dataset;
use super::messages::{
    BfvEvaluationKeys, ClientRoundOne, EncryptedValue, ServerResult, ServerShuffledSet,
    StartRequest, PROTOCOL_VERSION,
};
use super::spec::{AggregationSpec, Limits, Operator, MAX_COLUMNS};
use super::{ProtocolError, ValidationError};
use crate::bfv::{self, BfvCiphertext};
use crate::cipher::{self, GroupScalar};
use crate::paillier::{PaillierCiphertext, PaillierPublicKey};

const PAILLIER_BITS_ACCEPTED: [u64; 3] = [512, 1024, 2048];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitingRoundOne,
    Done,
    Failed,
}

#[derive(Debug)]
pub struct ServerState {
    phase: Phase,
    key: GroupScalar,
    spec: AggregationSpec,
    paillier: Option<PaillierPublicKey>,
    bfv: Option<BfvEvaluationKeys>,
    server_set_len: usize,
    limits: Limits,
    cardinality: Option<u64>,
}

enum Bound {
    Paillier(PaillierCiphertext),
    Bfv(BfvCiphertext),
}

/// Checks the request and answers with the server's blinded, shuffled ids.
pub fn server_on_start<R: RngCore + CryptoRng>(
    ds: &Dataset,
    request: StartRequest,
    limits: &Limits,
    rng: &mut R,
) -> Result<(ServerState, ServerShuffledSet), ProtocolError> {
    if request.version != PROTOCOL_VERSION {
        return Err(ProtocolError::UnsupportedVersion(request.version));
    }
    let columns = request.column_count as usize;
    if columns == 0 || columns > MAX_COLUMNS {
        return Err(ValidationError::ColumnMismatch("column count outside 1..=4").into());
    }
    request.spec.check_columns(columns)?;
    if request.spec.needs_paillier() != request.paillier.is_some()
        || request.spec.needs_bfv() != request.bfv.is_some()
    {
        return Err(ProtocolError::MalformedMessage(
            "key families do not match the spec",
        ));
    }
    if let Some(pk) = &request.paillier {
        if !PAILLIER_BITS_ACCEPTED.contains(&pk.bits()) {
            return Err(ValidationError::UnsupportedKey("paillier modulus size").into());
        }
    }
    if let Some(keys) = &request.bfv {
        if *keys.public.params() != bfv::params_default() {
            return Err(ValidationError::UnsupportedKey("bfv parameters").into());
        }
    }

    let key = cipher::keygen(rng).map_err(|_| ProtocolError::RngError)?;
    let elements = ds
        .ids()
        .map(|id| cipher::encrypt(&key, id))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| ProtocolError::MalformedMessage("server identifier"))?;
    let state = ServerState {
        phase: Phase::AwaitingRoundOne,
        key,
        spec: request.spec,
        paillier: request.paillier,
        bfv: request.bfv,
        server_set_len: elements.len(),
        limits: *limits,
        cardinality: None,
    };
    Ok((
        state,
        ServerShuffledSet {
            elements: cipher::shuffle(elements, rng),
        },
    ))
}

impl ServerState {
    /// The server's commutative-cipher exponent.
    pub fn cipher_key(&self) -> &GroupScalar {
        &self.key
    }

    pub fn spec(&self) -> &AggregationSpec {
        &self.spec
    }

    /// Intersection size, once round two has completed.
    pub fn cardinality(&self) -> Option<u64> {
        self.cardinality
    }

    pub fn round_two<R: RngCore + CryptoRng>(
        &mut self,
        msg: &ClientRoundOne,
        rng: &mut R,
    ) -> Result<ServerResult, ProtocolError> {
        if self.phase != Phase::AwaitingRoundOne {
            return Err(ProtocolError::PhaseViolation);
        }
        let result = self.aggregate(msg, rng);
        self.phase = match result {
            Ok(_) => Phase::Done,
            Err(_) => Phase::Failed,
        };
        result
    }

    fn aggregate<R: RngCore + CryptoRng>(
        &mut self,
        msg: &ClientRoundOne,
        rng: &mut R,
    ) -> Result<ServerResult, ProtocolError> {
        if msg.server_elements.len() != self.server_set_len {
            return Err(ProtocolError::MalformedMessage("server set size changed"));
        }
        if msg.rows.len() > self.limits.max_records {
            return Err(ValidationError::TooManyRecords {
                count: msg.rows.len(),
                max: self.limits.max_records,
            }
            .into());
        }
        let mut double_server = HashSet::with_capacity(msg.server_elements.len());
        for e in &msg.server_elements {
            if !double_server.insert(e.to_bytes()) {
                return Err(ProtocolError::MalformedMessage("duplicate server element"));
            }
        }

        // Bind every row before touching any aggregate so a bad row anywhere
        // aborts the whole round.
        let mut seen = HashSet::with_capacity(msg.rows.len());
        let mut matched: Vec<Vec<Bound>> = Vec::new();
        for row in &msg.rows {
            let double = cipher::reencrypt(&self.key, &row.id).to_bytes();
            if !seen.insert(double) {
                return Err(ProtocolError::MalformedMessage("duplicate identifier"));
            }
            if row.values.len() != self.spec.len() {
                return Err(ProtocolError::MalformedMessage("row width"));
            }
            let bound = self
                .spec
                .entries()
                .iter()
                .zip(&row.values)
                .map(|(entry, value)| self.bind(entry.operator, value))
                .collect::<Result<Vec<_>, _>>()?;
            if double_server.contains(&double) {
                matched.push(bound);
            }
        }

        let mut aggregates = Vec::with_capacity(self.spec.len());
        for (i, entry) in self.spec.entries().iter().enumerate() {
            let column = matched.iter().map(|row| &row[i]);
            aggregates.push(match entry.operator {
                Operator::Sum => self.sum_paillier(column, rng)?,
                Operator::SumOfSquares => self.sum_squares_bfv(column, rng)?,
            });
        }
        let cardinality = matched.len() as u64;
        self.cardinality = Some(cardinality);
        Ok(ServerResult {
            cardinality,
            aggregates,
        })
    }

    fn bind(&self, operator: Operator, value: &EncryptedValue) -> Result<Bound, ProtocolError> {
        match (operator, value) {
            (Operator::Sum, EncryptedValue::Paillier(bytes)) => {
                let pk = self.paillier.as_ref().expect("checked at start");
                pk.ciphertext_from_bytes(bytes)
                    .map(Bound::Paillier)
                    .map_err(|_| ProtocolError::MalformedMessage("paillier ciphertext"))
            }
            (Operator::SumOfSquares, EncryptedValue::Bfv(raw)) => {
                let keys = self.bfv.as_ref().expect("checked at start");
                BfvCiphertext::from_raw(&keys.public, raw)
                    .map(Bound::Bfv)
                    .map_err(|_| ProtocolError::MalformedMessage("bfv ciphertext"))
            }
            _ => Err(ProtocolError::MalformedMessage("ciphertext scheme")),
        }
    }

    fn sum_paillier<'a, R: RngCore + CryptoRng>(
        &self,
        column: impl Iterator<Item = &'a Bound>,
        rng: &mut R,
    ) -> Result<EncryptedValue, ProtocolError> {
        let pk = self.paillier.as_ref().expect("checked at start");
        let internal = |_| ProtocolError::Internal("paillier aggregation");
        let mut acc = pk.encrypt_u64(0, rng).map_err(internal)?;
        for value in column {
            let Bound::Paillier(ct) = value else {
                unreachable!("bound by operator")
            };
            acc = pk.add(&acc, ct).map_err(internal)?;
        }
        let acc = pk.rerandomize(&acc, rng).map_err(internal)?;
        Ok(EncryptedValue::Paillier(acc.to_bytes()))
    }

    fn sum_squares_bfv<'a, R: RngCore + CryptoRng>(
        &self,
        column: impl Iterator<Item = &'a Bound>,
        rng: &mut R,
    ) -> Result<EncryptedValue, ProtocolError> {
        let keys = self.bfv.as_ref().expect("checked at start");
        let internal = |_| ProtocolError::Internal("bfv aggregation");
        let mut acc: Option<BfvCiphertext> = None;
        for value in column {
            let Bound::Bfv(ct) = value else {
                unreachable!("bound by operator")
            };
            let square = bfv::mul(&keys.relin, ct, ct).map_err(internal)?;
            acc = Some(match acc {
                None => square,
                Some(a) => bfv::add(&a, &square).map_err(internal)?,
            });
        }
        let acc = match acc {
            Some(a) => keys.public.add_zero_rerandomize(&a, rng),
            None => keys.public.encrypt(0, rng),
        }
        .map_err(internal)?;
        Ok(EncryptedValue::Bfv(acc.to_raw()))
    }
}

pub fn server_round_two<R: RngCore + CryptoRng>(
    ss: &mut ServerState,
    msg: &ClientRoundOne,
    rng: &mut R,
) -> Result<ServerResult, ProtocolError> {
    ss.round_two(msg, rng)
}
