//! Client side: owns the data and the homomorphic secret keys.

use num_traits::ToPrimitive;
use rand::{CryptoRng, RngCore};

use super::dataset::Dataset;
use super::messages::{
    BfvEvaluationKeys, ClientRoundOne, ClientRow, EncryptedValue, ServerResult, ServerShuffledSet,
    StartRequest, PROTOCOL_VERSION,
};
use super::spec::{validate_request, AggregationSpec, Limits, Operator, SpecEntry};
use super::{ProtocolError, ProtocolOutput};
use crate::bfv::{self, BfvCiphertext, BfvKeys, BfvParams};
use crate::cipher::{self, GroupScalar};
use crate::paillier::{self, PaillierError, PaillierSecretKey};

/// Key sizes and parameters chosen by the client.
#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub paillier_bits: u64,
    pub bfv_params: BfvParams,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self {
            paillier_bits: paillier::DEFAULT_KEY_BITS,
            bfv_params: bfv::params_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitingShuffledSet,
    AwaitingResult,
    Done,
    Failed,
}

#[derive(Debug)]
pub struct ClientState {
    phase: Phase,
    key: GroupScalar,
    spec: AggregationSpec,
    dataset: Dataset,
    paillier: Option<PaillierSecretKey>,
    bfv: Option<BfvKeys>,
    server_set_len: usize,
}

/// Validates the request, generates fresh keys and builds the opening message.
pub fn client_start<R: RngCore + CryptoRng>(
    spec: &AggregationSpec,
    ds: &Dataset,
    limits: &Limits,
    options: &ClientOptions,
    rng: &mut R,
) -> Result<(ClientState, StartRequest), ProtocolError> {
    validate_request(spec, ds, limits)?;
    let key = cipher::keygen(rng).map_err(|_| ProtocolError::RngError)?;
    let paillier = if spec.needs_paillier() {
        let (_, sk) = paillier::keygen(options.paillier_bits, rng)
            .map_err(|e| ProtocolError::KeyGeneration(e.to_string()))?;
        Some(sk)
    } else {
        None
    };
    let bfv = if spec.needs_bfv() {
        Some(
            bfv::keygen(&options.bfv_params, rng)
                .map_err(|e| ProtocolError::KeyGeneration(e.to_string()))?,
        )
    } else {
        None
    };
    let request = StartRequest {
        version: PROTOCOL_VERSION,
        column_count: ds.columns() as u8,
        spec: spec.clone(),
        paillier: paillier.as_ref().map(|sk| sk.public_key().clone()),
        bfv: bfv.as_ref().map(|k| BfvEvaluationKeys {
            public: k.public.clone(),
            relin: k.relin.clone(),
        }),
    };
    let state = ClientState {
        phase: Phase::AwaitingShuffledSet,
        key,
        spec: spec.clone(),
        dataset: ds.clone(),
        paillier,
        bfv,
        server_set_len: 0,
    };
    Ok((state, request))
}

impl ClientState {
    /// The client's commutative-cipher exponent.
    pub fn cipher_key(&self) -> &GroupScalar {
        &self.key
    }

    pub fn spec(&self) -> &AggregationSpec {
        &self.spec
    }

    /// Re-blinds the server set and sends the client rows, both shuffled.
    pub fn round_one<R: RngCore + CryptoRng>(
        &mut self,
        msg: &ServerShuffledSet,
        rng: &mut R,
    ) -> Result<ClientRoundOne, ProtocolError> {
        if self.phase != Phase::AwaitingShuffledSet {
            return Err(ProtocolError::PhaseViolation);
        }
        let result = self.build_round_one(msg, rng);
        self.phase = match result {
            Ok(_) => Phase::AwaitingResult,
            Err(_) => Phase::Failed,
        };
        result
    }

    fn build_round_one<R: RngCore + CryptoRng>(
        &mut self,
        msg: &ServerShuffledSet,
        rng: &mut R,
    ) -> Result<ClientRoundOne, ProtocolError> {
        self.server_set_len = msg.elements.len();
        let server_elements = msg
            .elements
            .iter()
            .map(|e| cipher::reencrypt(&self.key, e))
            .collect();
        let mut rows = Vec::with_capacity(self.dataset.len());
        for record in self.dataset.records() {
            let id = cipher::encrypt(&self.key, &record.id)
                .map_err(|_| ProtocolError::MalformedMessage("identifier"))?;
            let values = self
                .spec
                .entries()
                .iter()
                .map(|e| self.encrypt_value(e, record.values[e.column as usize], rng))
                .collect::<Result<_, _>>()?;
            rows.push(ClientRow { id, values });
        }
        Ok(ClientRoundOne {
            server_elements: cipher::shuffle(server_elements, rng),
            rows: cipher::shuffle(rows, rng),
        })
    }

    fn encrypt_value<R: RngCore + CryptoRng>(
        &self,
        entry: &SpecEntry,
        value: u64,
        rng: &mut R,
    ) -> Result<EncryptedValue, ProtocolError> {
        match entry.operator {
            Operator::Sum => {
                let sk = self
                    .paillier
                    .as_ref()
                    .expect("paillier key generated for sum");
                let ct = sk
                    .public_key()
                    .encrypt_u64(value, rng)
                    .map_err(|_| ProtocolError::InvalidCiphertext)?;
                Ok(EncryptedValue::Paillier(ct.to_bytes()))
            }
            Operator::SumOfSquares => {
                let keys = self.bfv.as_ref().expect("bfv keys generated for sumsq");
                let ct = keys.public.encrypt(value, rng).map_err(|e| match e {
                    bfv::BfvError::RngError => ProtocolError::RngError,
                    _ => ProtocolError::InvalidCiphertext,
                })?;
                Ok(EncryptedValue::Bfv(ct.to_raw()))
            }
        }
    }

    /// Decrypts the aggregates and checks them against what the bound allows.
    pub fn finalize(&mut self, msg: &ServerResult) -> Result<ProtocolOutput, ProtocolError> {
        if self.phase != Phase::AwaitingResult {
            return Err(ProtocolError::PhaseViolation);
        }
        let result = self.open_result(msg);
        self.phase = match result {
            Ok(_) => Phase::Done,
            Err(_) => Phase::Failed,
        };
        result
    }

    fn open_result(&self, msg: &ServerResult) -> Result<ProtocolOutput, ProtocolError> {
        let card = msg.cardinality;
        if card > self.dataset.len() as u64 || card > self.server_set_len as u64 {
            return Err(ProtocolError::ProtocolViolation(
                "cardinality exceeds a set size",
            ));
        }
        if msg.aggregates.len() != self.spec.len() {
            return Err(ProtocolError::MalformedMessage("aggregate count"));
        }
        let bound = self.dataset.bound();
        let mut aggregates = Vec::with_capacity(self.spec.len());
        for (entry, value) in self.spec.entries().iter().zip(&msg.aggregates) {
            let plain = match (entry.operator, value) {
                (Operator::Sum, EncryptedValue::Paillier(bytes)) => {
                    let sk = self
                        .paillier
                        .as_ref()
                        .expect("paillier key generated for sum");
                    let ct = sk
                        .public_key()
                        .ciphertext_from_bytes(bytes)
                        .map_err(paillier_error)?;
                    let m = sk.decrypt(&ct).map_err(paillier_error)?;
                    m.to_u128()
                        .ok_or(ProtocolError::ProtocolViolation("aggregate out of range"))?
                }
                (Operator::SumOfSquares, EncryptedValue::Bfv(raw)) => {
                    let keys = self.bfv.as_ref().expect("bfv keys generated for sumsq");
                    let ct = BfvCiphertext::from_raw(&keys.public, raw)
                        .map_err(|_| ProtocolError::MalformedMessage("bfv aggregate"))?;
                    keys.secret.decrypt(&ct).map_err(|e| match e {
                        bfv::BfvError::NoiseOverflow => ProtocolError::NoiseOverflow,
                        _ => ProtocolError::InvalidCiphertext,
                    })? as u128
                }
                _ => return Err(ProtocolError::MalformedMessage("aggregate scheme")),
            };
            if plain > entry.operator.max_aggregate(card, bound) {
                return Err(ProtocolError::ProtocolViolation("aggregate out of range"));
            }
            aggregates.push((*entry, plain));
        }
        Ok(ProtocolOutput {
            cardinality: card,
            aggregates,
        })
    }
}

fn paillier_error(e: PaillierError) -> ProtocolError {
    match e {
        PaillierError::InvalidCiphertext | PaillierError::KeyMismatch => {
            ProtocolError::InvalidCiphertext
        }
        _ => ProtocolError::MalformedMessage("paillier aggregate"),
    }
}

pub fn client_round_one<R: RngCore + CryptoRng>(
    cs: &mut ClientState,
    msg: &ServerShuffledSet,
    rng: &mut R,
) -> Result<ClientRoundOne, ProtocolError> {
    cs.round_one(msg, rng)
}

pub fn client_finalize(
    cs: &mut ClientState,
    msg: &ServerResult,
) -> Result<ProtocolOutput, ProtocolError> {
    cs.finalize(msg)
}
