//! Payloads of the four protocol messages, in wire order.
//!
//! Ciphertexts stay in their raw wire form here; the state machines bind
//! them to keys, which is where a foreign or out-of-range ciphertext is
//! rejected.

use crate::bfv::{BfvPublicKey, RawBfvCiphertext, RelinKey};
use crate::cipher::{GroupElement, ELEMENT_LEN};
use crate::paillier::PaillierPublicKey;
use crate::wire::{Reader, WireError, Writer};

use super::spec::AggregationSpec;

pub const PROTOCOL_VERSION: u16 = 1;

const SCHEME_PAILLIER: u8 = 1;
const SCHEME_BFV: u8 = 2;

/// The evaluation material a server needs for sum-of-squares columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfvEvaluationKeys {
    pub public: BfvPublicKey,
    pub relin: RelinKey,
}

/// Client → server: what to compute and under which public keys.
///
/// `version u16 ∥ column_count u8 ∥ spec ∥ flag ∥ [paillier n] ∥ flag ∥ [bfv pk ∥ relin]`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StartRequest {
    pub version: u16,
    pub column_count: u8,
    pub spec: AggregationSpec,
    pub paillier: Option<PaillierPublicKey>,
    pub bfv: Option<BfvEvaluationKeys>,
}

impl StartRequest {
    pub fn encode(&self, w: &mut Writer) {
        w.u16(self.version).u8(self.column_count);
        self.spec.encode(w);
        w.bool(self.paillier.is_some());
        if let Some(pk) = &self.paillier {
            pk.encode(w);
        }
        w.bool(self.bfv.is_some());
        if let Some(keys) = &self.bfv {
            keys.public.encode(w);
            keys.relin.encode(w);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let version = r.u16("version")?;
        let column_count = r.u8("column count")?;
        let spec = AggregationSpec::decode(r)?;
        let paillier = if r.bool("paillier flag")? {
            Some(PaillierPublicKey::decode(r)?)
        } else {
            None
        };
        let bfv = if r.bool("bfv flag")? {
            let public = BfvPublicKey::decode(r)?;
            let relin = RelinKey::decode(r, &public)?;
            Some(BfvEvaluationKeys { public, relin })
        } else {
            None
        };
        Ok(Self {
            version,
            column_count,
            spec,
            paillier,
            bfv,
        })
    }
}

/// A homomorphic ciphertext tagged with its scheme.
///
/// `scheme u8 ∥ body`: scheme 1 carries a length-prefixed big-endian Paillier
/// residue without leading zeros, scheme 2 a raw BFV ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncryptedValue {
    Paillier(Vec<u8>),
    Bfv(RawBfvCiphertext),
}

impl EncryptedValue {
    pub fn encode(&self, w: &mut Writer) {
        match self {
            EncryptedValue::Paillier(bytes) => {
                w.u8(SCHEME_PAILLIER).bytes(bytes);
            }
            EncryptedValue::Bfv(raw) => {
                w.u8(SCHEME_BFV);
                raw.encode(w);
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        match r.u8("scheme")? {
            SCHEME_PAILLIER => {
                let bytes = r.bytes("paillier ciphertext")?;
                if bytes.first().is_none_or(|&b| b == 0) {
                    return Err(WireError::Invalid("paillier ciphertext encoding"));
                }
                Ok(EncryptedValue::Paillier(bytes.to_vec()))
            }
            SCHEME_BFV => Ok(EncryptedValue::Bfv(RawBfvCiphertext::decode(r)?)),
            _ => Err(WireError::Invalid("scheme")),
        }
    }
}

fn encode_elements(w: &mut Writer, elements: &[GroupElement]) {
    w.count(elements.len());
    for e in elements {
        w.fixed(&e.to_bytes());
    }
}

fn decode_element(r: &mut Reader<'_>) -> Result<GroupElement, WireError> {
    let bytes: [u8; ELEMENT_LEN] = r.array("group element")?;
    GroupElement::from_bytes(&bytes).map_err(|_| WireError::Invalid("group element"))
}

fn decode_elements(r: &mut Reader<'_>) -> Result<Vec<GroupElement>, WireError> {
    let n = r.count(ELEMENT_LEN, "group elements")?;
    (0..n).map(|_| decode_element(r)).collect()
}

/// Server → client: the server's identifiers under its key, shuffled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerShuffledSet {
    pub elements: Vec<GroupElement>,
}

impl ServerShuffledSet {
    pub fn encode(&self, w: &mut Writer) {
        encode_elements(w, &self.elements);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Self {
            elements: decode_elements(r)?,
        })
    }
}

/// One client record: its blinded identifier and one ciphertext per spec entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientRow {
    pub id: GroupElement,
    pub values: Vec<EncryptedValue>,
}

/// Client → server: the server set re-blinded under the client key, and the
/// client's rows, each shuffled independently.
///
/// `count ∥ elements ∥ count ∥ rows`, each row `element ∥ count ∥ values`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientRoundOne {
    pub server_elements: Vec<GroupElement>,
    pub rows: Vec<ClientRow>,
}

impl ClientRoundOne {
    pub fn encode(&self, w: &mut Writer) {
        encode_elements(w, &self.server_elements);
        w.count(self.rows.len());
        for row in &self.rows {
            w.fixed(&row.id.to_bytes());
            w.count(row.values.len());
            for v in &row.values {
                v.encode(w);
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let server_elements = decode_elements(r)?;
        let n = r.count(ELEMENT_LEN + 4, "rows")?;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let id = decode_element(r)?;
            let k = r.count(2, "row values")?;
            let values = (0..k)
                .map(|_| EncryptedValue::decode(r))
                .collect::<Result<_, _>>()?;
            rows.push(ClientRow { id, values });
        }
        Ok(Self {
            server_elements,
            rows,
        })
    }
}

/// Server → client: intersection size and one rerandomized aggregate per
/// spec entry. `cardinality u64 ∥ count ∥ values`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerResult {
    pub cardinality: u64,
    pub aggregates: Vec<EncryptedValue>,
}

impl ServerResult {
    pub fn encode(&self, w: &mut Writer) {
        w.u64(self.cardinality);
        w.count(self.aggregates.len());
        for v in &self.aggregates {
            v.encode(w);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let cardinality = r.u64("cardinality")?;
        let k = r.count(2, "aggregates")?;
        let aggregates = (0..k)
            .map(|_| EncryptedValue::decode(r))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            cardinality,
            aggregates,
        })
    }
}
