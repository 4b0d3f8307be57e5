//! Leveled RLWE encryption (BFV) over `Z_q[X]/(X^n + 1)`.
//!
//! Scalars are encoded in coefficient 0 only. Ciphertexts support addition
//! and one multiplication with relinearization, which is all an
//! intersection sum of squares needs.

mod ntt;
mod params;
mod poly;
mod scheme;

use thiserror::Error;

pub use ntt::{Modulus, NttTable};
pub use params::{
    params_default, BfvParams, DEFAULT_DECOMPOSITION_BITS, DEFAULT_DEGREE,
    DEFAULT_PLAINTEXT_MODULUS, DEFAULT_Q_PRIMES,
};
pub use poly::{poly_mul, RingPoly, RnsContext};
pub use scheme::{
    add, keygen, mul, BfvCiphertext, BfvKeys, BfvPublicKey, BfvSecretKey, KeyTag, RawBfvCiphertext,
    RelinKey,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BfvError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("operands use different parameters or keys")]
    ParamMismatch,
    #[error("coefficient not reduced modulo q")]
    CoefficientOutOfRange,
    #[error("plaintext outside [0, t)")]
    PlaintextOutOfRange,
    #[error("noise budget exhausted; decryption unreliable")]
    NoiseOverflow,
    #[error("randomness source failed")]
    RngError,
}
