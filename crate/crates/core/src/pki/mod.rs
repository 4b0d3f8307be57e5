//! A built-in certificate authority, the mutual authentication handshake and
//! signed session transcripts.
//!
//! Signatures are Ed25519 throughout; hashes are SHA-256.

mod armor;
mod cert;
mod handshake;
mod transcript;

use thiserror::Error;

pub use armor::{
    armor, cert_from_pem, cert_to_pem, dearmor, key_from_pem, key_to_pem, read_cert,
    read_secret_key, write_cert, write_secret_key, CERT_LABEL, SECRET_KEY_LABEL,
};
pub use cert::{
    ca_init, generate_signing_key, issue_cert, unix_now, valid_subject, verify_cert, Certificate,
    CertificateAuthority, Identity, Validity, CERT_VERSION, DEFAULT_CERT_LIFETIME,
    DEFAULT_ROOT_LIFETIME, ROOT_SUBJECT,
};
pub use handshake::{
    check_proof, make_proof, mutual_handshake, AuthProof, HandshakeError, HandshakeOutcome, Hello,
};
pub use transcript::{
    session_id, transcript_append, transcript_finalize, transcript_verify, Direction, Transcript,
    TranscriptEntry, TranscriptRecord, VerifiedTranscript,
};

pub use ed25519_dalek::{SigningKey, VerifyingKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Client,
    Server,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PkiError {
    #[error("subject {0:?} does not match [A-Z]{{2,32}}")]
    InvalidSubject(String),
    #[error("validity window is empty or inverted")]
    InvalidValidity,
    #[error("signature does not verify")]
    BadSignature,
    #[error("certificate expired")]
    Expired,
    #[error("certificate not yet valid")]
    NotYetValid,
    #[error("secret key does not match certificate")]
    KeyMismatch,
    #[error("malformed certificate: {0}")]
    MalformedCertificate(&'static str),
    #[error("malformed transcript: {0}")]
    MalformedTranscript(&'static str),
    #[error("armor: {0}")]
    Armor(&'static str),
    #[error("i/o: {0}")]
    Io(String),
    #[error("randomness source failed")]
    RngError,
}
