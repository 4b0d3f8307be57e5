//! Certificate-based mutual authentication at the application layer.
//!
//! ```text
//! client                              server
//!   Hello{cert_c, n_c}       ──────▶    verify cert_c
//!   verify cert_s            ◀──────    Hello{cert_s, n_s}
//!   AuthProof{sig_c}         ──────▶    verify sig_c
//!   verify sig_s             ◀──────    AuthProof{sig_s}
//! ```
//!
//! `sig_x` signs `label_x ∥ own nonce ∥ peer nonce ∥ SHA-256(peer cert)`.
//! Fresh nonces on both sides make every proof specific to one session.

use std::io::{Read, Write};

use ed25519_dalek::{Signature, Signer};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::cert::{verify_cert, Certificate, Identity};
use super::transcript::session_id;
use super::{PkiError, Role};
use crate::transport::{ChannelError, Connection, ProtocolMessage};
use crate::wire::{Reader, WireError, Writer};

const CLIENT_PROOF_LABEL: &[u8] = b"JINGBING-AUTH-V1-CLIENT";
const SERVER_PROOF_LABEL: &[u8] = b"JINGBING-AUTH-V1-SERVER";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub cert: Certificate,
    pub nonce: [u8; 32],
}

impl Hello {
    pub fn encode(&self, w: &mut Writer) {
        w.bytes(&self.cert.to_bytes()).fixed(&self.nonce);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let cert = Certificate::from_bytes(r.bytes("certificate")?)
            .map_err(|_| WireError::Invalid("certificate"))?;
        let nonce = r.array("nonce")?;
        Ok(Self { cert, nonce })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthProof {
    pub signature: [u8; 64],
}

impl AuthProof {
    pub fn encode(&self, w: &mut Writer) {
        w.fixed(&self.signature);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Self {
            signature: r.array("signature")?,
        })
    }
}

#[derive(Debug, Error)]
pub enum HandshakeError {
    #[error("handshake failed: peer certificate rejected: {0}")]
    PeerCertificate(PkiError),
    #[error("handshake failed: peer authentication proof invalid")]
    BadProof,
    #[error("handshake failed: unexpected {0:?} message")]
    UnexpectedMessage(crate::transport::MessageType),
    #[error("handshake failed: {0}")]
    Channel(#[from] ChannelError),
    #[error("handshake failed: randomness source failed")]
    RngError,
}

impl From<crate::transport::FrameError> for HandshakeError {
    fn from(e: crate::transport::FrameError) -> Self {
        Self::Channel(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandshakeOutcome {
    pub peer: Certificate,
    pub peer_subject: String,
    pub client_nonce: [u8; 32],
    pub server_nonce: [u8; 32],
}

impl HandshakeOutcome {
    pub fn session_id(&self) -> [u8; 32] {
        session_id(&self.client_nonce, &self.server_nonce)
    }
}

fn proof_message(
    role: Role,
    own_nonce: &[u8; 32],
    peer_nonce: &[u8; 32],
    peer_cert: &Certificate,
) -> Vec<u8> {
    let label = match role {
        Role::Client => CLIENT_PROOF_LABEL,
        Role::Server => SERVER_PROOF_LABEL,
    };
    let peer_hash = Sha256::digest(peer_cert.to_bytes());
    [label, own_nonce, peer_nonce, &peer_hash[..]].concat()
}

/// Signs the proof `role` sends to a peer holding `peer_cert`.
pub fn make_proof(
    identity: &Identity,
    role: Role,
    own_nonce: &[u8; 32],
    peer_nonce: &[u8; 32],
    peer_cert: &Certificate,
) -> AuthProof {
    AuthProof {
        signature: identity
            .key
            .sign(&proof_message(role, own_nonce, peer_nonce, peer_cert))
            .to_bytes(),
    }
}

/// Checks a proof sent by `peer_role` holding `peer_cert` to us (`own_cert`).
pub fn check_proof(
    proof: &AuthProof,
    peer_role: Role,
    peer_cert: &Certificate,
    peer_nonce: &[u8; 32],
    own_nonce: &[u8; 32],
    own_cert: &Certificate,
) -> Result<(), HandshakeError> {
    let key = peer_cert
        .verifying_key()
        .map_err(|_| HandshakeError::BadProof)?;
    key.verify_strict(
        &proof_message(peer_role, peer_nonce, own_nonce, own_cert),
        &Signature::from_bytes(&proof.signature),
    )
    .map_err(|_| HandshakeError::BadProof)
}

fn expect_hello<S: Read + Write>(conn: &mut Connection<S>) -> Result<Hello, HandshakeError> {
    match conn.recv()? {
        ProtocolMessage::Hello(h) => Ok(h),
        other => Err(HandshakeError::UnexpectedMessage(other.message_type())),
    }
}

fn expect_proof<S: Read + Write>(conn: &mut Connection<S>) -> Result<AuthProof, HandshakeError> {
    match conn.recv()? {
        ProtocolMessage::AuthProof(p) => Ok(p),
        other => Err(HandshakeError::UnexpectedMessage(other.message_type())),
    }
}

/// Runs the four-message handshake for `conn.role()`.
///
/// On failure nothing further is sent; the caller is expected to drop the
/// connection. In particular the server sends no frame at all when the
/// client's certificate is rejected.
pub fn mutual_handshake<S: Read + Write, R: RngCore + CryptoRng>(
    conn: &mut Connection<S>,
    identity: &Identity,
    root: &Certificate,
    now: u64,
    rng: &mut R,
) -> Result<HandshakeOutcome, HandshakeError> {
    let mut own_nonce = [0u8; 32];
    rng.try_fill_bytes(&mut own_nonce)
        .map_err(|_| HandshakeError::RngError)?;
    let own_hello = ProtocolMessage::Hello(Hello {
        cert: identity.cert.clone(),
        nonce: own_nonce,
    });
    let role = conn.role();
    let peer_role = match role {
        Role::Client => Role::Server,
        Role::Server => Role::Client,
    };

    if role == Role::Client {
        conn.send(&own_hello)?;
    }
    let peer_hello = expect_hello(conn)?;
    let peer_subject =
        verify_cert(root, &peer_hello.cert, now).map_err(HandshakeError::PeerCertificate)?;
    if role == Role::Server {
        conn.send(&own_hello)?;
    }

    let own_proof = || {
        ProtocolMessage::AuthProof(make_proof(
            identity,
            role,
            &own_nonce,
            &peer_hello.nonce,
            &peer_hello.cert,
        ))
    };
    if role == Role::Client {
        conn.send(&own_proof())?;
    }
    let proof = expect_proof(conn)?;
    check_proof(
        &proof,
        peer_role,
        &peer_hello.cert,
        &peer_hello.nonce,
        &own_nonce,
        &identity.cert,
    )?;
    if role == Role::Server {
        conn.send(&own_proof())?;
    }

    let (client_nonce, server_nonce) = match role {
        Role::Client => (own_nonce, peer_hello.nonce),
        Role::Server => (peer_hello.nonce, own_nonce),
    };
    Ok(HandshakeOutcome {
        peer: peer_hello.cert,
        peer_subject,
        client_nonce,
        server_nonce,
    })
}
