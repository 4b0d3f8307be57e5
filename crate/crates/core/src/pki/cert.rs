//! Compact TLV certificates signed with Ed25519.
//!
//! Layout, each field as `tag u8 ∥ len u16 ∥ value`, in this order only:
//!
//! | tag | field      | len |
//! |-----|------------|-----|
//! | 1   | version    | 1   |
//! | 2   | subject    | 2–32 |
//! | 3   | public key | 32  |
//! | 4   | serial     | 8   |
//! | 5   | not_before | 8   |
//! | 6   | not_after  | 8   |
//! | 7   | signature  | 64  |
//!
//! The signature covers every byte of fields 1 to 6 exactly as encoded.

use std::collections::HashSet;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::PkiError;

pub const CERT_VERSION: u8 = 1;
pub const ROOT_SUBJECT: &str = "ROOT";
/// Default lifetime of a root certificate, in seconds (five years).
pub const DEFAULT_ROOT_LIFETIME: u64 = 5 * 365 * 24 * 3600;
/// Default lifetime of a party certificate, in seconds (ninety days).
pub const DEFAULT_CERT_LIFETIME: u64 = 90 * 24 * 3600;

const TAG_VERSION: u8 = 1;
const TAG_SUBJECT: u8 = 2;
const TAG_PUBKEY: u8 = 3;
const TAG_SERIAL: u8 = 4;
const TAG_NOT_BEFORE: u8 = 5;
const TAG_NOT_AFTER: u8 = 6;
const TAG_SIGNATURE: u8 = 7;

/// Seconds since the Unix epoch.
pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Subjects are upper-case state codes: `[A-Z]{2,32}`.
pub fn valid_subject(subject: &str) -> bool {
    (2..=32).contains(&subject.len()) && subject.bytes().all(|b| b.is_ascii_uppercase())
}

/// Closed interval `[not_before, not_after]` in Unix seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validity {
    pub not_before: u64,
    pub not_after: u64,
}

impl Validity {
    /// From one minute ago (to absorb clock skew) for `lifetime` seconds.
    pub fn starting_now(lifetime: u64) -> Self {
        let now = unix_now();
        Self {
            not_before: now.saturating_sub(60),
            not_after: now.saturating_add(lifetime),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    subject: String,
    public_key: [u8; 32],
    serial: [u8; 8],
    validity: Validity,
    signature: [u8; 64],
}

impl Certificate {
    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.public_key
    }

    pub fn serial(&self) -> [u8; 8] {
        self.serial
    }

    pub fn validity(&self) -> Validity {
        self.validity
    }

    pub fn signature(&self) -> [u8; 64] {
        self.signature
    }

    pub fn verifying_key(&self) -> Result<VerifyingKey, PkiError> {
        VerifyingKey::from_bytes(&self.public_key).map_err(|_| PkiError::BadSignature)
    }

    /// SHA-256 of the full encoding.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }

    fn tbs_bytes(
        subject: &str,
        public_key: &[u8; 32],
        serial: &[u8; 8],
        validity: Validity,
    ) -> Vec<u8> {
        let mut out = Vec::with_capacity(96);
        push_field(&mut out, TAG_VERSION, &[CERT_VERSION]);
        push_field(&mut out, TAG_SUBJECT, subject.as_bytes());
        push_field(&mut out, TAG_PUBKEY, public_key);
        push_field(&mut out, TAG_SERIAL, serial);
        push_field(&mut out, TAG_NOT_BEFORE, &validity.not_before.to_be_bytes());
        push_field(&mut out, TAG_NOT_AFTER, &validity.not_after.to_be_bytes());
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Self::tbs_bytes(&self.subject, &self.public_key, &self.serial, self.validity);
        push_field(&mut out, TAG_SIGNATURE, &self.signature);
        out
    }

    /// Strict parse: fields in order, exact lengths, no trailing bytes.
    /// The signature is not checked here; see [`verify_cert`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PkiError> {
        let mut rest = bytes;
        let version = take_field(&mut rest, TAG_VERSION)?;
        if version != [CERT_VERSION] {
            return Err(PkiError::MalformedCertificate("unsupported version"));
        }
        let subject = take_field(&mut rest, TAG_SUBJECT)?;
        let subject = std::str::from_utf8(subject)
            .ok()
            .filter(|s| valid_subject(s))
            .ok_or(PkiError::MalformedCertificate("subject"))?
            .to_owned();
        let public_key = fixed::<32>(take_field(&mut rest, TAG_PUBKEY)?, "public key")?;
        let serial = fixed::<8>(take_field(&mut rest, TAG_SERIAL)?, "serial")?;
        let not_before =
            u64::from_be_bytes(fixed(take_field(&mut rest, TAG_NOT_BEFORE)?, "not_before")?);
        let not_after =
            u64::from_be_bytes(fixed(take_field(&mut rest, TAG_NOT_AFTER)?, "not_after")?);
        if not_before >= not_after {
            return Err(PkiError::MalformedCertificate("validity window"));
        }
        let signature = fixed::<64>(take_field(&mut rest, TAG_SIGNATURE)?, "signature")?;
        if !rest.is_empty() {
            return Err(PkiError::MalformedCertificate("trailing bytes"));
        }
        Ok(Self {
            subject,
            public_key,
            serial,
            validity: Validity {
                not_before,
                not_after,
            },
            signature,
        })
    }
}

fn push_field(out: &mut Vec<u8>, tag: u8, value: &[u8]) {
    out.push(tag);
    out.extend_from_slice(&(value.len() as u16).to_be_bytes());
    out.extend_from_slice(value);
}

fn take_field<'a>(rest: &mut &'a [u8], tag: u8) -> Result<&'a [u8], PkiError> {
    if rest.len() < 3 || rest[0] != tag {
        return Err(PkiError::MalformedCertificate("unexpected field"));
    }
    let len = u16::from_be_bytes([rest[1], rest[2]]) as usize;
    if rest.len() < 3 + len {
        return Err(PkiError::MalformedCertificate("truncated field"));
    }
    let value = &rest[3..3 + len];
    *rest = &rest[3 + len..];
    Ok(value)
}

fn fixed<const N: usize>(value: &[u8], what: &'static str) -> Result<[u8; N], PkiError> {
    value
        .try_into()
        .map_err(|_| PkiError::MalformedCertificate(what))
}

/// Checks `cert` against `root` at time `now` and returns the subject.
///
/// The root verifies against itself, so `verify_cert(root, root, now)`
/// is the self-signature check.
pub fn verify_cert(root: &Certificate, cert: &Certificate, now: u64) -> Result<String, PkiError> {
    let issuer = root.verifying_key()?;
    let tbs = Certificate::tbs_bytes(&cert.subject, &cert.public_key, &cert.serial, cert.validity);
    issuer
        .verify_strict(&tbs, &Signature::from_bytes(&cert.signature))
        .map_err(|_| PkiError::BadSignature)?;
    if now < cert.validity.not_before {
        return Err(PkiError::NotYetValid);
    }
    if now > cert.validity.not_after {
        return Err(PkiError::Expired);
    }
    Ok(cert.subject.clone())
}

/// A party's certificate together with the matching signing key.
#[derive(Clone)]
pub struct Identity {
    pub cert: Certificate,
    pub key: SigningKey,
}

impl Identity {
    pub fn new(cert: Certificate, key: SigningKey) -> Result<Self, PkiError> {
        if key.verifying_key().to_bytes() != cert.public_key {
            return Err(PkiError::KeyMismatch);
        }
        Ok(Self { cert, key })
    }
}

impl std::fmt::Debug for Identity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Identity")
            .field("subject", &self.cert.subject)
            .finish()
    }
}

/// Root signing key plus the serials it has handed out.
pub struct CertificateAuthority {
    key: SigningKey,
    root: Certificate,
    issued: Mutex<HashSet<[u8; 8]>>,
}

/// Creates a fresh root with the default lifetime.
pub fn ca_init<R: RngCore + CryptoRng>(rng: &mut R) -> Result<CertificateAuthority, PkiError> {
    CertificateAuthority::init(Validity::starting_now(DEFAULT_ROOT_LIFETIME), rng)
}

impl CertificateAuthority {
    pub fn init<R: RngCore + CryptoRng>(validity: Validity, rng: &mut R) -> Result<Self, PkiError> {
        let key = generate_signing_key(rng)?;
        let serial = random_serial(rng)?;
        let root = sign_cert(&key, ROOT_SUBJECT, &key.verifying_key(), serial, validity)?;
        Ok(Self {
            key,
            root,
            issued: Mutex::new(HashSet::from([serial])),
        })
    }

    /// Reassembles a CA from its stored root and key.
    pub fn load(root: Certificate, key: SigningKey) -> Result<Self, PkiError> {
        if key.verifying_key().to_bytes() != root.public_key {
            return Err(PkiError::KeyMismatch);
        }
        verify_cert(&root, &root, root.validity.not_before)?;
        let serial = root.serial;
        Ok(Self {
            key,
            root,
            issued: Mutex::new(HashSet::from([serial])),
        })
    }

    pub fn root(&self) -> &Certificate {
        &self.root
    }

    pub fn signing_key(&self) -> &SigningKey {
        &self.key
    }

    pub fn issue<R: RngCore + CryptoRng>(
        &self,
        subject: &str,
        subject_key: &VerifyingKey,
        validity: Validity,
        rng: &mut R,
    ) -> Result<Certificate, PkiError> {
        if !valid_subject(subject) {
            return Err(PkiError::InvalidSubject(subject.to_owned()));
        }
        if validity.not_before >= validity.not_after {
            return Err(PkiError::InvalidValidity);
        }
        let mut issued = self.issued.lock().unwrap_or_else(|e| e.into_inner());
        let serial = loop {
            let serial = random_serial(rng)?;
            if issued.insert(serial) {
                break serial;
            }
        };
        drop(issued);
        sign_cert(&self.key, subject, subject_key, serial, validity)
    }
}

impl std::fmt::Debug for CertificateAuthority {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CertificateAuthority")
            .field("root", &self.root)
            .finish()
    }
}

/// Issues a certificate for an existing CA; see [`CertificateAuthority::issue`].
pub fn issue_cert<R: RngCore + CryptoRng>(
    ca: &CertificateAuthority,
    subject: &str,
    subject_key: &VerifyingKey,
    validity: Validity,
    rng: &mut R,
) -> Result<Certificate, PkiError> {
    ca.issue(subject, subject_key, validity, rng)
}

pub fn generate_signing_key<R: RngCore + CryptoRng>(rng: &mut R) -> Result<SigningKey, PkiError> {
    let mut seed = [0u8; 32];
    rng.try_fill_bytes(&mut seed)
        .map_err(|_| PkiError::RngError)?;
    Ok(SigningKey::from_bytes(&seed))
}

fn random_serial<R: RngCore + CryptoRng>(rng: &mut R) -> Result<[u8; 8], PkiError> {
    let mut serial = [0u8; 8];
    rng.try_fill_bytes(&mut serial)
        .map_err(|_| PkiError::RngError)?;
    Ok(serial)
}

fn sign_cert(
    issuer: &SigningKey,
    subject: &str,
    subject_key: &VerifyingKey,
    serial: [u8; 8],
    validity: Validity,
) -> Result<Certificate, PkiError> {
    if validity.not_before >= validity.not_after {
        return Err(PkiError::InvalidValidity);
    }
    let public_key = subject_key.to_bytes();
    let tbs = Certificate::tbs_bytes(subject, &public_key, &serial, validity);
    Ok(Certificate {
        subject: subject.to_owned(),
        public_key,
        serial,
        validity,
        signature: issuer.sign(&tbs).to_bytes(),
    })
}
