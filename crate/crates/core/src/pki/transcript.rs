//! Hash-chained session transcripts and their on-disk form.
//!
//! `running_0 = SHA-256(session_id)` and each entry advances the chain as
//! `running' = SHA-256(running ∥ direction ∥ type ∥ SHA-256(frame))`, where
//! `frame` is the complete framed message including its header. Each party
//! signs `label ∥ running` with its certificate key.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ed25519_dalek::{Signature, Signer, SigningKey};
use sha2::{Digest, Sha256};

use super::cert::{verify_cert, Certificate};
use super::{PkiError, Role};

const SESSION_DST: &[u8] = b"JINGBING-SESSION-V1";
const CLIENT_SIG_LABEL: &[u8] = b"JINGBING-TRANSCRIPT-V1-CLIENT";
const SERVER_SIG_LABEL: &[u8] = b"JINGBING-TRANSCRIPT-V1-SERVER";

const FILE_MAGIC: &[u8; 4] = b"JBTR";
const FILE_VERSION: u8 = 1;
const TAG_SESSION: u8 = 1;
const TAG_CLIENT_CERT: u8 = 2;
const TAG_SERVER_CERT: u8 = 3;
const TAG_ENTRIES: u8 = 4;
const TAG_RUNNING: u8 = 5;
const TAG_CLIENT_SIG: u8 = 6;
const TAG_SERVER_SIG: u8 = 7;
const ENTRY_LEN: usize = 34;

/// Direction of a frame, independent of which side records it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Direction {
    ClientToServer = 0,
    ServerToClient = 1,
}

impl Direction {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::ClientToServer),
            1 => Some(Self::ServerToClient),
            _ => None,
        }
    }

    /// Direction of frames sent by `role`.
    pub fn outgoing(role: Role) -> Self {
        match role {
            Role::Client => Self::ClientToServer,
            Role::Server => Self::ServerToClient,
        }
    }

    /// Direction of frames received by `role`.
    pub fn incoming(role: Role) -> Self {
        match role {
            Role::Client => Self::ServerToClient,
            Role::Server => Self::ClientToServer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub message_type: u8,
    pub hash: [u8; 32],
}

impl TranscriptEntry {
    pub fn new(direction: Direction, message_type: u8, frame: &[u8]) -> Self {
        Self {
            direction,
            message_type,
            hash: Sha256::digest(frame).into(),
        }
    }
}

pub fn session_id(client_nonce: &[u8; 32], server_nonce: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(SESSION_DST);
    h.update(client_nonce);
    h.update(server_nonce);
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    session_id: [u8; 32],
    entries: Vec<TranscriptEntry>,
    running: [u8; 32],
}

impl Transcript {
    pub fn new(session_id: [u8; 32]) -> Self {
        Self {
            session_id,
            entries: Vec::new(),
            running: Sha256::digest(session_id).into(),
        }
    }

    pub fn with_entries(
        session_id: [u8; 32],
        entries: impl IntoIterator<Item = TranscriptEntry>,
    ) -> Self {
        let mut t = Self::new(session_id);
        for e in entries {
            t.push(e);
        }
        t
    }

    pub fn session_id(&self) -> [u8; 32] {
        self.session_id
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn running_hash(&self) -> [u8; 32] {
        self.running
    }

    /// Records one framed message.
    pub fn append(&mut self, direction: Direction, message_type: u8, frame: &[u8]) {
        self.push(TranscriptEntry::new(direction, message_type, frame));
    }

    pub fn push(&mut self, entry: TranscriptEntry) {
        let mut h = Sha256::new();
        h.update(self.running);
        h.update([entry.direction as u8, entry.message_type]);
        h.update(entry.hash);
        self.running = h.finalize().into();
        self.entries.push(entry);
    }

    fn signed_message(&self, signer: Role) -> Vec<u8> {
        let label = match signer {
            Role::Client => CLIENT_SIG_LABEL,
            Role::Server => SERVER_SIG_LABEL,
        };
        [label, &self.running[..]].concat()
    }

    /// Signs the running hash as `signer`.
    pub fn finalize(&self, signer: Role, key: &SigningKey) -> [u8; 64] {
        key.sign(&self.signed_message(signer)).to_bytes()
    }

    /// Checks a signature made by `signer` holding `cert`.
    pub fn verify(
        &self,
        signer: Role,
        cert: &Certificate,
        signature: &[u8; 64],
    ) -> Result<(), PkiError> {
        cert.verifying_key()?
            .verify_strict(
                &self.signed_message(signer),
                &Signature::from_bytes(signature),
            )
            .map_err(|_| PkiError::BadSignature)
    }
}

/// Returns `t` with one more entry; see [`Transcript::append`].
pub fn transcript_append(
    mut t: Transcript,
    direction: Direction,
    message_type: u8,
    frame: &[u8],
) -> Transcript {
    t.append(direction, message_type, frame);
    t
}

pub fn transcript_finalize(key: &SigningKey, signer: Role, t: &Transcript) -> [u8; 64] {
    t.finalize(signer, key)
}

pub fn transcript_verify(
    peer_cert: &Certificate,
    signer: Role,
    t: &Transcript,
    signature: &[u8; 64],
) -> Result<(), PkiError> {
    t.verify(signer, peer_cert, signature)
}

/// Everything a party keeps after a session: the signed chain, both
/// certificates and whatever signatures it holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptRecord {
    pub transcript: Transcript,
    pub client_cert: Certificate,
    pub server_cert: Certificate,
    pub client_signature: [u8; 64],
    pub server_signature: Option<[u8; 64]>,
}

/// What a successful [`TranscriptRecord::verify`] establishes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedTranscript {
    pub client_subject: String,
    pub server_subject: String,
    pub entries: usize,
    pub server_signed: bool,
}

impl TranscriptRecord {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(FILE_MAGIC);
        out.push(FILE_VERSION);
        push_tlv(&mut out, TAG_SESSION, &self.transcript.session_id);
        push_tlv(&mut out, TAG_CLIENT_CERT, &self.client_cert.to_bytes());
        push_tlv(&mut out, TAG_SERVER_CERT, &self.server_cert.to_bytes());
        let mut entries = Vec::with_capacity(self.transcript.entries.len() * ENTRY_LEN);
        for e in &self.transcript.entries {
            entries.push(e.direction as u8);
            entries.push(e.message_type);
            entries.extend_from_slice(&e.hash);
        }
        push_tlv(&mut out, TAG_ENTRIES, &entries);
        push_tlv(&mut out, TAG_RUNNING, &self.transcript.running);
        push_tlv(&mut out, TAG_CLIENT_SIG, &self.client_signature);
        if let Some(sig) = &self.server_signature {
            push_tlv(&mut out, TAG_SERVER_SIG, sig);
        }
        out
    }

    /// Parses a record and checks that the stored running hash matches the
    /// entries. Signatures are checked by [`TranscriptRecord::verify`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PkiError> {
        let malformed = PkiError::MalformedTranscript;
        let rest = bytes.strip_prefix(FILE_MAGIC).ok_or(malformed("magic"))?;
        let (&version, mut rest) = rest.split_first().ok_or(malformed("version"))?;
        if version != FILE_VERSION {
            return Err(malformed("version"));
        }
        let session: [u8; 32] = take_tlv(&mut rest, TAG_SESSION)?
            .try_into()
            .map_err(|_| malformed("session id"))?;
        let client_cert = Certificate::from_bytes(take_tlv(&mut rest, TAG_CLIENT_CERT)?)?;
        let server_cert = Certificate::from_bytes(take_tlv(&mut rest, TAG_SERVER_CERT)?)?;
        let raw_entries = take_tlv(&mut rest, TAG_ENTRIES)?;
        if raw_entries.len() % ENTRY_LEN != 0 {
            return Err(malformed("entries"));
        }
        let mut transcript = Transcript::new(session);
        for chunk in raw_entries.chunks(ENTRY_LEN) {
            let direction = Direction::from_code(chunk[0]).ok_or(malformed("direction"))?;
            transcript.push(TranscriptEntry {
                direction,
                message_type: chunk[1],
                hash: chunk[2..].try_into().expect("entry length checked"),
            });
        }
        let running: [u8; 32] = take_tlv(&mut rest, TAG_RUNNING)?
            .try_into()
            .map_err(|_| malformed("running hash"))?;
        if running != transcript.running {
            return Err(PkiError::BadSignature);
        }
        let client_signature: [u8; 64] = take_tlv(&mut rest, TAG_CLIENT_SIG)?
            .try_into()
            .map_err(|_| malformed("client signature"))?;
        let server_signature = if rest.is_empty() {
            None
        } else {
            Some(
                take_tlv(&mut rest, TAG_SERVER_SIG)?
                    .try_into()
                    .map_err(|_| malformed("server signature"))?,
            )
        };
        if !rest.is_empty() {
            return Err(malformed("trailing bytes"));
        }
        Ok(Self {
            transcript,
            client_cert,
            server_cert,
            client_signature,
            server_signature,
        })
    }

    /// Checks both certificates against `root` and every signature present.
    /// Certificate lifetimes are not re-checked: they were enforced during
    /// the handshake and an archived transcript outlives them.
    pub fn verify(&self, root: &Certificate) -> Result<VerifiedTranscript, PkiError> {
        let client_subject = verify_cert(
            root,
            &self.client_cert,
            self.client_cert.validity().not_before,
        )?;
        let server_subject = verify_cert(
            root,
            &self.server_cert,
            self.server_cert.validity().not_before,
        )?;
        self.transcript
            .verify(Role::Client, &self.client_cert, &self.client_signature)?;
        if let Some(sig) = &self.server_signature {
            self.transcript
                .verify(Role::Server, &self.server_cert, sig)?;
        }
        Ok(VerifiedTranscript {
            client_subject,
            server_subject,
            entries: self.transcript.entries.len(),
            server_signed: self.server_signature.is_some(),
        })
    }

    /// Writes `<started_at>-<peer>.transcript` under `dir`, adding a numeric
    /// suffix rather than overwriting an existing file.
    pub fn write_to_dir(
        &self,
        dir: &Path,
        started_at: u64,
        peer: &str,
    ) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let bytes = self.to_bytes();
        for attempt in 0u32.. {
            let name = if attempt == 0 {
                format!("{started_at}-{peer}.transcript")
            } else {
                format!("{started_at}-{peer}-{attempt}.transcript")
            };
            let path = dir.join(name);
            match fs::OpenOptions::new()
                .write(true)
                .create_new(true)
                .open(&path)
            {
                Ok(mut file) => {
                    file.write_all(&bytes)?;
                    file.sync_all()?;
                    return Ok(path);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e),
            }
        }
        unreachable!("u32 suffixes exhausted")
    }

    pub fn read_file(path: &Path) -> Result<Self, PkiError> {
        Self::from_bytes(
            &fs::read(path).map_err(|e| PkiError::Io(format!("{}: {e}", path.display())))?,
        )
    }
}

fn push_tlv(out: &mut Vec<u8>, tag: u8, value: &[u8]) {
    out.push(tag);
    out.extend_from_slice(&(value.len() as u32).to_be_bytes());
    out.extend_from_slice(value);
}

fn take_tlv<'a>(rest: &mut &'a [u8], tag: u8) -> Result<&'a [u8], PkiError> {
    if rest.len() < 5 || rest[0] != tag {
        return Err(PkiError::MalformedTranscript("unexpected field"));
    }
    let len = u32::from_be_bytes([rest[1], rest[2], rest[3], rest[4]]) as usize;
    if rest.len() - 5 < len {
        return Err(PkiError::MalformedTranscript("truncated field"));
    }
    let value = &rest[5..5 + len];
    *rest = &rest[5 + len..];
    Ok(value)
}
