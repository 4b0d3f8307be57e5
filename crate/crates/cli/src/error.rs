//! One-line, machine-parsable failures and their exit codes.

use std::fmt;

use jingbing::pki::{HandshakeError, PkiError};
use jingbing::protocol::ProtocolError;
use jingbing::transport::{ChannelError, FrameError, SessionError};

use crate::data::LoadError;
use crate::gendata::GenError;

/// Failure categories, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Validation,
    Handshake,
    Protocol,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Validation => 2,
            Category::Handshake => 3,
            Category::Protocol => 4,
            Category::Io => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Validation => "validation",
            Category::Handshake => "handshake",
            Category::Protocol => "protocol",
            Category::Io => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: Category,
    /// Short kebab-case cause, stable across releases.
    pub reason: &'static str,
    pub detail: String,
}

impl CliError {
    pub fn new(category: Category, reason: &'static str, detail: impl fmt::Display) -> Self {
        Self {
            category,
            reason,
            detail: detail.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }
}

/// `error=<category> reason=<reason> detail="<text>"` on a single line.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail: String = self
            .detail
            .chars()
            .map(|c| if c.is_control() { ' ' } else { c })
            .collect();
        write!(
            f,
            "error={} reason={} detail={:?}",
            self.category.as_str(),
            self.reason,
            detail
        )
    }
}

impl std::error::Error for CliError {}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        let (category, reason) = match &e {
            LoadError::Io { .. } => (Category::Io, "io"),
            LoadError::BadHeader(_) => (Category::Validation, "bad-header"),
            LoadError::DuplicateIdentifier(_) => (Category::Validation, "duplicate-identifier"),
            LoadError::NonIntegerValue { .. } => (Category::Validation, "non-integer-value"),
            LoadError::BoundExceeded { .. } => (Category::Validation, "bound-exceeded"),
            LoadError::InvalidIdentifier(_) => (Category::Validation, "invalid-identifier"),
            LoadError::Csv { .. } => (Category::Validation, "bad-csv"),
        };
        Self::new(category, reason, e)
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match &e {
            GenError::InfeasibleParams(_) => {
                Self::new(Category::Validation, "infeasible-params", e)
            }
            GenError::Io { .. } => Self::new(Category::Io, "io", e),
        }
    }
}

impl From<PkiError> for CliError {
    fn from(e: PkiError) -> Self {
        let reason = match &e {
            PkiError::Io(_) => return Self::new(Category::Io, "io", e),
            PkiError::InvalidSubject(_) => "invalid-subject",
            PkiError::InvalidValidity => "invalid-validity",
            PkiError::BadSignature => "bad-signature",
            PkiError::Expired => "expired",
            PkiError::NotYetValid => "not-yet-valid",
            PkiError::KeyMismatch => "key-mismatch",
            PkiError::MalformedCertificate(_) | PkiError::Armor(_) => "malformed-certificate",
            PkiError::MalformedTranscript(_) => "malformed-transcript",
            PkiError::RngError => "rng",
        };
        Self::new(Category::Validation, reason, e)
    }
}

fn protocol_reason(e: &ProtocolError) -> (Category, &'static str) {
    match e {
        ProtocolError::Validation(_) => (Category::Validation, "validation-failed"),
        ProtocolError::UnsupportedVersion(_) => (Category::Protocol, "unsupported-version"),
        ProtocolError::PhaseViolation => (Category::Protocol, "phase-violation"),
        ProtocolError::MalformedMessage(_) => (Category::Protocol, "malformed-message"),
        ProtocolError::ProtocolViolation(_) => (Category::Protocol, "protocol-violation"),
        ProtocolError::NoiseOverflow => (Category::Protocol, "noise-overflow"),
        ProtocolError::InvalidCiphertext => (Category::Protocol, "invalid-ciphertext"),
        ProtocolError::KeyGeneration(_) => (Category::Protocol, "key-generation"),
        ProtocolError::Internal(_) => (Category::Protocol, "internal"),
        ProtocolError::RngError => (Category::Protocol, "rng"),
    }
}

fn channel_reason(e: &ChannelError) -> (Category, &'static str) {
    match e {
        ChannelError::Codec(_) => (Category::Protocol, "malformed-message"),
        ChannelError::Frame(FrameError::FrameTooLarge(_)) => {
            (Category::Protocol, "frame-too-large")
        }
        ChannelError::Frame(FrameError::UnknownMessageType(_) | FrameError::ZeroLength) => {
            (Category::Protocol, "malformed-message")
        }
        ChannelError::Frame(_) => (Category::Io, "connection-lost"),
    }
}

impl From<SessionError> for CliError {
    fn from(e: SessionError) -> Self {
        let (category, reason) = match &e {
            SessionError::Handshake(h) => (
                Category::Handshake,
                match h {
                    HandshakeError::PeerCertificate(_) => "peer-certificate",
                    HandshakeError::BadProof => "bad-proof",
                    HandshakeError::UnexpectedMessage(_) => "unexpected-message",
                    HandshakeError::Channel(_) => "connection-closed",
                    HandshakeError::RngError => "rng",
                },
            ),
            SessionError::Protocol(p) => protocol_reason(p),
            SessionError::PeerError(_) => (Category::Protocol, "peer-error"),
            SessionError::UnexpectedMessage(_) => (Category::Protocol, "unexpected-message"),
            SessionError::Transcript(_) => (Category::Protocol, "transcript"),
            SessionError::Channel(c) => channel_reason(c),
            SessionError::ConnectionError(_) => (Category::Io, "connection-failed"),
            SessionError::TranscriptIo(_) => (Category::Io, "transcript-write"),
        };
        Self::new(category, reason, e)
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        let (category, reason) = protocol_reason(&e);
        Self::new(category, reason, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line_with_quoted_detail() {
        let e = CliError::new(Category::Validation, "bad-header", "line one\nline \"two\"");
        let line = e.to_string();
        assert!(!line.contains('\n'));
        assert_eq!(
            line,
            r#"error=validation reason=bad-header detail="line one line \"two\"""#
        );
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn exit_codes() {
        let codes: Vec<_> = [
            Category::Validation,
            Category::Handshake,
            Category::Protocol,
            Category::Io,
        ]
        .into_iter()
        .map(Category::exit_code)
        .collect();
        assert_eq!(codes, [2, 3, 4, 5]);
    }
}
