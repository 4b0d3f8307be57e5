//! Canonical payload encoding for every message type.
//!
//! Integers are fixed-width big-endian, byte strings and lists carry 4-byte
//! counts, optional fields an explicit one-byte flag. A payload must be
//! consumed exactly; trailing bytes are an error.

use std::fmt;

use thiserror::Error;

use super::frame::MessageType;
use crate::pki::{AuthProof, Hello};
use crate::protocol::{ClientRoundOne, ServerResult, ServerShuffledSet, StartRequest};
use crate::wire::{Reader, WireError, Writer};

/// Reason codes carried by Error frames. Never free text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ErrorCode {
    UnexpectedMessage = 0x0001,
    MalformedMessage = 0x0002,
    UnsupportedVersion = 0x0003,
    PhaseViolation = 0x0004,
    ValidationFailed = 0x0005,
    FrameTooLarge = 0x0006,
    Internal = 0x00FF,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 7] = [
        ErrorCode::UnexpectedMessage,
        ErrorCode::MalformedMessage,
        ErrorCode::UnsupportedVersion,
        ErrorCode::PhaseViolation,
        ErrorCode::ValidationFailed,
        ErrorCode::FrameTooLarge,
        ErrorCode::Internal,
    ];

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ErrorCode::UnexpectedMessage => "unexpected-message",
            ErrorCode::MalformedMessage => "malformed-message",
            ErrorCode::UnsupportedVersion => "unsupported-version",
            ErrorCode::PhaseViolation => "phase-violation",
            ErrorCode::ValidationFailed => "validation-failed",
            ErrorCode::FrameTooLarge => "frame-too-large",
            ErrorCode::Internal => "internal",
        };
        write!(f, "{name} (0x{:04x})", self.code())
    }
}

/// Tagged union of everything that travels in a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolMessage {
    Hello(Hello),
    AuthProof(AuthProof),
    StartRequest(StartRequest),
    ServerShuffledSet(ServerShuffledSet),
    ClientRoundOne(ClientRoundOne),
    ServerResult(ServerResult),
    /// The client's signature over the transcript through ServerResult.
    Close {
        signature: [u8; 64],
    },
    Error(ErrorCode),
}

impl ProtocolMessage {
    pub fn message_type(&self) -> MessageType {
        match self {
            ProtocolMessage::Hello(_) => MessageType::Hello,
            ProtocolMessage::AuthProof(_) => MessageType::AuthProof,
            ProtocolMessage::StartRequest(_) => MessageType::StartRequest,
            ProtocolMessage::ServerShuffledSet(_) => MessageType::ServerShuffledSet,
            ProtocolMessage::ClientRoundOne(_) => MessageType::ClientRoundOne,
            ProtocolMessage::ServerResult(_) => MessageType::ServerResult,
            ProtocolMessage::Close { .. } => MessageType::Close,
            ProtocolMessage::Error(_) => MessageType::Error,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed {message_type:?} payload: {source}")]
pub struct CodecError {
    pub message_type: MessageType,
    pub source: WireError,
}

pub fn encode_payload(message: &ProtocolMessage) -> Vec<u8> {
    let mut w = Writer::new();
    match message {
        ProtocolMessage::Hello(m) => m.encode(&mut w),
        ProtocolMessage::AuthProof(m) => m.encode(&mut w),
        ProtocolMessage::StartRequest(m) => m.encode(&mut w),
        ProtocolMessage::ServerShuffledSet(m) => m.encode(&mut w),
        ProtocolMessage::ClientRoundOne(m) => m.encode(&mut w),
        ProtocolMessage::ServerResult(m) => m.encode(&mut w),
        ProtocolMessage::Close { signature } => {
            w.fixed(signature);
        }
        ProtocolMessage::Error(code) => {
            w.u16(code.code());
        }
    }
    w.into_bytes()
}

pub fn decode_payload(
    message_type: MessageType,
    payload: &[u8],
) -> Result<ProtocolMessage, CodecError> {
    let mut r = Reader::new(payload);
    let decoded = (|| {
        let message = match message_type {
            MessageType::Hello => ProtocolMessage::Hello(Hello::decode(&mut r)?),
            MessageType::AuthProof => ProtocolMessage::AuthProof(AuthProof::decode(&mut r)?),
            MessageType::StartRequest => {
                ProtocolMessage::StartRequest(StartRequest::decode(&mut r)?)
            }
            MessageType::ServerShuffledSet => {
                ProtocolMessage::ServerShuffledSet(ServerShuffledSet::decode(&mut r)?)
            }
            MessageType::ClientRoundOne => {
                ProtocolMessage::ClientRoundOne(ClientRoundOne::decode(&mut r)?)
            }
            MessageType::ServerResult => {
                ProtocolMessage::ServerResult(ServerResult::decode(&mut r)?)
            }
            MessageType::Close => ProtocolMessage::Close {
                signature: r.array("signature")?,
            },
            MessageType::Error => ProtocolMessage::Error(
                ErrorCode::from_code(r.u16("reason")?).ok_or(WireError::Invalid("reason code"))?,
            ),
        };
        r.finish()?;
        Ok(message)
    })();
    decoded.map_err(|source| CodecError {
        message_type,
        source,
    })
}
