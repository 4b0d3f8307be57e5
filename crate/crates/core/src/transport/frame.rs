//! Length-prefixed frames: `len u32 BE ∥ type u8 ∥ payload`, where `len`
//! counts the type byte plus the payload.

use std::io::{self, Read, Write};

use thiserror::Error;

/// Hard cap on `len`, i.e. type byte plus payload.
pub const MAX_FRAME_LEN: u32 = 64 * 1024 * 1024;
pub const HEADER_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MessageType {
    Hello = 0x01,
    AuthProof = 0x02,
    StartRequest = 0x10,
    ServerShuffledSet = 0x11,
    ClientRoundOne = 0x12,
    ServerResult = 0x13,
    Close = 0x14,
    Error = 0x7F,
}

impl MessageType {
    pub const ALL: [MessageType; 8] = [
        MessageType::Hello,
        MessageType::AuthProof,
        MessageType::StartRequest,
        MessageType::ServerShuffledSet,
        MessageType::ClientRoundOne,
        MessageType::ServerResult,
        MessageType::Close,
        MessageType::Error,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame length {0} exceeds the {MAX_FRAME_LEN}-byte cap")]
    FrameTooLarge(u64),
    #[error("stream ended inside a frame")]
    UnexpectedEof,
    #[error("stream closed by peer")]
    Closed,
    #[error("frame declares length 0")]
    ZeroLength,
    #[error("unknown message type 0x{0:02x}")]
    UnknownMessageType(u8),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub message_type: MessageType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(message_type: MessageType, payload: Vec<u8>) -> Self {
        Self {
            message_type,
            payload,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        frame_encode(self.message_type, &self.payload)
    }
}

pub fn frame_encode(message_type: MessageType, payload: &[u8]) -> Result<Vec<u8>, FrameError> {
    let len = payload.len() as u64 + 1;
    if len > MAX_FRAME_LEN as u64 {
        return Err(FrameError::FrameTooLarge(len));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&(len as u32).to_be_bytes());
    out.push(message_type.code());
    out.extend_from_slice(payload);
    Ok(out)
}

fn check_header(header: [u8; HEADER_LEN]) -> Result<(MessageType, usize), FrameError> {
    let len = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
    if len == 0 {
        return Err(FrameError::ZeroLength);
    }
    if len > MAX_FRAME_LEN {
        return Err(FrameError::FrameTooLarge(len as u64));
    }
    let message_type =
        MessageType::from_code(header[4]).ok_or(FrameError::UnknownMessageType(header[4]))?;
    Ok((message_type, len as usize - 1))
}

/// Reads exactly one frame. A stream that ends before the first byte
/// reports [`FrameError::Closed`]; one that ends later reports
/// [`FrameError::UnexpectedEof`].
pub fn frame_decode<R: Read>(reader: &mut R) -> Result<Frame, FrameError> {
    let mut first = [0u8; 1];
    loop {
        match reader.read(&mut first) {
            Ok(0) => return Err(FrameError::Closed),
            Ok(_) => break,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(FrameError::Io(e)),
        }
    }
    let mut header = [0u8; HEADER_LEN];
    header[0] = first[0];
    read_exact(reader, &mut header[1..])?;
    let (message_type, payload_len) = check_header(header)?;
    let mut payload = vec![0u8; payload_len];
    read_exact(reader, &mut payload)?;
    Ok(Frame {
        message_type,
        payload,
    })
}

/// Decodes one frame from the front of `buf`, returning it with the number
/// of bytes consumed.
pub fn frame_decode_slice(buf: &[u8]) -> Result<(Frame, usize), FrameError> {
    if buf.is_empty() {
        return Err(FrameError::Closed);
    }
    if buf.len() < HEADER_LEN {
        return Err(FrameError::UnexpectedEof);
    }
    let header: [u8; HEADER_LEN] = buf[..HEADER_LEN].try_into().expect("length checked");
    let (message_type, payload_len) = check_header(header)?;
    let end = HEADER_LEN + payload_len;
    if buf.len() < end {
        return Err(FrameError::UnexpectedEof);
    }
    Ok((
        Frame {
            message_type,
            payload: buf[HEADER_LEN..end].to_vec(),
        },
        end,
    ))
}

/// Splits a recorded byte stream into frames; stops at the first error.
pub fn split_frames(mut buf: &[u8]) -> (Vec<Frame>, Option<FrameError>) {
    let mut frames = Vec::new();
    while !buf.is_empty() {
        match frame_decode_slice(buf) {
            Ok((frame, used)) => {
                frames.push(frame);
                buf = &buf[used..];
            }
            Err(e) => return (frames, Some(e)),
        }
    }
    (frames, None)
}

fn read_exact<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<(), FrameError> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FrameError::UnexpectedEof,
        _ => FrameError::Io(e),
    })
}

pub fn write_frame<W: Write>(writer: &mut W, bytes: &[u8]) -> io::Result<()> {
    writer.write_all(bytes)?;
    writer.flush()
}
