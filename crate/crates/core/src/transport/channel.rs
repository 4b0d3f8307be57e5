//! A framed, self-recording connection over any byte stream.

use std::io::{Read, Write};

use super::codec::{decode_payload, encode_payload, CodecError, ProtocolMessage};
use super::frame::{frame_decode, frame_encode, write_frame, Frame, FrameError, MessageType};
use crate::pki::{Direction, Role, TranscriptEntry};

#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Every frame sent or received is hashed into `log` in wire order.
#[derive(Debug)]
pub struct Connection<S> {
    stream: S,
    role: Role,
    log: Vec<TranscriptEntry>,
}

impl<S: Read + Write> Connection<S> {
    pub fn new(stream: S, role: Role) -> Self {
        Self {
            stream,
            role,
            log: Vec::new(),
        }
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn log(&self) -> &[TranscriptEntry] {
        &self.log
    }

    pub fn get_ref(&self) -> &S {
        &self.stream
    }

    pub fn into_inner(self) -> S {
        self.stream
    }

    pub fn send_frame(
        &mut self,
        message_type: MessageType,
        payload: &[u8],
    ) -> Result<(), FrameError> {
        let bytes = frame_encode(message_type, payload)?;
        write_frame(&mut self.stream, &bytes)?;
        self.log.push(TranscriptEntry::new(
            Direction::outgoing(self.role),
            message_type.code(),
            &bytes,
        ));
        Ok(())
    }

    pub fn recv_frame(&mut self) -> Result<Frame, FrameError> {
        let frame = frame_decode(&mut self.stream)?;
        let bytes = frame.encode()?;
        self.log.push(TranscriptEntry::new(
            Direction::incoming(self.role),
            frame.message_type.code(),
            &bytes,
        ));
        Ok(frame)
    }

    pub fn send(&mut self, message: &ProtocolMessage) -> Result<(), FrameError> {
        self.send_frame(message.message_type(), &encode_payload(message))
    }

    pub fn recv(&mut self) -> Result<ProtocolMessage, ChannelError> {
        let frame = self.recv_frame()?;
        Ok(decode_payload(frame.message_type, &frame.payload)?)
    }
}

/// Byte logs shared between a [`RecordingStream`] and whoever inspects it.
#[derive(Debug, Default, Clone)]
pub struct WireLog {
    pub sent: std::sync::Arc<std::sync::Mutex<Vec<u8>>>,
    pub received: std::sync::Arc<std::sync::Mutex<Vec<u8>>>,
}

impl WireLog {
    pub fn sent_bytes(&self) -> Vec<u8> {
        self.sent.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn received_bytes(&self) -> Vec<u8> {
        self.received
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }
}

/// Wraps a stream and copies every byte read or written into a [`WireLog`].
#[derive(Debug)]
pub struct RecordingStream<S> {
    inner: S,
    log: WireLog,
}

impl<S> RecordingStream<S> {
    pub fn new(inner: S) -> (Self, WireLog) {
        let log = WireLog::default();
        (
            Self {
                inner,
                log: log.clone(),
            },
            log,
        )
    }
}

impl<S: Read> Read for RecordingStream<S> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.log
            .received
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .extend_from_slice(&buf[..n]);
        Ok(n)
    }
}

impl<S: Write> Write for RecordingStream<S> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.log
            .sent
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .extend_from_slice(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}
