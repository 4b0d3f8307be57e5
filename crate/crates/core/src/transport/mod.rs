//! Framing, payload codec and the TCP service.
//!
//! The channel is authenticated at the application layer but not encrypted;
//! every protocol payload is ciphertext or blinded group elements by
//! construction.

mod channel;
mod codec;
mod frame;
mod service;

pub use channel::{ChannelError, Connection, RecordingStream, WireLog};
pub use codec::{decode_payload, encode_payload, CodecError, ErrorCode, ProtocolMessage};
pub use frame::{
    frame_decode, frame_decode_slice, frame_encode, split_frames, Frame, FrameError, MessageType,
    HEADER_LEN, MAX_FRAME_LEN,
};
pub use service::{
    run_client, run_client_on, serve, serve_connection, ClientConfig, ClientRun, ServerConfig,
    SessionError, SessionReport, DEFAULT_IO_TIMEOUT, DEFAULT_PORT,
};
