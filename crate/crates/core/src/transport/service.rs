//! The long-lived server loop and the one-shot client run.
//!
//! Each connection gets a fresh state machine: handshake, one protocol
//! session, Close, transcript. Sessions run one at a time and a failed
//! session never stops the loop.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::Duration;

use log::{info, warn};
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use super::channel::{ChannelError, Connection};
use super::codec::{ErrorCode, ProtocolMessage};
use super::frame::{FrameError, MessageType};
use crate::pki::{
    mutual_handshake, unix_now, Certificate, HandshakeError, HandshakeOutcome, Identity, PkiError,
    Role, Transcript, TranscriptRecord,
};
use crate::protocol::{
    client_start, server_on_start, AggregationSpec, ClientOptions, Dataset, Limits, ProtocolError,
    ProtocolOutput, ValidationError,
};

pub const DEFAULT_PORT: u16 = 7155;
/// Per-read and per-write socket timeout for a session.
pub const DEFAULT_IO_TIMEOUT: Duration = Duration::from_secs(120);
const ACCEPT_POLL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub identity: Identity,
    pub root: Certificate,
    pub dataset: Dataset,
    pub limits: Limits,
    pub transcript_dir: Option<PathBuf>,
    pub io_timeout: Duration,
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub identity: Identity,
    pub root: Certificate,
    pub dataset: Dataset,
    pub spec: AggregationSpec,
    pub limits: Limits,
    pub options: ClientOptions,
    pub transcript_dir: Option<PathBuf>,
    pub io_timeout: Duration,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Handshake(#[from] HandshakeError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("peer sent error {0}")]
    PeerError(ErrorCode),
    #[error("unexpected {0:?} message")]
    UnexpectedMessage(MessageType),
    #[error("transcript: {0}")]
    Transcript(PkiError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("connection failed: {0}")]
    ConnectionError(std::io::Error),
    #[error("writing transcript: {0}")]
    TranscriptIo(std::io::Error),
}

impl From<FrameError> for SessionError {
    fn from(e: FrameError) -> Self {
        Self::Channel(e.into())
    }
}

impl SessionError {
    /// The reason code to send the peer, if any. Handshake failures get
    /// none: the connection is dropped without another frame.
    pub fn reason(&self) -> Option<ErrorCode> {
        match self {
            SessionError::Handshake(_)
            | SessionError::PeerError(_)
            | SessionError::ConnectionError(_) => None,
            SessionError::Protocol(e) => Some(match e {
                ProtocolError::Validation(_) => ErrorCode::ValidationFailed,
                ProtocolError::UnsupportedVersion(_) => ErrorCode::UnsupportedVersion,
                ProtocolError::PhaseViolation => ErrorCode::PhaseViolation,
                ProtocolError::MalformedMessage(_) => ErrorCode::MalformedMessage,
                _ => ErrorCode::Internal,
            }),
            SessionError::UnexpectedMessage(_) => Some(ErrorCode::UnexpectedMessage),
            SessionError::Channel(ChannelError::Codec(_)) => Some(ErrorCode::MalformedMessage),
            SessionError::Channel(ChannelError::Frame(f)) => match f {
                FrameError::FrameTooLarge(_) => Some(ErrorCode::FrameTooLarge),
                FrameError::UnknownMessageType(_) | FrameError::ZeroLength => {
                    Some(ErrorCode::MalformedMessage)
                }
                _ => None,
            },
            SessionError::Transcript(_) => Some(ErrorCode::ValidationFailed),
            SessionError::TranscriptIo(_) => None,
        }
    }
}

/// What one completed server session produced.
#[derive(Debug, Clone)]
pub struct SessionReport {
    pub peer_subject: String,
    pub cardinality: u64,
    pub record: TranscriptRecord,
    pub transcript_path: Option<PathBuf>,
}

/// What a completed client run produced.
#[derive(Debug, Clone)]
pub struct ClientRun {
    pub output: ProtocolOutput,
    pub peer_subject: String,
    pub record: TranscriptRecord,
    pub transcript_path: Option<PathBuf>,
}

fn transcript_through(
    conn_log: &[crate::pki::TranscriptEntry],
    outcome: &HandshakeOutcome,
) -> Transcript {
    Transcript::with_entries(outcome.session_id(), conn_log.iter().copied())
}

fn expect<S: Read + Write>(
    conn: &mut Connection<S>,
    wanted: MessageType,
) -> Result<ProtocolMessage, SessionError> {
    let message = conn.recv()?;
    match message {
        ProtocolMessage::Error(code) => Err(SessionError::PeerError(code)),
        m if m.message_type() == wanted => Ok(m),
        m => Err(SessionError::UnexpectedMessage(m.message_type())),
    }
}

/// Runs one server session on an accepted stream.
pub fn serve_connection<S: Read + Write, R: RngCore + CryptoRng>(
    stream: S,
    config: &ServerConfig,
    rng: &mut R,
) -> Result<SessionReport, SessionError> {
    let mut conn = Connection::new(stream, Role::Server);
    let started_at = unix_now();
    let result = server_session(&mut conn, config, started_at, rng);
    if let Err(e) = &result {
        if let Some(code) = e.reason() {
            let _ = conn.send(&ProtocolMessage::Error(code));
        }
    }
    result
}

fn server_session<S: Read + Write, R: RngCore + CryptoRng>(
    conn: &mut Connection<S>,
    config: &ServerConfig,
    started_at: u64,
    rng: &mut R,
) -> Result<SessionReport, SessionError> {
    let outcome = mutual_handshake(conn, &config.identity, &config.root, unix_now(), rng)?;
    let ProtocolMessage::StartRequest(request) = expect(conn, MessageType::StartRequest)? else {
        unreachable!()
    };
    let (mut state, shuffled) = server_on_start(&config.dataset, request, &config.limits, rng)?;
    conn.send(&ProtocolMessage::ServerShuffledSet(shuffled))?;
    let ProtocolMessage::ClientRoundOne(round_one) = expect(conn, MessageType::ClientRoundOne)?
    else {
        unreachable!()
    };
    let result = state.round_two(&round_one, rng)?;
    let cardinality = result.cardinality;
    conn.send(&ProtocolMessage::ServerResult(result))?;

    let transcript = transcript_through(conn.log(), &outcome);
    let ProtocolMessage::Close { signature } = expect(conn, MessageType::Close)? else {
        unreachable!()
    };
    transcript
        .verify(Role::Client, &outcome.peer, &signature)
        .map_err(SessionError::Transcript)?;
    let record = TranscriptRecord {
        client_signature: signature,
        server_signature: Some(transcript.finalize(Role::Server, &config.identity.key)),
        transcript,
        client_cert: outcome.peer.clone(),
        server_cert: config.identity.cert.clone(),
    };
    let transcript_path = match &config.transcript_dir {
        Some(dir) => Some(
            record
                .write_to_dir(dir, started_at, &outcome.peer_subject)
                .map_err(SessionError::TranscriptIo)?,
        ),
        None => None,
    };
    Ok(SessionReport {
        peer_subject: outcome.peer_subject,
        cardinality,
        record,
        transcript_path,
    })
}

/// Accepts connections until `shutdown` is set or `max_sessions`
/// connections have been handled, serving them one at a time.
/// Returns the number of sessions that completed successfully.
pub fn serve(
    listener: TcpListener,
    config: &ServerConfig,
    shutdown: &AtomicBool,
    max_sessions: Option<usize>,
) -> std::io::Result<usize> {
    listener.set_nonblocking(true)?;
    let mut handled = 0usize;
    let mut succeeded = 0usize;
    while !shutdown.load(Ordering::SeqCst) && max_sessions.is_none_or(|m| handled < m) {
        let (stream, peer_addr) = match listener.accept() {
            Ok(pair) => pair,
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                thread::sleep(ACCEPT_POLL);
                continue;
            }
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(ACCEPT_POLL);
                continue;
            }
        };
        handled += 1;
        if let Err(e) = prepare_stream(&stream, config.io_timeout) {
            warn!("session from {peer_addr}: socket setup failed: {e}");
            continue;
        }
        match serve_connection(stream, config, &mut OsRng) {
            Ok(report) => {
                succeeded += 1;
                info!(
                    "session from {peer_addr} ({}) complete: cardinality {}{}",
                    report.peer_subject,
                    report.cardinality,
                    report
                        .transcript_path
                        .map(|p| format!(", transcript {}", p.display()))
                        .unwrap_or_default()
                );
            }
            Err(e) => warn!("session from {peer_addr} failed: {e}"),
        }
    }
    Ok(succeeded)
}

fn prepare_stream(stream: &TcpStream, timeout: Duration) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))
}

/// Runs the client side of one session over an already connected stream.
pub fn run_client_on<S: Read + Write, R: RngCore + CryptoRng>(
    stream: S,
    config: &ClientConfig,
    rng: &mut R,
) -> Result<ClientRun, SessionError> {
    // Keys are generated and the request validated before any traffic.
    let (state, request) = client_start(
        &config.spec,
        &config.dataset,
        &config.limits,
        &config.options,
        rng,
    )?;
    run_prepared(stream, config, state, request, rng)
}

fn run_prepared<S: Read + Write, R: RngCore + CryptoRng>(
    stream: S,
    config: &ClientConfig,
    mut state: crate::protocol::ClientState,
    request: crate::protocol::StartRequest,
    rng: &mut R,
) -> Result<ClientRun, SessionError> {
    let mut conn = Connection::new(stream, Role::Client);
    let started_at = unix_now();
    let result = (|| {
        let outcome = mutual_handshake(&mut conn, &config.identity, &config.root, unix_now(), rng)?;
        conn.send(&ProtocolMessage::StartRequest(request))?;
        let ProtocolMessage::ServerShuffledSet(shuffled) =
            expect(&mut conn, MessageType::ServerShuffledSet)?
        else {
            unreachable!()
        };
        let round_one = state.round_one(&shuffled, rng)?;
        conn.send(&ProtocolMessage::ClientRoundOne(round_one))?;
        let ProtocolMessage::ServerResult(result) = expect(&mut conn, MessageType::ServerResult)?
        else {
            unreachable!()
        };
        let output = state.finalize(&result)?;
        let transcript = transcript_through(conn.log(), &outcome);
        let signature = transcript.finalize(Role::Client, &config.identity.key);
        conn.send(&ProtocolMessage::Close { signature })?;
        Ok((output, outcome, transcript, signature))
    })();
    let (output, outcome, transcript, signature) = match result {
        Ok(v) => v,
        Err(e) => {
            if let Some(code) = reason_for_client(&e) {
                let _ = conn.send(&ProtocolMessage::Error(code));
            }
            return Err(e);
        }
    };
    let record = TranscriptRecord {
        transcript,
        client_cert: config.identity.cert.clone(),
        server_cert: outcome.peer.clone(),
        client_signature: signature,
        server_signature: None,
    };
    let transcript_path = match &config.transcript_dir {
        Some(dir) => Some(
            record
                .write_to_dir(dir, started_at, &outcome.peer_subject)
                .map_err(SessionError::TranscriptIo)?,
        ),
        None => None,
    };
    Ok(ClientRun {
        output,
        peer_subject: outcome.peer_subject,
        record,
        transcript_path,
    })
}

fn reason_for_client(e: &SessionError) -> Option<ErrorCode> {
    match e {
        // A result that fails the range checks is reported as malformed.
        SessionError::Protocol(ProtocolError::ProtocolViolation(_)) => {
            Some(ErrorCode::MalformedMessage)
        }
        other => other.reason(),
    }
}

/// Validates the request, connects, and runs one session.
pub fn run_client<A: ToSocketAddrs>(
    addr: A,
    config: &ClientConfig,
) -> Result<ClientRun, SessionError> {
    let mut rng = OsRng;
    let (state, request) = client_start(
        &config.spec,
        &config.dataset,
        &config.limits,
        &config.options,
        &mut rng,
    )?;
    let stream = TcpStream::connect(addr).map_err(SessionError::ConnectionError)?;
    prepare_stream(&stream, config.io_timeout).map_err(SessionError::ConnectionError)?;
    run_prepared(stream, config, state, request, &mut rng)
}

impl From<ValidationError> for SessionError {
    fn from(e: ValidationError) -> Self {
        Self::Protocol(e.into())
    }
}
