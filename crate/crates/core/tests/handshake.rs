mod common;

use common::{party, pki, socket_pair, spawn};
use jingbing::pki::{
    ca_init, mutual_handshake, unix_now, HandshakeError, PkiError, Role, Validity,
};
use jingbing::transport::{ChannelError, Connection, FrameError, ProtocolMessage};
use rand::rngs::OsRng;

#[test]
fn loopback_handshake_agrees_on_session() {
    let p = pki();
    let (a, b) = socket_pair();
    let (server_id, root) = (p.server.clone(), p.ca.root().clone());
    let server = spawn(move || {
        let mut conn = Connection::new(b, Role::Server);
        let out = mutual_handshake(&mut conn, &server_id, &root, unix_now(), &mut OsRng).unwrap();
        (out, conn.log().to_vec())
    });
    let mut conn = Connection::new(a, Role::Client);
    let client =
        mutual_handshake(&mut conn, &p.client, p.ca.root(), unix_now(), &mut OsRng).unwrap();
    let (server, server_log) = server.join().unwrap();
    assert_eq!(client.peer_subject, "NY");
    assert_eq!(server.peer_subject, "CA");
    assert_eq!(client.session_id(), server.session_id());
    assert_eq!(conn.log(), server_log.as_slice());
    assert_eq!(conn.log().len(), 4);
}

#[test]
fn foreign_ca_client_gets_silent_close() {
    let p = pki();
    let other = ca_init(&mut OsRng).unwrap();
    let rogue = party(&other, "CA", Validity::starting_now(3600));
    let (a, b) = socket_pair();
    let (server_id, root) = (p.server.clone(), p.ca.root().clone());
    let server = spawn(move || {
        let mut conn = Connection::new(b, Role::Server);
        mutual_handshake(&mut conn, &server_id, &root, unix_now(), &mut OsRng).map(|_| ())
    });
    let mut conn = Connection::new(a, Role::Client);
    let err = mutual_handshake(&mut conn, &rogue, p.ca.root(), unix_now(), &mut OsRng).unwrap_err();
    let server_err = server.join().unwrap().unwrap_err();
    assert!(
        matches!(
            server_err,
            HandshakeError::PeerCertificate(PkiError::BadSignature)
        ),
        "{server_err:?}"
    );
    // the server dropped its end without replying
    assert!(
        matches!(
            err,
            HandshakeError::Channel(ChannelError::Frame(
                FrameError::Closed | FrameError::UnexpectedEof
            ))
        ),
        "{err:?}"
    );
    assert_eq!(conn.log().len(), 1);
}

#[test]
fn expired_client_certificate_rejected() {
    let p = pki();
    let now = unix_now();
    let expired = party(
        &p.ca,
        "TX",
        Validity {
            not_before: now - 7200,
            not_after: now - 3600,
        },
    );
    let (a, b) = socket_pair();
    let (server_id, root) = (p.server.clone(), p.ca.root().clone());
    let server = spawn(move || {
        let mut conn = Connection::new(b, Role::Server);
        mutual_handshake(&mut conn, &server_id, &root, unix_now(), &mut OsRng).map(|_| ())
    });
    let mut conn = Connection::new(a, Role::Client);
    assert!(mutual_handshake(&mut conn, &expired, p.ca.root(), now, &mut OsRng).is_err());
    assert!(matches!(
        server.join().unwrap().unwrap_err(),
        HandshakeError::PeerCertificate(PkiError::Expired)
    ));
}

#[test]
fn not_yet_valid_server_certificate_rejected_by_client() {
    let p = pki();
    let now = unix_now();
    let early = party(
        &p.ca,
        "NY",
        Validity {
            not_before: now + 3600,
            not_after: now + 7200,
        },
    );
    let (a, b) = socket_pair();
    let root = p.ca.root().clone();
    let server = spawn(move || {
        let mut conn = Connection::new(b, Role::Server);
        // the server itself accepts the client; only the client objects
        mutual_handshake(&mut conn, &early, &root, unix_now(), &mut OsRng).map(|_| ())
    });
    let mut conn = Connection::new(a, Role::Client);
    let err = mutual_handshake(&mut conn, &p.client, p.ca.root(), now, &mut OsRng).unwrap_err();
    assert!(
        matches!(err, HandshakeError::PeerCertificate(PkiError::NotYetValid)),
        "{err:?}"
    );
    drop(conn);
    assert!(server.join().unwrap().is_err());
}

#[test]
fn replayed_auth_proof_rejected() {
    // Record a proof from one session, then present it in a fresh one.
    let p = pki();
    let (a, b) = socket_pair();
    let (server_id, root) = (p.server.clone(), p.ca.root().clone());
    let server = spawn(move || {
        let mut conn = Connection::new(b, Role::Server);
        mutual_handshake(&mut conn, &server_id, &root, unix_now(), &mut OsRng).unwrap();
    });
    let (recording, wire) = jingbing::transport::RecordingStream::new(a);
    let mut conn = Connection::new(recording, Role::Client);
    mutual_handshake(&mut conn, &p.client, p.ca.root(), unix_now(), &mut OsRng).unwrap();
    server.join().unwrap();
    let (frames, _) = jingbing::transport::split_frames(&wire.sent_bytes());
    let old_hello = frames[0].clone();
    let old_proof = frames[1].clone();

    let (a, b) = socket_pair();
    let (server_id, root) = (p.server.clone(), p.ca.root().clone());
    let server = spawn(move || {
        let mut conn = Connection::new(b, Role::Server);
        mutual_handshake(&mut conn, &server_id, &root, unix_now(), &mut OsRng).map(|_| ())
    });
    let mut conn = Connection::new(a, Role::Client);
    conn.send_frame(old_hello.message_type, &old_hello.payload)
        .unwrap();
    assert!(matches!(conn.recv().unwrap(), ProtocolMessage::Hello(_)));
    conn.send_frame(old_proof.message_type, &old_proof.payload)
        .unwrap();
    assert!(matches!(
        server.join().unwrap().unwrap_err(),
        HandshakeError::BadProof
    ));
}

#[test]
fn messages_out_of_order_rejected() {
    let p = pki();
    let (a, b) = socket_pair();
    let (server_id, root) = (p.server.clone(), p.ca.root().clone());
    let server = spawn(move || {
        let mut conn = Connection::new(b, Role::Server);
        mutual_handshake(&mut conn, &server_id, &root, unix_now(), &mut OsRng).map(|_| ())
    });
    let mut conn = Connection::new(a, Role::Client);
    conn.send(&ProtocolMessage::Close { signature: [0; 64] })
        .unwrap();
    assert!(matches!(
        server.join().unwrap().unwrap_err(),
        HandshakeError::UnexpectedMessage(_)
    ));
}
