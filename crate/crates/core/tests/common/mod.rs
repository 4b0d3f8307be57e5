#![allow(dead_code)]

use std::os::unix::net::UnixStream;
use std::thread;
use std::time::Duration;

use jingbing::paillier::TEST_KEY_BITS;
use jingbing::pki::{ca_init, generate_signing_key, CertificateAuthority, Identity, Validity};
use jingbing::protocol::{
    AggregationSpec, ClientOptions, Dataset, Limits, Operator, Record, SpecEntry,
};
use jingbing::transport::{ClientConfig, ServerConfig};
use rand::rngs::OsRng;

pub struct Pki {
    pub ca: CertificateAuthority,
    pub client: Identity,
    pub server: Identity,
}

pub fn party(ca: &CertificateAuthority, subject: &str, validity: Validity) -> Identity {
    let key = generate_signing_key(&mut OsRng).unwrap();
    let cert = ca
        .issue(subject, &key.verifying_key(), validity, &mut OsRng)
        .unwrap();
    Identity::new(cert, key).unwrap()
}

pub fn pki() -> Pki {
    let ca = ca_init(&mut OsRng).unwrap();
    let client = party(&ca, "CA", Validity::starting_now(3600));
    let server = party(&ca, "NY", Validity::starting_now(3600));
    Pki { ca, client, server }
}

pub fn spec(entries: &[(u8, Operator)]) -> AggregationSpec {
    AggregationSpec::new(entries.iter().map(|&(c, o)| SpecEntry::new(c, o)).collect()).unwrap()
}

/// The three-record example: client {alice:3, bob:5, carol:7}, server {bob, carol, dave}.
pub fn worked_example() -> (Dataset, Dataset) {
    let client = Dataset::new(
        vec![
            Record::new("alice", vec![3]),
            Record::new("bob", vec![5]),
            Record::new("carol", vec![7]),
        ],
        1,
        31,
    )
    .unwrap();
    let server = Dataset::from_ids(["bob", "carol", "dave"]).unwrap();
    (client, server)
}

pub fn test_options() -> ClientOptions {
    ClientOptions {
        paillier_bits: TEST_KEY_BITS,
        ..ClientOptions::default()
    }
}

pub fn server_config(pki: &Pki, dataset: Dataset, limits: Limits) -> ServerConfig {
    ServerConfig {
        identity: pki.server.clone(),
        root: pki.ca.root().clone(),
        dataset,
        limits,
        transcript_dir: None,
        io_timeout: Duration::from_secs(60),
    }
}

pub fn client_config(
    pki: &Pki,
    dataset: Dataset,
    spec: AggregationSpec,
    limits: Limits,
) -> ClientConfig {
    ClientConfig {
        identity: pki.client.clone(),
        root: pki.ca.root().clone(),
        dataset,
        spec,
        limits,
        options: test_options(),
        transcript_dir: None,
        io_timeout: Duration::from_secs(60),
    }
}

/// A connected pair of in-process sockets with timeouts so a stuck test fails.
pub fn socket_pair() -> (UnixStream, UnixStream) {
    let (a, b) = UnixStream::pair().unwrap();
    for s in [&a, &b] {
        s.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
    }
    (a, b)
}

/// Runs `f` on a thread and returns its handle; panics propagate on join.
pub fn spawn<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> thread::JoinHandle<T> {
    thread::spawn(f)
}
