//! Authenticated private intersection statistics for two parties.
//!
//! A client and a server, each holding a keyed dataset, learn the size of
//! the intersection of their identifier sets; the client additionally learns
//! per-column sums and sums of squares of its own values over that
//! intersection. Identifiers are blinded with a commutative cipher over
//! ristretto255, sums use Paillier and sums of squares use BFV.

pub mod bfv;
pub mod cipher;
pub mod oracle;
pub mod paillier;
pub mod pki;
pub mod prime;
pub mod protocol;
pub mod transport;
pub mod wire;
