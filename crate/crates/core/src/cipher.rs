//! Commutative cipher over ristretto255.
//!
//! Identifiers are hashed to the prime-order group with the full-domain
//! Elligator construction (`from_uniform_bytes` on a 64-byte SHA-512 output),
//! then raised to a secret scalar. Exponentiation commutes, so
//! `H(x)^(ab) = H(x)^(ba)` and both parties can compare doubly blinded
//! identifiers without seeing each other's sets.
//!
//! Group elements travel as the 32-byte canonical Ristretto encoding.

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};
use thiserror::Error;

/// Domain separation tag, pinned for protocol version 1.
pub const HASH_TO_GROUP_DST: &[u8] = b"JINGBING-V1-ristretto255-SHA512-H2G";

/// Longest identifier accepted by [`hash_to_group`].
pub const MAX_IDENTIFIER_LEN: usize = 128;

/// Length of the canonical group-element encoding.
pub const ELEMENT_LEN: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CipherError {
    #[error("identifier must be 1..={MAX_IDENTIFIER_LEN} bytes, got {0}")]
    InvalidIdentifier(usize),
    #[error("bytes are not a canonical encoding of a non-identity group element")]
    InvalidGroupElement,
    #[error("randomness source failed")]
    RngError,
}

/// A non-identity element of the ristretto255 group.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupElement(RistrettoPoint);

impl GroupElement {
    pub fn to_bytes(&self) -> [u8; ELEMENT_LEN] {
        self.0.compress().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CipherError> {
        let compressed =
            CompressedRistretto::from_slice(bytes).map_err(|_| CipherError::InvalidGroupElement)?;
        let point = compressed
            .decompress()
            .ok_or(CipherError::InvalidGroupElement)?;
        if point == RistrettoPoint::identity() {
            return Err(CipherError::InvalidGroupElement);
        }
        Ok(Self(point))
    }
}

impl std::fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GroupElement(")?;
        for b in &self.to_bytes()[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// A party's secret exponent, never zero.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupScalar(Scalar);

impl GroupScalar {
    /// Builds a scalar from a small integer; used for tests and identity checks.
    pub fn from_u64(v: u64) -> Option<Self> {
        (v != 0).then(|| Self(Scalar::from(v)))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Option<Self> {
        Option::<Scalar>::from(Scalar::from_canonical_bytes(bytes))
            .filter(|s| *s != Scalar::ZERO)
            .map(Self)
    }
}

impl std::fmt::Debug for GroupScalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("GroupScalar(..)")
    }
}

fn check_identifier(id: &[u8]) -> Result<(), CipherError> {
    if id.is_empty() || id.len() > MAX_IDENTIFIER_LEN {
        return Err(CipherError::InvalidIdentifier(id.len()));
    }
    Ok(())
}

/// Deterministically maps an identifier to a group element.
pub fn hash_to_group(id: &[u8]) -> Result<GroupElement, CipherError> {
    check_identifier(id)?;
    let mut h = Sha512::new();
    h.update(HASH_TO_GROUP_DST);
    h.update((id.len() as u32).to_be_bytes());
    h.update(id);
    let wide: [u8; 64] = h.finalize().into();
    let point = RistrettoPoint::from_uniform_bytes(&wide);
    // Only reachable with a SHA-512 preimage of an identity-mapping input.
    if point == RistrettoPoint::identity() {
        return Err(CipherError::InvalidIdentifier(id.len()));
    }
    Ok(GroupElement(point))
}

/// Samples a uniform scalar in `[1, p-1]`.
pub fn keygen<R: RngCore + CryptoRng>(rng: &mut R) -> Result<GroupScalar, CipherError> {
    loop {
        let mut wide = [0u8; 64];
        rng.try_fill_bytes(&mut wide)
            .map_err(|_| CipherError::RngError)?;
        let s = Scalar::from_bytes_mod_order_wide(&wide);
        if s != Scalar::ZERO {
            return Ok(GroupScalar(s));
        }
    }
}

pub fn encrypt(key: &GroupScalar, id: &[u8]) -> Result<GroupElement, CipherError> {
    Ok(reencrypt(key, &hash_to_group(id)?))
}

pub fn reencrypt(key: &GroupScalar, element: &GroupElement) -> GroupElement {
    GroupElement(element.0 * key.0)
}

/// Decodes `bytes` and re-encrypts them; the wire-facing form of [`reencrypt`].
pub fn reencrypt_bytes(key: &GroupScalar, bytes: &[u8]) -> Result<GroupElement, CipherError> {
    Ok(reencrypt(key, &GroupElement::from_bytes(bytes)?))
}

/// Uniform in-place Fisher–Yates shuffle.
pub fn shuffle<T, R: RngCore + CryptoRng>(mut items: Vec<T>, rng: &mut R) -> Vec<T> {
    items.shuffle(rng);
    items
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::OsRng;
    use std::collections::HashSet;

    #[test]
    fn hash_is_deterministic_and_separating() {
        let a1 = hash_to_group(b"alice").unwrap();
        let a2 = hash_to_group(b"alice").unwrap();
        let b = hash_to_group(b"bob").unwrap();
        assert_eq!(a1.to_bytes(), a2.to_bytes());
        assert_ne!(a1.to_bytes(), b.to_bytes());
    }

    #[test]
    fn identifier_length_bounds() {
        assert_eq!(hash_to_group(b""), Err(CipherError::InvalidIdentifier(0)));
        assert!(hash_to_group(&[b'x'; MAX_IDENTIFIER_LEN]).is_ok());
        assert_eq!(
            hash_to_group(&[b'x'; MAX_IDENTIFIER_LEN + 1]),
            Err(CipherError::InvalidIdentifier(MAX_IDENTIFIER_LEN + 1))
        );
        assert!(encrypt(&keygen(&mut OsRng).unwrap(), b"").is_err());
    }

    #[test]
    fn no_case_folding() {
        assert_ne!(
            hash_to_group(b"Alice").unwrap(),
            hash_to_group(b"alice").unwrap()
        );
        assert_ne!(
            hash_to_group(b"alice ").unwrap(),
            hash_to_group(b"alice").unwrap()
        );
    }

    #[test]
    fn keygen_range() {
        let mut seen = HashSet::new();
        for _ in 0..1000 {
            let k = keygen(&mut OsRng).unwrap();
            // canonical and nonzero means it lies in [1, p-1]
            assert!(GroupScalar::from_bytes(k.to_bytes()).is_some());
            seen.insert(k.to_bytes());
        }
        assert_eq!(seen.len(), 1000);
    }

    #[test]
    fn zero_scalar_rejected() {
        assert!(GroupScalar::from_u64(0).is_none());
        assert!(GroupScalar::from_bytes([0u8; 32]).is_none());
    }

    #[test]
    fn identity_exponent() {
        let one = GroupScalar::from_u64(1).unwrap();
        assert_eq!(
            encrypt(&one, b"alice").unwrap(),
            hash_to_group(b"alice").unwrap()
        );
        let g = hash_to_group(b"carol").unwrap();
        assert_eq!(reencrypt(&one, &g), g);
    }

    #[test]
    fn encrypt_is_reencrypt_of_hash() {
        let k = keygen(&mut OsRng).unwrap();
        assert_eq!(
            encrypt(&k, b"dave").unwrap(),
            reencrypt(&k, &hash_to_group(b"dave").unwrap())
        );
    }

    #[test]
    fn malformed_elements() {
        let k = keygen(&mut OsRng).unwrap();
        assert_eq!(
            reencrypt_bytes(&k, &[0xff; 32]),
            Err(CipherError::InvalidGroupElement)
        );
        assert_eq!(
            reencrypt_bytes(&k, &[1; 5]),
            Err(CipherError::InvalidGroupElement)
        );
        // identity encodes as all zeroes
        assert_eq!(
            GroupElement::from_bytes(&[0u8; 32]),
            Err(CipherError::InvalidGroupElement)
        );
    }

    #[test]
    fn element_roundtrip() {
        let g = hash_to_group(b"erin").unwrap();
        assert_eq!(GroupElement::from_bytes(&g.to_bytes()).unwrap(), g);
    }

    #[test]
    fn shuffle_edges() {
        let empty: Vec<u32> = shuffle(vec![], &mut OsRng);
        assert!(empty.is_empty());
        assert_eq!(shuffle(vec![7], &mut OsRng), vec![7]);
        let input: Vec<u32> = (0..100).collect();
        let out = shuffle(input.clone(), &mut OsRng);
        assert_ne!(out, input);
        let mut sorted = out;
        sorted.sort();
        assert_eq!(sorted, input);
    }
}
