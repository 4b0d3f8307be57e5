//! Paillier additively homomorphic encryption with `g = n + 1`.
//!
//! `Enc(m; r) = (1 + m n) r^n mod n²`, `Dec(c) = L(c^λ mod n²) μ mod n` where
//! `L(u) = (u - 1) / n`. Multiplying ciphertexts adds plaintexts.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prime;
use crate::wire::{Reader, WireError, Writer};

/// Key size used by default deployments.
pub const DEFAULT_KEY_BITS: u64 = 2048;
/// Key size used by tests and quick local runs.
pub const TEST_KEY_BITS: u64 = 512;

const KEYGEN_CANDIDATES: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("unsupported key size {0} (expected 512, 1024 or 2048)")]
    UnsupportedKeySize(u64),
    #[error("prime generation gave up")]
    KeygenError,
    #[error("invalid key material: {0}")]
    InvalidKey(&'static str),
    #[error("plaintext outside [0, n)")]
    PlaintextOutOfRange,
    #[error("ciphertext outside Z*_(n^2)")]
    InvalidCiphertext,
    #[error("ciphertext belongs to a different public key")]
    KeyMismatch,
    #[error("randomness source failed")]
    RngError,
}

type KeyTag = [u8; 8];

fn key_tag(n: &BigUint) -> KeyTag {
    let digest = Sha256::digest(n.to_bytes_be());
    let mut tag = [0u8; 8];
    tag.copy_from_slice(&digest[..8]);
    tag
}

#[derive(Clone, PartialEq, Eq)]
pub struct PaillierPublicKey {
    n: BigUint,
    n_squared: BigUint,
    tag: KeyTag,
}

impl std::fmt::Debug for PaillierPublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PaillierPublicKey({} bits)", self.n.bits())
    }
}

#[derive(Clone)]
pub struct PaillierSecretKey {
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    mu: BigUint,
    public: PaillierPublicKey,
}

impl std::fmt::Debug for PaillierSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PaillierSecretKey(..)")
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct PaillierCiphertext {
    c: BigUint,
    tag: KeyTag,
}

impl std::fmt::Debug for PaillierCiphertext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PaillierCiphertext({} bits)", self.c.bits())
    }
}

impl PaillierPublicKey {
    pub fn from_modulus(n: BigUint) -> Result<Self, PaillierError> {
        if n.is_even() || n < BigUint::from(15u32) {
            return Err(PaillierError::InvalidKey(
                "modulus must be odd and non-trivial",
            ));
        }
        Ok(Self {
            n_squared: &n * &n,
            tag: key_tag(&n),
            n,
        })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// Big-endian `n` with a 4-byte length prefix.
    pub fn encode(&self, w: &mut Writer) {
        w.bytes(&self.n.to_bytes_be());
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let bytes = r.bytes("paillier modulus")?;
        if bytes.first() == Some(&0) {
            return Err(WireError::Invalid("paillier modulus (leading zero)"));
        }
        Self::from_modulus(BigUint::from_bytes_be(bytes))
            .map_err(|_| WireError::Invalid("paillier modulus"))
    }

    pub fn encrypt<R: RngCore + CryptoRng>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<PaillierCiphertext, PaillierError> {
        let r = self.sample_unit(rng);
        self.encrypt_with_nonce(m, &r)
    }

    pub fn encrypt_u64<R: RngCore + CryptoRng>(
        &self,
        m: u64,
        rng: &mut R,
    ) -> Result<PaillierCiphertext, PaillierError> {
        self.encrypt(&BigUint::from(m), rng)
    }

    /// Deterministic encryption with caller-supplied `r ∈ Z*_n`.
    pub fn encrypt_with_nonce(
        &self,
        m: &BigUint,
        r: &BigUint,
    ) -> Result<PaillierCiphertext, PaillierError> {
        if *m >= self.n {
            return Err(PaillierError::PlaintextOutOfRange);
        }
        if r.is_zero() || *r >= self.n || !r.gcd(&self.n).is_one() {
            return Err(PaillierError::InvalidCiphertext);
        }
        // (1 + n)^m = 1 + m n (mod n²)
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(PaillierCiphertext {
            c: gm * rn % &self.n_squared,
            tag: self.tag,
        })
    }

    pub fn add(
        &self,
        a: &PaillierCiphertext,
        b: &PaillierCiphertext,
    ) -> Result<PaillierCiphertext, PaillierError> {
        self.check(a)?;
        self.check(b)?;
        Ok(PaillierCiphertext {
            c: &a.c * &b.c % &self.n_squared,
            tag: self.tag,
        })
    }

    /// Multiplies in a fresh `r^n`, leaving the plaintext unchanged.
    pub fn rerandomize<R: RngCore + CryptoRng>(
        &self,
        ct: &PaillierCiphertext,
        rng: &mut R,
    ) -> Result<PaillierCiphertext, PaillierError> {
        self.check(ct)?;
        let rn = self.sample_unit(rng).modpow(&self.n, &self.n_squared);
        Ok(PaillierCiphertext {
            c: &ct.c * rn % &self.n_squared,
            tag: self.tag,
        })
    }

    /// Binds wire bytes (big-endian magnitude) to this key, checking range and unit-ness.
    pub fn ciphertext_from_bytes(&self, bytes: &[u8]) -> Result<PaillierCiphertext, PaillierError> {
        let c = BigUint::from_bytes_be(bytes);
        let ct = PaillierCiphertext { c, tag: self.tag };
        self.check(&ct)?;
        Ok(ct)
    }

    fn check(&self, ct: &PaillierCiphertext) -> Result<(), PaillierError> {
        if ct.tag != self.tag {
            return Err(PaillierError::KeyMismatch);
        }
        if ct.c.is_zero() || ct.c >= self.n_squared || !ct.c.gcd(&self.n).is_one() {
            return Err(PaillierError::InvalidCiphertext);
        }
        Ok(())
    }

    fn sample_unit<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_range(&BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }
}

impl PaillierCiphertext {
    pub fn value(&self) -> &BigUint {
        &self.c
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.c.to_bytes_be()
    }
}

impl PaillierSecretKey {
    /// Builds a key from two distinct primes. Primality is the caller's
    /// responsibility; the structural checks below catch the common mistakes.
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self, PaillierError> {
        if p == q || p < BigUint::from(3u32) || q < BigUint::from(3u32) {
            return Err(PaillierError::InvalidKey(
                "primes must be distinct odd primes",
            ));
        }
        let n = &p * &q;
        let p1 = &p - 1u32;
        let q1 = &q - 1u32;
        if !n.gcd(&(&p1 * &q1)).is_one() {
            return Err(PaillierError::InvalidKey("gcd(n, φ(n)) ≠ 1"));
        }
        let lambda = p1.lcm(&q1);
        let public = PaillierPublicKey::from_modulus(n)?;
        let u = BigUint::one() + &lambda * public.n() % &public.n_squared;
        let l = l_function(&(u % &public.n_squared), public.n());
        let mu =
            mod_inverse(&l, public.n()).ok_or(PaillierError::InvalidKey("μ does not exist"))?;
        Ok(Self {
            p,
            q,
            lambda,
            mu,
            public,
        })
    }

    pub fn public_key(&self) -> &PaillierPublicKey {
        &self.public
    }

    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }

    pub fn decrypt(&self, ct: &PaillierCiphertext) -> Result<BigUint, PaillierError> {
        self.public.check(ct)?;
        let n = self.public.n();
        let u = ct.c.modpow(&self.lambda, &self.public.n_squared);
        Ok(l_function(&u, n) * &self.mu % n)
    }
}

fn l_function(u: &BigUint, n: &BigUint) -> BigUint {
    (u - 1u32) / n
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = num_bigint::BigInt::from(a.clone());
    let m_int = num_bigint::BigInt::from(m.clone());
    let e = a.extended_gcd(&m_int);
    if !e.gcd.is_one() {
        return None;
    }
    e.x.mod_floor(&m_int).to_biguint()
}

pub fn keygen<R: RngCore + CryptoRng>(
    bits: u64,
    rng: &mut R,
) -> Result<(PaillierPublicKey, PaillierSecretKey), PaillierError> {
    if !matches!(bits, 512 | 1024 | 2048) {
        return Err(PaillierError::UnsupportedKeySize(bits));
    }
    loop {
        let p = prime::random_prime(bits / 2, KEYGEN_CANDIDATES, rng)
            .ok_or(PaillierError::KeygenError)?;
        let q = prime::random_prime(bits / 2, KEYGEN_CANDIDATES, rng)
            .ok_or(PaillierError::KeygenError)?;
        if p == q {
            continue;
        }
        match PaillierSecretKey::from_primes(p, q) {
            Ok(sk) if sk.public.bits() == bits => return Ok((sk.public.clone(), sk)),
            _ => continue,
        }
    }
}
