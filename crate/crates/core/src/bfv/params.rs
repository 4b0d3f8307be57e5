use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::ntt::{Modulus, NttTable};
use super::poly::RnsContext;
use super::BfvError;
use crate::prime::is_prime_u64;
use crate::wire::{Reader, WireError, Writer};

/// `2^54`-ish and `2^55`-ish primes, both `≡ 1 (mod 8192)`.
pub const DEFAULT_Q_PRIMES: [u64; 2] = [18014398509309953, 36028797018652673];
pub const DEFAULT_DEGREE: usize = 4096;
pub const DEFAULT_PLAINTEXT_MODULUS: u64 = 65537;
/// Relinearization digits are base `2^32`.
pub const DEFAULT_DECOMPOSITION_BITS: u32 = 32;

const PARAMS_DOMAIN: &[u8] = b"JINGBING-BFV-PARAMS-V1";

/// Scheme parameters. Cheap to clone; derived tables are shared.
#[derive(Clone)]
pub struct BfvParams {
    inner: Arc<Inner>,
}

struct Inner {
    n: usize,
    q_primes: Vec<u64>,
    t: u64,
    decomposition_bits: u32,
    ctx: RnsContext,
    delta: u128,
    digits: usize,
    hash: [u8; 32],
    tensor: TensorBasis,
}

impl std::fmt::Debug for BfvParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BfvParams")
            .field("n", &self.inner.n)
            .field("q_primes", &self.inner.q_primes)
            .field("t", &self.inner.t)
            .field("decomposition_bits", &self.inner.decomposition_bits)
            .finish()
    }
}

impl PartialEq for BfvParams {
    fn eq(&self, other: &Self) -> bool {
        self.inner.hash == other.inner.hash
    }
}

impl Eq for BfvParams {}

impl BfvParams {
    pub fn new(
        n: usize,
        q_primes: &[u64],
        t: u64,
        decomposition_bits: u32,
    ) -> Result<Self, BfvError> {
        if !n.is_power_of_two() || n < 2 {
            return Err(BfvError::InvalidParams(
                "ring degree must be a power of two",
            ));
        }
        let two_n = 2 * n as u64;
        for &p in q_primes {
            if !is_prime_u64(p) || p % two_n != 1 {
                return Err(BfvError::InvalidParams(
                    "every q factor must be a prime ≡ 1 mod 2n",
                ));
            }
            if p >= 1 << 62 {
                return Err(BfvError::InvalidParams("q factors must be below 2^62"));
            }
            if t >= p {
                return Err(BfvError::InvalidParams("t must be below every q factor"));
            }
        }
        if !is_prime_u64(t) || t % two_n != 1 {
            return Err(BfvError::InvalidParams("t must be a prime ≡ 1 mod 2n"));
        }
        if !(1..=64).contains(&decomposition_bits) {
            return Err(BfvError::InvalidParams(
                "decomposition width must be 1..=64 bits",
            ));
        }
        let ctx = RnsContext::new(n, q_primes)?;
        let q = ctx.modulus();
        if bits(q) + bits(t as u128) > 126 {
            return Err(BfvError::InvalidParams("q·t must stay below 2^126"));
        }
        let delta = q / t as u128;
        if delta < 2 {
            return Err(BfvError::InvalidParams("Δ = floor(q/t) must be at least 2"));
        }
        let digits = (bits(q - 1) as usize).div_ceil(decomposition_bits as usize);
        let tensor = TensorBasis::new(n, q_primes, q, t)?;

        let mut w = Writer::new();
        encode_fields(&mut w, n, q_primes, t, decomposition_bits);
        let mut h = Sha256::new();
        h.update(PARAMS_DOMAIN);
        h.update(w.into_bytes());

        Ok(Self {
            inner: Arc::new(Inner {
                n,
                q_primes: q_primes.to_vec(),
                t,
                decomposition_bits,
                ctx,
                delta,
                digits,
                hash: h.finalize().into(),
                tensor,
            }),
        })
    }

    pub fn degree(&self) -> usize {
        self.inner.n
    }

    pub fn q_primes(&self) -> &[u64] {
        &self.inner.q_primes
    }

    pub fn q(&self) -> u128 {
        self.inner.ctx.modulus()
    }

    pub fn plaintext_modulus(&self) -> u64 {
        self.inner.t
    }

    pub fn delta(&self) -> u128 {
        self.inner.delta
    }

    pub fn decomposition_bits(&self) -> u32 {
        self.inner.decomposition_bits
    }

    pub fn decomposition_digits(&self) -> usize {
        self.inner.digits
    }

    pub fn context(&self) -> &RnsContext {
        &self.inner.ctx
    }

    pub fn hash(&self) -> [u8; 32] {
        self.inner.hash
    }

    pub(crate) fn tensor_basis(&self) -> &TensorBasis {
        &self.inner.tensor
    }

    pub fn encode(&self, w: &mut Writer) {
        let i = &self.inner;
        encode_fields(w, i.n, &i.q_primes, i.t, i.decomposition_bits);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let n = r.u32("bfv degree")? as usize;
        let count = r.u8("bfv prime count")? as usize;
        let primes = (0..count)
            .map(|_| r.u64("bfv prime"))
            .collect::<Result<Vec<_>, _>>()?;
        let t = r.u64("bfv plaintext modulus")?;
        let decomposition_bits = r.u8("bfv decomposition bits")? as u32;
        // Refuse to build tables for absurd degrees sent by a peer.
        if n > 1 << 15 {
            return Err(WireError::Invalid("bfv degree"));
        }
        Self::new(n, &primes, t, decomposition_bits).map_err(|_| WireError::Invalid("bfv params"))
    }
}

fn encode_fields(w: &mut Writer, n: usize, q_primes: &[u64], t: u64, decomposition_bits: u32) {
    w.u32(n as u32).u8(q_primes.len() as u8);
    for &p in q_primes {
        w.u64(p);
    }
    w.u64(t).u8(decomposition_bits as u8);
}

pub(crate) fn bits(v: u128) -> u32 {
    128 - v.leading_zeros()
}

/// n = 4096, q = q₁q₂ ≈ 2^109, t = 65537, base-2^32 relinearization.
pub fn params_default() -> BfvParams {
    static DEFAULT: std::sync::OnceLock<BfvParams> = std::sync::OnceLock::new();
    DEFAULT
        .get_or_init(|| {
            BfvParams::new(
                DEFAULT_DEGREE,
                &DEFAULT_Q_PRIMES,
                DEFAULT_PLAINTEXT_MODULUS,
                DEFAULT_DECOMPOSITION_BITS,
            )
            .expect("default parameters are valid")
        })
        .clone()
}

/// Extended RNS basis `{q_i} ∪ {p_j}` for computing the ciphertext tensor
/// exactly over the integers and scaling it by `t/q` with rounding.
///
/// With centred inputs the tensor coefficients satisfy `|x| ≤ n q² / 2`. We
/// add the offset `q·L`, `L = ⌊P/2⌋`, so that `x' = x + qL ∈ [0, qP)` and read
/// it in mixed radix as `x' = r + q·Y'` with `r ∈ [0, q)`. Then
/// `round(t x / q) = t (Y' − L) + round(t r / q)`, all computable mod each `q_i`.
pub(crate) struct TensorBasis {
    pub(crate) tables: Vec<NttTable>,
    pub(crate) q_count: usize,
    /// `prefix[k][i] = m_0 ⋯ m_{i-1} mod m_k` for `i < k`
    prefix: Vec<Vec<u64>>,
    garner: Vec<u64>,
    /// `(q·L) mod m_k`
    offset: Vec<u64>,
    /// `ext_prefix[j][i] = p_0 ⋯ p_{i-1} mod q_j` over the extension primes
    ext_prefix: Vec<Vec<u64>>,
    l_mod_q: Vec<u64>,
    t_mod_q: Vec<u64>,
    q: u128,
    t: u64,
}

impl TensorBasis {
    fn new(n: usize, q_primes: &[u64], q: u128, t: u64) -> Result<Self, BfvError> {
        let two_n = 2 * n as u64;
        // P must exceed n·q·4 so that q⌊P/2⌋ covers the tensor magnitude.
        let needed_bits = bits(n as u128) + bits(q) + 2;
        let mut ext = Vec::new();
        let mut ext_bits = 0;
        let mut k = ((1u64 << 61) - 1) / two_n;
        while ext_bits < needed_bits {
            if k == 0 {
                return Err(BfvError::InvalidParams("no extension primes available"));
            }
            let p = k * two_n + 1;
            k -= 1;
            if is_prime_u64(p) && !q_primes.contains(&p) {
                ext.push(p);
                ext_bits += 60;
            }
        }
        let all: Vec<u64> = q_primes.iter().chain(&ext).copied().collect();
        let tables = all
            .iter()
            .map(|&p| NttTable::new(p, n).ok_or(BfvError::InvalidParams("extension prime")))
            .collect::<Result<Vec<_>, _>>()?;

        let prefix: Vec<Vec<u64>> = all
            .iter()
            .enumerate()
            .map(|(k, &mk)| {
                let m = Modulus::new(mk);
                let mut acc = 1u64;
                (0..k)
                    .map(|i| {
                        let cur = acc;
                        acc = m.mul(acc, all[i] % mk);
                        cur
                    })
                    .collect()
            })
            .collect();
        let garner = all
            .iter()
            .enumerate()
            .map(|(k, &mk)| {
                let m = Modulus::new(mk);
                let prod = all[..k].iter().fold(1u64, |acc, &p| m.mul(acc, p % mk));
                m.inv(prod)
            })
            .collect();

        // L = ⌊P/2⌋ residues: P is odd so L = (P - 1)/2 = P·2^{-1} - 2^{-1} (mod m)
        let l_mod = |m: &Modulus| {
            let p_mod = ext.iter().fold(1u64, |acc, &p| m.mul(acc, p % m.value()));
            let half = m.inv(2);
            m.mul(m.sub(p_mod, 1), half)
        };
        let offset = all
            .iter()
            .map(|&mk| {
                let m = Modulus::new(mk);
                m.mul(m.reduce_u128(q), l_mod(&m))
            })
            .collect();
        let ext_prefix = q_primes
            .iter()
            .map(|&qj| {
                let m = Modulus::new(qj);
                let mut acc = 1u64;
                ext.iter()
                    .map(|&p| {
                        let cur = acc;
                        acc = m.mul(acc, p % qj);
                        cur
                    })
                    .collect()
            })
            .collect();
        let l_mod_q = q_primes
            .iter()
            .map(|&qj| l_mod(&Modulus::new(qj)))
            .collect();
        let t_mod_q = q_primes.iter().map(|&qj| t % qj).collect();

        Ok(Self {
            tables,
            q_count: q_primes.len(),
            prefix,
            garner,
            offset,
            ext_prefix,
            l_mod_q,
            t_mod_q,
            q,
            t,
        })
    }

    #[cfg(test)]
    pub(crate) fn extension_primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.tables[self.q_count..]
            .iter()
            .map(|t| t.modulus().value())
    }

    /// Given the residues of one tensor coefficient over the full basis,
    /// returns `round(t·x/q)` reduced mod each `q_i`.
    pub(crate) fn scale_round(&self, residues: &mut [u64], out: &mut [u64]) {
        let k_total = self.tables.len();
        let mut digits = [0u64; 8];
        debug_assert!(k_total <= digits.len());
        for k in 0..k_total {
            let m = self.tables[k].modulus();
            let mut x = m.add(residues[k], self.offset[k]);
            for (d, &prefix) in digits[..k].iter().zip(&self.prefix[k]) {
                x = m.sub(x, m.mul(d % m.value(), prefix));
            }
            digits[k] = m.mul(x, self.garner[k]);
        }
        let mut r: u128 = 0;
        let mut radix: u128 = 1;
        for (i, &d) in digits[..self.q_count].iter().enumerate() {
            r += d as u128 * radix;
            radix *= self.tables[i].modulus().value() as u128;
        }
        let rounded = (2 * self.t as u128 * r + self.q) / (2 * self.q);
        for (j, slot) in out.iter_mut().enumerate() {
            let m = self.tables[j].modulus();
            let mut y = 0u64;
            for (i, &d) in digits[self.q_count..k_total].iter().enumerate() {
                y = m.add(y, m.mul(d % m.value(), self.ext_prefix[j][i]));
            }
            let y = m.sub(y, self.l_mod_q[j]);
            *slot = m.add(m.mul(self.t_mod_q[j], y), m.reduce_u128(rounded));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let p = params_default();
        assert!(p.degree().is_power_of_two());
        assert_eq!(p.degree(), 4096);
        for &q in p.q_primes() {
            assert!(is_prime_u64(q));
            assert_eq!(q % 8192, 1);
        }
        assert_eq!(bits(p.q_primes()[0] as u128), 54);
        assert_eq!(bits(p.q_primes()[1] as u128), 55);
        assert_eq!(bits(p.q()), 109);
        assert_eq!(p.plaintext_modulus(), 65537);
        assert!(is_prime_u64(p.plaintext_modulus()));
        assert!(p.delta() >= 2);
        assert_eq!(p.decomposition_digits(), 4);
    }

    #[test]
    fn paper_limit_fits_one_slot() {
        assert!(20 * 31 * 31 < params_default().plaintext_modulus());
        assert_eq!(20 * 31 * 31, 19220);
    }

    #[test]
    fn extension_basis_covers_tensor() {
        let p = params_default();
        let ext: Vec<u64> = p.tensor_basis().extension_primes().collect();
        let ext_bits: u32 = ext.iter().map(|&e| bits(e as u128) - 1).sum();
        assert!(ext_bits >= 12 + 109 + 2);
        for e in ext {
            assert!(is_prime_u64(e));
            assert_eq!(e % 8192, 1);
            assert!(!p.q_primes().contains(&e));
        }
    }

    #[test]
    fn invalid_params() {
        let q = DEFAULT_Q_PRIMES;
        assert!(BfvParams::new(3000, &q, 65537, 32).is_err());
        assert!(BfvParams::new(4096, &[17], 65537, 32).is_err());
        assert!(BfvParams::new(4096, &q, 65536, 32).is_err());
        assert!(BfvParams::new(4096, &q, 65537, 0).is_err());
        // t above a q factor
        assert!(BfvParams::new(8, &[97], 113, 8).is_err());
    }

    #[test]
    fn wire_roundtrip_and_hash() {
        let p = params_default();
        let mut w = Writer::new();
        p.encode(&mut w);
        let bytes = w.into_bytes();
        let mut r = Reader::new(&bytes);
        let back = BfvParams::decode(&mut r).unwrap();
        r.finish().unwrap();
        assert_eq!(back, p);
        assert_eq!(back.hash(), p.hash());
        let small = BfvParams::new(16, &[97, 193], 97, 4);
        assert!(small.is_err(), "t must be strictly below every q prime");
    }
}
