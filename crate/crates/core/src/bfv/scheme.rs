use rand::{CryptoRng, Rng, RngCore};
use sha2::{Digest, Sha256};

use super::params::{bits, BfvParams};
use super::poly::{RingPoly, RnsContext};
use super::BfvError;
use crate::wire::{Reader, WireError, Writer};

/// Centred binomial with 21 coin pairs, σ ≈ 3.24.
const CBD_PAIRS: u32 = 21;

fn sample_uniform<R: RngCore + CryptoRng>(ctx: &RnsContext, rng: &mut R) -> RingPoly {
    let residues = ctx
        .primes()
        .map(|p| (0..ctx.degree()).map(|_| rng.gen_range(0..p)).collect())
        .collect();
    ctx.from_residues(residues)
        .expect("sampled residues are reduced")
}

fn sample_ternary<R: RngCore + CryptoRng>(ctx: &RnsContext, rng: &mut R) -> RingPoly {
    let coeffs: Vec<i64> = (0..ctx.degree()).map(|_| rng.gen_range(-1..=1)).collect();
    ctx.from_signed(&coeffs)
}

fn sample_error<R: RngCore + CryptoRng>(ctx: &RnsContext, rng: &mut R) -> RingPoly {
    let mask = (1u64 << CBD_PAIRS) - 1;
    let coeffs: Vec<i64> = (0..ctx.degree())
        .map(|_| {
            let bits = rng.next_u64();
            (bits & mask).count_ones() as i64 - ((bits >> CBD_PAIRS) & mask).count_ones() as i64
        })
        .collect();
    ctx.from_signed(&coeffs)
}

/// Short fingerprint of the public key, carried by every key and ciphertext.
pub type KeyTag = [u8; 8];

#[derive(Clone)]
pub struct BfvSecretKey {
    params: BfvParams,
    tag: KeyTag,
    s: RingPoly,
}

impl std::fmt::Debug for BfvSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BfvSecretKey(..)")
    }
}

/// `(b, a)` with `b = -(a·s + e)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfvPublicKey {
    params: BfvParams,
    tag: KeyTag,
    b: RingPoly,
    a: RingPoly,
}

/// One key-switching pair per base-`2^w` digit: `(-(a_i s + e_i) + 2^{wi} s², a_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelinKey {
    params: BfvParams,
    tag: KeyTag,
    parts: Vec<(RingPoly, RingPoly)>,
}

#[derive(Debug, Clone)]
pub struct BfvKeys {
    pub secret: BfvSecretKey,
    pub public: BfvPublicKey,
    pub relin: RelinKey,
}

/// A degree-1 ciphertext `(c0, c1)`; `c0 + c1·s = Δm + v (mod q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfvCiphertext {
    params: BfvParams,
    tag: KeyTag,
    c0: RingPoly,
    c1: RingPoly,
}

/// A ciphertext as read off the wire, before it is bound to parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBfvCiphertext {
    pub params_hash: [u8; 32],
    pub c0: Vec<u128>,
    pub c1: Vec<u128>,
}

pub fn keygen<R: RngCore + CryptoRng>(
    params: &BfvParams,
    rng: &mut R,
) -> Result<BfvKeys, BfvError> {
    let ctx = params.context();
    let s = sample_ternary(ctx, rng);
    let a = sample_uniform(ctx, rng);
    let e = sample_error(ctx, rng);
    let b = ctx.neg(&ctx.add(&ctx.mul(&a, &s)?, &e)?);

    let s_squared = ctx.mul(&s, &s)?;
    let w = params.decomposition_bits();
    let q = params.q();
    let mut parts = Vec::with_capacity(params.decomposition_digits());
    for i in 0..params.decomposition_digits() {
        let a_i = sample_uniform(ctx, rng);
        let e_i = sample_error(ctx, rng);
        let shift = w as usize * i;
        let base_pow = if shift >= 128 {
            0
        } else {
            (1u128 << shift) % q
        };
        let mask = ctx.neg(&ctx.add(&ctx.mul(&a_i, &s)?, &e_i)?);
        let b_i = ctx.add(&mask, &ctx.scalar_mul(&s_squared, base_pow))?;
        parts.push((b_i, a_i));
    }

    let tag = key_tag(params, &b, &a);
    Ok(BfvKeys {
        secret: BfvSecretKey {
            params: params.clone(),
            tag,
            s,
        },
        public: BfvPublicKey {
            params: params.clone(),
            tag,
            b,
            a,
        },
        relin: RelinKey {
            params: params.clone(),
            tag,
            parts,
        },
    })
}

fn key_tag(params: &BfvParams, b: &RingPoly, a: &RingPoly) -> KeyTag {
    let mut w = Writer::new();
    params.encode(&mut w);
    encode_poly(&mut w, params.context(), b);
    encode_poly(&mut w, params.context(), a);
    let digest = Sha256::digest(w.into_bytes());
    let mut tag = [0u8; 8];
    tag.copy_from_slice(&digest[..8]);
    tag
}

impl BfvPublicKey {
    pub fn params(&self) -> &BfvParams {
        &self.params
    }

    pub fn tag(&self) -> KeyTag {
        self.tag
    }

    /// Encrypts the scalar `m` into coefficient 0.
    pub fn encrypt<R: RngCore + CryptoRng>(
        &self,
        m: u64,
        rng: &mut R,
    ) -> Result<BfvCiphertext, BfvError> {
        if m >= self.params.plaintext_modulus() {
            return Err(BfvError::PlaintextOutOfRange);
        }
        let ctx = self.params.context();
        let u = sample_ternary(ctx, rng);
        let e1 = sample_error(ctx, rng);
        let e2 = sample_error(ctx, rng);
        let mut c0 = ctx.add(&ctx.mul(&self.b, &u)?, &e1)?;
        let c1 = ctx.add(&ctx.mul(&self.a, &u)?, &e2)?;
        let scaled = self.params.delta() * m as u128;
        for (res, modulus) in c0.residues_mut().iter_mut().zip(ctx.moduli()) {
            res[0] = modulus.add(res[0], modulus.reduce_u128(scaled));
        }
        Ok(BfvCiphertext {
            params: self.params.clone(),
            tag: self.tag,
            c0,
            c1,
        })
    }

    /// Adds a fresh encryption of zero, hiding the ciphertext's history.
    pub fn add_zero_rerandomize<R: RngCore + CryptoRng>(
        &self,
        ct: &BfvCiphertext,
        rng: &mut R,
    ) -> Result<BfvCiphertext, BfvError> {
        add(ct, &self.encrypt(0, rng)?)
    }

    pub fn encode(&self, w: &mut Writer) {
        self.params.encode(w);
        encode_poly(w, self.params.context(), &self.b);
        encode_poly(w, self.params.context(), &self.a);
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let params = BfvParams::decode(r)?;
        let b = decode_poly(r, params.context())?;
        let a = decode_poly(r, params.context())?;
        let tag = key_tag(&params, &b, &a);
        Ok(Self { params, tag, b, a })
    }
}

impl RelinKey {
    pub fn params(&self) -> &BfvParams {
        &self.params
    }

    /// Encoded against already-known parameters: params hash, then the pairs.
    pub fn encode(&self, w: &mut Writer) {
        w.fixed(&self.params.hash());
        w.count(self.parts.len());
        for (b, a) in &self.parts {
            encode_poly(w, self.params.context(), b);
            encode_poly(w, self.params.context(), a);
        }
    }

    /// Decodes a relinearization key that belongs with `public`.
    pub fn decode(r: &mut Reader<'_>, public: &BfvPublicKey) -> Result<Self, WireError> {
        let params = &public.params;
        let hash: [u8; 32] = r.array("relin params hash")?;
        if hash != params.hash() {
            return Err(WireError::Invalid("relin key params hash"));
        }
        let count = r.count(1, "relin key parts")?;
        if count != params.decomposition_digits() {
            return Err(WireError::Invalid("relin key digit count"));
        }
        let parts = (0..count)
            .map(|_| {
                Ok((
                    decode_poly(r, params.context())?,
                    decode_poly(r, params.context())?,
                ))
            })
            .collect::<Result<Vec<_>, WireError>>()?;
        Ok(Self {
            params: params.clone(),
            tag: public.tag,
            parts,
        })
    }
}

impl BfvSecretKey {
    pub fn params(&self) -> &BfvParams {
        &self.params
    }

    /// Coefficients of `c0 + c1·s` in `[0, q)`.
    fn phase(&self, ct: &BfvCiphertext) -> Result<Vec<u128>, BfvError> {
        if ct.params != self.params || ct.tag != self.tag {
            return Err(BfvError::ParamMismatch);
        }
        let ctx = self.params.context();
        let v = ctx.add(&ct.c0, &ctx.mul(&ct.c1, &self.s)?)?;
        Ok(ctx.to_coeffs(&v))
    }

    /// Bits of headroom left before decryption fails: `⌊log2(q / (2‖[t·(c0 + c1 s)]_q‖∞))⌋`,
    /// floored at zero.
    pub fn noise_budget(&self, ct: &BfvCiphertext) -> Result<u32, BfvError> {
        Ok(self.budget_of_phase(&self.phase(ct)?))
    }

    fn budget_of_phase(&self, phase: &[u128]) -> u32 {
        let q = self.params.q();
        let t = self.params.plaintext_modulus() as u128;
        let half = q / 2;
        let worst = phase
            .iter()
            .map(|&v| {
                let w = t * v % q;
                if w > half {
                    q - w
                } else {
                    w
                }
            })
            .max()
            .unwrap_or(0)
            .max(1);
        let doubled = 2 * worst;
        if doubled >= q {
            return 0;
        }
        // largest k with doubled·2^k ≤ q
        let mut k = bits(q) - bits(doubled);
        while k > 0 && doubled << k > q {
            k -= 1;
        }
        k
    }

    pub fn decrypt(&self, ct: &BfvCiphertext) -> Result<u64, BfvError> {
        let phase = self.phase(ct)?;
        if self.budget_of_phase(&phase) == 0 {
            return Err(BfvError::NoiseOverflow);
        }
        let q = self.params.q();
        let t = self.params.plaintext_modulus() as u128;
        // round-half-up of t·v/q
        let m = (2 * t * phase[0] + q) / (2 * q);
        Ok((m % t) as u64)
    }
}

pub fn add(a: &BfvCiphertext, b: &BfvCiphertext) -> Result<BfvCiphertext, BfvError> {
    if a.params != b.params || a.tag != b.tag {
        return Err(BfvError::ParamMismatch);
    }
    let ctx = a.params.context();
    Ok(BfvCiphertext {
        params: a.params.clone(),
        tag: a.tag,
        c0: ctx.add(&a.c0, &b.c0)?,
        c1: ctx.add(&a.c1, &b.c1)?,
    })
}

/// Homomorphic product followed by relinearization back to degree 1.
pub fn mul(
    relin: &RelinKey,
    a: &BfvCiphertext,
    b: &BfvCiphertext,
) -> Result<BfvCiphertext, BfvError> {
    if a.params != b.params || relin.params != a.params || a.tag != b.tag || relin.tag != a.tag {
        return Err(BfvError::ParamMismatch);
    }
    let params = &a.params;
    let [d0, d1, d2] = tensor(params, a, b);
    relinearize(relin, d0, d1, &d2)
}

/// Scaled tensor `round(t/q · (a ⊗ b))` as three polynomials mod `q`.
fn tensor(params: &BfvParams, a: &BfvCiphertext, b: &BfvCiphertext) -> [RingPoly; 3] {
    let ctx = params.context();
    let basis = params.tensor_basis();
    let n = params.degree();
    let q_count = basis.q_count;

    // Lift centred coefficients onto the full basis and transform.
    let lift = |p: &RingPoly| -> Vec<Vec<u64>> {
        let centred = ctx.to_centered(p);
        basis
            .tables
            .iter()
            .enumerate()
            .map(|(k, table)| {
                let mut v = if k < q_count {
                    p.residues()[k].clone()
                } else {
                    centred
                        .iter()
                        .map(|&c| table.modulus().reduce_i128(c))
                        .collect()
                };
                table.forward(&mut v);
                v
            })
            .collect()
    };
    let (a0, a1) = (lift(&a.c0), lift(&a.c1));
    let same = a == b;
    let (b0, b1) = if same {
        (a0.clone(), a1.clone())
    } else {
        (lift(&b.c0), lift(&b.c1))
    };

    let k_total = basis.tables.len();
    let mut prods: [Vec<Vec<u64>>; 3] = std::array::from_fn(|_| vec![vec![0u64; n]; k_total]);
    for (k, table) in basis.tables.iter().enumerate() {
        let m = table.modulus();
        for j in 0..n {
            prods[0][k][j] = m.mul(a0[k][j], b0[k][j]);
            prods[1][k][j] = m.add(m.mul(a0[k][j], b1[k][j]), m.mul(a1[k][j], b0[k][j]));
            prods[2][k][j] = m.mul(a1[k][j], b1[k][j]);
        }
        for prod in prods.iter_mut() {
            table.inverse(&mut prod[k]);
        }
    }

    let mut column = vec![0u64; k_total];
    prods.map(|prod| {
        let mut out = vec![vec![0u64; n]; q_count];
        let mut scaled = vec![0u64; q_count];
        for j in 0..n {
            for k in 0..k_total {
                column[k] = prod[k][j];
            }
            basis.scale_round(&mut column, &mut scaled);
            for (i, &s) in scaled.iter().enumerate() {
                out[i][j] = s;
            }
        }
        ctx.from_residues(out).expect("scaled tensor is reduced")
    })
}

fn relinearize(
    relin: &RelinKey,
    c0: RingPoly,
    c1: RingPoly,
    c2: &RingPoly,
) -> Result<BfvCiphertext, BfvError> {
    let params = &relin.params;
    let ctx = params.context();
    let w = params.decomposition_bits();
    let mask: u128 = if w >= 128 {
        u128::MAX
    } else {
        (1u128 << w) - 1
    };
    let coeffs = ctx.to_coeffs(c2);
    let mut c0 = c0;
    let mut c1 = c1;
    for (i, (rk0, rk1)) in relin.parts.iter().enumerate() {
        let shift = w as usize * i;
        let digit: Vec<u128> = coeffs
            .iter()
            .map(|&c| if shift >= 128 { 0 } else { (c >> shift) & mask })
            .collect();
        let digit = ctx.from_coeffs(&digit)?;
        c0 = ctx.add(&c0, &ctx.mul(&digit, rk0)?)?;
        c1 = ctx.add(&c1, &ctx.mul(&digit, rk1)?)?;
    }
    Ok(BfvCiphertext {
        params: params.clone(),
        tag: relin.tag,
        c0,
        c1,
    })
}

impl BfvCiphertext {
    pub fn params(&self) -> &BfvParams {
        &self.params
    }

    pub fn to_raw(&self) -> RawBfvCiphertext {
        let ctx = self.params.context();
        RawBfvCiphertext {
            params_hash: self.params.hash(),
            c0: ctx.to_coeffs(&self.c0),
            c1: ctx.to_coeffs(&self.c1),
        }
    }

    /// Binds a wire ciphertext to the key it was (claimed to be) produced under.
    pub fn from_raw(public: &BfvPublicKey, raw: &RawBfvCiphertext) -> Result<Self, BfvError> {
        let params = &public.params;
        if raw.params_hash != params.hash() {
            return Err(BfvError::ParamMismatch);
        }
        let ctx = params.context();
        Ok(Self {
            params: params.clone(),
            tag: public.tag,
            c0: ctx.from_coeffs(&raw.c0)?,
            c1: ctx.from_coeffs(&raw.c1)?,
        })
    }

    pub fn encode(&self, w: &mut Writer) {
        self.to_raw().encode(w);
    }
}

impl RawBfvCiphertext {
    /// Params hash, then `c0` and `c1` as counted vectors of 16-byte big-endian coefficients.
    pub fn encode(&self, w: &mut Writer) {
        w.fixed(&self.params_hash);
        for poly in [&self.c0, &self.c1] {
            w.count(poly.len());
            for &c in poly {
                w.u128(c);
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let params_hash = r.array("bfv params hash")?;
        let read_poly = |r: &mut Reader<'_>| -> Result<Vec<u128>, WireError> {
            let n = r.count(16, "bfv coefficients")?;
            (0..n).map(|_| r.u128("bfv coefficient")).collect()
        };
        let c0 = read_poly(r)?;
        let c1 = read_poly(r)?;
        Ok(Self {
            params_hash,
            c0,
            c1,
        })
    }
}

fn encode_poly(w: &mut Writer, ctx: &RnsContext, p: &RingPoly) {
    let coeffs = ctx.to_coeffs(p);
    w.count(coeffs.len());
    for c in coeffs {
        w.u128(c);
    }
}

fn decode_poly(r: &mut Reader<'_>, ctx: &RnsContext) -> Result<RingPoly, WireError> {
    let n = r.count(16, "bfv coefficients")?;
    let coeffs = (0..n)
        .map(|_| r.u128("bfv coefficient"))
        .collect::<Result<Vec<_>, _>>()?;
    ctx.from_coeffs(&coeffs)
        .map_err(|_| WireError::Invalid("bfv polynomial"))
}

#[cfg(test)]
mod tests {
    use super::super::params_default;
    use super::*;
    use rand::rngs::OsRng;
    use std::sync::OnceLock;

    fn keys() -> &'static BfvKeys {
        static KEYS: OnceLock<BfvKeys> = OnceLock::new();
        KEYS.get_or_init(|| keygen(&params_default(), &mut OsRng).unwrap())
    }

    fn enc(m: u64) -> BfvCiphertext {
        keys().public.encrypt(m, &mut OsRng).unwrap()
    }

    fn dec(ct: &BfvCiphertext) -> u64 {
        keys().secret.decrypt(ct).unwrap()
    }

    #[test]
    fn roundtrip_small_values() {
        for m in 0..=31 {
            assert_eq!(dec(&enc(m)), m);
        }
        assert_eq!(dec(&enc(65536)), 65536);
    }

    #[test]
    fn plaintext_bound() {
        assert_eq!(
            keys().public.encrypt(65537, &mut OsRng).unwrap_err(),
            BfvError::PlaintextOutOfRange
        );
    }

    #[test]
    fn addition_sweep() {
        let cts: Vec<_> = (0..=31).map(enc).collect();
        for a in 0..=31 {
            for b in 0..=31 {
                assert_eq!(dec(&add(&cts[a], &cts[b]).unwrap()), (a + b) as u64);
            }
        }
        let zero = enc(0);
        assert_eq!(dec(&add(&zero, &cts[17]).unwrap()), 17);
    }

    #[test]
    fn addition_wraps_mod_t() {
        let big = enc(65536);
        assert_eq!(dec(&add(&big, &enc(3)).unwrap()), 2);
    }

    #[test]
    fn multiplication_basics() {
        let relin = &keys().relin;
        assert_eq!(dec(&mul(relin, &enc(5), &enc(5)).unwrap()), 25);
        let ct = enc(23);
        assert_eq!(dec(&mul(relin, &enc(1), &ct).unwrap()), 23);
        assert_eq!(dec(&mul(relin, &enc(0), &ct).unwrap()), 0);
        // wraps mod t: 300² = 90000 ≡ 24463
        assert_eq!(
            dec(&mul(relin, &enc(300), &enc(300)).unwrap()),
            90000 % 65537
        );
    }

    #[test]
    fn squares_exhaustive() {
        let relin = &keys().relin;
        for a in 0..=31u64 {
            let ct = enc(a);
            assert_eq!(dec(&mul(relin, &ct, &ct).unwrap()), a * a, "a={a}");
        }
    }

    #[test]
    fn sum_of_twenty_squares_at_limit() {
        let k = keys();
        let squares: Vec<_> = (0..20)
            .map(|_| {
                let ct = enc(31);
                mul(&k.relin, &ct, &ct).unwrap()
            })
            .collect();
        let total = squares
            .into_iter()
            .reduce(|acc, ct| add(&acc, &ct).unwrap())
            .unwrap();
        assert!(k.secret.noise_budget(&total).unwrap() > 0);
        assert_eq!(dec(&total), 19220);
    }

    #[test]
    fn fold_add_of_961() {
        let total = (0..20)
            .map(|_| enc(961))
            .reduce(|acc, ct| add(&acc, &ct).unwrap())
            .unwrap();
        assert_eq!(dec(&total), 19220);
    }

    #[test]
    fn noise_budget_behaviour() {
        let k = keys();
        let fresh = enc(31);
        let fresh_budget = k.secret.noise_budget(&fresh).unwrap();
        let squared = mul(&k.relin, &fresh, &fresh).unwrap();
        let squared_budget = k.secret.noise_budget(&squared).unwrap();
        assert!(
            fresh_budget > squared_budget,
            "{fresh_budget} vs {squared_budget}"
        );
        assert!(squared_budget > 0);

        let mut acc = squared;
        for _ in 0..19 {
            acc = add(&acc, &enc(5)).unwrap();
        }
        assert!(k.secret.noise_budget(&acc).unwrap() > 0);
    }

    #[test]
    fn saturated_ciphertext_has_no_budget() {
        let k = keys();
        let params = params_default();
        let ctx = params.context();
        let mut raw = enc(7).to_raw();
        // replace c0 with uniform noise: the phase becomes uniform mod q
        let uniform = sample_uniform(ctx, &mut OsRng);
        raw.c0 = ctx.to_coeffs(&uniform);
        let broken = BfvCiphertext::from_raw(&k.public, &raw).unwrap();
        assert_eq!(k.secret.noise_budget(&broken).unwrap(), 0);
        assert_eq!(
            k.secret.decrypt(&broken).unwrap_err(),
            BfvError::NoiseOverflow
        );
    }

    #[test]
    fn rerandomization() {
        let k = keys();
        let ct = enc(12);
        let once = k.public.add_zero_rerandomize(&ct, &mut OsRng).unwrap();
        let twice = k.public.add_zero_rerandomize(&once, &mut OsRng).unwrap();
        assert_ne!(once.to_raw(), ct.to_raw());
        assert_ne!(once.to_raw(), twice.to_raw());
        assert_eq!(dec(&once), 12);
        assert_eq!(dec(&twice), 12);
    }

    #[test]
    fn different_keys_do_not_mix() {
        let other = keygen(&params_default(), &mut OsRng).unwrap();
        assert_ne!(other.public, keys().public);
        let theirs = other.public.encrypt(1, &mut OsRng).unwrap();
        let ours = enc(1);
        assert_eq!(add(&ours, &theirs).unwrap_err(), BfvError::ParamMismatch);
        assert_eq!(
            mul(&keys().relin, &ours, &theirs).unwrap_err(),
            BfvError::ParamMismatch
        );
        assert_eq!(
            keys().secret.decrypt(&theirs).unwrap_err(),
            BfvError::ParamMismatch
        );
    }

    #[test]
    fn wire_roundtrips() {
        let k = keys();
        let mut w = Writer::new();
        k.public.encode(&mut w);
        k.relin.encode(&mut w);
        let ct = enc(9);
        ct.encode(&mut w);
        let bytes = w.into_bytes();

        let mut r = Reader::new(&bytes);
        let public = BfvPublicKey::decode(&mut r).unwrap();
        let relin = RelinKey::decode(&mut r, &public).unwrap();
        let raw = RawBfvCiphertext::decode(&mut r).unwrap();
        r.finish().unwrap();
        assert_eq!(public, k.public);
        assert_eq!(relin, k.relin);
        let back = BfvCiphertext::from_raw(&public, &raw).unwrap();
        assert_eq!(back, ct);
        assert_eq!(dec(&mul(&relin, &back, &back).unwrap()), 81);
    }

    #[test]
    fn raw_coefficient_out_of_range() {
        let k = keys();
        let mut raw = enc(1).to_raw();
        raw.c1[3] = params_default().q();
        assert_eq!(
            BfvCiphertext::from_raw(&k.public, &raw).unwrap_err(),
            BfvError::CoefficientOutOfRange
        );
        raw.params_hash[0] ^= 1;
        assert_eq!(
            BfvCiphertext::from_raw(&k.public, &raw).unwrap_err(),
            BfvError::ParamMismatch
        );
    }
}
