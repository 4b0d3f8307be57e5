//! Primality testing: deterministic Miller–Rabin for `u64`, probabilistic
//! Miller–Rabin with trial division for big integers.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

const SMALL_PRIMES: [u64; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic for every `u64` (the first twelve prime bases suffice).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &SMALL_PRIMES[..12] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &SMALL_PRIMES[..12] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Miller–Rabin with `rounds` random bases; error probability at most `4^-rounds`.
pub fn is_probable_prime<R: RngCore + CryptoRng>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Samples a random prime of exactly `bits` bits with the top two bits set,
/// so that the product of two such primes has exactly `2 * bits` bits.
/// Returns `None` if no prime turns up within `max_candidates` draws.
pub fn random_prime<R: RngCore + CryptoRng>(
    bits: u64,
    max_candidates: usize,
    rng: &mut R,
) -> Option<BigUint> {
    assert!(bits >= 4, "prime size too small");
    for _ in 0..max_candidates {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if candidate.is_even() {
            continue;
        }
        if is_probable_prime(&candidate, 40, rng) {
            return Some(candidate);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::OsRng;

    fn naive(n: u64) -> bool {
        n >= 2
            && (2..)
                .take_while(|d| d * d <= n)
                .all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn u64_matches_trial_division() {
        for n in 0..5000u64 {
            assert_eq!(is_prime_u64(n), naive(n), "n={n}");
        }
        // strong pseudoprime to bases 2..=37 is above 2^64, but check a few Carmichaels
        for n in [561u64, 1105, 1729, 3215031751, 3825123056546413051] {
            assert!(!is_prime_u64(n), "n={n}");
        }
        assert!(is_prime_u64(18014398509309953));
        assert!(is_prime_u64(36028797018652673));
    }

    #[test]
    fn big_matches_u64() {
        for n in [
            0u64,
            1,
            2,
            97,
            561,
            65537,
            18014398509309953,
            18014398509309955,
        ] {
            assert_eq!(
                is_probable_prime(&BigUint::from(n), 20, &mut OsRng),
                is_prime_u64(n),
                "n={n}"
            );
        }
    }

    #[test]
    fn random_prime_has_exact_size() {
        let p = random_prime(128, 10_000, &mut OsRng).unwrap();
        assert_eq!(p.bits(), 128);
        assert!(p.bit(126));
    }
}
