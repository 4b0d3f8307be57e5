//! Elements of `Z_q[X]/(X^n + 1)` with `q` a product of NTT-friendly primes,
//! stored as one residue vector per prime.

use super::ntt::{Modulus, NttTable};
use super::BfvError;

/// Ring degree plus an RNS basis whose product fits in a `u128`.
#[derive(Debug, Clone)]
pub struct RnsContext {
    n: usize,
    tables: Vec<NttTable>,
    q: u128,
    /// `garner[i] = (m_0 ⋯ m_{i-1})^{-1} mod m_i`
    garner: Vec<u64>,
}

impl RnsContext {
    pub fn new(n: usize, primes: &[u64]) -> Result<Self, BfvError> {
        if primes.is_empty() {
            return Err(BfvError::InvalidParams("empty modulus chain"));
        }
        let mut tables = Vec::with_capacity(primes.len());
        let mut q: u128 = 1;
        for (i, &p) in primes.iter().enumerate() {
            if primes[..i].contains(&p) {
                return Err(BfvError::InvalidParams("modulus primes must be distinct"));
            }
            tables.push(
                NttTable::new(p, n)
                    .ok_or(BfvError::InvalidParams("modulus prime is not NTT-friendly"))?,
            );
            q = q
                .checked_mul(p as u128)
                .filter(|q| *q < 1 << 127)
                .ok_or(BfvError::InvalidParams("modulus product exceeds 127 bits"))?;
        }
        let garner = (0..primes.len())
            .map(|i| {
                let m = Modulus::new(primes[i]);
                let prefix = primes[..i]
                    .iter()
                    .fold(1u64, |acc, &p| m.mul(acc, p % primes[i]));
                m.inv(prefix)
            })
            .collect();
        Ok(Self {
            n,
            tables,
            q,
            garner,
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> u128 {
        self.q
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.tables.iter().map(|t| t.modulus().value())
    }

    pub fn moduli(&self) -> impl Iterator<Item = &Modulus> + '_ {
        self.tables.iter().map(|t| t.modulus())
    }

    pub fn tables(&self) -> &[NttTable] {
        &self.tables
    }

    pub fn zero(&self) -> RingPoly {
        RingPoly {
            residues: vec![vec![0; self.n]; self.tables.len()],
        }
    }

    /// Builds a polynomial from coefficients in `[0, q)`.
    pub fn from_coeffs(&self, coeffs: &[u128]) -> Result<RingPoly, BfvError> {
        if coeffs.len() != self.n {
            return Err(BfvError::ParamMismatch);
        }
        if coeffs.iter().any(|&c| c >= self.q) {
            return Err(BfvError::CoefficientOutOfRange);
        }
        Ok(RingPoly {
            residues: self
                .moduli()
                .map(|m| coeffs.iter().map(|&c| m.reduce_u128(c)).collect())
                .collect(),
        })
    }

    /// Builds a polynomial from small signed coefficients.
    pub fn from_signed(&self, coeffs: &[i64]) -> RingPoly {
        assert_eq!(coeffs.len(), self.n);
        RingPoly {
            residues: self
                .moduli()
                .map(|m| coeffs.iter().map(|&c| m.reduce_i128(c as i128)).collect())
                .collect(),
        }
    }

    /// Builds a polynomial directly from residues; each must already be reduced.
    pub fn from_residues(&self, residues: Vec<Vec<u64>>) -> Result<RingPoly, BfvError> {
        if residues.len() != self.tables.len() || residues.iter().any(|r| r.len() != self.n) {
            return Err(BfvError::ParamMismatch);
        }
        for (r, m) in residues.iter().zip(self.moduli()) {
            if r.iter().any(|&c| c >= m.value()) {
                return Err(BfvError::CoefficientOutOfRange);
            }
        }
        Ok(RingPoly { residues })
    }

    /// Reconstructs coefficient `j` in `[0, q)` by Garner's algorithm.
    pub fn coeff(&self, a: &RingPoly, j: usize) -> u128 {
        let mut value: u128 = 0;
        let mut radix: u128 = 1;
        for (i, table) in self.tables.iter().enumerate() {
            let m = table.modulus();
            let current = m.reduce_u128(value);
            let digit = m.mul(m.sub(a.residues[i][j], current), self.garner[i]);
            value += digit as u128 * radix;
            radix *= m.value() as u128;
        }
        value
    }

    pub fn to_coeffs(&self, a: &RingPoly) -> Vec<u128> {
        (0..self.n).map(|j| self.coeff(a, j)).collect()
    }

    /// Coefficients lifted to the symmetric range `(-q/2, q/2]`.
    pub fn to_centered(&self, a: &RingPoly) -> Vec<i128> {
        let half = self.q / 2;
        (0..self.n)
            .map(|j| {
                let c = self.coeff(a, j);
                if c > half {
                    c as i128 - self.q as i128
                } else {
                    c as i128
                }
            })
            .collect()
    }

    fn check(&self, a: &RingPoly) -> Result<(), BfvError> {
        if a.residues.len() != self.tables.len() || a.residues.iter().any(|r| r.len() != self.n) {
            return Err(BfvError::ParamMismatch);
        }
        Ok(())
    }

    pub fn add(&self, a: &RingPoly, b: &RingPoly) -> Result<RingPoly, BfvError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.zip(a, b, |m, x, y| m.add(x, y)))
    }

    pub fn sub(&self, a: &RingPoly, b: &RingPoly) -> Result<RingPoly, BfvError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.zip(a, b, |m, x, y| m.sub(x, y)))
    }

    pub fn neg(&self, a: &RingPoly) -> RingPoly {
        RingPoly {
            residues: a
                .residues
                .iter()
                .zip(self.moduli())
                .map(|(r, m)| r.iter().map(|&x| m.neg(x)).collect())
                .collect(),
        }
    }

    /// Multiplies every coefficient by the integer `k` (given mod `q`).
    pub fn scalar_mul(&self, a: &RingPoly, k: u128) -> RingPoly {
        RingPoly {
            residues: a
                .residues
                .iter()
                .zip(self.moduli())
                .map(|(r, m)| {
                    let k = m.reduce_u128(k);
                    r.iter().map(|&x| m.mul(x, k)).collect()
                })
                .collect(),
        }
    }

    /// Negacyclic product via the NTT, one prime at a time.
    pub fn mul(&self, a: &RingPoly, b: &RingPoly) -> Result<RingPoly, BfvError> {
        self.check(a)?;
        self.check(b)?;
        Ok(RingPoly {
            residues: self
                .tables
                .iter()
                .zip(a.residues.iter().zip(&b.residues))
                .map(|(t, (x, y))| t.multiply(x, y))
                .collect(),
        })
    }

    fn zip(&self, a: &RingPoly, b: &RingPoly, f: impl Fn(&Modulus, u64, u64) -> u64) -> RingPoly {
        RingPoly {
            residues: a
                .residues
                .iter()
                .zip(&b.residues)
                .zip(self.moduli())
                .map(|((x, y), m)| x.iter().zip(y).map(|(&u, &v)| f(m, u, v)).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPoly {
    residues: Vec<Vec<u64>>,
}

impl RingPoly {
    pub fn residues(&self) -> &[Vec<u64>] {
        &self.residues
    }

    pub(crate) fn residues_mut(&mut self) -> &mut [Vec<u64>] {
        &mut self.residues
    }
}

/// Product of `a` and `b` in `Z_q[X]/(X^n + 1)`.
pub fn poly_mul(a: &RingPoly, b: &RingPoly, ctx: &RnsContext) -> Result<RingPoly, BfvError> {
    ctx.mul(a, b)
}
