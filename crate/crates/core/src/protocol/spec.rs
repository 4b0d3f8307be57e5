//! Aggregation operators, per-run limits and request validation.

use std::fmt;
use std::str::FromStr;

use super::dataset::Dataset;
use super::ValidationError;
use crate::bfv::DEFAULT_PLAINTEXT_MODULUS;
use crate::wire::{Reader, WireError, Writer};

/// Most columns a dataset may carry.
pub const MAX_COLUMNS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Sum,
    SumOfSquares,
}

impl Operator {
    pub fn code(self) -> u8 {
        match self {
            Operator::Sum => 1,
            Operator::SumOfSquares => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Operator::Sum),
            2 => Some(Operator::SumOfSquares),
            _ => None,
        }
    }

    /// Largest aggregate `cardinality` matching rows can produce under `bound`.
    pub fn max_aggregate(self, cardinality: u64, bound: u64) -> u128 {
        let b = bound as u128;
        match self {
            Operator::Sum => cardinality as u128 * b,
            Operator::SumOfSquares => cardinality as u128 * b * b,
        }
    }

    pub fn apply(self, value: u64) -> u128 {
        match self {
            Operator::Sum => value as u128,
            Operator::SumOfSquares => value as u128 * value as u128,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::Sum => "sum",
            Operator::SumOfSquares => "sumsq",
        })
    }
}

impl FromStr for Operator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Operator::Sum),
            "sumsq" => Ok(Operator::SumOfSquares),
            other => Err(format!(
                "unknown operator {other:?} (expected sum or sumsq)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpecEntry {
    pub column: u8,
    pub operator: Operator,
}

impl SpecEntry {
    pub fn new(column: u8, operator: Operator) -> Self {
        Self { column, operator }
    }
}

impl fmt::Display for SpecEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "col{}.{}", self.column, self.operator)
    }
}

/// Parses `<col>:<sum|sumsq>`.
impl FromStr for SpecEntry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (col, op) = s
            .split_once(':')
            .ok_or_else(|| format!("expected <col>:<sum|sumsq>, got {s:?}"))?;
        let column = col
            .parse::<u8>()
            .map_err(|_| format!("invalid column index {col:?}"))?;
        Ok(Self::new(column, op.parse()?))
    }
}

/// Ordered, duplicate-free list of `(column, operator)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationSpec {
    entries: Vec<SpecEntry>,
}

impl AggregationSpec {
    pub fn new(entries: Vec<SpecEntry>) -> Result<Self, ValidationError> {
        if entries.is_empty() {
            return Err(ValidationError::ColumnMismatch("no operators requested"));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.column as usize >= MAX_COLUMNS {
                return Err(ValidationError::ColumnMismatch(
                    "column index beyond the 4-column limit",
                ));
            }
            if entries[..i].contains(e) {
                return Err(ValidationError::ColumnMismatch(
                    "operator repeated for a column",
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[SpecEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn needs_paillier(&self) -> bool {
        self.entries.iter().any(|e| e.operator == Operator::Sum)
    }

    pub fn needs_bfv(&self) -> bool {
        self.entries
            .iter()
            .any(|e| e.operator == Operator::SumOfSquares)
    }

    /// Every entry must name a column below `columns`.
    pub fn check_columns(&self, columns: usize) -> Result<(), ValidationError> {
        if self.entries.iter().any(|e| e.column as usize >= columns) {
            return Err(ValidationError::ColumnMismatch(
                "operator names a missing column",
            ));
        }
        Ok(())
    }

    pub fn encode(&self, w: &mut Writer) {
        w.count(self.entries.len());
        for e in &self.entries {
            w.u8(e.column).u8(e.operator.code());
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let n = r.count(2, "aggregation spec")?;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let column = r.u8("spec column")?;
            let operator = Operator::from_code(r.u8("spec operator")?)
                .ok_or(WireError::Invalid("operator"))?;
            entries.push(SpecEntry { column, operator });
        }
        Self::new(entries).map_err(|_| WireError::Invalid("aggregation spec"))
    }
}

/// Per-run ceilings on record count and column values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_records: usize,
    pub bound: u64,
}

impl Limits {
    pub const DEFAULT: Limits = Limits {
        max_records: 1000,
        bound: 1 << 20,
    };

    /// The proof-of-concept ceilings: 20 records, values at most 31.
    pub const PAPER: Limits = Limits {
        max_records: 20,
        bound: 31,
    };
}

impl Default for Limits {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Checks a client's request before any key generation or network traffic.
///
/// The sum-of-squares capacity check assumes the worst case, where every
/// record matches and carries the bound.
pub fn validate_request(
    spec: &AggregationSpec,
    ds: &Dataset,
    limits: &Limits,
) -> Result<(), ValidationError> {
    if ds.len() > limits.max_records {
        return Err(ValidationError::TooManyRecords {
            count: ds.len(),
            max: limits.max_records,
        });
    }
    if ds.bound() > limits.bound {
        return Err(ValidationError::BoundExceeded {
            value: ds.bound(),
            bound: limits.bound,
        });
    }
    if let Some(value) = ds.max_value().filter(|&v| v > ds.bound()) {
        return Err(ValidationError::BoundExceeded {
            value,
            bound: ds.bound(),
        });
    }
    spec.check_columns(ds.columns())?;
    if spec.needs_bfv() {
        let worst = Operator::SumOfSquares.max_aggregate(ds.len() as u64, ds.bound());
        if worst >= DEFAULT_PLAINTEXT_MODULUS as u128 {
            return Err(ValidationError::CapacityExceeded {
                worst,
                modulus: DEFAULT_PLAINTEXT_MODULUS,
            });
        }
    }
    Ok(())
}
