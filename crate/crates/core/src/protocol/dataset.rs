//! Identifier records with bounded, non-negative integer columns.

use std::collections::HashSet;

use thiserror::Error;

use super::spec::MAX_COLUMNS;
use crate::cipher::MAX_IDENTIFIER_LEN;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("duplicate identifier {0:?}")]
    DuplicateIdentifier(String),
    #[error("identifier {0:?} must be 1..={MAX_IDENTIFIER_LEN} bytes")]
    InvalidIdentifier(String),
    #[error("value {value} for {id:?} exceeds bound {bound}")]
    BoundExceeded { id: String, value: u64, bound: u64 },
    #[error("dataset must have at most {MAX_COLUMNS} columns, got {0}")]
    ColumnCount(usize),
    #[error("record {id:?} has {got} values, expected {expected}")]
    RowWidth {
        id: String,
        got: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: Vec<u8>,
    pub values: Vec<u64>,
}

impl Record {
    pub fn new(id: impl Into<Vec<u8>>, values: Vec<u64>) -> Self {
        Self {
            id: id.into(),
            values,
        }
    }
}

/// Records with unique identifiers, every value in `[0, bound]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    records: Vec<Record>,
    columns: usize,
    bound: u64,
}

impl Dataset {
    pub fn new(records: Vec<Record>, columns: usize, bound: u64) -> Result<Self, DatasetError> {
        if columns > MAX_COLUMNS {
            return Err(DatasetError::ColumnCount(columns));
        }
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            let id = String::from_utf8_lossy(&r.id).into_owned();
            if r.id.is_empty() || r.id.len() > MAX_IDENTIFIER_LEN {
                return Err(DatasetError::InvalidIdentifier(id));
            }
            if r.values.len() != columns {
                return Err(DatasetError::RowWidth {
                    id,
                    got: r.values.len(),
                    expected: columns,
                });
            }
            if let Some(&value) = r.values.iter().find(|&&v| v > bound) {
                return Err(DatasetError::BoundExceeded { id, value, bound });
            }
            if !seen.insert(r.id.as_slice()) {
                return Err(DatasetError::DuplicateIdentifier(id));
            }
        }
        Ok(Self {
            records,
            columns,
            bound,
        })
    }

    /// An identifier-only dataset, as a server holds.
    pub fn from_ids<I, T>(ids: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = T>,
        T: Into<Vec<u8>>,
    {
        Self::new(
            ids.into_iter()
                .map(|id| Record::new(id, Vec::new()))
                .collect(),
            0,
            0,
        )
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn ids(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.records.iter().map(|r| r.id.as_slice())
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_value(&self) -> Option<u64> {
        self.records
            .iter()
            .flat_map(|r| r.values.iter().copied())
            .max()
    }
}
