//! CSV datasets: `id,col0[,col1,...]` with one record per row.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use jingbing::protocol::{Dataset, DatasetError, Record, MAX_COLUMNS};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("duplicate identifier {0:?}")]
    DuplicateIdentifier(String),
    #[error("value {value:?} for {id:?} is not a non-negative integer")]
    NonIntegerValue { id: String, value: String },
    #[error("value {value} for {id:?} exceeds bound {bound}")]
    BoundExceeded { id: String, value: u64, bound: u64 },
    #[error("invalid identifier {0:?}")]
    InvalidIdentifier(String),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
}

impl From<DatasetError> for LoadError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::DuplicateIdentifier(id) => Self::DuplicateIdentifier(id),
            DatasetError::InvalidIdentifier(id) => Self::InvalidIdentifier(id),
            DatasetError::BoundExceeded { id, value, bound } => {
                Self::BoundExceeded { id, value, bound }
            }
            DatasetError::ColumnCount(n) => {
                Self::BadHeader(format!("{n} value columns, expected 1..={MAX_COLUMNS}"))
            }
            DatasetError::RowWidth { id, got, expected } => Self::Csv {
                line: 0,
                message: format!("record {id:?} has {got} values, expected {expected}"),
            },
        }
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>, LoadError> {
    let file = File::open(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(e: csv::Error) -> LoadError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => LoadError::Io {
            path: String::new(),
            source,
        },
        kind => LoadError::Csv {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Number of value columns named by a header, which must read `id,col0,...`.
fn value_columns(header: &csv::StringRecord, allow_zero: bool) -> Result<usize, LoadError> {
    if header.get(0) != Some("id") {
        return Err(LoadError::BadHeader("first column must be `id`".into()));
    }
    let columns = header.len() - 1;
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("col{i}") {
            return Err(LoadError::BadHeader(format!(
                "column {} must be `col{i}`, got {name:?}",
                i + 1
            )));
        }
    }
    if columns > MAX_COLUMNS || (columns == 0 && !allow_zero) {
        return Err(LoadError::BadHeader(format!(
            "{columns} value columns, expected 1..={MAX_COLUMNS}"
        )));
    }
    Ok(columns)
}

/// Loads a client dataset, checking every value against `bound`.
pub fn load_dataset(path: &Path, bound: u64) -> Result<Dataset, LoadError> {
    let mut reader = open(path)?;
    let columns = value_columns(&reader.headers().map_err(csv_error)?.clone(), false)?;
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let id = row[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(LoadError::DuplicateIdentifier(id));
        }
        let values = row
            .iter()
            .skip(1)
            .map(|v| {
                let value = v.parse::<u64>().map_err(|_| LoadError::NonIntegerValue {
                    id: id.clone(),
                    value: v.to_string(),
                })?;
                if value > bound {
                    return Err(LoadError::BoundExceeded {
                        id: id.clone(),
                        value,
                        bound,
                    });
                }
                Ok(value)
            })
            .collect::<Result<Vec<_>, _>>()?;
        records.push(Record::new(id, values));
    }
    Ok(Dataset::new(records, columns, bound)?)
}

/// Loads a server's identifier set. Value columns, if present, are ignored.
pub fn load_id_set(path: &Path) -> Result<Dataset, LoadError> {
    let mut reader = open(path)?;
    value_columns(&reader.headers().map_err(csv_error)?.clone(), true)?;
    let mut seen = HashSet::new();
    let mut ids = Vec::new();
    for row in reader.records() {
        let id = row.map_err(csv_error)?[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(LoadError::DuplicateIdentifier(id));
        }
        ids.push(id);
    }
    Ok(Dataset::from_ids(ids)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows_two_columns() {
        let f = file("id,col0,col1\nalice,3,1\nbob,5,0\ncarol,7,31\n");
        let ds = load_dataset(f.path(), 31).unwrap();
        assert_eq!((ds.len(), ds.columns()), (3, 2));
        assert_eq!(ds.records()[2].values, vec![7, 31]);
        assert_eq!(ds.records()[0].id, b"alice");
    }

    #[test]
    fn duplicate_reports_identifier() {
        let f = file("id,col0\nalice,3\nalice,4\n");
        assert!(
            matches!(load_dataset(f.path(), 31), Err(LoadError::DuplicateIdentifier(id)) if id == "alice")
        );
    }

    #[test]
    fn negative_and_fractional_values_rejected() {
        for bad in ["-1", "1.5", "x", ""] {
            let f = file(&format!("id,col0\nalice,{bad}\n"));
            assert!(
                matches!(
                    load_dataset(f.path(), 31),
                    Err(LoadError::NonIntegerValue { .. })
                ),
                "{bad}"
            );
        }
    }

    #[test]
    fn bound_enforced() {
        let f = file("id,col0\nalice,32\n");
        assert!(matches!(
            load_dataset(f.path(), 31),
            Err(LoadError::BoundExceeded {
                value: 32,
                bound: 31,
                ..
            })
        ));
    }

    #[test]
    fn headers_checked() {
        for header in [
            "name,col0",
            "id,colA",
            "id",
            "id,col0,col1,col2,col3,col4",
            "id,col1",
        ] {
            let f = file(&format!("{header}\n"));
            assert!(
                matches!(load_dataset(f.path(), 31), Err(LoadError::BadHeader(_))),
                "{header}"
            );
        }
    }

    #[test]
    fn ragged_row_rejected() {
        let f = file("id,col0,col1\nalice,3\n");
        assert!(matches!(
            load_dataset(f.path(), 31),
            Err(LoadError::Csv { .. })
        ));
    }

    #[test]
    fn id_set_ignores_values() {
        let f = file("id\nbob\ncarol\n");
        assert_eq!(load_id_set(f.path()).unwrap().len(), 2);
        let f = file("id,col0\nbob,999999\n");
        assert_eq!(load_id_set(f.path()).unwrap().columns(), 0);
        let f = file("id\nbob\nbob\n");
        assert!(matches!(
            load_id_set(f.path()),
            Err(LoadError::DuplicateIdentifier(_))
        ));
    }

    #[test]
    fn missing_file_is_io() {
        assert!(matches!(
            load_dataset(Path::new("/nonexistent/x.csv"), 31),
            Err(LoadError::Io { .. })
        ));
    }
}
