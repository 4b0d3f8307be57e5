//! Seeded synthetic datasets with a known intersection.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use jingbing::oracle::intersection_stats;
use jingbing::protocol::{AggregationSpec, Dataset, Operator, Record, SpecEntry, MAX_COLUMNS};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenParams {
    pub seed: u64,
    pub size_a: usize,
    pub size_b: usize,
    pub intersection: usize,
    pub columns: usize,
    pub bound: u64,
}

/// The client dataset, the server identifiers and the oracle answer.
#[derive(Debug, Clone)]
pub struct Generated {
    pub client: Dataset,
    pub server: Dataset,
    /// Every (column, operator) pair, so any `--op` selection can be checked.
    pub spec: AggregationSpec,
    pub expected: String,
}

#[derive(Debug, Clone)]
pub struct GeneratedFiles {
    pub client_csv: PathBuf,
    pub server_csv: PathBuf,
    pub expected: PathBuf,
}

fn check(p: &GenParams) -> Result<(), GenError> {
    let bad = |m: String| Err(GenError::InfeasibleParams(m));
    if p.intersection > p.size_a.min(p.size_b) {
        return bad(format!(
            "intersection {} exceeds min({}, {})",
            p.intersection, p.size_a, p.size_b
        ));
    }
    if p.bound < 1 {
        return bad("bound must be at least 1".into());
    }
    if p.columns < 1 || p.columns > MAX_COLUMNS {
        return bad(format!("columns must be 1..={MAX_COLUMNS}"));
    }
    Ok(())
}

/// Builds both datasets deterministically from `seed`.
pub fn generate(p: &GenParams) -> Result<Generated, GenError> {
    check(p)?;
    let mut rng = ChaCha20Rng::seed_from_u64(p.seed);
    let total = p.size_a + p.size_b - p.intersection;
    let mut seen = HashSet::with_capacity(total);
    let mut ids = Vec::with_capacity(total);
    while ids.len() < total {
        let id = format!("id{:016x}", rng.gen::<u64>());
        if seen.insert(id.clone()) {
            ids.push(id);
        }
    }
    let (shared, rest) = ids.split_at(p.intersection);
    let (client_only, server_only) = rest.split_at(p.size_a - p.intersection);

    let mut client_ids: Vec<&String> = shared.iter().chain(client_only).collect();
    let mut server_ids: Vec<&String> = shared.iter().chain(server_only).collect();
    client_ids.shuffle(&mut rng);
    server_ids.shuffle(&mut rng);

    let records = client_ids
        .into_iter()
        .map(|id| {
            Record::new(
                id.as_str(),
                (0..p.columns).map(|_| rng.gen_range(0..=p.bound)).collect(),
            )
        })
        .collect();
    let client =
        Dataset::new(records, p.columns, p.bound).expect("generated ids are unique and in bounds");
    let server = Dataset::from_ids(server_ids.into_iter().map(String::as_str))
        .expect("generated ids are unique");

    let spec = AggregationSpec::new(
        (0..p.columns as u8)
            .flat_map(|c| {
                [
                    SpecEntry::new(c, Operator::Sum),
                    SpecEntry::new(c, Operator::SumOfSquares),
                ]
            })
            .collect(),
    )
    .expect("entries are distinct");
    let oracle = intersection_stats(&client, server.ids(), &spec).expect("spec matches columns");
    let mut expected = format!("cardinality={}\n", oracle.cardinality);
    for (entry, value) in &oracle.aggregates {
        expected.push_str(&format!("{entry}={value}\n"));
    }
    Ok(Generated {
        client,
        server,
        spec,
        expected,
    })
}

pub fn client_csv(ds: &Dataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((0..ds.columns()).map(|i| format!("col{i}")))
        .collect();
    w.write_record(&header).expect("in-memory write");
    for r in ds.records() {
        let row: Vec<String> = std::iter::once(String::from_utf8_lossy(&r.id).into_owned())
            .chain(r.values.iter().map(u64::to_string))
            .collect();
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
}

pub fn server_csv(ds: &Dataset) -> String {
    let mut out = String::from("id\n");
    for id in ds.ids() {
        out.push_str(&String::from_utf8_lossy(id));
        out.push('\n');
    }
    out
}

/// Writes `client.csv`, `server.csv` and `expected.txt` into `dir`.
pub fn gen_data(p: &GenParams, dir: &Path) -> Result<GeneratedFiles, GenError> {
    let g = generate(p)?;
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| GenError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let files = GeneratedFiles {
        client_csv: dir.join("client.csv"),
        server_csv: dir.join("server.csv"),
        expected: dir.join("expected.txt"),
    };
    for (path, contents) in [
        (&files.client_csv, client_csv(&g.client)),
        (&files.server_csv, server_csv(&g.server)),
        (&files.expected, g.expected),
    ] {
        fs::File::create(path)
            .and_then(|mut f| f.write_all(contents.as_bytes()))
            .map_err(io(path))?;
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_dataset, load_id_set};

    fn params(intersection: usize) -> GenParams {
        GenParams {
            seed: 42,
            size_a: 100,
            size_b: 100,
            intersection,
            columns: 2,
            bound: 31,
        }
    }

    #[test]
    fn seed_42_has_twenty_shared_ids() {
        let g = generate(&params(20)).unwrap();
        let server: HashSet<&[u8]> = g.server.ids().collect();
        assert_eq!(g.client.ids().filter(|id| server.contains(id)).count(), 20);
        assert_eq!((g.client.len(), g.server.len()), (100, 100));
        assert!(g.expected.starts_with("cardinality=20\n"));
        assert_eq!(g.expected.lines().count(), 5);
    }

    #[test]
    fn files_reload_and_match_oracle() {
        let dir = tempfile::tempdir().unwrap();
        let files = gen_data(&params(20), dir.path()).unwrap();
        let client = load_dataset(&files.client_csv, 31).unwrap();
        let server = load_id_set(&files.server_csv).unwrap();
        let g = generate(&params(20)).unwrap();
        let oracle = intersection_stats(&client, server.ids(), &g.spec).unwrap();
        let mut lines = format!("cardinality={}\n", oracle.cardinality);
        for (e, v) in &oracle.aggregates {
            lines.push_str(&format!("{e}={v}\n"));
        }
        assert_eq!(fs::read_to_string(&files.expected).unwrap(), lines);
    }

    #[test]
    fn reproducible_byte_for_byte() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = gen_data(&params(7), a.path()).unwrap();
        let fb = gen_data(&params(7), b.path()).unwrap();
        for (x, y) in [
            (fa.client_csv, fb.client_csv),
            (fa.server_csv, fb.server_csv),
            (fa.expected, fb.expected),
        ] {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
        let other = generate(&GenParams {
            seed: 43,
            ..params(7)
        })
        .unwrap();
        assert_ne!(
            client_csv(&other.client),
            client_csv(&generate(&params(7)).unwrap().client)
        );
    }

    #[test]
    fn zero_intersection_is_disjoint() {
        let g = generate(&params(0)).unwrap();
        assert_eq!(
            g.expected,
            "cardinality=0\ncol0.sum=0\ncol0.sumsq=0\ncol1.sum=0\ncol1.sumsq=0\n"
        );
    }

    #[test]
    fn infeasible_intersection() {
        assert!(matches!(
            generate(&params(101)),
            Err(GenError::InfeasibleParams(_))
        ));
        assert!(matches!(
            generate(&GenParams {
                bound: 0,
                ..params(1)
            }),
            Err(GenError::InfeasibleParams(_))
        ));
        assert!(matches!(
            generate(&GenParams {
                columns: 5,
                ..params(1)
            }),
            Err(GenError::InfeasibleParams(_))
        ));
    }
}
