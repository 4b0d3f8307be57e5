//! Plaintext reference for intersection statistics.
//!
//! Sees both parties' data, so it only ever runs in tests and in `gendata`.

use std::collections::HashSet;

use crate::protocol::{AggregationSpec, Dataset, ProtocolOutput, SpecEntry, ValidationError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub cardinality: u64,
    pub aggregates: Vec<(SpecEntry, u128)>,
}

impl PartialEq<ProtocolOutput> for OracleResult {
    fn eq(&self, other: &ProtocolOutput) -> bool {
        other == self
    }
}

/// Cardinality of the byte-exact identifier intersection, plus each spec
/// entry's exact aggregate over the client's matching rows.
pub fn intersection_stats<'a, I>(
    client: &Dataset,
    server_ids: I,
    spec: &AggregationSpec,
) -> Result<OracleResult, ValidationError>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    spec.check_columns(client.columns())?;
    let server: HashSet<&[u8]> = server_ids.into_iter().collect();
    let matching: Vec<_> = client
        .records()
        .iter()
        .filter(|r| server.contains(r.id.as_slice()))
        .collect();
    let aggregates = spec
        .entries()
        .iter()
        .map(|e| {
            let total = matching
                .iter()
                .map(|r| e.operator.apply(r.values[e.column as usize]))
                .sum();
            (*e, total)
        })
        .collect();
    Ok(OracleResult {
        cardinality: matching.len() as u64,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{Operator, Record};

    fn client() -> Dataset {
        Dataset::new(
            vec![
                Record::new("alice", vec![3]),
                Record::new("bob", vec![5]),
                Record::new("carol", vec![7]),
            ],
            1,
            31,
        )
        .unwrap()
    }

    fn spec(op: Operator) -> AggregationSpec {
        AggregationSpec::new(vec![SpecEntry::new(0, op)]).unwrap()
    }

    const SERVER: [&[u8]; 3] = [b"bob", b"carol", b"dave"];

    #[test]
    fn worked_example() {
        let sum = intersection_stats(&client(), SERVER, &spec(Operator::Sum)).unwrap();
        assert_eq!(sum.cardinality, 2);
        assert_eq!(sum.aggregates[0].1, 12);
        let sq = intersection_stats(&client(), SERVER, &spec(Operator::SumOfSquares)).unwrap();
        assert_eq!(sq.aggregates[0].1, 74);
    }

    #[test]
    fn disjoint() {
        let r = intersection_stats(&client(), [b"zed".as_slice()], &spec(Operator::Sum)).unwrap();
        assert_eq!((r.cardinality, r.aggregates[0].1), (0, 0));
    }

    #[test]
    fn column_mismatch() {
        let s = AggregationSpec::new(vec![SpecEntry::new(1, Operator::Sum)]).unwrap();
        assert!(intersection_stats(&client(), SERVER, &s).is_err());
    }
}
