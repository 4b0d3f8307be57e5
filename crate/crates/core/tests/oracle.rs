use jingbing::oracle::intersection_stats;
use jingbing::protocol::{AggregationSpec, Dataset, Operator, Record, SpecEntry};
use proptest::prelude::*;

fn spec() -> AggregationSpec {
    AggregationSpec::new(vec![
        SpecEntry::new(0, Operator::Sum),
        SpecEntry::new(0, Operator::SumOfSquares),
    ])
    .unwrap()
}

fn rows() -> impl Strategy<Value = Vec<(u8, u64)>> {
    proptest::collection::btree_map(0u8..40, 0u64..=31, 0..30).prop_map(|m| m.into_iter().collect())
}

fn dataset(rows: &[(u8, u64)]) -> Dataset {
    Dataset::new(
        rows.iter()
            .map(|&(id, v)| Record::new(vec![b'k', id], vec![v]))
            .collect(),
        1,
        31,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn order_insensitive(client in rows().prop_shuffle(), server in proptest::collection::btree_set(0u8..40, 0..30)) {
        let server: Vec<Vec<u8>> = server.into_iter().map(|id| vec![b'k', id]).collect();
        let forward = intersection_stats(&dataset(&client), server.iter().map(Vec::as_slice), &spec()).unwrap();
        let mut reversed_client = client.clone();
        reversed_client.reverse();
        let backward = intersection_stats(&dataset(&reversed_client), server.iter().rev().map(Vec::as_slice), &spec()).unwrap();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn matches_naive_double_loop(client in rows(), server in proptest::collection::vec(0u8..40, 0..30)) {
        let server: Vec<Vec<u8>> = server.into_iter().map(|id| vec![b'k', id]).collect();
        let result = intersection_stats(&dataset(&client), server.iter().map(Vec::as_slice), &spec()).unwrap();
        let (mut card, mut sum, mut sq) = (0u64, 0u128, 0u128);
        for &(id, v) in &client {
            if server.iter().any(|s| s == &[b'k', id]) {
                card += 1;
                sum += v as u128;
                sq += (v * v) as u128;
            }
        }
        prop_assert_eq!(result.cardinality, card);
        prop_assert_eq!(result.aggregates.iter().map(|a| a.1).collect::<Vec<_>>(), vec![sum, sq]);
    }
}
