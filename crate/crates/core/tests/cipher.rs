use std::collections::HashSet;

use jingbing::cipher::{
    encrypt, hash_to_group, keygen, reencrypt, shuffle, GroupElement, GroupScalar,
};
use proptest::prelude::*;
use rand::rngs::OsRng;
use rand::{Rng, RngCore};

fn unhex(s: &str) -> Vec<u8> {
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
        .collect()
}

#[test]
fn golden_hash_to_group_vectors() {
    let text = include_str!("vectors/hash_to_group.txt");
    let mut checked = 0;
    for line in text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
    {
        let (id, expected) = line.split_once(' ').unwrap();
        let got = hash_to_group(&unhex(id)).unwrap().to_bytes();
        assert_eq!(got.to_vec(), unhex(expected), "identifier {id}");
        checked += 1;
    }
    assert_eq!(checked, 10);
}

#[test]
fn commutativity_random_triples() {
    let mut rng = OsRng;
    for _ in 0..100 {
        let a = keygen(&mut rng).unwrap();
        let b = keygen(&mut rng).unwrap();
        let mut x = vec![0u8; rng.gen_range(1..=128)];
        rng.fill_bytes(&mut x);
        assert_eq!(
            reencrypt(&b, &encrypt(&a, &x).unwrap()),
            reencrypt(&a, &encrypt(&b, &x).unwrap())
        );
    }
}

#[test]
fn reencrypt_commutes_on_elements() {
    let mut rng = OsRng;
    for i in 0..100u32 {
        let g = hash_to_group(&i.to_be_bytes()).unwrap();
        let a = keygen(&mut rng).unwrap();
        let b = keygen(&mut rng).unwrap();
        assert_eq!(
            reencrypt(&a, &reencrypt(&b, &g)),
            reencrypt(&b, &reencrypt(&a, &g))
        );
    }
}

#[test]
fn injective_on_ten_thousand_identifiers() {
    let distinct: HashSet<[u8; 32]> = (0..10_000u32)
        .map(|i| {
            hash_to_group(format!("voter-{i}").as_bytes())
                .unwrap()
                .to_bytes()
        })
        .collect();
    assert_eq!(distinct.len(), 10_000);
}

#[test]
fn shuffle_moves_a_hundred_elements() {
    let input: Vec<u32> = (0..100).collect();
    let output = shuffle(input.clone(), &mut OsRng);
    assert_ne!(output, input);
    let mut sorted = output;
    sorted.sort_unstable();
    assert_eq!(sorted, input);
}

#[test]
fn shuffle_positions_look_uniform() {
    // each of 4 items should land in slot 0 about a quarter of the time
    let mut counts = [0u32; 4];
    for _ in 0..4000 {
        counts[shuffle(vec![0usize, 1, 2, 3], &mut OsRng)[0]] += 1;
    }
    for c in counts {
        assert!((800..1200).contains(&c), "{counts:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_commutative(x in proptest::collection::vec(any::<u8>(), 1..=128), a in 1u64.., b in 1u64..) {
        let a = GroupScalar::from_u64(a).unwrap();
        let b = GroupScalar::from_u64(b).unwrap();
        prop_assert_eq!(reencrypt(&b, &encrypt(&a, &x).unwrap()), reencrypt(&a, &encrypt(&b, &x).unwrap()));
    }

    #[test]
    fn prop_encoding_roundtrip(x in proptest::collection::vec(any::<u8>(), 1..=128)) {
        let g = hash_to_group(&x).unwrap();
        prop_assert_eq!(GroupElement::from_bytes(&g.to_bytes()).unwrap(), g);
    }

    #[test]
    fn prop_shuffle_preserves_multiset(items in proptest::collection::vec(0u8..8, 0..64)) {
        let mut out = shuffle(items.clone(), &mut OsRng);
        let mut expected = items;
        out.sort_unstable();
        expected.sort_unstable();
        prop_assert_eq!(out, expected);
    }

    #[test]
    fn prop_oversized_identifiers_rejected(len in 129usize..512) {
        prop_assert!(hash_to_group(&vec![b'x'; len]).is_err());
    }
}
