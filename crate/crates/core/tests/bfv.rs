use std::sync::OnceLock;

use jingbing::bfv::{add, keygen, mul, params_default, BfvCiphertext, BfvKeys};
use rand::rngs::OsRng;

fn keys() -> &'static BfvKeys {
    static KEYS: OnceLock<BfvKeys> = OnceLock::new();
    KEYS.get_or_init(|| keygen(&params_default(), &mut OsRng).unwrap())
}

fn enc(m: u64) -> BfvCiphertext {
    keys().public.encrypt(m, &mut OsRng).unwrap()
}

#[test]
fn products_exhaustive_up_to_31() {
    let k = keys();
    let cts: Vec<_> = (0..=31).map(enc).collect();
    for a in 0..=31u64 {
        for b in 0..=31u64 {
            let prod = mul(&k.relin, &cts[a as usize], &cts[b as usize]).unwrap();
            assert_eq!(k.secret.decrypt(&prod).unwrap(), a * b, "{a}*{b}");
        }
    }
}

#[test]
fn twenty_squares_of_31_sum_to_19220() {
    let k = keys();
    let c = enc(31);
    let sq = mul(&k.relin, &c, &c).unwrap();
    let mut acc = sq.clone();
    for _ in 1..20 {
        acc = add(&acc, &mul(&k.relin, &c, &c).unwrap()).unwrap();
    }
    assert_eq!(k.secret.decrypt(&acc).unwrap(), 19220);
    assert!(k.secret.noise_budget(&acc).unwrap() > 0);
}
