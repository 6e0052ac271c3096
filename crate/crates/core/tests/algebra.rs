use std::collections::BTreeMap;

use cmd_core::{text, Assoc, AssocF32, CollisionRule, CombineOp, Key, KeySpec, Triple, Value};
use proptest::prelude::*;

type Dense = BTreeMap<(Key, Key), f64>;

fn dense(a: &Assoc) -> Dense {
    a.iter().map(|(r, c, v)| ((r.clone(), c.clone()), v.coerce())).collect()
}

/// Triple loop over every (row, inner, col) key combination.
fn dense_product(a: &Dense, b: &Dense) -> Dense {
    let rows: Vec<&Key> = a.keys().map(|k| &k.0).collect();
    let inner: Vec<&Key> = a.keys().map(|k| &k.1).chain(b.keys().map(|k| &k.0)).collect();
    let cols: Vec<&Key> = b.keys().map(|k| &k.1).collect();
    let mut out = Dense::new();
    for r in &rows {
        for c in &cols {
            let mut s = 0.0;
            let mut seen = std::collections::BTreeSet::new();
            for k in &inner {
                if !seen.insert(*k) {
                    continue;
                }
                let x = a.get(&((*r).clone(), (*k).clone())).copied().unwrap_or(0.0);
                let y = b.get(&((*k).clone(), (*c).clone())).copied().unwrap_or(0.0);
                s += x * y;
            }
            if s != 0.0 {
                out.insert(((*r).clone(), (*c).clone()), s);
            }
        }
    }
    out
}

fn key_name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "ab", "b", "ba", "c", "d", "e", "f"]).prop_map(String::from)
}

/// Arrays on at most 8x8 keys with small integer values, so sums are exact.
fn small_array() -> impl Strategy<Value = Assoc> {
    prop::collection::vec((key_name(), key_name(), prop_oneof![-3i32..=-1, 1i32..=3]), 0..24).prop_map(|v| {
        Assoc::from_triples(v.into_iter().map(|(r, c, x)| Triple::new(r, c, x as f64)), CollisionRule::Sum).unwrap()
    })
}

fn spec() -> impl Strategy<Value = KeySpec> {
    prop_oneof![
        Just(KeySpec::All),
        prop::collection::vec(key_name(), 0..4).prop_map(KeySpec::exact),
        key_name().prop_map(|k| KeySpec::prefix(&k[..1])),
        (key_name(), key_name()).prop_map(|(a, b)| if a <= b { KeySpec::range(a, b).unwrap() } else { KeySpec::range(b, a).unwrap() }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn multiply_matches_dense_oracle(a in small_array(), b in small_array()) {
        let p = a.multiply(&b);
        p.check_invariants().unwrap();
        prop_assert_eq!(dense(&p), dense_product(&dense(&a), &dense(&b)));
    }

    #[test]
    fn semiring_laws(a in small_array(), b in small_array(), c in small_array()) {
        prop_assert_eq!(a.multiply(&b).multiply(&c), a.multiply(&b.multiply(&c)));
        prop_assert_eq!(a.combine(&b, CombineOp::Add).unwrap(), b.combine(&a, CombineOp::Add).unwrap());
        prop_assert_eq!(
            a.combine(&b, CombineOp::Add).unwrap().combine(&c, CombineOp::Add).unwrap(),
            a.combine(&b.combine(&c, CombineOp::Add).unwrap(), CombineOp::Add).unwrap()
        );
        prop_assert_eq!(
            a.multiply(&b.combine(&c, CombineOp::Add).unwrap()),
            a.multiply(&b).combine(&a.multiply(&c), CombineOp::Add).unwrap()
        );
    }

    #[test]
    fn combine_matches_dense_oracle(a in small_array(), b in small_array()) {
        let (da, db) = (dense(&a), dense(&b));
        for op in [CombineOp::Add, CombineOp::Sub, CombineOp::Min, CombineOp::Max] {
            let got = a.combine(&b, op).unwrap();
            got.check_invariants().unwrap();
            let mut want = Dense::new();
            for k in da.keys().chain(db.keys()) {
                let v = match (da.get(k), db.get(k), op) {
                    (Some(x), Some(y), CombineOp::Add) => x + y,
                    (Some(x), Some(y), CombineOp::Sub) => x - y,
                    (Some(x), Some(y), CombineOp::Min) => x.min(*y),
                    (Some(x), Some(y), CombineOp::Max) => x.max(*y),
                    (_, _, CombineOp::Min) => 0.0,
                    (Some(x), None, _) => *x,
                    (None, Some(y), CombineOp::Sub) => -y,
                    (None, Some(y), _) => *y,
                    (None, None, _) => unreachable!(),
                };
                if v != 0.0 {
                    want.insert(k.clone(), v);
                }
            }
            prop_assert_eq!(dense(&got), want, "{:?}", op);
        }
    }

    #[test]
    fn triple_round_trip(a in small_array()) {
        prop_assert_eq!(&Assoc::from_triples(a.to_triples(), CollisionRule::Sum).unwrap(), &a);
        prop_assert_eq!(&text::from_bytes::<f64>(&text::to_bytes(&a)).unwrap(), &a);
        prop_assert_eq!(&a.transpose().transpose(), &a);
    }

    #[test]
    fn select_composes(a in small_array(), r in spec(), c in spec()) {
        let both = a.select(&r, &c).unwrap();
        both.check_invariants().unwrap();
        let stepwise = a.select(&r, &KeySpec::All).unwrap().select(&KeySpec::All, &c).unwrap();
        prop_assert_eq!(&stepwise, &both);
        for (row, col, _) in both.iter() {
            prop_assert!(r.matches(row, Default::default()).unwrap() && c.matches(col, Default::default()).unwrap());
        }
        let kept = a.iter().filter(|(row, col, _)| r.matches(row, Default::default()).unwrap() && c.matches(col, Default::default()).unwrap()).count();
        prop_assert_eq!(kept, both.nnz());
    }

    #[test]
    fn renaming_commutes_with_gram_product(a in small_array(), salt in any::<u64>()) {
        // Injective renaming: prepend a salt-dependent hash byte to each key.
        let rename = |k: &Key| -> Key {
            let h = k.as_bytes().iter().fold(salt, |h, &b| h.wrapping_mul(31).wrapping_add(b as u64));
            let mut out = vec![(h % 251) as u8 + 1];
            out.extend_from_slice(k.as_bytes());
            Key::from(out)
        };
        let renamed = a.relabel(a.rows().iter().map(rename).collect(), a.cols().iter().map(rename).collect()).unwrap();
        let plain = a.multiply(&a.transpose());
        let masked = renamed.multiply(&renamed.transpose());
        let back = plain.relabel(plain.rows().iter().map(rename).collect(), plain.cols().iter().map(rename).collect()).unwrap();
        prop_assert_eq!(masked, back);
    }

    #[test]
    fn threshold_keeps_exactly_larger_values(a in small_array(), cut in -3i32..=3) {
        let t = a.threshold(cut as f64).unwrap();
        t.check_invariants().unwrap();
        let want: Dense = dense(&a).into_iter().filter(|(_, v)| *v > cut as f64).collect();
        prop_assert_eq!(dense(&t), want);
    }
}

#[test]
fn single_precision_instantiation() {
    let a = AssocF32::from_triples([Triple::new("r", "k", 1.5f32), Triple::new("r", "j", "s")], CollisionRule::Sum).unwrap();
    let p = a.multiply(&a.transpose());
    assert_eq!(p.get_num("r", "r"), Some(1.5f32 * 1.5 + 1.0));
    assert_eq!(a.get("r", "j"), Some(&Value::str("s")));
}

#[test]
fn parallel_multiply_is_schedule_independent() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let triples: Vec<Triple> = (0..20_000)
        .map(|_| Triple::new(format!("r{:04}", rng.gen_range(0..1000)), format!("k{:03}", rng.gen_range(0..300)), rng.gen_range(0.1..1.0)))
        .collect();
    let a = Assoc::from_triples(triples, CollisionRule::Sum).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| a.multiply(&a.transpose()));
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| a.multiply(&a.transpose()));
    assert_eq!(one, four);
}
