use std::path::Path;

use proptest::prelude::*;
use serde_json::{Map, Value};

use flutterlab_core::config::parse_config;
use flutterlab_core::io::{config_hash, fmt17, read_snapshot, write_snapshot};
use flutterlab_core::{GridSpec, PlateField};

fn object(pairs: &[(String, f64)]) -> Value {
    let mut m = Map::new();
    for (k, v) in pairs {
        m.insert(k.clone(), Value::from(*v));
    }
    Value::Object(m)
}

proptest! {
    #[test]
    fn config_hash_ignores_key_order(
        mut pairs in prop::collection::btree_map("[a-z]{1,6}", -1e6f64..1e6, 1..8)
            .prop_map(|m| m.into_iter().collect::<Vec<_>>()),
        nested in -10.0f64..10.0,
    ) {
        let a = serde_json::json!({"outer": object(&pairs), "z": nested, "a": [1, 2, 3]});
        pairs.reverse();
        let b = serde_json::json!({"a": [1, 2, 3], "z": nested, "outer": object(&pairs)});
        prop_assert_eq!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn config_hash_sees_value_changes(x in -1e3f64..1e3, dx in 1e-9f64..1.0) {
        let a = serde_json::json!({"phys": {"U": x}});
        let b = serde_json::json!({"phys": {"U": x + dx}});
        prop_assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn fmt17_round_trips(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let back: f64 = fmt17(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(
        n in 5usize..12,
        t in -1e3f64..1e3,
        seed in prop::collection::vec(-1e3f64..1e3, 144),
    ) {
        let g = GridSpec::unit_square(n).unwrap();
        let f = PlateField::from_values(&g, seed[..n * n].to_vec()).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &g, t, &f).unwrap();
        let (g2, t2, f2) = read_snapshot(&mut buf.as_slice(), Path::new("<memory>")).unwrap();
        prop_assert_eq!(g2, g);
        prop_assert_eq!(t2.to_bits(), t.to_bits());
        prop_assert!(f.values().iter().zip(f2.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn subsonic_speeds_parse_and_sonic_ones_do_not(u in 0.0f64..2.0) {
        let text = format!(r#"{{"phys": {{"U": {u}}}}}"#);
        let parsed = parse_config(&text, Path::new("."));
        prop_assert_eq!(parsed.is_ok(), u < 1.0);
    }
}

#[test]
fn unknown_keys_cite_their_path() {
    let err = parse_config(r#"{"phys": {"U": 0.2, "gamma": 1}}"#, Path::new(".")).unwrap_err();
    assert!(err.to_string().contains("phys.gamma"), "{err}");
}
