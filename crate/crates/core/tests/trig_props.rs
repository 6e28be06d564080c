use kempe_core::poly::BivariatePoly;
use kempe_core::trigpoly::{eval_trig, expand, Phase, TrigSum, TrigTerm};
use proptest::prelude::*;

fn poly_strategy(max_deg: u32) -> impl Strategy<Value = BivariatePoly> {
    prop::collection::vec(((0..=max_deg, 0..=max_deg), -40i32..=40), 1..8).prop_map(move |terms| {
        let t: Vec<((u32, u32), f64)> = terms
            .into_iter()
            .filter(|((i, j), _)| i + j <= max_deg)
            .map(|(k, c)| (k, c as f64 / 8.0))
            .collect();
        BivariatePoly::from_f64(&t)
    })
}

fn arms() -> impl Strategy<Value = (f64, f64)> {
    (1u32..=16, 1u32..=16).prop_map(|(a, b)| (a as f64 / 4.0, b as f64 / 8.0))
}

fn angles() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-3.2f64..3.2, -3.2f64..3.2), 20)
}

/// Direct substitution x = a cos θ + b cos φ, y = a sin θ + b sin φ.
fn direct(f: &BivariatePoly, a: f64, b: f64, t: f64, p: f64) -> f64 {
    f.eval(a * t.cos() + b * p.cos(), a * t.sin() + b * p.sin())
}

fn phase() -> impl Strategy<Value = Phase> {
    prop_oneof![Just(Phase::Zero), Just(Phase::Half), Just(Phase::Pi), Just(Phase::ThreeHalves)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expansion_matches_substitution(f in poly_strategy(5), (a, b) in arms(), pts in angles()) {
        let t = expand(&f, a, b);
        for (th, ph) in pts {
            let want = direct(&f, a, b, th, ph);
            prop_assert!((eval_trig(&t, th, ph) - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn expansion_is_linear(f in poly_strategy(4), g in poly_strategy(4), (a, b) in arms(), pts in angles()) {
        let sum = expand(&f.add(&g), a, b);
        let merged = expand(&f, a, b).merge(&expand(&g, a, b));
        prop_assert!(merged.is_canonical());
        for (th, ph) in pts {
            let (x, y) = (eval_trig(&sum, th, ph), eval_trig(&merged, th, ph));
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn expansion_is_canonical_and_idempotent(f in poly_strategy(5), (a, b) in arms()) {
        let t = expand(&f, a, b);
        prop_assert!(t.is_canonical());
        prop_assert!(t.max_order() <= f.degree());
        let again = t.canonicalize();
        prop_assert_eq!(&again, &t);
        prop_assert_eq!(again.canonicalize(), again);
    }

    #[test]
    fn phase_normalization_preserves_values(
        raw in prop::collection::vec((-5.0f64..5.0, 0u32..4, -3i32..4, phase()), 0..8),
        a00 in -2.0f64..2.0,
        pts in angles(),
    ) {
        let t = TrigSum {
            a00,
            terms: raw.into_iter().map(|(amp, r, s, phase)| TrigTerm { amp, r, s, phase }).collect(),
        };
        let c = t.canonicalize();
        prop_assert!(c.is_canonical());
        prop_assert!(c.terms.iter().all(|k| k.amp > 0.0));
        for (th, ph) in pts {
            let (x, y) = (eval_trig(&t, th, ph), eval_trig(&c, th, ph));
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()) * 40.0);
        }
    }
}

#[test]
fn trig_sum_json_shape() {
    let t = expand(&BivariatePoly::parse("x*y - 2").unwrap(), 2.0, 1.0);
    let v: serde_json::Value = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
    assert_eq!(v["A00"], -2.0);
    let term = &v["terms"][0];
    for key in ["A", "r", "s", "psi"] {
        assert!(term.get(key).is_some(), "missing {key}");
    }
}
