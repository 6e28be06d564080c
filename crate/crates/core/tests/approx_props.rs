use kempe_core::approx::{
    bernstein_fit, build_tower, build_tower_with, read_samples_csv, square_boundary, tower_trace_check, CoordFit, TowerOptions,
};
use kempe_core::geom::Vec2;
use proptest::prelude::*;

/// Explicit Bernstein sum with binomials, independent of de Casteljau.
fn bernstein_sum(control: &[f64], t: f64) -> f64 {
    let n = control.len() - 1;
    let mut binom = 1.0;
    let mut total = 0.0;
    for (i, c) in control.iter().enumerate() {
        total += c * binom * t.powi(i as i32) * (1.0 - t).powi((n - i) as i32);
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    total
}

fn sampled(n: usize, f: impl Fn(f64) -> Vec2) -> Vec<(f64, Vec2)> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).map(|t| (t, f(t))).collect()
}

fn worst(fit: &CoordFit, samples: &[(f64, Vec2)], coord: impl Fn(Vec2) -> f64) -> f64 {
    samples.iter().map(|(t, p)| (fit.eval(*t) - coord(*p)).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fits_meet_their_stage_bound(k in 1usize..8, a in -2.0f64..2.0, w in 0.5f64..6.0) {
        let s = sampled(200, |t| Vec2::new((w * t).sin() + a * t, (w * t).cos() * t));
        let fit = bernstein_fit(&s, k).unwrap();
        prop_assert_eq!(fit.k, k);
        for (c, coord) in [(&fit.x, (|p: Vec2| p.x) as fn(Vec2) -> f64), (&fit.y, |p: Vec2| p.y)] {
            prop_assert!(c.error < 1.0 / k as f64);
            prop_assert!((worst(c, &s, coord) - c.error).abs() <= 1e-12);
            prop_assert_eq!(c.control.len(), c.degree + 1);
            for i in 0..=10 {
                let t = i as f64 / 10.0;
                prop_assert!((c.eval(t) - bernstein_sum(&c.control, t)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn constant_fit_at_exactly_the_bound_is_rejected() {
    // The degree-0 approximant is x(0) = 0, off by exactly 1 at t = 1.
    let s = sampled(101, |t| Vec2::new(t, 0.25));
    let fit = bernstein_fit(&s, 1).unwrap();
    assert_eq!(fit.x.degree, 1);
    assert!(fit.x.error <= 1e-15);
    assert_eq!(fit.y.degree, 0);
}

#[test]
fn composite_error_shrinks_with_more_stages() {
    let s = square_boundary(400);
    let mut prev = f64::INFINITY;
    let mut valency = Vec::new();
    for k in 1..=6 {
        let r = tower_trace_check(&build_tower(&s, k).unwrap(), 200).unwrap();
        assert!(r.pass, "K = {k}: {:?}", r.failures);
        let c = r.composite.0.max(r.composite.1);
        assert!(c <= prev + 1e-12, "K = {k}: {c} after {prev}");
        assert!(c <= 1.0 / k as f64 + r.slack);
        prev = c;
        valency.push(r.max_valency);
    }
    // Each stage adds the same bounded construction.
    assert!(valency[1..].iter().all(|&v| v == valency[1]), "{valency:?}");
    assert!(valency[0] <= valency[1]);
}

#[test]
fn earlier_stages_do_not_depend_on_the_depth() {
    let s = square_boundary(400);
    let (a, b) = (build_tower(&s, 3).unwrap(), build_tower(&s, 4).unwrap());
    for (x, y) in a.stages.iter().zip(&b.stages) {
        assert_eq!(x.fit, y.fit);
        for (p, q) in [(x.x_out, y.x_out), (x.y_out, y.y_out), (x.tether_x, y.tether_x), (x.tether_y, y.tether_y)] {
            let (u, v) = (a.linkage.fw.joints[p.0].home(), b.linkage.fw.joints[q.0].home());
            assert!(u.dist(v) <= 1e-9, "stage {}: {u:?} vs {v:?}", x.k);
        }
    }
}

#[test]
fn oversized_tether_fails_by_stage() {
    let s = square_boundary(400);
    let opts = TowerOptions { tether_scale: 2.0, ..TowerOptions::default() };
    let r = tower_trace_check(&build_tower_with(&s, 2, &opts).unwrap(), 100).unwrap();
    assert!(!r.pass);
    assert!(r.failures.iter().any(|f| f.starts_with("stage x1")), "{:?}", r.failures);
}

#[test]
fn tower_json_round_trip() {
    let t = build_tower(&square_boundary(200), 2).unwrap();
    let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
    assert_eq!(v["K"], 2);
    let back = kempe_core::approx::StageTower::from_json(&t.to_json().unwrap()).unwrap();
    assert_eq!(back.stages, t.stages);
    assert_eq!(back.samples(), t.samples());
}

#[test]
fn sample_validation() {
    let short = sampled(50, |t| Vec2::new(t, t));
    assert!(bernstein_fit(&short, 2).is_err());
    let mut back = sampled(120, |t| Vec2::new(t, t));
    back.swap(3, 4);
    assert!(bernstein_fit(&back, 2).is_err());
    assert!(build_tower(&square_boundary(200), 0).is_err());
}

#[test]
fn csv_samples_report_line_numbers() {
    let good = "t,x,y\n0,0,0\n1,1,1\n";
    assert_eq!(read_samples_csv(good.as_bytes()).unwrap().len(), 2);
    let err = read_samples_csv("t,x,y\n0,0,0\n0.5,oops,1\n".as_bytes()).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}
