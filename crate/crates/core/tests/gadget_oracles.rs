use kempe_core::framework::JointId;
use kempe_core::gadgets::{build_gadget, contract_check, gadget_forward, Gadget, GadgetKind};
use kempe_core::geom::Vec2;

/// Both intersections of two circles, computed from scratch.
fn meet(c0: Vec2, r0: f64, c1: Vec2, r1: f64) -> (Vec2, Vec2) {
    let (dx, dy) = (c1.x - c0.x, c1.y - c0.y);
    let d = (dx * dx + dy * dy).sqrt();
    let a = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d);
    let h = (r0 * r0 - a * a).max(0.0).sqrt();
    let (mx, my) = (c0.x + a * dx / d, c0.y + a * dy / d);
    (Vec2::new(mx - h * dy / d, my + h * dx / d), Vec2::new(mx + h * dy / d, my - h * dx / d))
}

#[test]
fn peaucellier_matches_circle_oracle() {
    let (l, r, d) = (2.0, 1.0, 1.0);
    let g = build_gadget(GadgetKind::Peaucellier { l, r, d }).unwrap();
    let range = g.range("angle").unwrap();
    let q_id = g.role("q").unwrap();
    for i in 0..100 {
        let alpha = range.lo + (range.hi - range.lo) * i as f64 / 99.0;
        // The inverse joint runs on the circle of radius d about p2 = (d, 0),
        // which passes through p1.
        let p = Vec2::new(d + d * alpha.cos(), d * alpha.sin());
        let (a, b) = meet(Vec2::ZERO, l, p, r);
        let q = Vec2::new(a.x + b.x - p.x, a.y + b.y - p.y);
        assert!((q.x - 1.5).abs() <= 1e-9, "oracle q = {q:?}");
        assert!((q.norm() * p.norm() - (l * l - r * r)).abs() <= 1e-9);
        let pos = gadget_forward(&g, &g.inputs_for(&[alpha])).unwrap();
        assert!(pos[q_id.0].dist(q) <= 1e-9, "sample {i}: gadget {:?} oracle {q:?}", pos[q_id.0]);
    }
}

#[test]
fn strict_peaucellier_stays_clear_of_extremes() {
    let g = build_gadget(GadgetKind::StrictPeaucellier { l: 2.0, r: 1.0, d: 1.0 }).unwrap();
    let r = contract_check(&g, 50, 1e-9).unwrap();
    assert!(r.pass, "{r:?}");
    // Full stretch of the arms would put q at height sqrt(9 - 2.25).
    let q = g.role("q").unwrap();
    let range = g.range("angle").unwrap();
    for v in [range.lo, range.hi] {
        let pos = gadget_forward(&g, &g.inputs_for(&[v])).unwrap();
        assert!(pos[q.0].y.abs() < 6.75f64.sqrt());
    }
}

/// Slopes |Δ joint| / |Δ input| measured once on a 1000-step sweep, with 25%
/// headroom.
fn frozen_constant(kind: &GadgetKind) -> f64 {
    match kind.name() {
        "peaucellier" => 2.1,
        "strict_peaucellier" => 2.3,
        "lineariser" => 1.2,
        "translator" => 1.7,
        "rotator" | "copier" => 5.4,
        "multiplier" => 1.8,
        "divider" => 6.0,
        "power" => 3.5,
        "scalar" => 1.7,
        "angle_adder" => 5.4,
        "reversor" => 3.6,
        "multiplicator" => 2.5,
        other => panic!("no constant for {other}"),
    }
}

fn sweep_ends(g: &Gadget) -> (Vec<f64>, Vec<f64>) {
    let at = |f: f64| -> Vec<f64> { g.params.iter().map(|p| p.range.lo + f * (p.range.hi - p.range.lo)).collect() };
    let (mut v0, mut v1) = (at(0.1), at(0.9));
    if let GadgetKind::Multiplicator { .. } = g.kind {
        // Keep alpha < beta along the whole segment.
        let (a, b) = (g.params[0].range, g.params[1].range);
        v0[1] = b.lo + 0.3 * (b.hi - b.lo);
        v1[0] = a.lo + 0.5 * (a.hi - a.lo);
    }
    (v0, v1)
}

#[test]
fn internal_joints_move_continuously() {
    for kind in GadgetKind::all_defaults() {
        let g = build_gadget(kind.clone()).unwrap();
        let (v0, v1) = sweep_ends(&g);
        let len = v0.iter().zip(&v1).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        let n = 2000;
        let h = len / n as f64;
        let mut prev: Option<Vec<Vec2>> = None;
        for i in 0..=n {
            let f = i as f64 / n as f64;
            let v: Vec<f64> = v0.iter().zip(&v1).map(|(a, b)| a + f * (b - a)).collect();
            let pos = gadget_forward(&g, &g.inputs_for(&v)).unwrap();
            if let Some(p) = &prev {
                let (j, step) = pos
                    .iter()
                    .zip(p)
                    .enumerate()
                    .map(|(j, (a, b))| (j, a.dist(*b)))
                    .fold((0, 0.0), |m, x| if x.1 > m.1 { x } else { m });
                assert!(
                    step <= frozen_constant(&kind) * h,
                    "{}: joint {} jumps {step:e} at step {i} (h = {h:e})",
                    kind.name(),
                    JointId(j)
                );
            }
            prev = Some(pos);
        }
    }
}

#[test]
fn gadget_json_has_interface_and_ranges() {
    let g = build_gadget(GadgetKind::Multiplier { range: 1.0 }).unwrap();
    let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
    assert_eq!(v["kind"]["kind"], "multiplier");
    for key in ["joints", "bars", "labels", "interface", "ranges"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}
