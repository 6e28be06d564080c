//! Acceptance run: one PASS/FAIL line per criterion, then a single assertion
//! over all of them. Run with `--nocapture` to see the table.

use kempe_core::compiler::{compile_algebraic_trace, compile_poly_curve, pipeline_values, trace_set_check, CompiledLinkage};
use kempe_core::framework::{rigidity_report, verify_motion, Framework, JointId};
use kempe_core::gadgets::{build_gadget, contract_check, gadget_forward, GadgetKind};
use kempe_core::geom::Vec2;
use kempe_core::kinematics::{default_schedule, linkage_trace_error, project_sample, scalar_schedule, simulate_schedule, step_bound};
use kempe_core::poly::{BivariatePoly, PolyCurve};
use kempe_core::trigpoly::{choose_radii, eval_trig, expand, Disc};
use kempe_core::approx::{build_tower, square_boundary, tower_trace_check};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_4, PI};
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= limit, format!("{:.2}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

fn test_disc() -> Disc {
    Disc { center: Vec2::new(0.5, 0.5), radius: 0.2 }
}

fn random_curves(n: usize, seed: u64) -> Vec<PolyCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let coeffs = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                let d = rng.gen_range(1..=5);
                (0..=d).map(|_| rng.gen_range(-8..=8) as f64 / 8.0).collect()
            };
            let x = coeffs(&mut rng);
            PolyCurve::new(x, coeffs(&mut rng))
        })
        .collect()
}

fn gadget_contracts() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    let kinds = GadgetKind::all_defaults();
    for kind in &kinds {
        let g = build_gadget(kind.clone()).unwrap();
        let r = contract_check(&g, 20, 1e-9).unwrap();
        let dev = r.max_trace_error.unwrap_or(f64::INFINITY);
        worst = worst.max(dev);
        if !r.pass || dev > 1e-9 {
            bad.push(kind.name());
        }
    }
    let (fast, t) = within(start, Duration::from_secs(10));
    outcome(
        kinds.len() == 13 && bad.is_empty() && fast,
        format!("{} kinds, worst deviation {worst:.1e}, failing {bad:?}, {t}", kinds.len()),
    )
}

fn peaucellier_line() -> Outcome {
    let g = build_gadget(GadgetKind::Peaucellier { l: 2.0, r: 1.0, d: 1.0 }).unwrap();
    let (p1, q, p) = (g.role("p1").unwrap(), g.role("q").unwrap(), g.role("P").unwrap());
    let range = g.range("angle").unwrap();
    let (mut inv, mut line): (f64, f64) = (0.0, 0.0);
    for i in 0..100 {
        let a = range.lo + (range.hi - range.lo) * i as f64 / 99.0;
        let pos = gadget_forward(&g, &g.inputs_for(&[a])).unwrap();
        inv = inv.max((pos[p1.0].dist(pos[q.0]) * pos[p1.0].dist(pos[p.0]) - 3.0).abs());
        line = line.max((pos[q.0].x - 1.5).abs());
    }
    outcome(inv <= 1e-9 && line <= 1e-9, format!("inversion {inv:.1e}, line {line:.1e} over 100 samples"))
}

fn polynomial_end_to_end(corpus: &[(PolyCurve, CompiledLinkage)]) -> Outcome {
    let start = Instant::now();
    let (mut trace, mut newton): (f64, f64) = (0.0, 0.0);
    let mut verified = 0;
    for (_, cl) in corpus {
        let sched = default_schedule(cl, 1000).unwrap();
        let path = simulate_schedule(cl, &sched).unwrap();
        // Normalized units: the error inside the safe window.
        trace = trace.max(linkage_trace_error(cl, &path).unwrap() * cl.normalization.scale);
        let r = verify_motion(&cl.fw, &path, 1e-8, step_bound(cl, &sched).unwrap()).unwrap();
        verified += r.pass as usize;
        for i in 0..=20 {
            let n = project_sample(cl, &[i as f64 / 20.0]).unwrap();
            newton = newton.max(if n.converged { n.displacement } else { f64::INFINITY });
        }
    }
    let (fast, t) = within(start, Duration::from_secs(30));
    outcome(
        trace <= 1e-8 && verified == corpus.len() && newton <= 1e-6 && fast,
        format!("trace {trace:.1e}, verified {verified}/{}, newton {newton:.1e}, {t}", corpus.len()),
    )
}

fn driver_invariance(corpus: &[(PolyCurve, CompiledLinkage)]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (curve, cl) in corpus {
        let s = |u: f64| 0.5 - 0.5 * (3.0 * PI * u).cos() * (1.0 - u);
        let sched = scalar_schedule((0..=400).map(|i| s(i as f64 / 400.0).clamp(0.0, 1.0)));
        let path = simulate_schedule(cl, &sched).unwrap();
        for (m, v) in path.samples.iter().zip(&sched) {
            let got = cl.normalization.apply(cl.traced(&m.pos).unwrap());
            worst = worst.max(got.dist(cl.normalization.apply(curve.eval(v[0]))));
        }
    }
    outcome(worst <= 1e-8, format!("max |pC(t) - curve(s(t))| {worst:.1e} (normalized)"))
}

fn trig_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let deg = rng.gen_range(1..=5u32);
        let mut terms = Vec::new();
        for i in 0..=deg {
            for j in 0..=deg - i {
                if rng.gen_bool(0.5) {
                    terms.push(((i, j), rng.gen_range(-16..=16) as f64 / 8.0));
                }
            }
        }
        let f = BivariatePoly::from_f64(&terms);
        let a = rng.gen_range(1..=12) as f64 / rng.gen_range(1..=8) as f64;
        let b = rng.gen_range(1..=12) as f64 / rng.gen_range(1..=8) as f64;
        let t = expand(&f, a, b);
        for _ in 0..1000 {
            let (th, ph) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
            let direct = f.eval(a * th.cos() + b * ph.cos(), a * th.sin() + b * ph.sin());
            worst = worst.max((eval_trig(&t, th, ph) - direct).abs());
        }
    }
    outcome(worst <= 1e-9, format!("max |expansion - substitution| {worst:.1e}"))
}

fn uniform_in_disc(disc: &Disc, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    (0..n)
        .map(|_| {
            let r = disc.radius * rng.gen::<f64>().sqrt();
            disc.center + Vec2::polar(r, rng.gen_range(0.0..2.0 * PI))
        })
        .collect()
}

fn radii_certificate() -> Outcome {
    let disc = test_disc();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts = uniform_in_disc(&disc, 10_000, &mut rng);
    let mut notes = Vec::new();
    let mut ok = true;
    for n in [2u32, 3, 4] {
        let Ok(rc) = choose_radii(n, &disc) else {
            ok = false;
            notes.push(format!("n={n}: no radii"));
            continue;
        };
        let mut margin = f64::INFINITY;
        for p in &pts {
            let Ok((th, ph)) = rc.angles(*p) else {
                margin = f64::NEG_INFINITY;
                break;
            };
            let n = n as f64;
            margin = margin.min((n * ph).min(th - n * ph).min(FRAC_PI_4 - (n + 1.0) * th));
            margin = margin.min(if rc.point(th, ph).dist(*p) <= 1e-9 { f64::INFINITY } else { f64::NEG_INFINITY });
        }
        ok &= margin > 0.0;
        notes.push(format!("n={n}: a={:.3} b={:.4} margin {margin:.1e}", rc.a, rc.b));
    }
    outcome(ok, notes.join("; "))
}

fn circle_pipeline() -> Outcome {
    let f = BivariatePoly::parse("x^2+y^2-0.6").unwrap();
    let disc = test_disc();
    let cl = compile_algebraic_trace(&f, &disc).unwrap();
    let kempe_core::compiler::Target::Algebraic { radii, .. } = &cl.target else { unreachable!() };
    let mut worst: f64 = 0.0;
    for p in disc.grid(20, 36) {
        let (th, ph) = radii.angles(cl.normalization.apply(p)).unwrap();
        let (line, trig, direct) = pipeline_values(&cl, th, ph).unwrap();
        worst = worst.max((line - trig).abs()).max((trig - direct).abs()).max((line - direct).abs());
    }
    let r = trace_set_check(&cl, &f, 10_000, 1e-6, 1e-6, 7).unwrap();
    outcome(
        worst <= 1e-8 && r.agreements == r.samples,
        format!("pairwise {worst:.1e} over the wedge grid, membership {}/{}", r.agreements, r.samples),
    )
}

fn tower_truncation() -> Outcome {
    let start = Instant::now();
    let s = square_boundary(400);
    let r3 = tower_trace_check(&build_tower(&s, 3).unwrap(), 500).unwrap();
    let r6 = tower_trace_check(&build_tower(&s, 6).unwrap(), 50).unwrap();
    let stages_ok = r3.stages.iter().all(|st| st.pass);
    let composite = r3.composite.0.max(r3.composite.1);
    let (fast, t) = within(start, Duration::from_secs(60));
    outcome(
        stages_ok && composite <= 1.0 / 3.0 + r3.slack && r3.max_valency == r6.max_valency && fast,
        format!(
            "stages {}/{}, composite {composite:.4} vs {:.4} + {:.4}, valency {} / {}, {t}",
            r3.stages.iter().filter(|s| s.pass).count(),
            r3.stages.len(),
            1.0 / 3.0,
            r3.slack,
            r3.max_valency,
            r6.max_valency
        ),
    )
}

/// Unit square with its bottom side pinned.
fn square(fw: &mut Framework) -> [JointId; 4] {
    let a = fw.add_joint(Vec2::new(0.0, 0.0), true);
    let b = fw.add_joint(Vec2::new(1.0, 0.0), true);
    let c = fw.add_joint(Vec2::new(1.0, 1.0), false);
    let d = fw.add_joint(Vec2::new(0.0, 1.0), false);
    for (p, q) in [(a, b), (b, c), (c, d), (d, a)] {
        fw.add_bar(p, q);
    }
    [a, b, c, d]
}

/// The library's bracing rule: midpoints of two opposite sides, each held by
/// bars to the side's ends, joined by a bar.
fn brace(fw: &mut Framework, [a, b, c, d]: [JointId; 4]) {
    let mid = |fw: &mut Framework, p: JointId, q: JointId| {
        let m = (fw.joints[p.0].home() + fw.joints[q.0].home()) * 0.5;
        let pinned = fw.joints[p.0].pinned && fw.joints[q.0].pinned;
        let j = fw.add_joint(m, pinned);
        fw.add_bar(j, p);
        fw.add_bar(j, q);
        j
    };
    let m1 = mid(fw, a, b);
    let m2 = mid(fw, c, d);
    fw.add_bar(m1, m2);
}

fn rigidity_sanity() -> Outcome {
    let dof = |fw: &Framework| rigidity_report(fw, &fw.home_placement()).unwrap().dof;
    let mut open = Framework::new();
    square(&mut open);
    let mut braced = Framework::new();
    let s = square(&mut braced);
    brace(&mut braced, s);
    let mut tri = Framework::new();
    let a = tri.add_joint(Vec2::new(0.0, 0.0), true);
    let b = tri.add_joint(Vec2::new(1.0, 0.0), true);
    let c = tri.add_joint(Vec2::new(0.5, 0.8), false);
    for (p, q) in [(a, b), (b, c), (c, a)] {
        tri.add_bar(p, q);
    }
    let (o, br, t) = (dof(&open), dof(&braced), dof(&tri));
    outcome(o == 1 && br == 0 && t == 0, format!("parallelogram {o} (want 1), braced {br} (want 0), triangle {t} (want 0)"))
}

#[test]
fn acceptance() {
    let corpus: Vec<(PolyCurve, CompiledLinkage)> = random_curves(10, 3)
        .into_iter()
        .map(|c| {
            let cl = compile_poly_curve(&c).unwrap();
            (c, cl)
        })
        .collect();
    let results = [
        ("1 gadget contracts", gadget_contracts()),
        ("2 peaucellier line law", peaucellier_line()),
        ("3 polynomial end-to-end", polynomial_end_to_end(&corpus)),
        ("4 driver invariance", driver_invariance(&corpus)),
        ("5 trig expansion oracle", trig_oracle()),
        ("6 radii certificate", radii_certificate()),
        ("7 circle pipeline", circle_pipeline()),
        ("8 tower truncation", tower_truncation()),
        ("9 rigidity sanity", rigidity_sanity()),
    ];
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
