//! Algebraic curves traced inside a disc: a two-arm linkage driven by the
//! angles (θ, φ), angle generation by reversors and multiplicators, one
//! vector per cosine term, and a translator chain whose end p_L has
//! x-coordinate F(θ, φ) − A00.

use super::{CompiledLinkage, DriverInfo, Normalization, Target};
use crate::error::{Error, Result};
use crate::framework::{check_consistency, Framework, JointId, MotionPath, VerificationReport};
use crate::gadgets::parts::{lineariser_fixed, multiplicator, reversor, tether, translator};
use crate::geom::Vec2;
use crate::poly::{rational, BivariatePoly};
use crate::program::{Builder, KinematicProgram, Step};
use crate::trigpoly::{choose_radii_seeded, eval_trig, expand, Disc, Phase, RadiiChoice, TrigSum, DEFAULT_SEED};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;


/// Largest tolerated absolute rounding of the terminal x-coordinate.
const PRECISION_LIMIT: f64 = 1e-3;

/// The constraints that only hold on the curve: p_L linearised onto the
/// line x = −A00 and pC tethered into the disc. Evaluated with the same
/// drivers, valid only where f(pC) = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Closure {
    pub fw: Framework,
    pub program: KinematicProgram,
    /// x-coordinate of the line p_L is held on.
    pub line_x: f64,
}

/// Angle joints on rays from the origin O', created on demand.
struct Angles {
    o: JointId,
    x_ref: JointId,
    /// Radii of the reference and mirror joints fed to reversors. They scale
    /// with the arms: positions are absolute and O' lies far from zero, so
    /// short rays would lose angular precision.
    ref_len: f64,
    mirror_len: f64,
    theta: Vec<JointId>,
    phi: Vec<JointId>,
    terms: BTreeMap<(u32, i32), JointId>,
}

impl Angles {
    /// k-th multiple of the angle of `list[1]`, by reversors:
    /// 2·(k−1)α − (k−2)α = kα.
    fn multiple(&mut self, b: &mut Builder, of_theta: bool, k: usize) -> Result<JointId> {
        let (o, x_ref, ra, rb) = (self.o, self.x_ref, self.ref_len, self.mirror_len);
        let list = if of_theta { &mut self.theta } else { &mut self.phi };
        while list.len() <= k {
            let next = list.len();
            let refj = if next == 2 { x_ref } else { b.on_ray(o, list[next - 2], ra)? };
            let mirror = b.on_ray(o, list[next - 1], rb)?;
            let e = reversor(b, o, refj, mirror, ra, rb, None)?;
            list.push(e);
        }
        Ok(list[k])
    }

    /// Joint on the ray at angle rθ + sφ.
    fn get(&mut self, b: &mut Builder, r: u32, s: i32) -> Result<JointId> {
        if let Some(j) = self.terms.get(&(r, s)) {
            return Ok(*j);
        }
        let j = match (r, s) {
            (r, 0) => self.multiple(b, true, r as usize)?,
            (0, s) => self.multiple(b, false, s as usize)?,
            (r, s) if s > 0 => {
                let small = self.multiple(b, false, s as usize)?;
                let big = self.multiple(b, true, r as usize)?;
                multiplicator(b, self.o, small, big, self.x_ref, self.ref_len, self.mirror_len)?
            }
            (r, s) => {
                // 2·rθ − (rθ + |s|φ)
                let sum = self.get(b, r, -s)?;
                let big = self.multiple(b, true, r as usize)?;
                let refj = b.on_ray(self.o, sum, self.ref_len)?;
                let mirror = b.on_ray(self.o, big, self.mirror_len)?;
                reversor(b, self.o, refj, mirror, self.ref_len, self.mirror_len, None)?
            }
        };
        self.terms.insert((r, s), j);
        Ok(j)
    }
}

/// Joint at A·e^{i(angle of j + ψ)} from o, rigidly attached to the ray.
fn term_vector(b: &mut Builder, o: JointId, j: JointId, amp: f64, phase: Phase) -> Result<JointId> {
    let len = b.home(o).dist(b.home(j));
    let k = amp / len;
    match phase {
        Phase::Zero => b.on_ray(o, j, amp),
        Phase::Half => b.rigid(o, j, 0.0, k),
        Phase::Pi => b.rigid(o, j, -k, 0.0),
        Phase::ThreeHalves => b.rigid(o, j, 0.0, -k),
    }
}

struct Plan<'a> {
    radii: &'a RadiiChoice,
    trig: &'a TrigSum,
}

/// Builds the driven linkage on `rows`; with `closure`, also the
/// on-curve constraints.
fn build(plan: &Plan, rows: Vec<Vec<f64>>, closure: bool) -> Result<(Framework, KinematicProgram)> {
    let rc = plan.radii;
    let mut b = Builder::new(rows, vec![]);
    let o = b.pin(rc.origin);
    let (ref_len, mirror_len) = (rc.a, 0.5 * rc.a);
    let x_ref = b.pin(rc.origin + Vec2::new(ref_len, 0.0));
    let arm_a = b.step(|j| Step::DrivePolar { j, center: rc.origin, radius: rc.a, index: 0 })?;
    b.bar(o, arm_a)?;
    let arm_b = b.step(|j| Step::DrivePolar { j, center: rc.origin, radius: rc.b, index: 1 })?;
    b.bar(o, arm_b)?;
    let pc = b.step(|j| Step::Translate { j, base: arm_a, from: o, to: arm_b })?;
    b.bar(arm_a, pc)?;
    b.bar(arm_b, pc)?;
    b.brace(o, arm_a, pc, arm_b)?;

    let mut angles = Angles { o, x_ref, ref_len, mirror_len, theta: vec![x_ref, arm_a], phi: vec![x_ref, arm_b], terms: BTreeMap::new() };
    let total: f64 = plan.trig.terms.iter().map(|t| t.amp).sum();
    let mut s = b.fixed(Vec2::new(0.0, rc.origin.y - total - 1.0));
    b.label("G", s);
    for t in &plan.trig.terms {
        let j = angles.get(&mut b, t.r, t.s)?;
        let v = term_vector(&mut b, o, j, t.amp, t.phase)?;
        s = translator(&mut b, o, v, s)?;
    }
    let pl = s;
    b.label("p1", o);
    b.label("p2", x_ref);
    b.label("arm_a", arm_a);
    b.label("arm_b", arm_b);
    b.label("pC", pc);
    b.label("pL", pl);
    if closure {
        let line = Vec2::new(-plan.trig.a00, 0.0);
        if b.is_ground(pl) {
            return Err(Error::Geometry("terminal joint is motionless; nothing to linearise".into()));
        }
        lineariser_fixed(&mut b, line, Vec2::new(0.0, 1.0), &[pl])?;
        let (at, arm) = disc_anchor(&b, pc, &rc.disc);
        let (anchor, t) = tether(&mut b, pc, at, arm)?;
        b.label("disc_anchor", anchor);
        b.label("disc_tether", t);
    }
    Ok(b.finish())
}

/// Tether anchor and arm keeping pC within the disc. When the sampled
/// traced points pass through the center, the anchor is moved off the
/// curve and the arms lengthened to cover the whole disc.
fn disc_anchor(b: &Builder, pc: JointId, disc: &Disc) -> (Vec2, f64) {
    let closest = |at: Vec2| b.track(pc).map(|p| p.dist(at)).fold(f64::INFINITY, f64::min);
    if closest(disc.center) > 1e-3 * disc.radius {
        return (disc.center, 0.5 * disc.radius);
    }
    let shift = 0.1 * disc.radius;
    let at = (0..8)
        .map(|k| disc.center + Vec2::polar(shift, PI * k as f64 / 4.0))
        .max_by(|a, b| closest(*a).total_cmp(&closest(*b)))
        .unwrap();
    (at, 0.5 * (disc.radius + shift))
}

/// Disc points on a polar grid (center first) mapped to driver angles.
fn grid_rows(rc: &RadiiChoice, rings: usize, spokes: usize) -> Result<Vec<Vec<f64>>> {
    rc.disc
        .grid(rings, spokes)
        .into_iter()
        .map(|p| rc.angles(p).map(|(t, f)| vec![t, f]))
        .collect()
}

/// Points of V(f) inside the disc, found by bisection along `spokes` radii.
pub fn curve_points(f: &BivariatePoly, disc: &Disc, spokes: usize) -> Vec<Vec2> {
    let mut out = Vec::new();
    let steps = 64;
    for k in 0..spokes {
        let u = Vec2::polar(1.0, 2.0 * PI * (k as f64 + 0.5) / spokes as f64);
        let at = |r: f64| disc.center + u * r;
        let val = |r: f64| {
            let p = at(r);
            f.eval(p.x, p.y)
        };
        let mut r0 = 0.0;
        let mut f0 = val(r0);
        for i in 1..=steps {
            let r1 = disc.radius * i as f64 / steps as f64;
            let f1 = val(r1);
            if f0 == 0.0 {
                out.push(at(r0));
            } else if f0.signum() != f1.signum() && f1 != 0.0 {
                let (mut lo, mut hi, mut flo) = (r0, r1, f0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let fm = val(mid);
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                out.push(at(0.5 * (lo + hi)));
            }
            r0 = r1;
            f0 = f1;
        }
    }
    out
}

/// Compiles an algebraic curve restricted to a disc in the open first
/// quadrant. The returned linkage is driven by (θ, φ); its joint p_L has
/// x-coordinate F(θ, φ) − A00 = f(pC) − A00, so p_L meets the line
/// x = −A00 exactly when pC lies on the curve.
pub fn compile_algebraic_trace(f: &BivariatePoly, disc: &Disc) -> Result<CompiledLinkage> {
    compile_algebraic_trace_seeded(f, disc, DEFAULT_SEED)
}

/// [`compile_algebraic_trace`] with the radius certification seeded by `seed`.
pub fn compile_algebraic_trace_seeded(f: &BivariatePoly, disc: &Disc, seed: u64) -> Result<CompiledLinkage> {
    let n = f.degree();
    let radii = choose_radii_seeded(n.max(1), disc, seed)?;
    let shifted = f.translate(&rational(radii.origin.x), &rational(radii.origin.y));
    let trig = expand(&shifted, radii.a, radii.b);
    let total: f64 = trig.terms.iter().map(|t| t.amp).sum::<f64>() + trig.a00.abs();
    if total * f64::EPSILON > PRECISION_LIMIT {
        return Err(Error::Precondition(format!(
            "cosine amplitudes sum to {total:e}; rounding at that scale ({:e}) swamps the trace",
            total * f64::EPSILON
        )));
    }
    let plan = Plan { radii: &radii, trig: &trig };
    let rows = grid_rows(&radii, 4, 16)?;
    let (fw, program) = build(&plan, rows.clone(), false)?;
    let report = check_consistency(&fw)?;
    if !report.pass {
        return Err(Error::Structural(format!("compiled framework is inconsistent: {:?}", report.failures)));
    }
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); 2];
    for p in radii.disc.grid(100, 100) {
        let (t, ph) = radii.angles(p)?;
        ranges[0] = (ranges[0].0.min(t), ranges[0].1.max(t));
        ranges[1] = (ranges[1].0.min(ph), ranges[1].1.max(ph));
    }
    let on_curve = curve_points(f, disc, 32);
    let closure = if on_curve.is_empty() || trig.terms.is_empty() {
        None
    } else {
        let mut rows = vec![rows[0].clone()];
        rows[0] = {
            let (t, ph) = radii.angles(on_curve[0])?;
            vec![t, ph]
        };
        for p in &on_curve {
            let (t, ph) = radii.angles(*p)?;
            rows.push(vec![t, ph]);
        }
        let (cfw, cprog) = build(&plan, rows, true)?;
        Some(Closure { fw: cfw, program: cprog, line_x: -trig.a00 })
    };
    Ok(CompiledLinkage {
        fw,
        program,
        normalization: Normalization::IDENTITY,
        a00: Some(trig.a00),
        driver: DriverInfo { role: "arm_a,arm_b".into(), ranges },
        target: Target::Algebraic { f: f.to_string(), radii: radii.clone(), trig: trig.clone() },
        closure,
    })
}

fn algebraic_parts(cl: &CompiledLinkage) -> Result<(BivariatePoly, &TrigSum, &RadiiChoice)> {
    match &cl.target {
        Target::Algebraic { f, radii, trig } => Ok((BivariatePoly::parse(f)?, trig, radii)),
        _ => Err(Error::Argument("linkage was not compiled from an algebraic curve".into())),
    }
}

/// Largest |(x_L + A00) − f(pC)| over the samples of a path.
pub fn algebraic_consistency(cl: &CompiledLinkage, path: &MotionPath) -> Result<f64> {
    let (f, _, _) = algebraic_parts(cl)?;
    let a00 = cl.a00.unwrap_or(0.0);
    let (pl, pc) = (cl.role("pL")?, cl.role("pC")?);
    if path.samples.is_empty() {
        return Err(Error::Argument("motion path has no samples".into()));
    }
    Ok(path
        .samples
        .iter()
        .map(|m| {
            let c = m.pos[pc.0];
            (m.pos[pl.0].x + a00 - f.eval(c.x, c.y)).abs()
        })
        .fold(0.0, f64::max))
}

/// The three independently computed values at one driver pair:
/// (x_L + A00, F(θ, φ), f(pC)).
pub fn pipeline_values(cl: &CompiledLinkage, theta: f64, phi: f64) -> Result<(f64, f64, f64)> {
    let (f, trig, _) = algebraic_parts(cl)?;
    let pos = cl.program.eval_driven(&[theta, phi])?;
    let pc = pos[cl.role("pC")?.0];
    Ok((
        pos[cl.role("pL")?.0].x + cl.a00.unwrap_or(0.0),
        eval_trig(trig, theta, phi),
        f.eval(pc.x, pc.y),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSetReport {
    pub samples: usize,
    pub agreements: usize,
    pub curve_hits: usize,
    pub line_hits: usize,
    pub report: VerificationReport,
}

/// Two-sided membership check at `samples` driver pairs: half drawn
/// uniformly from the disc, half from points of V(f) found by bisection.
/// pC ∈ V(f) (|f| ≤ tol_curve) must coincide with p_L on the line
/// (|x_L + A00| ≤ tol_line).
pub fn trace_set_check(
    cl: &CompiledLinkage,
    f: &BivariatePoly,
    samples: usize,
    tol_curve: f64,
    tol_line: f64,
    seed: u64,
) -> Result<TraceSetReport> {
    let (_, _, radii) = algebraic_parts(cl)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on_curve = curve_points(f, &radii.disc, samples.div_ceil(2 * 64).max(8) * 4);
    let mut pts = radii.disc.random(samples - samples.min(on_curve.len()).min(samples / 2), &mut rng);
    pts.extend(on_curve.iter().take(samples / 2));
    let (pl, pc) = (cl.role("pL")?, cl.role("pC")?);
    let a00 = cl.a00.unwrap_or(0.0);
    let mut out = TraceSetReport {
        samples: pts.len(),
        agreements: 0,
        curve_hits: 0,
        line_hits: 0,
        report: VerificationReport { pass: true, ..Default::default() },
    };
    let mut gap: f64 = 0.0;
    for p in pts {
        let (t, ph) = radii.angles(p)?;
        let pos = cl.program.eval_driven(&[t, ph])?;
        let c = pos[pc.0];
        let fv = f.eval(c.x, c.y);
        let line = pos[pl.0].x + a00;
        gap = gap.max((line - fv).abs());
        let on_c = fv.abs() <= tol_curve;
        let on_l = line.abs() <= tol_line;
        out.curve_hits += on_c as usize;
        out.line_hits += on_l as usize;
        out.agreements += (on_c == on_l) as usize;
    }
    out.report.max_trace_error = Some(gap);
    if out.agreements != out.samples {
        let miss = out.samples - out.agreements;
        out.report.fail(format!("membership: {miss} of {} samples disagree", out.samples));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> (BivariatePoly, Disc) {
        (
            BivariatePoly::parse("x^2 + y^2 - 0.6").unwrap(),
            Disc { center: Vec2::new(0.5, 0.5), radius: 0.2 },
        )
    }

    #[test]
    fn circle_pipeline_agrees() {
        let (f, disc) = circle();
        let cl = compile_algebraic_trace(&f, &disc).unwrap();
        let Target::Algebraic { radii, .. } = &cl.target else { panic!() };
        for p in disc.grid(5, 12) {
            let (t, ph) = radii.angles(p).unwrap();
            let (xl, big_f, fv) = pipeline_values(&cl, t, ph).unwrap();
            assert!((xl - big_f).abs() < 1e-8, "{xl} {big_f}");
            assert!((big_f - fv).abs() < 1e-8, "{big_f} {fv}");
        }
        let closure = cl.closure.as_ref().unwrap();
        let rep = check_consistency(&closure.fw).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn tether_survives_curve_through_center() {
        let f = BivariatePoly::parse("x^2 + y^2 - 0.5").unwrap();
        let disc = Disc { center: Vec2::new(0.5, 0.5), radius: 0.2 };
        let cl = compile_algebraic_trace(&f, &disc).unwrap();
        assert!(check_consistency(&cl.closure.unwrap().fw).unwrap().pass);
    }

    #[test]
    fn constant_never_meets_line() {
        let f = BivariatePoly::parse("3").unwrap();
        let disc = Disc { center: Vec2::new(0.5, 0.5), radius: 0.1 };
        let cl = compile_algebraic_trace(&f, &disc).unwrap();
        assert!(cl.closure.is_none());
        let r = trace_set_check(&cl, &f, 200, 1e-8, 1e-8, 1).unwrap();
        assert_eq!(r.line_hits, 0);
        assert!(r.report.pass);
    }
}
