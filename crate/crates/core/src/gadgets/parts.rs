//! Constructions shared by the standalone gadgets and the compilers. Each
//! function appends joints, bars and placement steps to a [`Builder`] and
//! returns the joints the caller needs.

use crate::error::{Error, Result};
use crate::framework::JointId;
use crate::geom::Vec2;
use crate::program::{Branch, Builder, Length, Step};

/// Half-width of the band a unit Peaucellier cell (L = 2, r = 1, d = 1) can
/// reach along its line: sqrt((L + r)^2 - h^2) with h = 1.5.
pub const CELL_REACH: f64 = 2.598_076_211_353_316;
/// Fraction of the reach actually used, keeping the arms clear of full stretch.
const REACH_USE: f64 = 0.75;
const MIN_SCALE: f64 = 0.05;
/// Floor for bar lengths sized from sampled motion.
const MIN_ARM: f64 = 0.05;

/// One Peaucellier cell forcing `q` onto the line at distance 1.5λ from
/// `pivot` perpendicular to pivot→hub (|pivot hub| = λ).
pub fn peaucellier_cell(b: &mut Builder, pivot: JointId, hub: JointId, q: JointId, lam: f64) -> Result<JointId> {
    let k = 3.0 * lam * lam;
    let p = b.step(|j| Step::Inverse { j, center: pivot, q, k })?;
    let arm_a = b.elbow(pivot, q, 2.0 * lam, lam, Branch::Ccw)?;
    let arm_b = b.elbow(pivot, q, 2.0 * lam, lam, Branch::Cw)?;
    b.bar(arm_a, p)?;
    b.bar(arm_b, p)?;
    b.bar(hub, p)?;
    Ok(p)
}

fn cell_scale(width: f64) -> f64 {
    (width / (CELL_REACH * REACH_USE)).max(MIN_SCALE)
}

/// Keeps the moving joints `qs` on the fixed line through `point` with
/// direction `dir`, using motionless frames of at most three cells each.
pub fn lineariser_fixed(b: &mut Builder, point: Vec2, dir: Vec2, qs: &[JointId]) -> Result<()> {
    let u = dir
        .unit()
        .ok_or_else(|| Error::Geometry("lineariser with zero direction".into()))?;
    let n = u.perp();
    for chunk in qs.chunks(3) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &q in chunk {
            for p in b.track(q) {
                let off = (p - point).cross(u).abs();
                if off > 1e-7 * (p - point).norm().max(1.0) {
                    return Err(Error::Geometry(format!(
                        "joint {q} is {off:e} off the line it is linearised to"
                    )));
                }
                let t = (p - point).dot(u);
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        let foot = point + u * (0.5 * (lo + hi));
        let lam = cell_scale(0.5 * (hi - lo));
        let pivot = b.fixed(foot - n * (1.5 * lam));
        let hub = b.fixed(foot - n * (0.5 * lam));
        for &q in chunk {
            peaucellier_cell(b, pivot, hub, q, lam)?;
        }
    }
    Ok(())
}

/// Keeps each joint of `others` colinear with the moving pair
/// (dir_a, dir_b) through floating three-fold linearisers.
pub fn colinear(b: &mut Builder, dir_a: JointId, dir_b: JointId, others: &[JointId]) -> Result<()> {
    for &o in others {
        let designated = vec![dir_a, dir_b, o];
        let mut width: f64 = 0.0;
        for r in 0..b.n_rows() {
            let a = b.pos(r, dir_a);
            let u = (b.pos(r, dir_b) - a)
                .unit()
                .ok_or_else(|| Error::Geometry(format!("colinear pair {dir_a}-{dir_b} coincides")))?;
            let ts: Vec<f64> = designated.iter().map(|q| (b.pos(r, *q) - a).dot(u)).collect();
            let mean = ts.iter().sum::<f64>() / 3.0;
            for t in ts {
                width = width.max((t - mean).abs());
            }
        }
        let lam = cell_scale(width);
        let (pivot, hub) = b.lin_frame(dir_a, dir_b, designated.clone(), 1.5 * lam, lam)?;
        b.bar(pivot, hub)?;
        for q in designated {
            peaucellier_cell(b, pivot, hub, q, lam)?;
        }
    }
    Ok(())
}

/// Bounds the distance between `q` and a new motionless anchor by two equal
/// bars of length `arm`; the anchor sits at `at`.
pub fn tether(b: &mut Builder, q: JointId, at: Vec2, arm: f64) -> Result<(JointId, JointId)> {
    let anchor = b.fixed(at);
    let t = b.elbow_auto(anchor, q, arm, arm)?;
    Ok((anchor, t))
}

/// Tether for a joint sliding on a line: the anchor is offset by `delta`
/// along `normal` from `mid`, and the arms allow a half-travel of `half`.
pub fn segment_tether(b: &mut Builder, q: JointId, mid: Vec2, normal: Vec2, half: f64, delta: f64) -> Result<JointId> {
    let at = mid + normal.unit().unwrap_or(Vec2::new(0.0, -1.0)) * delta;
    let arm = 0.5 * (delta * delta + half * half).sqrt();
    Ok(tether(b, q, at, arm)?.1)
}

fn arm_for(b: &Builder, p: JointId, q: JointId) -> f64 {
    (b.max_dist(p, q) / 1.6).max(MIN_ARM)
}

/// Separation translator: returns B' with A'B' = AB as vectors. Four
/// prismatically braced parallelograms carry the vector from A to A'.
pub fn translator(b: &mut Builder, a: JointId, bb: JointId, a2: JointId) -> Result<JointId> {
    let l = arm_for(b, a, bb);
    let m = arm_for(b, a, a2);
    translator_with(b, a, bb, a2, l, m)
}

/// Translator with explicit arm lengths: |AX| = l carries AB (so |AB| may
/// range over [0, 2l]) and m carries AA'.
pub fn translator_with(b: &mut Builder, a: JointId, bb: JointId, a2: JointId, l: f64, m: f64) -> Result<JointId> {
    let x = b.elbow_auto(a, bb, l, l)?;
    let mm = b.elbow_auto(a, a2, m, m)?;
    let x1 = b.step(|j| Step::Translate { j, base: mm, from: a, to: x })?;
    b.bar(mm, x1)?;
    b.bar(x, x1)?;
    let x2 = b.step(|j| Step::Translate { j, base: a2, from: a, to: x })?;
    b.bar(a2, x2)?;
    b.bar(x1, x2)?;
    let b1 = b.step(|j| Step::Translate { j, base: x1, from: x, to: bb })?;
    b.bar(x1, b1)?;
    b.bar(bb, b1)?;
    let b2 = b.step(|j| Step::Translate { j, base: x2, from: x, to: bb })?;
    b.bar(x2, b2)?;
    b.bar(b1, b2)?;
    b.brace(a, mm, x1, x)?;
    b.brace(mm, a2, x2, x1)?;
    b.brace(x, x1, b1, bb)?;
    b.brace(x1, x2, b2, b1)?;
    Ok(b2)
}

/// Rotator about a moving or pinned pivot: returns a joint on the ray
/// pivot→handle at distance |pivot b_in|. When `b_out` is given it must
/// already be placed there and is constrained instead of created.
pub fn rotator(
    b: &mut Builder,
    pivot: JointId,
    b_in: JointId,
    handle: JointId,
    b_out: Option<JointId>,
    rho: f64,
) -> Result<JointId> {
    let c = b.step(|j| Step::Polar { j, origin: pivot, toward: b_in, len: Length::Const(rho) })?;
    b.bar(pivot, c)?;
    let c2 = b.step(|j| Step::Polar { j, origin: pivot, toward: handle, len: Length::Const(rho) })?;
    b.bar(pivot, c2)?;
    let d = b.step(|j| Step::Translate { j, base: c, from: pivot, to: c2 })?;
    b.bar(c, d)?;
    b.bar(c2, d)?;
    b.brace(pivot, c, d, c2)?;
    let l = 3.0 * b.max_dist(pivot, b_in) + MIN_ARM;
    let e = b.step(|j| Step::RayCircle { j, origin: pivot, toward: d, center: b_in, radius: l })?;
    b.bar(b_in, e)?;
    let out = match b_out {
        Some(o) => o,
        None => b.step(|j| Step::Polar {
            j,
            origin: pivot,
            toward: c2,
            len: Length::Dist(pivot, b_in),
        })?,
    };
    b.bar(e, out)?;
    colinear(b, pivot, c, &[b_in])?;
    colinear(b, pivot, d, &[e])?;
    let mut tied = vec![out];
    if handle != out {
        tied.push(handle);
    }
    colinear(b, pivot, c2, &tied)?;
    Ok(out)
}

/// Rotator by a constant angle about a motionless pivot. `b_in` must move
/// on a line through the pivot; it is linearised unless `b_in_held`.
pub fn fixed_rotator(b: &mut Builder, pivot: JointId, b_in: JointId, angle: f64, b_in_held: bool) -> Result<JointId> {
    let o = b.home(pivot);
    let reach = b.max_dist(pivot, b_in);
    let dir = b
        .track(b_in)
        .map(|p| p - o)
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .and_then(Vec2::unit)
        .ok_or_else(|| Error::Geometry("fixed rotator input never leaves the pivot".into()))?;
    let rho = reach.max(MIN_ARM);
    // The rhombus is motionless here, so only its far vertex is needed.
    let d = b.fixed(o + (dir + dir.rotate(angle)) * rho);
    let l = 3.0 * reach + MIN_ARM;
    let e = b.step(|j| Step::RayCircle { j, origin: pivot, toward: d, center: b_in, radius: l })?;
    b.bar(b_in, e)?;
    let out = b.step(|j| Step::RotateAbout { j, center: pivot, src: b_in, angle })?;
    b.bar(e, out)?;
    if !b_in_held {
        lineariser_fixed(b, o, dir, &[b_in])?;
    }
    lineariser_fixed(b, o, b.home(d) - o, &[e])?;
    lineariser_fixed(b, o, dir.rotate(angle), &[out])?;
    Ok(out)
}

/// A motionless coordinate frame: origin O, unit points X and Y.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub o: JointId,
    pub x: JointId,
    pub y: JointId,
}

impl Frame {
    pub fn new(b: &mut Builder, origin: Vec2, rot: f64) -> Frame {
        let o = b.fixed(origin);
        let ex = snapped(Vec2::polar(1.0, rot));
        let x = b.fixed(origin + ex);
        let y = b.fixed(origin + ex.perp());
        Frame { o, x, y }
    }

    pub fn pinned(b: &mut Builder, origin: Vec2) -> Frame {
        let o = b.pin(origin);
        let x = b.pin(origin + Vec2::new(1.0, 0.0));
        let y = b.fixed(origin + Vec2::new(0.0, 1.0));
        Frame { o, x, y }
    }

    fn axis(&self, b: &Builder, which: JointId) -> (Vec2, Vec2) {
        let o = b.home(self.o);
        (o, b.home(which) - o)
    }
}

/// Unit vector with rounding residue (as in sin π) cleared.
fn snapped(v: Vec2) -> Vec2 {
    let clean = |c: f64| if c.abs() < 1e-15 { 0.0 } else { c };
    Vec2::new(clean(v.x), clean(v.y))
}

/// Linearises the non-motionless joints among `qs` on a frame axis.
fn hold_on_axis(b: &mut Builder, frame: &Frame, axis: JointId, qs: &[JointId]) -> Result<()> {
    let moving: Vec<JointId> = qs.iter().copied().filter(|q| !b.is_ground(*q)).collect();
    if moving.is_empty() {
        return Ok(());
    }
    let (p, d) = frame.axis(b, axis);
    lineariser_fixed(b, p, d, &moving)
}

/// Separation multiplier: A on the frame x-axis at signed coordinate a,
/// B on the y-axis at b; returns C on the x-axis at a·b and the auxiliary
/// joint A' = B + A − Y.
pub fn multiplier(b: &mut Builder, frame: &Frame, a: JointId, bj: JointId) -> Result<(JointId, JointId)> {
    let a2 = translator(b, frame.y, a, bj)?;
    let c = b.step(|j| Step::Intersect { j, p1: frame.o, d1: (frame.o, frame.x), p2: bj, d2: (bj, a2) })?;
    hold_on_axis(b, frame, frame.x, &[a, c])?;
    hold_on_axis(b, frame, frame.y, &[bj])?;
    colinear(b, bj, a2, &[c])?;
    Ok((c, a2))
}

/// Separation divider: C on the x-axis at c, B on the y-axis at b ≠ 0;
/// returns A on the x-axis at c / b.
pub fn divider(b: &mut Builder, frame: &Frame, c: JointId, bj: JointId) -> Result<JointId> {
    let a = b.step(|j| Step::Intersect { j, p1: frame.y, d1: (bj, c), p2: frame.o, d2: (frame.o, frame.x) })?;
    let a2 = translator(b, frame.y, a, bj)?;
    hold_on_axis(b, frame, frame.x, &[a, c])?;
    hold_on_axis(b, frame, frame.y, &[bj])?;
    colinear(b, bj, a2, &[c])?;
    Ok(a)
}

/// Kempe reversor about `o`. `reference` lies at distance `ra` from o and
/// `mirror` at `rb` < ra. Returns the output joint at distance rb²/ra whose
/// angle is 2·angle(mirror) − angle(reference). When `output` is given it
/// must already sit there and is constrained instead of created.
pub fn reversor(
    b: &mut Builder,
    o: JointId,
    reference: JointId,
    mirror: JointId,
    ra: f64,
    rb: f64,
    output: Option<JointId>,
) -> Result<JointId> {
    let apex = b.step(|j| Step::AntiElbow { j, p: reference, q: mirror, rp: rb, rq: ra, avoid: (o, reference, mirror) })?;
    b.bar(apex, reference)?;
    b.bar(apex, mirror)?;
    let d = b.rigid(mirror, apex, rb * rb / (ra * ra), 0.0)?;
    let short = rb * rb / ra;
    let e = match output {
        Some(e) => e,
        None => {
            let e = b.step(|j| Step::AntiElbow { j, p: d, q: o, rp: rb, rq: short, avoid: (mirror, o, d) })?;
            b.bar(o, e)?;
            e
        }
    };
    b.bar(d, e)?;
    Ok(e)
}

/// Kempe multiplicator: rays o→ra and o→rb at angles α and β; `x_ref` is a
/// motionless joint at distance `ra_len` on the zero-angle ray. Returns the
/// joint at distance rb_len²/ra_len and angle α + β.
pub fn multiplicator(
    b: &mut Builder,
    o: JointId,
    ray_a: JointId,
    ray_b: JointId,
    x_ref: JointId,
    ra_len: f64,
    rb_len: f64,
) -> Result<JointId> {
    let a1 = b.on_ray(o, ray_a, ra_len)?;
    let mirror = b.step(|j| Step::Bisector { j, origin: o, p: a1, q: ray_b, radius: rb_len })?;
    b.bar(o, mirror)?;
    let e1 = b.on_ray(o, ray_b, rb_len * rb_len / ra_len)?;
    reversor(b, o, a1, mirror, ra_len, rb_len, Some(e1))?;
    reversor(b, o, x_ref, mirror, ra_len, rb_len, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn rows(vals: &[f64]) -> Builder {
        Builder::new(vals.iter().map(|v| vec![*v]).collect(), Vec::<BTreeMap<String, Vec2>>::new())
    }

    #[test]
    fn translator_copies_vector() {
        let mut b = rows(&[0.3, 0.0, 0.7, 1.0]);
        let a = b.pin(Vec2::ZERO);
        let bb = b
            .step(|j| Step::DriveLinear { j, origin: Vec2::ZERO, dir: Vec2::new(1.0, 0.0), index: 0 })
            .unwrap();
        let a2 = b.pin(Vec2::new(0.5, -2.0));
        let out = translator(&mut b, a, bb, a2).unwrap();
        for r in 0..b.n_rows() {
            let want = b.pos(r, a2) + b.pos(r, bb) - b.pos(r, a);
            assert!(b.pos(r, out).dist(want) < 1e-12);
        }
    }

    #[test]
    fn multiplier_and_divider() {
        let mut b = rows(&[0.5, 0.1, 0.9]);
        let f = Frame::pinned(&mut b, Vec2::ZERO);
        let a = b
            .step(|j| Step::DriveLinear { j, origin: Vec2::ZERO, dir: Vec2::new(1.0, 0.0), index: 0 })
            .unwrap();
        let bj = b.fixed(Vec2::new(0.0, 0.8));
        let (c, _) = multiplier(&mut b, &f, a, bj).unwrap();
        let back = divider(&mut b, &f, c, bj).unwrap();
        for r in 0..b.n_rows() {
            let av = b.pos(r, a).x;
            assert!((b.pos(r, c).x - 0.8 * av).abs() < 1e-12);
            assert!((b.pos(r, back).x - av).abs() < 1e-12);
        }
    }

    #[test]
    fn reversor_doubles() {
        let mut b = rows(&[0.2, 0.5, 1.0]);
        let o = b.pin(Vec2::ZERO);
        let a = b.pin(Vec2::new(2.0, 0.0));
        let c = b
            .step(|j| Step::DrivePolar { j, center: Vec2::ZERO, radius: 1.0, index: 0 })
            .unwrap();
        b.bar(o, c).unwrap();
        let e = reversor(&mut b, o, a, c, 2.0, 1.0, None).unwrap();
        for (r, g) in [0.2, 0.5, 1.0].iter().enumerate() {
            let p = b.pos(r, e);
            assert!((p.norm() - 0.5).abs() < 1e-12);
            assert!((p.angle() - 2.0 * g).abs() < 1e-12);
        }
    }
}
