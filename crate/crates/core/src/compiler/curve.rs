//! Slider-driven compilation of polynomial and rational curves.

use super::chain::{Chains, Layout};
use super::{CompiledLinkage, DriverInfo, Normalization, Target};
use crate::error::{Error, Result};
use crate::framework::{check_consistency, JointId};
use crate::gadgets::parts::{colinear, divider, fixed_rotator, lineariser_fixed, multiplier, segment_tether, translator, Frame};
use crate::geom::Vec2;
use crate::poly::{Poly1, PolyCurve, RationalCurve};
use crate::program::{Builder, Step};
use std::f64::consts::FRAC_PI_2;

/// Power basis the coefficient chains are built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Basis {
    /// Powers of t.
    #[default]
    Monomial,
    /// Powers of u = 2t − 1, which keeps coefficients small for high degree.
    Centered,
}

/// Samples used to size the normalization and to check the window.
const WINDOW_SAMPLES: usize = 4097;
/// Driver rows the builder evaluates every construction on.
const BUILD_ROWS: usize = 129;

const SPACING: f64 = 3.0;

pub(crate) fn param_grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| i as f64 / (n - 1) as f64)
}

pub(crate) fn build_rows() -> Vec<Vec<f64>> {
    std::iter::once(0.0).chain(param_grid(BUILD_ROWS)).map(|s| vec![s]).collect()
}

/// The fixed triangle, the slider and its frame.
pub(crate) struct Base {
    pub p1: JointId,
    pub p2: JointId,
    pub p3: JointId,
    pub pl: JointId,
    pub tframe: Frame,
}

/// How a base gets its slider.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Slider {
    /// Driven directly, linearised and tethered to its travel.
    Driven,
    /// A translated copy of the slider of another base: (p1, pL) there.
    CopyOf(JointId, JointId),
}

/// Places p1, p2 at `origin` and `origin + (1, 0)`, p3 above p1 and the
/// slider pL at p2 + (s, 0). p1 and p2 are pins when `pinned`, otherwise
/// rigid extensions of the ground.
pub(crate) fn base(b: &mut Builder, origin: Vec2, pinned: bool, slider: Slider) -> Result<Base> {
    let (p1, p2) = if pinned {
        (b.pin(origin), b.pin(origin + Vec2::new(1.0, 0.0)))
    } else {
        (b.fixed(origin), b.fixed(origin + Vec2::new(1.0, 0.0)))
    };
    let p3 = b.fixed(origin + Vec2::new(0.0, 1.0));
    let at = origin + Vec2::new(1.0, 0.0);
    let pl = match slider {
        Slider::Driven => {
            let pl = b.step(|j| Step::DriveLinear { j, origin: at, dir: Vec2::new(1.0, 0.0), index: 0 })?;
            lineariser_fixed(b, at, Vec2::new(1.0, 0.0), &[pl])?;
            segment_tether(b, pl, at + Vec2::new(0.5, 0.0), Vec2::new(0.0, -1.0), 0.55, 0.25)?;
            pl
        }
        Slider::CopyOf(q1, ql) => translator(b, q1, ql, p1)?,
    };
    let tframe = Frame {
        o: p2,
        x: b.fixed(origin + Vec2::new(2.0, 0.0)),
        y: b.fixed(origin + Vec2::new(1.0, 1.0)),
    };
    Ok(Base { p1, p2, p3, pl, tframe })
}

/// Power chains over the chosen basis, driven by the slider.
pub(crate) fn chains_for(b: &mut Builder, base: &Base, basis: Basis) -> Result<Chains> {
    match basis {
        Basis::Monomial => {
            let o = b.home(base.tframe.o);
            Chains::new(b, base.tframe, base.pl, Layout { anchor: o, spacing: SPACING, side: SPACING })
        }
        Basis::Centered => {
            let o = b.home(base.tframe.o) + Vec2::new(0.5, 0.0);
            let f = Frame::new(b, o, 0.0);
            let two = b.fixed(o + Vec2::new(0.0, 2.0));
            let (u, _) = multiplier(b, &f, base.pl, two)?;
            Chains::new(b, f, u, Layout { anchor: o, spacing: SPACING, side: SPACING })
        }
    }
}

pub(crate) fn coefficients(p: &Poly1, basis: Basis) -> Vec<f64> {
    match basis {
        Basis::Monomial => p.0.clone(),
        Basis::Centered => p.to_centered(),
    }
}

/// Combines the coordinate outputs (x, 0) and (0, y) into pC = (x, y)
/// through the virtual joints X' = (1, y) and Y' = (x, 1).
pub(crate) fn assemble(b: &mut Builder, base: &Base, xout: JointId, yout: JointId) -> Result<JointId> {
    let xp = translator(b, base.p1, base.p2, yout)?;
    let yp = translator(b, base.p1, base.p3, xout)?;
    let pc = b.step(|j| Step::Intersect { j, p1: yout, d1: (yout, xp), p2: xout, d2: (xout, yp) })?;
    colinear(b, yout, xp, &[pc])?;
    colinear(b, xout, yp, &[pc])?;
    b.label("X'", xp);
    b.label("Y'", yp);
    Ok(pc)
}

pub(crate) fn finish(mut b: Builder, base: &Base, pc: JointId, normalization: Normalization, target: Target) -> Result<CompiledLinkage> {
    b.label("p1", base.p1);
    b.label("p2", base.p2);
    b.label("p3", base.p3);
    b.label("pL", base.pl);
    b.label("pC", pc);
    let (fw, program) = b.finish();
    let report = check_consistency(&fw)?;
    if !report.pass {
        return Err(Error::Structural(format!("compiled framework is inconsistent: {:?}", report.failures)));
    }
    Ok(CompiledLinkage {
        fw,
        program,
        normalization,
        a00: None,
        driver: DriverInfo { role: "pL".into(), ranges: vec![(0.0, 1.0)] },
        target,
        closure: None,
    })
}

pub(crate) fn window(pts: &[Vec2]) -> Result<Normalization> {
    let norm = Normalization::fit(pts)?;
    for p in pts {
        let q = norm.apply(*p);
        if !(q.x > 0.0 && q.x < 1.0 && q.y > 0.0 && q.y < 1.0) {
            return Err(Error::Range(format!("normalized curve point ({}, {}) leaves the unit window", q.x, q.y)));
        }
    }
    Ok(norm)
}

pub fn compile_poly_curve(c: &PolyCurve) -> Result<CompiledLinkage> {
    compile_poly_curve_with(c, Basis::Monomial)
}

/// Compiles γ(s) = (x(s), y(s)), s ∈ [0, 1], into a linkage whose joint pC
/// traces the normalized curve while the slider pL moves along (1 + s, 0).
pub fn compile_poly_curve_with(c: &PolyCurve, basis: Basis) -> Result<CompiledLinkage> {
    let samples: Vec<Vec2> = param_grid(WINDOW_SAMPLES).map(|t| c.eval(t)).collect();
    let norm = window(&samples)?;
    let nx = c.x.affine(norm.scale, norm.offset.x);
    let ny = c.y.affine(norm.scale, norm.offset.y);
    let mut b = Builder::new(build_rows(), vec![]);
    let base = base(&mut b, Vec2::ZERO, true, Slider::Driven)?;
    let mut chains = chains_for(&mut b, &base, basis)?;
    let xout = chains.horizontal(&mut b, &coefficients(&nx, basis), base.p1, "x_sum")?;
    let yout = chains.vertical(&mut b, &coefficients(&ny, basis), base.p1, "y_sum")?;
    let pc = assemble(&mut b, &base, xout, yout)?;
    finish(b, &base, pc, norm, Target::Poly { curve: c.clone() })
}

/// Sign of a denominator that must not vanish on [0, 1].
fn den_sign(name: &str, d: &Poly1) -> Result<f64> {
    let vals: Vec<f64> = param_grid(WINDOW_SAMPLES).map(|t| d.eval(t)).collect();
    let big = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pos = vals.iter().all(|v| *v > 1e-9 * big);
    let neg = vals.iter().all(|v| *v < -1e-9 * big);
    match (pos, neg) {
        (true, _) => Ok(1.0),
        (_, true) => Ok(-1.0),
        _ => Err(Error::Range(format!("denominator of {name} vanishes or changes sign on [0, 1]"))),
    }
}

/// Quotient n/d carried onto the x-axis through p1 (or the y-axis when
/// `vertical`), using a divider frame at `at`.
fn quotient(
    b: &mut Builder,
    chains: &mut Chains,
    base: &Base,
    num: &Poly1,
    den: &Poly1,
    at: Vec2,
    vertical: bool,
    tag: &str,
) -> Result<JointId> {
    let h = Frame::new(b, at, 0.0);
    let n = chains.horizontal(b, &num.0, h.o, &format!("{tag}_num"))?;
    let d = chains.vertical(b, &den.0, h.o, &format!("{tag}_den"))?;
    let a = divider(b, &h, n, d)?;
    let a = if vertical { fixed_rotator(b, h.o, a, FRAC_PI_2, true)? } else { a };
    translator(b, h.o, a, base.p1)
}

/// As [`compile_poly_curve`], with divider gadgets realizing the
/// denominators.
pub fn compile_rational_curve(c: &RationalCurve) -> Result<CompiledLinkage> {
    let sx = den_sign("x", &c.x_den)?;
    let sy = den_sign("y", &c.y_den)?;
    let samples: Vec<Vec2> = param_grid(WINDOW_SAMPLES).map(|t| c.eval(t)).collect();
    let norm = window(&samples)?;
    let xd = c.x_den.scale(sx);
    let yd = c.y_den.scale(sy);
    let xn = c.x_num.scale(sx * norm.scale).add(&xd.scale(norm.offset.x));
    let yn = c.y_num.scale(sy * norm.scale).add(&yd.scale(norm.offset.y));
    let mut b = Builder::new(build_rows(), vec![]);
    let base = base(&mut b, Vec2::ZERO, true, Slider::Driven)?;
    let mut chains = chains_for(&mut b, &base, Basis::Monomial)?;
    let xout = quotient(&mut b, &mut chains, &base, &xn, &xd, Vec2::new(-6.0, 0.0), false, "x")?;
    let yout = quotient(&mut b, &mut chains, &base, &yn, &yd, Vec2::new(-10.0, 0.0), true, "y")?;
    let pc = assemble(&mut b, &base, xout, yout)?;
    finish(b, &base, pc, norm, Target::Rational { curve: c.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traced(cl: &CompiledLinkage, s: f64) -> Vec2 {
        let pos = cl.eval(&[s]).unwrap();
        cl.traced(&pos).unwrap()
    }

    #[test]
    fn vertical_segment() {
        let cl = compile_poly_curve(&PolyCurve::parse("1", "t").unwrap()).unwrap();
        let home = cl.fw.home_placement();
        assert_eq!(home[cl.role("p1").unwrap().0], Vec2::ZERO);
        assert_eq!(home[cl.role("pL").unwrap().0], Vec2::new(1.0, 0.0));
        assert!(traced(&cl, 0.3).dist(Vec2::new(1.0, 0.3)) < 1e-12);
    }

    #[test]
    fn cubic_midpoint() {
        let cl = compile_poly_curve(&PolyCurve::parse("1+t-t^2", "t^3").unwrap()).unwrap();
        assert!(traced(&cl, 0.5).dist(Vec2::new(1.25, 0.125)) < 1e-12);
        let pc = cl.eval(&[0.0]).unwrap()[cl.role("pC").unwrap().0];
        assert!(pc.dist(cl.fw.home_placement()[cl.role("pC").unwrap().0]) < 1e-15);
    }

    #[test]
    fn centered_basis_agrees() {
        let c = PolyCurve::parse("1+t-t^2", "t^3-2*t").unwrap();
        let a = compile_poly_curve(&c).unwrap();
        let b = compile_poly_curve_with(&c, Basis::Centered).unwrap();
        for s in [0.0, 0.2, 0.77, 1.0] {
            assert!(traced(&a, s).dist(traced(&b, s)) < 1e-10);
        }
    }

    #[test]
    fn rational_curve() {
        let c = RationalCurve {
            x_num: Poly1::new(vec![1.0]),
            x_den: Poly1::new(vec![1.0, 1.0]),
            y_num: Poly1::new(vec![0.0, 1.0]),
            y_den: Poly1::new(vec![1.0]),
        };
        let cl = compile_rational_curve(&c).unwrap();
        assert!(traced(&cl, 1.0).dist(Vec2::new(0.5, 1.0)) < 1e-10);
        let bad = RationalCurve { x_den: Poly1::new(vec![0.5, -1.0]), ..c };
        assert!(matches!(compile_rational_curve(&bad), Err(Error::Range(_))));
    }
}
