//! Coefficient chains: powers of the curve parameter on stacked multiplier
//! frames, scaled copies, and running sums carried by translators.

use crate::error::Result;
use crate::framework::JointId;
use crate::gadgets::parts::{fixed_rotator, multiplier, translator, Frame};
use crate::geom::Vec2;
use crate::program::Builder;
use std::f64::consts::FRAC_PI_2;

/// Where the power frames go: frame k sits `spacing·(k−1)` below `anchor`,
/// and its rotated twin for vertical outputs `side` to the left.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub anchor: Vec2,
    pub spacing: f64,
    pub side: f64,
}

impl Layout {
    fn origin(&self, k: usize) -> Vec2 {
        self.anchor + Vec2::new(0.0, -self.spacing * (k as f64 - 1.0))
    }
}

pub struct Chains {
    layout: Layout,
    /// `frames[k-1]` hosts the k-th power on its x-axis.
    frames: Vec<Frame>,
    powers: Vec<JointId>,
    /// The parameter on the y-axis of each frame.
    vs: Vec<JointId>,
    /// Rotated frame and the reversed power on its y-axis, per k.
    vframes: Vec<Option<(Frame, JointId)>>,
}

impl Chains {
    /// `var` must sit on the x-axis of `frame` at signed coordinate equal to
    /// the curve parameter, and be held there already.
    pub fn new(b: &mut Builder, frame: Frame, var: JointId, layout: Layout) -> Result<Chains> {
        let v = fixed_rotator(b, frame.o, var, FRAC_PI_2, true)?;
        Ok(Chains {
            layout,
            frames: vec![frame],
            powers: vec![var],
            vs: vec![v],
            vframes: vec![None],
        })
    }

    /// Frame and joint carrying the k-th power (k ≥ 1).
    pub fn power(&mut self, b: &mut Builder, k: usize) -> Result<(Frame, JointId)> {
        while self.powers.len() < k {
            let next = self.powers.len() + 1;
            let prev = *self.frames.last().unwrap();
            let f = Frame::new(b, self.layout.origin(next), 0.0);
            let a = translator(b, prev.o, *self.powers.last().unwrap(), f.o)?;
            let v = translator(b, prev.o, *self.vs.last().unwrap(), f.o)?;
            let (c, _) = multiplier(b, &f, a, v)?;
            self.frames.push(f);
            self.powers.push(c);
            self.vs.push(v);
            self.vframes.push(None);
        }
        Ok((self.frames[k - 1], self.powers[k - 1]))
    }

    fn vframe(&mut self, b: &mut Builder, k: usize) -> Result<(Frame, JointId)> {
        let (f, p) = self.power(b, k)?;
        if let Some(v) = self.vframes[k - 1] {
            return Ok(v);
        }
        let origin = b.home(f.o) + Vec2::new(-self.layout.side, 0.0);
        let g = Frame::new(b, origin, FRAC_PI_2);
        let rev = translator(b, p, f.o, g.o)?;
        self.vframes[k - 1] = Some((g, rev));
        Ok((g, rev))
    }

    /// Running sum c₀ + c₁t + … carried horizontally from `start`; returns
    /// the joint at start + (value, 0). Partial sums are labelled
    /// `{tag}{k}`.
    pub fn horizontal(&mut self, b: &mut Builder, coeffs: &[f64], start: JointId, tag: &str) -> Result<JointId> {
        let mut s = shifted(b, start, Vec2::new(coeffs.first().copied().unwrap_or(0.0), 0.0));
        b.label(&format!("{tag}0"), s);
        for (k, &c) in coeffs.iter().enumerate().skip(1) {
            if c == 0.0 {
                continue;
            }
            let (f, p) = self.power(b, k)?;
            let bc = if c.abs() == 1.0 {
                f.y
            } else {
                b.fixed(b.home(f.o) + Vec2::new(0.0, c.abs()))
            };
            let (term, _) = multiplier(b, &f, p, bc)?;
            s = if c > 0.0 {
                translator(b, f.o, term, s)?
            } else {
                translator(b, term, f.o, s)?
            };
            b.label(&format!("{tag}{k}"), s);
        }
        Ok(s)
    }

    /// As [`Chains::horizontal`], but the sum is carried vertically.
    pub fn vertical(&mut self, b: &mut Builder, coeffs: &[f64], start: JointId, tag: &str) -> Result<JointId> {
        let mut s = shifted(b, start, Vec2::new(0.0, coeffs.first().copied().unwrap_or(0.0)));
        b.label(&format!("{tag}0"), s);
        for (k, &c) in coeffs.iter().enumerate().skip(1) {
            if c == 0.0 {
                continue;
            }
            let (g, rev) = self.vframe(b, k)?;
            let ac = if c.abs() == 1.0 {
                g.x
            } else {
                b.fixed(b.home(g.o) + Vec2::new(0.0, c.abs()))
            };
            let (term, _) = multiplier(b, &g, ac, rev)?;
            s = if c > 0.0 {
                translator(b, g.o, term, s)?
            } else {
                translator(b, term, g.o, s)?
            };
            b.label(&format!("{tag}{k}"), s);
        }
        Ok(s)
    }
}

fn shifted(b: &mut Builder, start: JointId, by: Vec2) -> JointId {
    if by == Vec2::ZERO {
        start
    } else {
        b.fixed(b.home(start) + by)
    }
}
