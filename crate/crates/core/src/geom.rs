//! Plane vectors and the handful of constructions every gadget relies on.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn polar(r: f64, angle: f64) -> Self {
        Vec2::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counterclockwise quarter turn.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn unit(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Intersection points of circle(p, rp) and circle(q, rq), returned as
/// (foot, offset): the solutions are `foot ± offset`, with `foot + offset`
/// on the counterclockwise side of the chord p→q.
///
/// A slightly negative discriminant (within `slack`, relative to the radii)
/// is clamped to a tangency so fully stretched elbows stay defined.
pub fn circle_intersection(p: Vec2, rp: f64, q: Vec2, rq: f64) -> Option<(Vec2, Vec2)> {
    let d = q - p;
    let dd = d.norm2();
    if dd == 0.0 {
        return None;
    }
    let dn = dd.sqrt();
    let along = (dd + rp * rp - rq * rq) / (2.0 * dn);
    let mut h2 = rp * rp - along * along;
    if h2 < 0.0 {
        let scale = rp.max(rq).max(dn);
        if h2 < -1e-9 * scale * scale {
            return None;
        }
        h2 = 0.0;
    }
    let u = d * (1.0 / dn);
    Some((p + u * along, u.perp() * h2.sqrt()))
}

/// Intersection of the line through `p` with direction `d` and the line
/// through `q` with direction `e`.
pub fn line_intersection(p: Vec2, d: Vec2, q: Vec2, e: Vec2) -> Option<Vec2> {
    let den = d.cross(e);
    let scale = d.norm() * e.norm();
    if den.abs() <= 1e-14 * scale || scale == 0.0 {
        return None;
    }
    let t = (q - p).cross(e) / den;
    Some(p + d * t)
}

/// Twice the signed area of triangle (a, b, c).
pub fn signed_area2(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Distance from `p` to the line through `a` and `b`.
pub fn line_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let n = d.norm();
    if n == 0.0 {
        return p.dist(a);
    }
    (p - a).cross(d).abs() / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circles_meet_symmetric() {
        let (foot, off) =
            circle_intersection(Vec2::ZERO, 1.0, Vec2::new(1.0, 0.0), 1.0).unwrap();
        assert!((foot.x - 0.5).abs() < 1e-15);
        assert!((off.y - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tangent_circles_clamp() {
        let (foot, off) =
            circle_intersection(Vec2::ZERO, 1.0, Vec2::new(2.0 + 1e-12, 0.0), 1.0).unwrap();
        assert!((foot.x - 1.0).abs() < 1e-9);
        assert_eq!(off.norm(), 0.0);
        assert!(circle_intersection(Vec2::ZERO, 1.0, Vec2::new(2.1, 0.0), 1.0).is_none());
    }

    #[test]
    fn lines_cross() {
        let p = line_intersection(
            Vec2::new(0.0, 0.8),
            Vec2::new(0.5, -1.0),
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
        )
        .unwrap();
        assert!((p.x - 0.4).abs() < 1e-15 && p.y.abs() < 1e-15);
    }
}
