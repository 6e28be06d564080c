//! Substitution x = a cosθ + b cosφ, y = a sinθ + b sinφ into a bivariate
//! polynomial, expanded into a finite cosine sum, plus the radius choice that
//! keeps the angle gadgets inside their bifurcation-free wedge.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::poly::{rational, to_f64, BivariatePoly};
use num::{BigRational, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

/// Phase offsets a term may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Zero,
    Half,
    Pi,
    ThreeHalves,
}

impl Phase {
    pub fn radians(self) -> f64 {
        match self {
            Phase::Zero => 0.0,
            Phase::Half => FRAC_PI_2,
            Phase::Pi => PI,
            Phase::ThreeHalves => 3.0 * FRAC_PI_2,
        }
    }

    pub fn from_radians(psi: f64) -> Option<Phase> {
        let q = (psi.rem_euclid(2.0 * PI) / FRAC_PI_2).round();
        if (psi.rem_euclid(2.0 * PI) - q * FRAC_PI_2).abs() > 1e-9 {
            return None;
        }
        Some(match q as i64 % 4 {
            0 => Phase::Zero,
            1 => Phase::Half,
            2 => Phase::Pi,
            _ => Phase::ThreeHalves,
        })
    }

    /// Coefficients (c, d) with cos(X + ψ) = c·cos X + d·sin X.
    fn as_cos_sin(self) -> (f64, f64) {
        match self {
            Phase::Zero => (1.0, 0.0),
            Phase::Half => (0.0, -1.0),
            Phase::Pi => (-1.0, 0.0),
            Phase::ThreeHalves => (0.0, 1.0),
        }
    }
}

impl Serialize for Phase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.radians())
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Phase::from_radians(v).ok_or_else(|| serde::de::Error::custom(format!("phase {v} is not a multiple of pi/2")))
    }
}

/// One term A·cos(rθ + sφ + ψ) with A > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    #[serde(rename = "A")]
    pub amp: f64,
    pub r: u32,
    pub s: i32,
    #[serde(rename = "psi")]
    pub phase: Phase,
}

impl TrigTerm {
    pub fn angle(&self, theta: f64, phi: f64) -> f64 {
        self.r as f64 * theta + self.s as f64 * phi + self.phase.radians()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigSum {
    #[serde(rename = "A00")]
    pub a00: f64,
    pub terms: Vec<TrigTerm>,
}

/// Value of the sum at (θ, φ).
pub fn eval_trig(t: &TrigSum, theta: f64, phi: f64) -> f64 {
    t.a00 + t.terms.iter().map(|k| k.amp * k.angle(theta, phi).cos()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Cos,
    Sin,
}

/// Scalars the expansion can run over.
pub trait Coef: Clone + Zero + std::ops::Mul<Output = Self> + std::ops::Neg<Output = Self> {
    fn half(&self) -> Self;
    fn sign(&self) -> i32;
    fn value(&self) -> f64;
    fn abs_value(&self) -> Self;
}

impl Coef for BigRational {
    fn half(&self) -> Self {
        self / BigRational::from_integer(2.into())
    }
    fn sign(&self) -> i32 {
        if self.is_zero() {
            0
        } else if self.is_negative() {
            -1
        } else {
            1
        }
    }
    fn value(&self) -> f64 {
        to_f64(self)
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
}

impl Coef for f64 {
    fn half(&self) -> Self {
        0.5 * self
    }
    fn sign(&self) -> i32 {
        if *self > 0.0 {
            1
        } else if *self < 0.0 {
            -1
        } else {
            0
        }
    }
    fn value(&self) -> f64 {
        *self
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
}

/// Linear combination over the basis {cos(rθ+sφ), sin(rθ+sφ)} with canonical
/// keys (r > 0, or r = 0 and s ≥ 0); the constant is (0, 0, Cos).
#[derive(Debug, Clone)]
struct TrigLin<K: Coef> {
    c: BTreeMap<(i32, i32, Kind), K>,
}

impl<K: Coef> TrigLin<K> {
    fn zero() -> Self {
        TrigLin { c: BTreeMap::new() }
    }

    fn add(&mut self, r: i32, s: i32, kind: Kind, v: K) {
        let (r, s, v) = if r < 0 || (r == 0 && s < 0) {
            match kind {
                Kind::Cos => (-r, -s, v),
                Kind::Sin => (-r, -s, -v),
            }
        } else {
            (r, s, v)
        };
        if r == 0 && s == 0 && kind == Kind::Sin {
            return;
        }
        let e = self.c.entry((r, s, kind)).or_insert_with(K::zero);
        *e = e.clone() + v;
        if e.sign() == 0 {
            self.c.remove(&(r, s, kind));
        }
    }

    fn add_all(&mut self, o: &TrigLin<K>, k: &K) {
        for ((r, s, kind), v) in &o.c {
            self.add(*r, *s, *kind, v.clone() * k.clone());
        }
    }

    fn mul(&self, o: &TrigLin<K>) -> TrigLin<K> {
        let mut out = TrigLin::zero();
        for ((r1, s1, k1), v1) in &self.c {
            for ((r2, s2, k2), v2) in &o.c {
                let h = (v1.clone() * v2.clone()).half();
                let (dr, ds) = (r1 - r2, s1 - s2);
                let (sr, ss) = (r1 + r2, s1 + s2);
                match (k1, k2) {
                    (Kind::Cos, Kind::Cos) => {
                        out.add(dr, ds, Kind::Cos, h.clone());
                        out.add(sr, ss, Kind::Cos, h);
                    }
                    (Kind::Sin, Kind::Sin) => {
                        out.add(dr, ds, Kind::Cos, h.clone());
                        out.add(sr, ss, Kind::Cos, -h);
                    }
                    (Kind::Sin, Kind::Cos) => {
                        out.add(sr, ss, Kind::Sin, h.clone());
                        out.add(dr, ds, Kind::Sin, h);
                    }
                    (Kind::Cos, Kind::Sin) => {
                        out.add(sr, ss, Kind::Sin, h.clone());
                        out.add(dr, ds, Kind::Sin, -h);
                    }
                }
            }
        }
        out
    }
}

/// Expansion with exact amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTrigSum {
    pub a00: BigRational,
    pub terms: Vec<(BigRational, u32, i32, Phase)>,
}

impl ExactTrigSum {
    pub fn to_f64(&self) -> TrigSum {
        TrigSum {
            a00: to_f64(&self.a00),
            terms: self
                .terms
                .iter()
                .map(|(a, r, s, p)| TrigTerm { amp: to_f64(a), r: *r, s: *s, phase: *p })
                .collect(),
        }
    }
}

fn expand_generic<K: Coef>(f: &BivariatePoly, coef: impl Fn(&BigRational) -> K, a: K, b: K) -> (K, Vec<(K, u32, i32, Phase)>) {
    let mut x = TrigLin::zero();
    x.add(1, 0, Kind::Cos, a.clone());
    x.add(0, 1, Kind::Cos, b.clone());
    let mut y = TrigLin::zero();
    y.add(1, 0, Kind::Sin, a);
    y.add(0, 1, Kind::Sin, b);
    let deg_x = f.terms.keys().map(|k| k.0).max().unwrap_or(0) as usize;
    let deg_y = f.terms.keys().map(|k| k.1).max().unwrap_or(0) as usize;
    let mut one = TrigLin::zero();
    let unit = coef(&BigRational::from_integer(1.into()));
    one.add(0, 0, Kind::Cos, unit);
    let mut xp = vec![one.clone()];
    for i in 0..deg_x {
        let next = xp[i].mul(&x);
        xp.push(next);
    }
    let mut yp = vec![one];
    for j in 0..deg_y {
        let next = yp[j].mul(&y);
        yp.push(next);
    }
    let mut total = TrigLin::zero();
    for ((i, j), c) in &f.terms {
        let prod = xp[*i as usize].mul(&yp[*j as usize]);
        total.add_all(&prod, &coef(c));
    }
    canonical_terms(&total)
}

/// Converts a linear combination to positive-amplitude cosine terms.
fn canonical_terms<K: Coef>(lin: &TrigLin<K>) -> (K, Vec<(K, u32, i32, Phase)>) {
    let mut a00 = K::zero();
    let mut terms = Vec::new();
    for ((r, s, kind), v) in &lin.c {
        if *r == 0 && *s == 0 {
            a00 = v.clone();
            continue;
        }
        let phase = match (kind, v.sign() > 0) {
            (Kind::Cos, true) => Phase::Zero,
            (Kind::Cos, false) => Phase::Pi,
            // d·sin X = d·cos(X − π/2) = d·cos(X + 3π/2)
            (Kind::Sin, true) => Phase::ThreeHalves,
            (Kind::Sin, false) => Phase::Half,
        };
        terms.push((v.abs_value(), *r as u32, *s, phase));
    }
    (a00, terms)
}

/// Exact expansion of f(a cosθ + b cosφ, a sinθ + b sinφ). Every finite
/// `f64` is a dyadic rational, so `a` and `b` are taken exactly.
pub fn expand_exact(f: &BivariatePoly, a: f64, b: f64) -> ExactTrigSum {
    let (a00, terms) = expand_generic(f, |c| c.clone(), rational(a), rational(b));
    ExactTrigSum { a00, terms }
}

/// Expansion with floating-point amplitudes, computed exactly and rounded.
pub fn expand(f: &BivariatePoly, a: f64, b: f64) -> TrigSum {
    expand_exact(f, a, b).to_f64()
}

/// Expansion carried out entirely in floating point.
pub fn expand_float(f: &BivariatePoly, a: f64, b: f64) -> TrigSum {
    let (a00, terms) = expand_generic(f, to_f64, a, b);
    TrigSum {
        a00,
        terms: terms
            .into_iter()
            .map(|(amp, r, s, phase)| TrigTerm { amp, r, s, phase })
            .collect(),
    }
}

impl TrigSum {
    fn to_lin(&self) -> TrigLin<f64> {
        let mut lin = TrigLin::zero();
        lin.add(0, 0, Kind::Cos, self.a00);
        for t in &self.terms {
            let (c, d) = t.phase.as_cos_sin();
            lin.add(t.r as i32, t.s, Kind::Cos, t.amp * c);
            lin.add(t.r as i32, t.s, Kind::Sin, t.amp * d);
        }
        lin
    }

    /// Re-expresses the sum in canonical form: one cosine-type and at most one
    /// sine-type term per (r, s), positive amplitudes, sorted keys.
    pub fn canonicalize(&self) -> TrigSum {
        let (a00, terms) = canonical_terms(&self.to_lin());
        TrigSum {
            a00,
            terms: terms
                .into_iter()
                .map(|(amp, r, s, phase)| TrigTerm { amp, r, s, phase })
                .collect(),
        }
    }

    /// Term-wise sum.
    pub fn merge(&self, o: &TrigSum) -> TrigSum {
        let mut lin = self.to_lin();
        lin.add_all(&o.to_lin(), &1.0);
        let (a00, terms) = canonical_terms(&lin);
        TrigSum {
            a00,
            terms: terms
                .into_iter()
                .map(|(amp, r, s, phase)| TrigTerm { amp, r, s, phase })
                .collect(),
        }
    }

    /// Checks the sign convention, positivity and key uniqueness.
    pub fn is_canonical(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.terms.iter().all(|t| {
            let parity = matches!(t.phase, Phase::Half | Phase::ThreeHalves);
            t.amp > 0.0
                && (t.r > 0 || t.s > 0)
                && seen.insert((t.r, t.s, parity))
        })
    }

    pub fn max_order(&self) -> u32 {
        self.terms.iter().map(|t| t.r + t.s.unsigned_abs()).max().unwrap_or(0)
    }
}

/// Which side of p the θ-arm lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmSide {
    /// θ-arm counterclockwise of p (so θ > φ near the wedge).
    Ccw,
    Cw,
}

/// Angles with a(cosθ, sinθ) + b(cosφ, sinφ) = p, θ-arm counterclockwise
/// of p.
pub fn xy_to_angles(a: f64, b: f64, p: Vec2) -> Result<(f64, f64)> {
    xy_to_angles_with(a, b, p, ArmSide::Ccw)
}

pub fn xy_to_angles_with(a: f64, b: f64, p: Vec2, side: ArmSide) -> Result<(f64, f64)> {
    let rho = p.norm();
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Argument(format!("arm lengths must be positive (a={a}, b={b})")));
    }
    let lo = (a - b).abs();
    let hi = a + b;
    let margin = 1e-12 * hi;
    if !(rho > lo + margin && rho < hi - margin) {
        return Err(Error::Range(format!(
            "|p| = {rho} outside the open annulus ({lo}, {hi})"
        )));
    }
    let cos_d = ((a * a + rho * rho - b * b) / (2.0 * a * rho)).clamp(-1.0, 1.0);
    let delta = cos_d.acos();
    let omega = p.angle();
    let theta = match side {
        ArmSide::Ccw => omega + delta,
        ArmSide::Cw => omega - delta,
    };
    let rest = p - Vec2::polar(a, theta);
    Ok((wrap(theta), rest.angle()))
}

fn wrap(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    /// Polar grid of `rings × spokes` points plus the center, boundary included.
    pub fn grid(&self, rings: usize, spokes: usize) -> Vec<Vec2> {
        let mut out = vec![self.center];
        for i in 1..=rings {
            let r = self.radius * i as f64 / rings as f64;
            for k in 0..spokes {
                out.push(self.center + Vec2::polar(r, 2.0 * PI * k as f64 / spokes as f64));
            }
        }
        out
    }

    pub fn random(&self, n: usize, rng: &mut impl Rng) -> Vec<Vec2> {
        (0..n)
            .map(|_| {
                let r = self.radius * rng.gen::<f64>().sqrt();
                self.center + Vec2::polar(r, rng.gen_range(0.0..2.0 * PI))
            })
            .collect()
    }
}

/// Arm lengths and origin shift certified to keep the driving angles inside
/// the wedge 0 < nφ < θ, (n+1)θ < π/4 for every sampled disc point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiiChoice {
    pub a: f64,
    pub b: f64,
    pub n: u32,
    /// The arms pivot at this point; disc points are measured from it.
    pub origin: Vec2,
    pub disc: Disc,
    /// Largest sampled θ and φ.
    pub wedge: (f64, f64),
    /// Smallest sampled slack over the three inequalities.
    pub margin: f64,
    pub samples: usize,
}

impl RadiiChoice {
    pub fn angles(&self, p: Vec2) -> Result<(f64, f64)> {
        xy_to_angles(self.a, self.b, p - self.origin)
    }

    pub fn point(&self, theta: f64, phi: f64) -> Vec2 {
        self.origin + Vec2::polar(self.a, theta) + Vec2::polar(self.b, phi)
    }

    /// Smallest slack of the wedge inequalities over `points`, or `None`
    /// when a point is unreachable.
    pub fn margin_on(&self, points: &[Vec2]) -> Option<f64> {
        wedge_margin(self.n, self.a, self.b, self.origin, points).map(|m| m.0)
    }
}

/// (margin, θ_max, φ_max)
fn wedge_margin(n: u32, a: f64, b: f64, origin: Vec2, points: &[Vec2]) -> Option<(f64, f64, f64)> {
    let nf = n as f64;
    let mut margin = f64::INFINITY;
    let (mut tmax, mut pmax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        let (t, f) = xy_to_angles(a, b, *p - origin).ok()?;
        margin = margin
            .min(nf * f)
            .min(t - nf * f)
            .min(FRAC_PI_4 - (nf + 1.0) * t);
        tmax = tmax.max(t);
        pmax = pmax.max(f);
    }
    Some((margin, tmax, pmax))
}

const MAX_DOUBLINGS: u32 = 40;
/// Seed of the random certification points unless one is given.
pub const DEFAULT_SEED: u64 = 0x6b656d7065;
/// Ratios b/a tried at each arm length.
const B_RATIOS: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];

/// Doubling search for arm lengths: the arms are aimed so that the disc
/// center sits at θ₀ = π/(8(n+1)), φ₀ = θ₀/(2n), the middle of the wedge,
/// and a is doubled (trying b = a/2 … a/16) until a polar grid of more than 10⁴ disc
/// points and 10³ seeded random points all satisfy the inequalities.
pub fn choose_radii(n: u32, disc: &Disc) -> Result<RadiiChoice> {
    choose_radii_seeded(n, disc, DEFAULT_SEED)
}

/// [`choose_radii`] with the random certification points drawn from `seed`.
pub fn choose_radii_seeded(n: u32, disc: &Disc, seed: u64) -> Result<RadiiChoice> {
    let c = disc.center;
    if !(disc.radius > 0.0) {
        return Err(Error::Argument(format!("disc radius {} must be positive", disc.radius)));
    }
    if !(c.x - disc.radius > 0.0 && c.y - disc.radius > 0.0) {
        return Err(Error::NoCertificate(format!(
            "disc at ({}, {}) radius {} is not inside the open first quadrant",
            c.x, c.y, disc.radius
        )));
    }
    let n_eff = n.max(1);
    let nf = n_eff as f64;
    let theta0 = FRAC_PI_4 / (2.0 * (nf + 1.0));
    let phi0 = theta0 / (2.0 * nf);
    let grid = disc.grid(100, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fresh = disc.random(1000, &mut rng);
    let mut best = f64::NEG_INFINITY;
    let mut a = 2.0f64;
    for _ in 0..MAX_DOUBLINGS {
        for ratio in B_RATIOS {
            let b = a * ratio;
            let origin = c - (Vec2::polar(a, theta0) + Vec2::polar(b, phi0));
            let Some((m, tmax, pmax)) = wedge_margin(n_eff, a, b, origin, &grid) else {
                continue;
            };
            best = best.max(m);
            if m <= 0.0 {
                continue;
            }
            if let Some((m2, _, _)) = wedge_margin(n_eff, a, b, origin, &fresh) {
                if m2 > 0.0 {
                    return Ok(RadiiChoice {
                        a,
                        b,
                        n: n_eff,
                        origin,
                        disc: disc.clone(),
                        wedge: (tmax, pmax),
                        margin: m.min(m2),
                        samples: grid.len() + fresh.len(),
                    });
                }
            }
        }
        a *= 2.0;
    }
    Err(Error::NoCertificate(format!(
        "no arm lengths up to 2^{MAX_DOUBLINGS} certify the wedge; best margin {best:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expands_x() {
        let t = expand(&BivariatePoly::parse("x").unwrap(), 2.0, 1.0);
        assert_eq!(t.a00, 0.0);
        assert_eq!(
            t.terms,
            vec![
                TrigTerm { amp: 1.0, r: 0, s: 1, phase: Phase::Zero },
                TrigTerm { amp: 2.0, r: 1, s: 0, phase: Phase::Zero },
            ]
        );
    }

    #[test]
    fn expands_y_with_phase() {
        let t = expand(&BivariatePoly::parse("y").unwrap(), 1.0, 1.0);
        assert!(t.terms.iter().all(|k| k.phase == Phase::ThreeHalves && k.amp == 1.0));
        assert_eq!(t.terms.len(), 2);
    }

    #[test]
    fn x_squared_by_hand() {
        let t = expand(&BivariatePoly::parse("x^2").unwrap(), 1.0, 1.0);
        assert_eq!(t.a00, 1.0);
        let get = |r: u32, s: i32| t.terms.iter().find(|k| k.r == r && k.s == s).unwrap().amp;
        assert_eq!(get(2, 0), 0.5);
        assert_eq!(get(0, 2), 0.5);
        assert_eq!(get(1, -1), 1.0);
        assert_eq!(get(1, 1), 1.0);
        assert_eq!(eval_trig(&t, 0.0, 0.0), 4.0);
    }

    #[test]
    fn angles_round_trip() {
        let (a, b) = (2.0, 1.0);
        let p = Vec2::polar(a, 0.1) + Vec2::polar(b, 0.4);
        let (t, f) = xy_to_angles_with(a, b, p, ArmSide::Cw).unwrap();
        assert!((t - 0.1).abs() < 1e-12 && (f - 0.4).abs() < 1e-12);
        let p = Vec2::polar(a, 0.4) + Vec2::polar(b, 0.1);
        let (t, f) = xy_to_angles(a, b, p).unwrap();
        assert!((t - 0.4).abs() < 1e-12 && (f - 0.1).abs() < 1e-12);
        assert!(matches!(xy_to_angles(a, b, Vec2::new(3.0, 0.0)), Err(Error::Range(_))));
        assert!(matches!(xy_to_angles(a, b, Vec2::new(0.5, 0.0)), Err(Error::Range(_))));
    }

    #[test]
    fn phase_json() {
        let t = TrigTerm { amp: 1.0, r: 1, s: -1, phase: Phase::ThreeHalves };
        let s = serde_json::to_string(&t).unwrap();
        let back: TrigTerm = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn radii_for_small_disc() {
        let disc = Disc { center: Vec2::new(0.5, 0.5), radius: 0.1 };
        let rc = choose_radii(2, &disc).unwrap();
        assert!(rc.margin > 0.0 && rc.a > rc.b);
        let touching = Disc { center: Vec2::new(0.1, 0.5), radius: 0.1 };
        assert!(matches!(choose_radii(2, &touching), Err(Error::NoCertificate(_))));
    }
}
