//! Finite truncations of the tower that traces an arbitrary continuous
//! curve: Bernstein approximants of increasing accuracy, one slider-driven
//! stage per approximant, and joints q_k, r_k tethered to the stage outputs
//! that carry the shared coordinates of the traced point.

use crate::compiler::chain::Chains;
use crate::compiler::curve::{base, build_rows, chains_for, finish, window, Base, Slider};
use crate::compiler::{Basis, CompiledLinkage, Target};
use crate::error::{Error, Result};
use crate::framework::{JointId, TOL_BUILD};
use crate::geom::Vec2;
use crate::gadgets::parts::{colinear, lineariser_fixed, translator};
use crate::kinematics::{scalar_schedule, simulate_schedule, CurveRef};
use crate::poly::{centered_exact, rational, to_f64, Poly1, PolyCurve};
use crate::program::{Builder, Step};
use num::{BigInt, BigRational, One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use std::io::Read;

pub const DEGREE_CAP: usize = 64;
/// Fewest samples a curve must provide for the sampled sup-norm to mean much.
pub const MIN_SAMPLES: usize = 100;

/// Horizontal distance between consecutive y-stages.
const Y_STAGE_GAP: f64 = 12.0;
/// Vertical room left around the power frames of an x-stage.
const X_STAGE_MARGIN: f64 = 8.0;

/// Bernstein approximant of one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordFit {
    pub degree: usize,
    /// Control values f(i/n), i = 0..=n.
    pub control: Vec<f64>,
    /// Sup of |fit − sample| over the samples.
    pub error: f64,
}

impl CoordFit {
    /// de Casteljau evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        let mut c = self.control.clone();
        for r in 1..c.len() {
            for i in 0..c.len() - r {
                c[i] = c[i] * (1.0 - t) + c[i + 1] * t;
            }
        }
        c[0]
    }

    fn monomial_exact(&self) -> Vec<BigRational> {
        let n = self.degree;
        let binom = |n: usize, k: usize| -> BigInt {
            let mut b = BigInt::one();
            for i in 0..k {
                b = b * BigInt::from(n - i) / BigInt::from(i + 1);
            }
            b
        };
        let mut out = vec![BigRational::zero(); n + 1];
        for (i, v) in self.control.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let v = rational(*v) * BigRational::from_integer(binom(n, i));
            // t^i (1 − t)^(n−i) = sum_j C(n−i, j) (−1)^j t^(i+j)
            for j in 0..=n - i {
                let term = &v * BigRational::from_integer(binom(n - i, j));
                if j % 2 == 0 {
                    out[i + j] += term;
                } else {
                    out[i + j] -= term;
                }
            }
        }
        out
    }

    /// Power-basis coefficients in t, rounded once from exact values.
    pub fn poly(&self) -> Poly1 {
        Poly1::new(self.monomial_exact().iter().map(to_f64).collect())
    }

    /// Coefficients in u = 2t − 1, rounded once from exact values.
    pub fn centered(&self) -> Vec<f64> {
        centered_exact(&self.monomial_exact()).iter().map(to_f64).collect()
    }

    /// Bound on how far the sampled error can grow between samples spaced
    /// at most `h` apart, for data with slope at most `lip`.
    fn slack(&self, h: f64, lip: f64) -> f64 {
        let fit_lip = self.control.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max) * self.degree as f64;
        0.5 * h * (lip + fit_lip)
    }
}

/// Per-coordinate Bernstein approximants with sampled error below 1/k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinFit {
    pub k: usize,
    pub x: CoordFit,
    pub y: CoordFit,
}

impl BernsteinFit {
    pub fn curve(&self) -> PolyCurve {
        PolyCurve { x: self.x.poly(), y: self.y.poly() }
    }

    pub fn eval(&self, t: f64) -> Vec2 {
        Vec2::new(self.x.eval(t), self.y.eval(t))
    }
}

fn check_samples(samples: &[(f64, Vec2)]) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Argument(format!(
            "{} curve samples given, at least {MIN_SAMPLES} needed",
            samples.len()
        )));
    }
    if samples.iter().any(|(t, p)| !t.is_finite() || !p.is_finite()) {
        return Err(Error::Argument("curve samples must be finite".into()));
    }
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Argument("sample parameters must increase strictly".into()));
    }
    let (t0, t1) = (samples[0].0, samples[samples.len() - 1].0);
    if t0.abs() > 1e-12 || (t1 - 1.0).abs() > 1e-12 {
        return Err(Error::Argument(format!("samples must span t ∈ [0, 1], got [{t0}, {t1}]")));
    }
    Ok(())
}

fn fit_coord(samples: &[(f64, Vec2)], coord: usize, k: usize, cap: usize) -> Result<CoordFit> {
    let get = |p: Vec2| if coord == 0 { p.x } else { p.y };
    let curve = CurveRef::Sampled(samples);
    let tol = 1.0 / k as f64;
    let mut best: Option<CoordFit> = None;
    let degrees = std::iter::once(0).chain(std::iter::successors(Some(1usize), |d| Some(d * 2)));
    for n in degrees.take_while(|d| *d <= cap) {
        let control: Vec<f64> = (0..=n)
            .map(|i| get(curve.eval(if n == 0 { 0.0 } else { i as f64 / n as f64 })))
            .collect();
        let mut fit = CoordFit { degree: n, control, error: 0.0 };
        fit.error = samples.iter().map(|(t, p)| (fit.eval(*t) - get(*p)).abs()).fold(0.0, f64::max);
        // Strict: the bound is only certified at the samples.
        if fit.error < tol {
            return Ok(fit);
        }
        if best.as_ref().map_or(true, |b| fit.error < b.error) {
            best = Some(fit);
        }
    }
    let best = best.expect("degree 0 is always tried");
    Err(Error::Approximation(format!(
        "{} coordinate: no Bernstein degree up to {cap} gets below 1/{k}; best sampled error {:e} at degree {}",
        if coord == 0 { "x" } else { "y" },
        best.error,
        best.degree
    )))
}

/// Bernstein approximants of a sampled curve on t ∈ [0, 1] whose sampled
/// sup-error is below 1/k in each coordinate; degrees double from 1 up to
/// [`DEGREE_CAP`].
pub fn bernstein_fit(samples: &[(f64, Vec2)], k: usize) -> Result<BernsteinFit> {
    bernstein_fit_with(samples, k, DEGREE_CAP)
}

pub fn bernstein_fit_with(samples: &[(f64, Vec2)], k: usize, cap: usize) -> Result<BernsteinFit> {
    if k == 0 {
        return Err(Error::Argument("accuracy index k must be at least 1".into()));
    }
    check_samples(samples)?;
    Ok(BernsteinFit { k, x: fit_coord(samples, 0, k, cap)?, y: fit_coord(samples, 1, k, cap)? })
}

/// Joints of one tower stage. The x-stage outputs (x_k(s), ·) on the
/// horizontal line of q_k; the y-stage outputs (·, y_k(s)) on the vertical
/// line of r_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub k: usize,
    pub fit: BernsteinFit,
    pub x_out: JointId,
    pub y_out: JointId,
    pub q: JointId,
    pub r: JointId,
    /// Tether joints binding q_k to x_out and r_k to y_out.
    pub tether_x: JointId,
    pub tether_y: JointId,
}

/// Knobs of [`build_tower_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerOptions {
    /// Tether arms are tether_scale/(2k); 1 makes the 1/k bound forced.
    pub tether_scale: f64,
    pub degree_cap: usize,
}

impl Default for TowerOptions {
    fn default() -> Self {
        TowerOptions { tether_scale: 1.0, degree_cap: DEGREE_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTower {
    #[serde(rename = "K")]
    pub k_max: usize,
    #[serde(flatten)]
    pub linkage: CompiledLinkage,
    pub stages: Vec<Stage>,
}

impl StageTower {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Argument(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: StageTower = serde_json::from_str(s).map_err(|e| Error::Argument(e.to_string()))?;
        // Re-validates the framework and the program.
        CompiledLinkage::from_json(&serde_json::to_string(&t.linkage).map_err(|e| Error::Argument(e.to_string()))?)?;
        Ok(t)
    }

    pub fn samples(&self) -> &[(f64, Vec2)] {
        match &self.linkage.target {
            Target::Sampled { samples } => samples,
            _ => &[],
        }
    }
}

/// Tower with stages 1..=K over the default options.
pub fn build_tower(samples: &[(f64, Vec2)], k_max: usize) -> Result<StageTower> {
    build_tower_with(samples, k_max, &TowerOptions::default())
}

fn stage_base(b: &mut Builder, origin: Vec2, prev: &Base) -> Result<Base> {
    base(b, origin, false, Slider::CopyOf(prev.p1, prev.pl))
}

/// Joint whose `coord` is squeezed between every tether window, then
/// carried through the stage lines by translators: returns [j_0, j_1, ...]
/// where j_0 sits on the axis through p1 and j_k on stage k's line.
fn shared_coordinate(
    b: &mut Builder,
    coord: usize,
    outs: &[JointId],
    reach: &[f64],
    bases: &[Base],
    root: &Base,
) -> Result<Vec<JointId>> {
    let first = b.home(bases[0].p1);
    let other = if coord == 0 { first.y } else { first.x };
    let sources = outs.iter().copied().zip(reach.iter().copied()).collect();
    let preferred = *outs.last().unwrap();
    let j1 = b.step(|j| Step::Consensus { j, coord, sources, preferred, other })?;
    let dir = if coord == 0 { Vec2::new(1.0, 0.0) } else { Vec2::new(0.0, 1.0) };
    lineariser_fixed(b, first, dir, &[j1])?;
    let mut js = vec![translator(b, bases[0].p1, root.p1, j1)?, j1];
    for w in bases.windows(2) {
        let prev = *js.last().unwrap();
        js.push(translator(b, w[0].p1, w[1].p1, prev)?);
    }
    Ok(js)
}

/// Builds the K-stage truncation for a sampled curve. The curve is
/// normalized into the safe window first; all bounds are in normalized
/// units.
pub fn build_tower_with(samples: &[(f64, Vec2)], k_max: usize, opts: &TowerOptions) -> Result<StageTower> {
    if k_max == 0 {
        return Err(Error::Argument("a tower needs at least one stage".into()));
    }
    if !(opts.tether_scale > 0.0) {
        return Err(Error::Argument("tether scale must be positive".into()));
    }
    check_samples(samples)?;
    let pts: Vec<Vec2> = samples.iter().map(|s| s.1).collect();
    let norm = window(&pts)?;
    let normalized: Vec<(f64, Vec2)> = samples.iter().map(|(t, p)| (*t, norm.apply(*p))).collect();
    let fits = (1..=k_max)
        .into_par_iter()
        .map(|k| bernstein_fit_with(&normalized, k, opts.degree_cap))
        .collect::<Result<Vec<_>>>()?;

    let mut b = Builder::new(build_rows(), vec![]);
    let root = base(&mut b, Vec2::ZERO, true, Slider::Driven)?;
    let (mut xbases, mut ybases) = (Vec::new(), Vec::new());
    let (mut xouts, mut youts) = (Vec::new(), Vec::new());
    let mut y_level = -X_STAGE_MARGIN;
    for fit in &fits {
        let k = fit.k;
        let xb = stage_base(&mut b, Vec2::new(0.0, y_level), xbases.last().unwrap_or(&root))?;
        let mut chains: Chains = chains_for(&mut b, &xb, Basis::Centered)?;
        let xo = chains.horizontal(&mut b, &fit.x.centered(), xb.p1, &format!("x{k}_sum"))?;
        y_level -= 3.0 * fit.x.degree.max(1) as f64 + X_STAGE_MARGIN;

        let yb = stage_base(&mut b, Vec2::new(-Y_STAGE_GAP * k as f64, 0.0), ybases.last().unwrap_or(&root))?;
        let mut chains = chains_for(&mut b, &yb, Basis::Centered)?;
        let yo = chains.vertical(&mut b, &fit.y.centered(), yb.p1, &format!("y{k}_sum"))?;

        b.label(&format!("qC_x{k}"), xo);
        b.label(&format!("qC_y{k}"), yo);
        xbases.push(xb);
        ybases.push(yb);
        xouts.push(xo);
        youts.push(yo);
    }

    let arms: Vec<f64> = (1..=k_max).map(|k| opts.tether_scale / (2.0 * k as f64)).collect();
    let reach: Vec<f64> = arms.iter().map(|a| 2.0 * a).collect();
    let qs = shared_coordinate(&mut b, 0, &xouts, &reach, &xbases, &root)?;
    let rs = shared_coordinate(&mut b, 1, &youts, &reach, &ybases, &root)?;
    let mut stages = Vec::new();
    for (i, fit) in fits.into_iter().enumerate() {
        let k = fit.k;
        let tether_x = b.elbow_auto(qs[k], xouts[i], arms[i], arms[i])?;
        let tether_y = b.elbow_auto(rs[k], youts[i], arms[i], arms[i])?;
        b.label(&format!("q{k}"), qs[k]);
        b.label(&format!("r{k}"), rs[k]);
        stages.push(Stage { k, fit, x_out: xouts[i], y_out: youts[i], q: qs[k], r: rs[k], tether_x, tether_y });
    }
    b.label("q0", qs[0]);
    b.label("r0", rs[0]);
    let (q0, q1, r0, r1) = (qs[0], qs[1], rs[0], rs[1]);
    let pc = b.step(|j| Step::Intersect { j, p1: q0, d1: (q1, q0), p2: r0, d2: (r1, r0) })?;
    colinear(&mut b, q1, q0, &[pc])?;
    colinear(&mut b, r1, r0, &[pc])?;
    let linkage = finish(b, &root, pc, norm, Target::Sampled { samples: samples.to_vec() })?;
    Ok(StageTower { k_max, linkage, stages })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageCheck {
    pub k: usize,
    /// "x" or "y".
    pub coord: String,
    /// Sum of the two tether bar lengths: the separation the bars allow.
    pub forced: f64,
    /// Largest sampled separation of q_k (or r_k) from the stage output.
    pub sampled: f64,
    pub fit_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TowerReport {
    pub samples: usize,
    pub stages: Vec<StageCheck>,
    /// Per-coordinate sup of |traced − target| in normalized units.
    pub composite: (f64, f64),
    /// 1/K.
    pub bound: f64,
    /// Allowance for checking between the curve samples the fits were
    /// certified on.
    pub slack: f64,
    pub max_valency: usize,
    pub pass: bool,
    pub failures: Vec<String>,
}

fn tether_span(cl: &CompiledLinkage, t: JointId) -> f64 {
    cl.fw.bars.iter().filter(|bar| bar.a == t || bar.b == t).map(|bar| bar.length).sum()
}

/// Drives the tower through `n` evenly spaced slider positions and checks
/// every stage's tether bound, plus the composite error against 1/K.
pub fn tower_trace_check(tower: &StageTower, n: usize) -> Result<TowerReport> {
    if n < 2 {
        return Err(Error::Argument("tower check needs at least two samples".into()));
    }
    let cl = &tower.linkage;
    let path = simulate_schedule(cl, &scalar_schedule((0..n).map(|i| i as f64 / (n - 1) as f64)))?;
    let target = tower.samples();
    let normalized: Vec<(f64, Vec2)> = target.iter().map(|(t, p)| (*t, cl.normalization.apply(*p))).collect();
    let h = normalized.windows(2).map(|w| w[1].0 - w[0].0).fold(0.0, f64::max);
    let lip = |coord: usize| {
        normalized
            .windows(2)
            .map(|w| {
                let d = w[1].1 - w[0].1;
                (if coord == 0 { d.x } else { d.y }).abs() / (w[1].0 - w[0].0)
            })
            .fold(0.0, f64::max)
    };
    let (lx, ly) = (lip(0), lip(1));

    let mut stages = Vec::new();
    let mut failures = Vec::new();
    let mut slack: f64 = 0.0;
    for st in &tower.stages {
        let bound = 1.0 / st.k as f64;
        for (coord, q, out, tether, fit) in
            [("x", st.q, st.x_out, st.tether_x, &st.fit.x), ("y", st.r, st.y_out, st.tether_y, &st.fit.y)]
        {
            let sampled = path.samples.iter().map(|m| m.pos[q.0].dist(m.pos[out.0])).fold(0.0, f64::max);
            let forced = tether_span(cl, tether);
            let pass = forced <= bound + TOL_BUILD && sampled <= bound + TOL_BUILD;
            if !pass {
                failures.push(format!(
                    "stage {coord}{}: tether allows {forced} and reached {sampled}, bound 1/{} = {bound}",
                    st.k, st.k
                ));
            }
            slack = slack.max(2.0 * fit.slack(h, if coord == "x" { lx } else { ly }));
            stages.push(StageCheck { k: st.k, coord: coord.into(), forced, sampled, fit_error: fit.error, pass });
        }
    }

    let pc = cl.role("pC")?;
    let curve = CurveRef::Sampled(&normalized);
    let mut composite = (0.0f64, 0.0f64);
    for m in &path.samples {
        let s = m.driver.as_ref().map_or(m.s, |d| d[0]);
        let d = m.pos[pc.0] - curve.eval(s);
        composite = (composite.0.max(d.x.abs()), composite.1.max(d.y.abs()));
    }
    let bound = 1.0 / tower.k_max as f64;
    for (name, e) in [("x", composite.0), ("y", composite.1)] {
        if !(e <= bound + slack) {
            failures.push(format!("composite {name} error {e} exceeds 1/K + slack = {}", bound + slack));
        }
    }
    Ok(TowerReport {
        samples: n,
        stages,
        composite,
        bound,
        slack,
        max_valency: cl.fw.max_valency(),
        pass: failures.is_empty(),
        failures,
    })
}

/// The boundary of the square [−π/4, π/4]², run counterclockwise at
/// constant speed from its lower-left corner, sampled at `n` parameters.
pub fn square_boundary(n: usize) -> Vec<(f64, Vec2)> {
    let a = FRAC_PI_4;
    let corners = [Vec2::new(-a, -a), Vec2::new(a, -a), Vec2::new(a, a), Vec2::new(-a, a), Vec2::new(-a, -a)];
    (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let side = ((4.0 * t).floor() as usize).min(3);
            let f = 4.0 * t - side as f64;
            (t, corners[side] + (corners[side + 1] - corners[side]) * f)
        })
        .collect()
}

#[derive(Deserialize)]
struct SampleRow {
    t: f64,
    x: f64,
    y: f64,
}

/// Reads curve samples from CSV with header `t,x,y`.
pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<(f64, Vec2)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<SampleRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse { line: i + 2, col: 1, msg: e.to_string() })?;
        out.push((row.t, Vec2::new(row.x, row.y)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_samples(f: impl Fn(f64) -> Vec2) -> Vec<(f64, Vec2)> {
        (0..200).map(|i| i as f64 / 199.0).map(|t| (t, f(t))).collect()
    }

    #[test]
    fn linear_and_constant_fits_are_exact() {
        let s = line_samples(|t| Vec2::new(t, 0.3));
        for k in [1, 2, 7, 50] {
            let fit = bernstein_fit(&s, k).unwrap();
            assert_eq!(fit.x.degree, 1);
            assert!(fit.x.error < 1e-15);
            assert_eq!(fit.y.degree, 0);
            assert_eq!(fit.y.error, 0.0);
        }
    }

    #[test]
    fn monomial_and_centered_forms_agree() {
        let s = line_samples(|t| Vec2::new((3.0 * t).sin(), t * t));
        let fit = bernstein_fit(&s, 6).unwrap();
        assert!(fit.x.degree >= 4);
        let p = fit.x.poly();
        let c = Poly1::new(fit.x.centered());
        for t in [0.0, 0.31, 0.5, 1.0] {
            assert!((p.eval(t) - fit.x.eval(t)).abs() < 1e-12);
            assert!((c.eval(2.0 * t - 1.0) - fit.x.eval(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_reports_best_bound() {
        let s = square_boundary(400);
        match bernstein_fit_with(&s, 100, 4) {
            Err(Error::Approximation(m)) => assert!(m.contains("best sampled error"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_samples() {
        let s: Vec<_> = (0..10).map(|i| (i as f64 / 9.0, Vec2::ZERO)).collect();
        assert!(matches!(bernstein_fit(&s, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn square_corners() {
        let s = square_boundary(401);
        assert!(s[100].1.dist(Vec2::new(FRAC_PI_4, -FRAC_PI_4)) < 1e-12);
        assert!(s[400].1.dist(s[0].1) < 1e-12);
    }

    #[test]
    fn csv_samples() {
        let src = "t,x,y\n0,1,2\n1,3,4\n";
        let s = read_samples_csv(src.as_bytes()).unwrap();
        assert_eq!(s[1], (1.0, Vec2::new(3.0, 4.0)));
        assert!(matches!(read_samples_csv("t,x,y\n0,a,2\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    }
}
