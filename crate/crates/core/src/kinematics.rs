//! Driving compiled linkages, verifying the resulting motions, and the
//! constraint-projection oracle that re-derives placements independently of
//! the kinematic program.

use crate::compiler::{CompiledLinkage, Normalization, Target};
use crate::error::{Error, Result};
use crate::framework::{verify_motion, Framework, JointId, MotionPath, MotionSample, Placement, VerificationReport};
use crate::geom::Vec2;
use crate::poly::{PolyCurve, RationalCurve};
use rayon::prelude::*;
use std::collections::BTreeSet;

/// Evaluates the program at every driver vector of `schedule`. Sample i gets
/// time i/(N − 1).
pub fn simulate_schedule(cl: &CompiledLinkage, schedule: &[Vec<f64>]) -> Result<MotionPath> {
    for (i, v) in schedule.iter().enumerate() {
        cl.driver.check(v, i)?;
    }
    let n = schedule.len();
    let samples = schedule
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let pos = cl.program.eval_driven(v).map_err(|e| match e {
                Error::Geometry(m) => Error::Geometry(format!("sample {i}: {m}")),
                other => other,
            })?;
            let s = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            Ok(MotionSample { s, pos, driver: Some(v.clone()) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MotionPath { samples })
}

/// Scalar schedule helper: one driver value per sample.
pub fn scalar_schedule(values: impl IntoIterator<Item = f64>) -> Vec<Vec<f64>> {
    values.into_iter().map(|v| vec![v]).collect()
}

/// The default schedule with `n` samples: s = i/(n − 1) for slider-driven
/// linkages; for angle-driven ones the traced joint runs once around a
/// circle at 0.9 of the disc radius.
pub fn default_schedule(cl: &CompiledLinkage, n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Argument("schedule needs at least one sample".into()));
    }
    let t = |i: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
    match &cl.target {
        Target::Algebraic { radii, .. } => (0..n)
            .map(|i| {
                let p = radii.disc.center + Vec2::polar(0.9 * radii.disc.radius, 2.0 * std::f64::consts::PI * t(i));
                let (a, b) = radii.angles(cl.normalization.apply(p))?;
                Ok(vec![a, b])
            })
            .collect(),
        _ => Ok(scalar_schedule((0..n).map(t))),
    }
}

/// Largest joint speed |∂p/∂driver| (summed over driver coordinates) at the
/// schedule samples, by central differences clipped to the driver ranges.
pub fn max_speed(cl: &CompiledLinkage, schedule: &[Vec<f64>]) -> Result<f64> {
    let h = 1e-6;
    let speeds = schedule
        .par_iter()
        .map(|v| {
            let mut total: Vec<f64> = vec![0.0; cl.program.n_joints];
            for (d, (lo, hi)) in cl.driver.ranges.iter().enumerate() {
                let (mut a, mut b) = (v.clone(), v.clone());
                a[d] = (v[d] - h).max(*lo);
                b[d] = (v[d] + h).min(*hi);
                let span = b[d] - a[d];
                if span <= 0.0 {
                    continue;
                }
                let pa = cl.program.eval_driven(&a)?;
                let pb = cl.program.eval_driven(&b)?;
                for (t, (x, y)) in total.iter_mut().zip(pa.iter().zip(&pb)) {
                    *t += x.dist(*y) / span;
                }
            }
            Ok(total.into_iter().fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(speeds.into_iter().fold(0.0, f64::max))
}

/// Default continuity bound: 4 × max joint speed × largest driver step.
pub fn step_bound(cl: &CompiledLinkage, schedule: &[Vec<f64>]) -> Result<f64> {
    let spacing = schedule
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(4.0 * max_speed(cl, schedule)? * spacing)
}

/// A reference curve for trace errors.
#[derive(Debug, Clone, Copy)]
pub enum CurveRef<'a> {
    Poly(&'a PolyCurve),
    Rational(&'a RationalCurve),
    /// Samples (t, point) sorted by t, interpolated linearly.
    Sampled(&'a [(f64, Vec2)]),
}

impl CurveRef<'_> {
    pub fn eval(&self, t: f64) -> Vec2 {
        match self {
            CurveRef::Poly(c) => c.eval(t),
            CurveRef::Rational(c) => c.eval(t),
            CurveRef::Sampled(pts) => interpolate(pts, t),
        }
    }
}

fn interpolate(pts: &[(f64, Vec2)], t: f64) -> Vec2 {
    let k = pts.partition_point(|(s, _)| *s < t);
    if k == 0 {
        return pts[0].1;
    }
    if k >= pts.len() {
        return pts[pts.len() - 1].1;
    }
    let ((s0, a), (s1, b)) = (pts[k - 1], pts[k]);
    if s1 == s0 {
        return b;
    }
    a + (b - a) * ((t - s0) / (s1 - s0))
}

/// Max over samples of |de-normalized tracer position − curve(s)|, where s
/// is the sample's driver value when recorded and its time otherwise.
pub fn trace_error(path: &MotionPath, tracer: JointId, curve: CurveRef<'_>, norm: &Normalization) -> Result<f64> {
    if path.samples.is_empty() {
        return Err(Error::Argument("motion path has no samples".into()));
    }
    let mut worst: f64 = 0.0;
    for (k, m) in path.samples.iter().enumerate() {
        let p = *m
            .pos
            .get(tracer.0)
            .ok_or_else(|| Error::Precondition(format!("sample {k} has no joint {tracer}")))?;
        let s = m.driver.as_ref().and_then(|d| d.first().copied()).unwrap_or(m.s);
        worst = worst.max(norm.invert(p).dist(curve.eval(s)));
    }
    Ok(worst)
}

/// Trace error against the linkage's own target. For algebraic targets this
/// is the largest disagreement between x_L + A00 and f(pC).
pub fn linkage_trace_error(cl: &CompiledLinkage, path: &MotionPath) -> Result<f64> {
    let pc = cl.role("pC")?;
    match &cl.target {
        Target::Poly { curve } => trace_error(path, pc, CurveRef::Poly(curve), &cl.normalization),
        Target::Rational { curve } => trace_error(path, pc, CurveRef::Rational(curve), &cl.normalization),
        Target::Algebraic { .. } => crate::compiler::algebraic_consistency(cl, path),
        Target::Sampled { samples } => trace_error(path, pc, CurveRef::Sampled(samples), &cl.normalization),
    }
}

/// Full certification of a simulated path: verify_motion with the given
/// tolerance and bound, plus the trace error against the target.
pub fn verify_linkage(cl: &CompiledLinkage, path: &MotionPath, tol: f64, step_bound: f64, trace_tol: f64) -> Result<VerificationReport> {
    let mut report = verify_motion(&cl.fw, path, tol, step_bound)?;
    let err = linkage_trace_error(cl, path)?;
    report.max_trace_error = Some(err);
    if !(err <= trace_tol) {
        report.fail(format!("trace: error {err:e} exceeds {trace_tol:e}"));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub placement: Placement,
    pub iterations: usize,
    pub residual: f64,
    /// Largest joint displacement from the seed.
    pub displacement: f64,
    pub converged: bool,
}

pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_TOL: f64 = 1e-12;
/// Residual above which an unconverged run is reported as divergence.
const NEWTON_GIVE_UP: f64 = 1e-9;

/// Sparse bar-constraint Jacobian over the free coordinates.
struct Jacobian {
    /// Per bar: (column of a or usize::MAX, column of b or usize::MAX, unit a−b).
    rows: Vec<(usize, usize, Vec2)>,
    ncols: usize,
}

impl Jacobian {
    fn new(fw: &Framework, pos: &[Vec2], col: &[usize], ncols: usize) -> Jacobian {
        let rows = fw
            .bars
            .iter()
            .map(|b| {
                let d = pos[b.a.0] - pos[b.b.0];
                let u = d.unit().unwrap_or(Vec2::ZERO);
                (col[b.a.0], col[b.b.0], u)
            })
            .collect();
        Jacobian { rows, ncols }
    }

    /// J x
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|&(ca, cb, u)| {
                let mut v = 0.0;
                if ca != usize::MAX {
                    v += u.x * x[2 * ca] + u.y * x[2 * ca + 1];
                }
                if cb != usize::MAX {
                    v -= u.x * x[2 * cb] + u.y * x[2 * cb + 1];
                }
                v
            })
            .collect()
    }

    /// Jᵀ y
    fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.ncols];
        for (&(ca, cb, u), v) in self.rows.iter().zip(y) {
            if ca != usize::MAX {
                out[2 * ca] += u.x * v;
                out[2 * ca + 1] += u.y * v;
            }
            if cb != usize::MAX {
                out[2 * cb] -= u.x * v;
                out[2 * cb + 1] -= u.y * v;
            }
        }
        out
    }

    /// Minimum-norm solution of J x = r by conjugate gradients on J Jᵀ.
    fn solve_min_norm(&self, r: &[f64]) -> Vec<f64> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut x = vec![0.0; 2 * self.ncols];
        let mut res = r.to_vec();
        let mut p = res.clone();
        let mut rr = dot(&res, &res);
        let stop = rr * 1e-28;
        for _ in 0..(4 * r.len()).max(50) {
            if rr <= stop || rr == 0.0 {
                break;
            }
            let jt_p = self.apply_t(&p);
            let denom = dot(&jt_p, &jt_p);
            if denom <= 0.0 {
                break;
            }
            let alpha = rr / denom;
            for (xi, v) in x.iter_mut().zip(&jt_p) {
                *xi += alpha * v;
            }
            let q = self.apply(&jt_p);
            for (ri, v) in res.iter_mut().zip(&q) {
                *ri -= alpha * v;
            }
            let rr_new = dot(&res, &res);
            let beta = rr_new / rr;
            for (pi, v) in p.iter_mut().zip(&res) {
                *pi = v + beta * *pi;
            }
            rr = rr_new;
        }
        x
    }
}

fn bar_residuals(fw: &Framework, pos: &[Vec2]) -> Vec<f64> {
    fw.bars.iter().map(|b| pos[b.a.0].dist(pos[b.b.0]) - b.length).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Projects `approx` onto the bar-length constraint set by damped
/// minimum-norm Newton steps, keeping pinned joints and `fixed` in place.
pub fn newton_project(fw: &Framework, approx: &[Vec2], fixed: &BTreeSet<JointId>) -> Result<NewtonReport> {
    fw.validate()?;
    if approx.len() != fw.joints.len() {
        return Err(Error::Argument(format!(
            "placement has {} joints, framework {}",
            approx.len(),
            fw.joints.len()
        )));
    }
    let mut col = vec![usize::MAX; fw.joints.len()];
    let mut ncols = 0;
    for j in &fw.joints {
        if !j.pinned && !fixed.contains(&j.id) {
            col[j.id.0] = ncols;
            ncols += 1;
        }
    }
    let scale = fw.bars.iter().map(|b| b.length).fold(1.0, f64::max);
    let tol = NEWTON_TOL * scale;
    let mut pos = approx.to_vec();
    let mut r = bar_residuals(fw, &pos);
    let mut res = max_abs(&r);
    let mut iterations = 0;
    while res > tol && iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let jac = Jacobian::new(fw, &pos, &col, ncols);
        let dx = jac.solve_min_norm(&r);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = pos.clone();
            for (j, c) in col.iter().enumerate() {
                if *c != usize::MAX {
                    trial[j] = trial[j] - Vec2::new(dx[2 * c], dx[2 * c + 1]) * step;
                }
            }
            let tr = bar_residuals(fw, &trial);
            let tres = max_abs(&tr);
            if tres < res {
                pos = trial;
                r = tr;
                res = tres;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let converged = res <= tol;
    if !converged && res > NEWTON_GIVE_UP {
        return Err(Error::Divergence(format!(
            "bar residual {res:e} after {iterations} Newton iterations"
        )));
    }
    let displacement = pos.iter().zip(approx).map(|(a, b)| a.dist(*b)).fold(0.0, f64::max);
    Ok(NewtonReport { placement: pos, iterations, residual: res, displacement, converged })
}

/// Newton projection of the analytic placement for driver `v`, with the
/// driven joints held.
pub fn project_sample(cl: &CompiledLinkage, v: &[f64]) -> Result<NewtonReport> {
    let pos = cl.eval(v)?;
    let fixed = driven_joints(cl);
    newton_project(&cl.fw, &pos, &fixed)
}

/// Joints written directly from driver values.
pub fn driven_joints(cl: &CompiledLinkage) -> BTreeSet<JointId> {
    use crate::program::Step;
    cl.program
        .steps
        .iter()
        .filter_map(|s| match s {
            Step::DriveLinear { j, .. } | Step::DrivePolar { j, .. } => Some(*j),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Framework {
        let mut fw = Framework::new();
        let a = fw.add_joint(Vec2::ZERO, true);
        let b = fw.add_joint(Vec2::new(1.0, 0.0), true);
        let c = fw.add_joint(Vec2::new(0.5, 0.8), false);
        fw.add_bar(a, b);
        fw.add_bar(a, c);
        fw.add_bar(b, c);
        fw
    }

    #[test]
    fn exact_placement_is_fixed_point() {
        let fw = triangle();
        let r = newton_project(&fw, &fw.home_placement(), &BTreeSet::new()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.placement, fw.home_placement());
    }

    #[test]
    fn perturbed_joint_returns() {
        let fw = triangle();
        let mut seed = fw.home_placement();
        seed[2] = seed[2] + Vec2::new(1e-4, -0.7e-4);
        let r = newton_project(&fw, &seed, &BTreeSet::new()).unwrap();
        assert!(r.converged);
        assert!(r.placement[2].dist(fw.home_placement()[2]) < 1e-10);
    }

    #[test]
    fn impossible_elbow_diverges() {
        let mut fw = Framework::new();
        let a = fw.add_joint(Vec2::ZERO, true);
        let b = fw.add_joint(Vec2::new(2.000001, 0.0), true);
        let c = fw.add_joint(Vec2::new(1.0, 0.0), false);
        fw.bars.push(crate::framework::Bar { a, b: c, length: 1.0 });
        fw.bars.push(crate::framework::Bar { a: c, b, length: 1.0 });
        let mut seed = fw.home_placement();
        seed[2] = Vec2::new(1.0, 0.5);
        assert!(matches!(newton_project(&fw, &seed, &BTreeSet::new()), Err(Error::Divergence(_))));
    }

    #[test]
    fn interpolation() {
        let pts = [(0.0, Vec2::ZERO), (1.0, Vec2::new(2.0, 0.0))];
        assert_eq!(interpolate(&pts, 0.25), Vec2::new(0.5, 0.0));
        assert_eq!(interpolate(&pts, 2.0), Vec2::new(2.0, 0.0));
    }
}
