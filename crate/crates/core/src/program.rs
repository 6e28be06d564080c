//! Kinematic programs: ordered placement rules that realize the intended
//! motion of a compiled framework, and the builder that assembles a
//! framework together with its program.

use crate::error::{Error, Result};
use crate::framework::{Framework, JointId, Placement};
use crate::geom::{circle_intersection, line_intersection, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which of the two circle intersections an elbow takes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Branch {
    /// Positive signed area of (p, q, joint).
    Ccw,
    Cw,
    /// The solution on the side of the chord that `n` points to. Used when
    /// the chord keeps a fixed direction but may shrink to zero or reverse.
    Toward([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Length {
    Const(f64),
    Dist(JointId, JointId),
}

/// One placement rule. Each step writes the joint(s) it names from joints
/// written by earlier steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum Step {
    Fixed { j: JointId, pos: Vec2 },
    /// `origin + dir * driver[index]`.
    DriveLinear { j: JointId, origin: Vec2, dir: Vec2, index: usize },
    /// `center + radius * (cos, sin)(driver[index])`.
    DrivePolar { j: JointId, center: Vec2, radius: f64, index: usize },
    /// Position supplied by the caller under `role`.
    Input { j: JointId, role: String },
    /// Intersection of circle(p, rp) and circle(q, rq).
    Elbow { j: JointId, p: JointId, q: JointId, rp: f64, rq: f64, branch: Branch },
    /// Circle intersection taking the solution farther from
    /// `avoid.1 + avoid.2 - avoid.0`, the parallelogram completion.
    AntiElbow { j: JointId, p: JointId, q: JointId, rp: f64, rq: f64, avoid: (JointId, JointId, JointId) },
    /// `base + to - from`.
    Translate { j: JointId, base: JointId, from: JointId, to: JointId },
    /// `a + along*(b-a) + across*perp(b-a)`.
    Rigid { j: JointId, a: JointId, b: JointId, along: f64, across: f64 },
    /// Point on the ray origin→toward at distance `len`.
    Polar { j: JointId, origin: JointId, toward: JointId, len: Length },
    /// Point at `radius` on the bisector of rays origin→p and origin→q.
    Bisector { j: JointId, origin: JointId, p: JointId, q: JointId, radius: f64 },
    /// Point on the ray origin→toward at distance `radius` from `center`
    /// (positive root farthest along the ray).
    RayCircle { j: JointId, origin: JointId, toward: JointId, center: JointId, radius: f64 },
    /// Intersection of the line through p1 along d1.0→d1.1 with the line
    /// through p2 along d2.0→d2.1.
    Intersect { j: JointId, p1: JointId, d1: (JointId, JointId), p2: JointId, d2: (JointId, JointId) },
    /// Inversion of q in the circle about `center` with constant `k`.
    Inverse { j: JointId, center: JointId, q: JointId, k: f64 },
    /// Pivot and hub of a floating Peaucellier frame: the designated joints
    /// lie on a line with direction dir_a→dir_b; the pivot sits at distance
    /// `h` from the centroid of their projections, the hub at `d` further.
    LinFrame { pivot: JointId, hub: JointId, dir_a: JointId, dir_b: JointId, designated: Vec<JointId>, h: f64, d: f64 },
    RotateAbout { j: JointId, center: JointId, src: JointId, angle: f64 },
    /// Rotates `src` about `center` by the angle from center→from to center→to.
    RotateLike { j: JointId, center: JointId, src: JointId, from: JointId, to: JointId },
    /// A point whose `coord` (0 = x, 1 = y) is the preferred joint's value
    /// clamped into the intersection of the windows `source ± radius`; the
    /// other coordinate is `other`.
    Consensus { j: JointId, coord: usize, sources: Vec<(JointId, f64)>, preferred: JointId, other: f64 },
}

impl Step {
    /// Joints written by this step.
    pub fn outputs(&self) -> Vec<JointId> {
        use Step::*;
        match self {
            Fixed { j, .. }
            | DriveLinear { j, .. }
            | DrivePolar { j, .. }
            | Input { j, .. }
            | Elbow { j, .. }
            | AntiElbow { j, .. }
            | Translate { j, .. }
            | Rigid { j, .. }
            | Polar { j, .. }
            | Bisector { j, .. }
            | RayCircle { j, .. }
            | Intersect { j, .. }
            | Inverse { j, .. }
            | RotateAbout { j, .. }
            | RotateLike { j, .. }
            | Consensus { j, .. } => vec![*j],
            LinFrame { pivot, hub, .. } => vec![*pivot, *hub],
        }
    }

    /// Joints read by this step.
    pub fn inputs(&self) -> Vec<JointId> {
        use Step::*;
        match self {
            Fixed { .. } | DriveLinear { .. } | DrivePolar { .. } | Input { .. } => vec![],
            Elbow { p, q, .. } => vec![*p, *q],
            AntiElbow { p, q, avoid, .. } => vec![*p, *q, avoid.0, avoid.1, avoid.2],
            Translate { base, from, to, .. } => vec![*base, *from, *to],
            Rigid { a, b, .. } => vec![*a, *b],
            Polar { origin, toward, len, .. } => {
                let mut v = vec![*origin, *toward];
                if let Length::Dist(a, b) = len {
                    v.extend([*a, *b]);
                }
                v
            }
            Bisector { origin, p, q, .. } => vec![*origin, *p, *q],
            RayCircle { origin, toward, center, .. } => vec![*origin, *toward, *center],
            Intersect { p1, d1, p2, d2, .. } => vec![*p1, d1.0, d1.1, *p2, d2.0, d2.1],
            Inverse { center, q, .. } => vec![*center, *q],
            LinFrame { dir_a, dir_b, designated, .. } => {
                let mut v = vec![*dir_a, *dir_b];
                v.extend(designated);
                v
            }
            RotateAbout { center, src, .. } => vec![*center, *src],
            RotateLike { center, src, from, to, .. } => vec![*center, *src, *from, *to],
            Consensus { sources, preferred, .. } => {
                let mut v: Vec<JointId> = sources.iter().map(|s| s.0).collect();
                v.push(*preferred);
                v
            }
        }
    }
}

fn geo(step: usize, msg: impl std::fmt::Display) -> Error {
    Error::Geometry(format!("step {step}: {msg}"))
}

fn unit(v: Vec2, step: usize, what: &str) -> Result<Vec2> {
    v.unit().ok_or_else(|| geo(step, format!("{what} is degenerate")))
}

/// Applies one step to `pos`, which must already be long enough to hold
/// every joint the step writes.
pub fn apply(
    k: usize,
    step: &Step,
    pos: &mut [Vec2],
    drivers: &[f64],
    inputs: &BTreeMap<String, Vec2>,
) -> Result<()> {
    use Step::*;
    let p = |j: &JointId| pos[j.0];
    let out = match step {
        Fixed { pos: at, .. } => *at,
        DriveLinear { origin, dir, index, .. } => {
            let t = *drivers
                .get(*index)
                .ok_or_else(|| Error::Argument(format!("missing driver value {index}")))?;
            *origin + *dir * t
        }
        DrivePolar { center, radius, index, .. } => {
            let t = *drivers
                .get(*index)
                .ok_or_else(|| Error::Argument(format!("missing driver value {index}")))?;
            *center + Vec2::polar(*radius, t)
        }
        Input { role, .. } => *inputs
            .get(role)
            .ok_or_else(|| Error::Argument(format!("missing input role {role:?}")))?,
        Elbow { p: a, q: b, rp, rq, branch: Branch::Toward(n), .. } => {
            // The chord is known to lie along the line perpendicular to n, so
            // only its signed length is used; this stays well defined when
            // the chord shrinks to zero or reverses.
            let n = unit(Vec2::from(*n), k, "elbow normal")?;
            let u = Vec2::new(n.y, -n.x);
            let l = (p(b) - p(a)).dot(u);
            let along = if l == 0.0 {
                if (rp - rq).abs() > 1e-12 * rp.max(*rq) {
                    return Err(geo(k, "elbow unreachable: coincident ends with unequal arms"));
                }
                0.0
            } else {
                (l * l + rp * rp - rq * rq) / (2.0 * l)
            };
            let h2 = rp * rp - along * along;
            if h2 < -1e-9 * rp * rp {
                return Err(geo(k, format!("elbow unreachable: |pq| = {} with radii {rp}, {rq}", l.abs())));
            }
            p(a) + u * along + n * h2.max(0.0).sqrt()
        }
        Elbow { p: a, q: b, rp, rq, branch, .. } => {
            let (foot, off) = circle_intersection(p(a), *rp, p(b), *rq).ok_or_else(|| {
                geo(k, format!("elbow unreachable: |pq| = {} with radii {rp}, {rq}", p(a).dist(p(b))))
            })?;
            let sign = if *branch == Branch::Cw { -1.0 } else { 1.0 };
            foot + off * sign
        }
        AntiElbow { p: a, q: b, rp, rq, avoid, .. } => {
            let (foot, off) = circle_intersection(p(a), *rp, p(b), *rq)
                .ok_or_else(|| geo(k, "anti-elbow unreachable"))?;
            let bad = p(&avoid.1) + p(&avoid.2) - p(&avoid.0);
            let (s1, s2) = (foot + off, foot - off);
            if s1.dist(bad) >= s2.dist(bad) {
                s1
            } else {
                s2
            }
        }
        Translate { base, from, to, .. } => p(base) + p(to) - p(from),
        Rigid { a, b, along, across, .. } => {
            let d = p(b) - p(a);
            p(a) + d * *along + d.perp() * *across
        }
        Polar { origin, toward, len, .. } => {
            let o = p(origin);
            let u = unit(p(toward) - o, k, "polar ray")?;
            let l = match len {
                Length::Const(c) => *c,
                Length::Dist(a, b) => p(a).dist(p(b)),
            };
            o + u * l
        }
        Bisector { origin, p: a, q: b, radius, .. } => {
            let o = p(origin);
            let u = unit(p(a) - o, k, "bisector ray")? + unit(p(b) - o, k, "bisector ray")?;
            o + unit(u, k, "bisector of opposite rays")? * *radius
        }
        RayCircle { origin, toward, center, radius, .. } => {
            let o = p(origin);
            let u = unit(p(toward) - o, k, "ray")?;
            let w = o - p(center);
            let bq = w.dot(u);
            let disc = bq * bq - (w.norm2() - radius * radius);
            if disc < 0.0 {
                return Err(geo(k, "ray misses circle"));
            }
            o + u * (-bq + disc.sqrt())
        }
        Intersect { p1, d1, p2, d2, .. } => {
            line_intersection(p(p1), p(&d1.1) - p(&d1.0), p(p2), p(&d2.1) - p(&d2.0))
                .ok_or_else(|| geo(k, "parallel lines"))?
        }
        Inverse { center, q, k: kk, .. } => {
            let c = p(center);
            let d = p(q) - c;
            let n2 = d.norm2();
            if n2 == 0.0 {
                return Err(geo(k, "inversion of the center"));
            }
            c + d * (*kk / n2)
        }
        LinFrame { pivot, hub, dir_a, dir_b, designated, h, d, .. } => {
            let a = p(dir_a);
            let u = unit(p(dir_b) - a, k, "lineariser direction")?;
            let mean = designated.iter().map(|q| (p(q) - a).dot(u)).sum::<f64>()
                / designated.len() as f64;
            let foot = a + u * mean;
            let n = u.perp();
            let pv = foot - n * *h;
            pos[pivot.0] = pv;
            pos[hub.0] = pv + n * *d;
            return Ok(());
        }
        RotateAbout { center, src, angle, .. } => {
            let c = p(center);
            c + (p(src) - c).rotate(*angle)
        }
        RotateLike { center, src, from, to, .. } => {
            let c = p(center);
            let ang = (p(to) - c).angle() - (p(from) - c).angle();
            c + (p(src) - c).rotate(ang)
        }
        Consensus { coord, sources, preferred, other, .. } => {
            let get = |v: Vec2| if *coord == 0 { v.x } else { v.y };
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for (src, r) in sources {
                lo = lo.max(get(p(src)) - r);
                hi = hi.min(get(p(src)) + r);
            }
            if lo > hi {
                return Err(geo(k, format!("tether windows do not overlap ({lo} > {hi})")));
            }
            let c = get(p(preferred)).clamp(lo, hi);
            if *coord == 0 {
                Vec2::new(c, *other)
            } else {
                Vec2::new(*other, c)
            }
        }
    };
    if !out.is_finite() {
        return Err(geo(k, "non-finite position"));
    }
    let j = step.outputs()[0];
    pos[j.0] = out;
    Ok(())
}

/// Ordered placement plan for a framework.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicProgram {
    pub steps: Vec<Step>,
    pub n_joints: usize,
    /// Number of scalar driver values consumed.
    pub driver_dim: usize,
}

impl KinematicProgram {
    pub fn eval(&self, drivers: &[f64], inputs: &BTreeMap<String, Vec2>) -> Result<Placement> {
        let mut pos = vec![Vec2::new(f64::NAN, f64::NAN); self.n_joints];
        for (k, step) in self.steps.iter().enumerate() {
            apply(k, step, &mut pos, drivers, inputs)?;
        }
        Ok(pos)
    }

    /// Evaluates a program that takes only driver values.
    pub fn eval_driven(&self, drivers: &[f64]) -> Result<Placement> {
        self.eval(drivers, &BTreeMap::new())
    }

    /// Checks that every step reads only joints written earlier and that
    /// every joint is written exactly once.
    pub fn check_order(&self) -> Result<()> {
        let mut written = vec![false; self.n_joints];
        for (k, step) in self.steps.iter().enumerate() {
            for j in step.inputs() {
                if !written.get(j.0).copied().unwrap_or(false) {
                    return Err(Error::Structural(format!("step {k} reads joint {j} before it is placed")));
                }
            }
            for j in step.outputs() {
                match written.get_mut(j.0) {
                    Some(w) if !*w => *w = true,
                    _ => return Err(Error::Structural(format!("step {k} rewrites joint {j}"))),
                }
            }
        }
        if let Some(j) = written.iter().position(|w| !w) {
            return Err(Error::Structural(format!("joint {j} is never placed")));
        }
        Ok(())
    }
}

/// Assembles a framework and its program together. Every step is evaluated
/// immediately on a set of sample rows (row 0 is the home configuration),
/// so later constructions can size themselves from the range of motion
/// actually exercised, and every bar is checked against all rows.
pub struct Builder {
    pub fw: Framework,
    steps: Vec<Step>,
    rows: Vec<Vec<Vec2>>,
    drivers: Vec<Vec<f64>>,
    inputs: Vec<BTreeMap<String, Vec2>>,
    ground: Vec<JointId>,
    is_ground: Vec<bool>,
    driver_dim: usize,
}

/// Relative tolerance of the build-time bar check across sample rows.
const ROW_TOL: f64 = 1e-8;

impl Builder {
    /// `drivers[r]` and `inputs[r]` describe sample row r; the shorter list
    /// is padded with empty entries.
    pub fn new(drivers: Vec<Vec<f64>>, inputs: Vec<BTreeMap<String, Vec2>>) -> Self {
        let n = drivers.len().max(inputs.len()).max(1);
        let driver_dim = drivers.iter().map(Vec::len).max().unwrap_or(0);
        let mut drivers = drivers;
        let mut inputs = inputs;
        drivers.resize(n, Vec::new());
        inputs.resize(n, BTreeMap::new());
        Builder {
            fw: Framework::new(),
            steps: Vec::new(),
            rows: vec![Vec::new(); n],
            drivers,
            inputs,
            ground: Vec::new(),
            is_ground: Vec::new(),
            driver_dim,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn pos(&self, row: usize, j: JointId) -> Vec2 {
        self.rows[row][j.0]
    }

    pub fn home(&self, j: JointId) -> Vec2 {
        self.rows[0][j.0]
    }

    /// Positions of `j` over all rows.
    pub fn track(&self, j: JointId) -> impl Iterator<Item = Vec2> + '_ {
        self.rows.iter().map(move |r| r[j.0])
    }

    pub fn max_dist(&self, a: JointId, b: JointId) -> f64 {
        self.rows.iter().map(|r| r[a.0].dist(r[b.0])).fold(0.0, f64::max)
    }

    pub fn min_dist(&self, a: JointId, b: JointId) -> f64 {
        self.rows.iter().map(|r| r[a.0].dist(r[b.0])).fold(f64::INFINITY, f64::min)
    }

    pub fn is_ground(&self, j: JointId) -> bool {
        self.is_ground.get(j.0).copied().unwrap_or(false)
    }

    fn alloc(&mut self, count: usize) -> Vec<JointId> {
        let start = self.fw.joints.len();
        for _ in 0..count {
            self.fw.add_joint(Vec2::ZERO, false);
            self.is_ground.push(false);
        }
        for row in &mut self.rows {
            row.resize(start + count, Vec2::new(f64::NAN, f64::NAN));
        }
        (start..start + count).map(JointId).collect()
    }

    /// Appends a step whose outputs were obtained from `alloc`.
    fn run(&mut self, step: Step) -> Result<()> {
        let k = self.steps.len();
        for r in 0..self.rows.len() {
            apply(k, &step, &mut self.rows[r], &self.drivers[r], &self.inputs[r])
                .map_err(|e| match e {
                    Error::Geometry(m) => Error::Geometry(format!("{m} (sample row {r})")),
                    other => other,
                })?;
        }
        for j in step.outputs() {
            let h = self.rows[0][j.0];
            self.fw.joints[j.0].x = h.x;
            self.fw.joints[j.0].y = h.y;
        }
        self.steps.push(step);
        Ok(())
    }

    /// Adds a single-output step built by `make` from the fresh joint id.
    pub fn step(&mut self, make: impl FnOnce(JointId) -> Step) -> Result<JointId> {
        let j = self.alloc(1)[0];
        self.run(make(j))?;
        Ok(j)
    }

    pub fn pin(&mut self, pos: Vec2) -> JointId {
        let j = self
            .step(|j| Step::Fixed { j, pos })
            .expect("fixed steps cannot fail");
        self.fw.joints[j.0].pinned = true;
        self.is_ground[j.0] = true;
        self.ground.push(j);
        j
    }

    /// A motionless joint at `pos`, braced by two bars to earlier motionless
    /// joints (a triangle strip, so valency stays bounded). Becomes a pin when
    /// no non-degenerate anchor pair exists.
    pub fn fixed(&mut self, pos: Vec2) -> JointId {
        let anchor = self.anchor_pair(pos);
        match anchor {
            None => self.pin(pos),
            Some((g1, g2)) => {
                let j = self
                    .step(|j| Step::Fixed { j, pos })
                    .expect("fixed steps cannot fail");
                self.is_ground[j.0] = true;
                self.ground.push(j);
                self.fw.add_bar(j, g1);
                self.fw.add_bar(j, g2);
                j
            }
        }
    }

    fn anchor_pair(&self, pos: Vec2) -> Option<(JointId, JointId)> {
        let ok = |a: JointId, b: JointId| {
            let (u, v) = (self.home(a) - pos, self.home(b) - pos);
            let (nu, nv) = (u.norm(), v.norm());
            nu > 1e-6 && nv > 1e-6 && (u.cross(v) / (nu * nv)).abs() > 0.05
        };
        // Most recent first, so anchors stay local and no ground joint
        // collects bars from every later construction.
        let recent: Vec<JointId> = self.ground.iter().rev().copied().collect();
        for i in 0..recent.len() {
            for k in i + 1..recent.len() {
                if ok(recent[i], recent[k]) {
                    return Some((recent[i], recent[k]));
                }
            }
        }
        None
    }

    /// Adds a bar after checking that its length agrees on every sample row.
    pub fn bar(&mut self, a: JointId, b: JointId) -> Result<()> {
        let len = self.home(a).dist(self.home(b));
        if !(len > 0.0) {
            return Err(Error::Geometry(format!("zero-length bar {a}-{b}")));
        }
        for (r, row) in self.rows.iter().enumerate() {
            let d = row[a.0].dist(row[b.0]);
            if (d - len).abs() > ROW_TOL * len.max(1.0) {
                return Err(Error::Geometry(format!(
                    "bar {a}-{b} changes length on sample row {r}: {len} vs {d}"
                )));
            }
        }
        self.fw.add_bar(a, b);
        Ok(())
    }

    pub fn label(&mut self, role: &str, j: JointId) {
        self.fw.labels.insert(role.to_string(), j);
    }

    pub fn input(&mut self, role: &str) -> Result<JointId> {
        let role = role.to_string();
        let j = self.step(|j| Step::Input { j, role: role.clone() })?;
        self.label(&role, j);
        Ok(j)
    }

    /// A two-bar elbow with an explicit branch.
    pub fn elbow(&mut self, p: JointId, q: JointId, rp: f64, rq: f64, branch: Branch) -> Result<JointId> {
        let j = self.step(|j| Step::Elbow { j, p, q, rp, rq, branch })?;
        self.bar(j, p)?;
        self.bar(j, q)?;
        Ok(j)
    }

    /// Chooses a continuous branch for an elbow on chord p→q from the sampled
    /// chords: a fixed side normal when the chords are all parallel (they may
    /// then vanish or reverse), otherwise the signed-area branch, which
    /// requires the chord never to vanish.
    pub fn branch_for(&self, p: JointId, q: JointId, ccw: bool) -> Result<Branch> {
        let chords: Vec<Vec2> = self.rows.iter().map(|r| r[q.0] - r[p.0]).collect();
        let lmax = chords.iter().map(|c| c.norm()).fold(0.0, f64::max);
        // Orientation reference: the first sampled chord of substantial length.
        let longest = chords.iter().copied().find(|c| c.norm() >= 0.5 * lmax).unwrap();
        let sign = if ccw { 1.0 } else { -1.0 };
        if lmax < 1e-12 {
            return Ok(Branch::Toward([0.0, sign]));
        }
        let u = longest.unit().unwrap();
        let parallel = chords.iter().all(|c| c.cross(u).abs() <= 1e-9 * c.norm().max(1.0));
        if parallel {
            let n = u.perp() * sign;
            return Ok(Branch::Toward([n.x, n.y]));
        }
        let lmin = chords.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
        if lmin <= 1e-6 * lmax {
            return Err(Error::Geometry(format!(
                "elbow chord {p}-{q} both rotates and vanishes; no continuous branch"
            )));
        }
        Ok(if ccw { Branch::Ccw } else { Branch::Cw })
    }

    pub fn elbow_auto(&mut self, p: JointId, q: JointId, rp: f64, rq: f64) -> Result<JointId> {
        let branch = self.branch_for(p, q, true)?;
        self.elbow(p, q, rp, rq, branch)
    }

    /// A joint rigidly attached to bar a–b, held by bars to both ends.
    pub fn rigid(&mut self, a: JointId, b: JointId, along: f64, across: f64) -> Result<JointId> {
        let j = self.step(|j| Step::Rigid { j, a, b, along, across })?;
        self.bar(j, a)?;
        self.bar(j, b)?;
        Ok(j)
    }

    /// Joint on the ray origin→toward at constant distance, rigidly held by
    /// colinear bars to both.
    pub fn on_ray(&mut self, origin: JointId, toward: JointId, len: f64) -> Result<JointId> {
        let r = self.home(origin).dist(self.home(toward));
        if (r - len).abs() <= 1e-12 * r.max(1.0) {
            return Ok(toward);
        }
        self.rigid(origin, toward, len / r, 0.0)
    }

    /// Prismatic brace of parallelogram a,b,c,d (sides ab, bc, cd, da):
    /// midpoints of ab and cd joined by a bar of length |ad|.
    pub fn brace(&mut self, a: JointId, b: JointId, c: JointId, d: JointId) -> Result<()> {
        let m1 = self.rigid(a, b, 0.5, 0.0)?;
        let m2 = self.rigid(c, d, 0.5, 0.0)?;
        self.bar(m1, m2)
    }

    pub fn finish(self) -> (Framework, KinematicProgram) {
        let program = KinematicProgram {
            n_joints: self.fw.joints.len(),
            steps: self.steps,
            driver_dim: self.driver_dim,
        };
        (self.fw, program)
    }

    /// Adds a raw multi-output step (used for lineariser frames).
    pub fn lin_frame(
        &mut self,
        dir_a: JointId,
        dir_b: JointId,
        designated: Vec<JointId>,
        h: f64,
        d: f64,
    ) -> Result<(JointId, JointId)> {
        let ids = self.alloc(2);
        let (pivot, hub) = (ids[0], ids[1]);
        self.run(Step::LinFrame { pivot, hub, dir_a, dir_b, designated, h, d })?;
        Ok((pivot, hub))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anti_elbow_avoids_parallelogram() {
        let mut b = Builder::new(vec![vec![]], vec![]);
        let o = b.pin(Vec2::ZERO);
        let a = b.pin(Vec2::new(2.0, 0.0));
        let c = b.step(|j| Step::Fixed { j, pos: Vec2::polar(1.0, 0.4) }).unwrap();
        let x = b
            .step(|j| Step::AntiElbow { j, p: a, q: c, rp: 1.0, rq: 2.0, avoid: (o, a, c) })
            .unwrap();
        let para = b.home(a) + b.home(c);
        assert!(b.home(x).dist(para) > 0.1);
        assert!((b.home(x).dist(b.home(a)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn toward_branch_survives_reversal() {
        let drivers = vec![vec![0.5], vec![0.0], vec![-0.5]];
        let mut b = Builder::new(drivers, vec![]);
        let o = b.pin(Vec2::ZERO);
        let q = b
            .step(|j| Step::DriveLinear { j, origin: Vec2::ZERO, dir: Vec2::new(1.0, 0.0), index: 0 })
            .unwrap();
        let x = b.elbow_auto(o, q, 1.0, 1.0).unwrap();
        for p in b.track(x) {
            assert!(p.y > 0.9);
        }
    }

    #[test]
    fn bar_check_catches_inconsistent_rows() {
        let mut b = Builder::new(vec![vec![0.0], vec![1.0]], vec![]);
        let o = b.pin(Vec2::ZERO);
        let q = b
            .step(|j| Step::DriveLinear { j, origin: Vec2::new(1.0, 0.0), dir: Vec2::new(1.0, 0.0), index: 0 })
            .unwrap();
        assert!(matches!(b.bar(o, q), Err(Error::Geometry(_))));
    }

    #[test]
    fn order_check() {
        let mut b = Builder::new(vec![vec![]], vec![]);
        let o = b.pin(Vec2::ZERO);
        let _ = b.fixed(Vec2::new(1.0, 0.0));
        let _ = b.rigid(o, JointId(1), 0.5, 0.5).unwrap();
        let (_, prog) = b.finish();
        prog.check_order().unwrap();
    }
}
