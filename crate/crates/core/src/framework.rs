//! Pinned planar bar-joint frameworks: representation, consistency checks,
//! motion verification and infinitesimal rigidity.

use crate::error::{Error, Result};
use crate::geom::Vec2;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

/// Default absolute tolerance for home-position consistency.
pub const TOL_BUILD: f64 = 1e-9;
/// Default absolute tolerance for bar preservation along a motion.
pub const TOL_MOTION: f64 = 1e-8;
/// Relative threshold for the rank decision of the rigidity matrix.
pub const RANK_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointId(pub usize);

impl std::fmt::Display for JointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub id: JointId,
    pub x: f64,
    pub y: f64,
    pub pinned: bool,
}

impl Joint {
    pub fn home(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub a: JointId,
    pub b: JointId,
    pub length: f64,
}

/// A placement assigns a position to every joint, indexed by joint id.
pub type Placement = Vec<Vec2>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Framework {
    pub joints: Vec<Joint>,
    pub bars: Vec<Bar>,
    #[serde(default)]
    pub labels: BTreeMap<String, JointId>,
}

impl Framework {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_joint(&mut self, home: Vec2, pinned: bool) -> JointId {
        let id = JointId(self.joints.len());
        self.joints.push(Joint {
            id,
            x: home.x,
            y: home.y,
            pinned,
        });
        id
    }

    /// Adds a bar whose length is the current home distance.
    pub fn add_bar(&mut self, a: JointId, b: JointId) -> &Bar {
        let length = self.joints[a.0].home().dist(self.joints[b.0].home());
        self.bars.push(Bar { a, b, length });
        self.bars.last().unwrap()
    }

    pub fn label(&self, role: &str) -> Result<JointId> {
        self.labels
            .get(role)
            .copied()
            .ok_or_else(|| Error::Structural(format!("unknown label {role:?}")))
    }

    pub fn home_placement(&self) -> Placement {
        self.joints.iter().map(Joint::home).collect()
    }

    pub fn pinned(&self) -> impl Iterator<Item = JointId> + '_ {
        self.joints.iter().filter(|j| j.pinned).map(|j| j.id)
    }

    /// Checks that ids are dense, bars reference existing distinct joints
    /// and labels resolve.
    pub fn validate(&self) -> Result<()> {
        for (i, j) in self.joints.iter().enumerate() {
            if j.id.0 != i {
                return Err(Error::Structural(format!(
                    "joint at index {i} has id {}; ids must be dense",
                    j.id
                )));
            }
            if !j.home().is_finite() {
                return Err(Error::Structural(format!("joint {i} has a non-finite home")));
            }
        }
        let n = self.joints.len();
        for (k, bar) in self.bars.iter().enumerate() {
            if bar.a.0 >= n || bar.b.0 >= n {
                return Err(Error::Structural(format!(
                    "bar {k} references absent joint ({} - {})",
                    bar.a, bar.b
                )));
            }
            if bar.a == bar.b {
                return Err(Error::Structural(format!("bar {k} is a loop at joint {}", bar.a)));
            }
            if !(bar.length > 0.0 && bar.length.is_finite()) {
                return Err(Error::Structural(format!(
                    "bar {k} has non-positive length {}",
                    bar.length
                )));
            }
        }
        for (role, id) in &self.labels {
            if id.0 >= n {
                return Err(Error::Structural(format!("label {role:?} points at absent joint {id}")));
            }
        }
        Ok(())
    }

    /// Number of bars incident to each joint.
    pub fn valency(&self) -> Vec<usize> {
        let mut v = vec![0; self.joints.len()];
        for bar in &self.bars {
            v[bar.a.0] += 1;
            v[bar.b.0] += 1;
        }
        v
    }

    pub fn max_valency(&self) -> usize {
        self.valency().into_iter().max().unwrap_or(0)
    }

    /// Largest bar-length violation of `placement`.
    pub fn bar_residual(&self, placement: &[Vec2]) -> f64 {
        self.bars
            .iter()
            .map(|b| (placement[b.a.0].dist(placement[b.b.0]) - b.length).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let fw: Framework = serde_json::from_str(s)?;
        fw.validate()?;
        Ok(fw)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub max_bar_residual: f64,
    pub max_step_displacement: f64,
    pub max_trace_error: Option<f64>,
    pub pass: bool,
    /// Named invariants that failed, empty when `pass` holds.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl VerificationReport {
    pub fn fail(&mut self, what: impl Into<String>) {
        self.pass = false;
        self.failures.push(what.into());
    }
}

/// Measures bar-length agreement of the home placement.
pub fn check_consistency(fw: &Framework) -> Result<VerificationReport> {
    check_consistency_tol(fw, TOL_BUILD)
}

pub fn check_consistency_tol(fw: &Framework, tol: f64) -> Result<VerificationReport> {
    fw.validate()?;
    let residual = fw.bar_residual(&fw.home_placement());
    let mut report = VerificationReport {
        max_bar_residual: residual,
        pass: true,
        ..Default::default()
    };
    if !(residual <= tol) {
        report.fail(format!("bar residual {residual:e} exceeds {tol:e}"));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSample {
    /// Time parameter in [0, 1].
    pub s: f64,
    pub pos: Placement,
    /// Driver values that produced this sample, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driver: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotionPath {
    pub samples: Vec<MotionSample>,
}

#[derive(Serialize, Deserialize)]
struct WireSample {
    s: f64,
    pos: BTreeMap<String, [f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    driver: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct WirePath {
    samples: Vec<WireSample>,
}

impl MotionPath {
    pub fn to_json(&self) -> Result<String> {
        let wire = WirePath {
            samples: self
                .samples
                .iter()
                .map(|m| WireSample {
                    s: m.s,
                    pos: m
                        .pos
                        .iter()
                        .enumerate()
                        .map(|(i, p)| (i.to_string(), [p.x, p.y]))
                        .collect(),
                    driver: m.driver.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&wire)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: WirePath = serde_json::from_str(s)?;
        let mut samples = Vec::with_capacity(wire.samples.len());
        for (k, w) in wire.samples.into_iter().enumerate() {
            let mut pos = vec![Vec2::new(f64::NAN, f64::NAN); w.pos.len()];
            for (key, xy) in w.pos {
                let id: usize = key
                    .parse()
                    .map_err(|_| Error::Argument(format!("sample {k}: bad joint key {key:?}")))?;
                if id >= pos.len() {
                    return Err(Error::Argument(format!(
                        "sample {k}: joint ids must be dense, found {id}"
                    )));
                }
                pos[id] = Vec2::from(xy);
            }
            samples.push(MotionSample {
                s: w.s,
                pos,
                driver: w.driver,
            });
        }
        Ok(MotionPath { samples })
    }

    /// Writes rows `s,joint,x,y`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["s", "joint", "x", "y"])?;
        for m in &self.samples {
            for (i, p) in m.pos.iter().enumerate() {
                out.write_record(&[
                    m.s.to_string(),
                    i.to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads rows `s,joint,x,y`; consecutive rows with equal `s` form one sample.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            s: f64,
            joint: usize,
            x: f64,
            y: f64,
        }
        let mut rdr = csv::Reader::from_reader(r);
        let mut samples: Vec<MotionSample> = Vec::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let fresh = samples.last().map_or(true, |m| m.s != row.s);
            if fresh {
                samples.push(MotionSample {
                    s: row.s,
                    pos: Vec::new(),
                    driver: None,
                });
            }
            let pos = &mut samples.last_mut().unwrap().pos;
            if pos.len() <= row.joint {
                pos.resize(row.joint + 1, Vec2::new(f64::NAN, f64::NAN));
            }
            pos[row.joint] = Vec2::new(row.x, row.y);
        }
        Ok(MotionPath { samples })
    }
}

/// Certifies a sampled motion: bars preserved within `tol`, pins fixed and
/// consecutive samples no further apart than `step_bound`.
pub fn verify_motion(
    fw: &Framework,
    path: &MotionPath,
    tol: f64,
    step_bound: f64,
) -> Result<VerificationReport> {
    fw.validate()?;
    if path.samples.is_empty() {
        return Err(Error::Argument("motion path has no samples".into()));
    }
    let n = fw.joints.len();
    let mut report = VerificationReport {
        pass: true,
        ..Default::default()
    };
    let mut worst_pin: f64 = 0.0;
    for (k, m) in path.samples.iter().enumerate() {
        if m.pos.len() != n || m.pos.iter().any(|p| !p.is_finite()) {
            return Err(Error::Precondition(format!(
                "sample {k} does not cover all {n} joints"
            )));
        }
        report.max_bar_residual = report.max_bar_residual.max(fw.bar_residual(&m.pos));
        for j in fw.joints.iter().filter(|j| j.pinned) {
            worst_pin = worst_pin.max(m.pos[j.id.0].dist(j.home()));
        }
        if k > 0 {
            let prev = &path.samples[k - 1];
            if !(m.s > prev.s) {
                report.fail(format!("sample times not strictly increasing at sample {k}"));
            }
            let step = m
                .pos
                .iter()
                .zip(&prev.pos)
                .map(|(a, b)| a.dist(*b))
                .fold(0.0, f64::max);
            report.max_step_displacement = report.max_step_displacement.max(step);
        }
    }
    if !(report.max_bar_residual <= tol) {
        let r = report.max_bar_residual;
        report.fail(format!("bars: residual {r:e} exceeds {tol:e}"));
    }
    if !(worst_pin <= tol) {
        report.fail(format!("pins: pinned joint moved by {worst_pin:e}"));
    }
    if !(report.max_step_displacement <= step_bound) {
        let d = report.max_step_displacement;
        report.fail(format!("continuity: step {d:e} exceeds bound {step_bound:e}"));
    }
    Ok(report)
}

/// Rigidity matrix over the free (unpinned) coordinates, one row per bar.
pub fn rigidity_matrix(fw: &Framework, placement: &[Vec2]) -> DMatrix<f64> {
    let mut col = vec![usize::MAX; fw.joints.len()];
    let mut free = 0;
    for j in &fw.joints {
        if !j.pinned {
            col[j.id.0] = free;
            free += 1;
        }
    }
    let mut m = DMatrix::zeros(fw.bars.len(), 2 * free);
    for (r, bar) in fw.bars.iter().enumerate() {
        let d = placement[bar.a.0] - placement[bar.b.0];
        for (joint, sign) in [(bar.a, 1.0), (bar.b, -1.0)] {
            let c = col[joint.0];
            if c != usize::MAX {
                m[(r, 2 * c)] = sign * d.x;
                m[(r, 2 * c + 1)] = sign * d.y;
            }
        }
    }
    m
}

/// Numerical rank via column-pivoted QR with a threshold relative to the
/// largest diagonal entry of R.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    let diag: Vec<f64> = (0..k).map(|i| r[(i, i)].abs()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    diag.iter().filter(|d| **d > RANK_THRESHOLD * largest).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub rank: usize,
    pub dof: usize,
}

/// Infinitesimal rank and degrees of freedom of the pinned framework.
pub fn rigidity_report(fw: &Framework, placement: &[Vec2]) -> Result<RigidityReport> {
    fw.validate()?;
    if placement.len() != fw.joints.len() {
        return Err(Error::Precondition(format!(
            "placement has {} positions for {} joints",
            placement.len(),
            fw.joints.len()
        )));
    }
    let residual = fw.bar_residual(placement);
    if !(residual <= TOL_BUILD) {
        return Err(Error::Precondition(format!(
            "placement violates bar lengths by {residual:e}"
        )));
    }
    let m = rigidity_matrix(fw, placement);
    let rank = numerical_rank(&m);
    Ok(RigidityReport {
        rank,
        dof: m.ncols() - rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(pins: usize) -> Framework {
        let mut fw = Framework::new();
        let a = fw.add_joint(Vec2::new(0.0, 0.0), pins > 0);
        let b = fw.add_joint(Vec2::new(1.0, 0.0), pins > 1);
        let c = fw.add_joint(Vec2::new(0.5, 0.75f64.sqrt()), false);
        fw.add_bar(a, b);
        fw.add_bar(b, c);
        fw.add_bar(c, a);
        fw
    }

    #[test]
    fn triangle_consistent() {
        let r = check_consistency(&triangle(2)).unwrap();
        assert!(r.pass);
        assert!(r.max_bar_residual < 1e-15);
    }

    #[test]
    fn wrong_length_detected() {
        let mut fw = triangle(2);
        fw.bars[0].length = 1.1;
        let r = check_consistency(&fw).unwrap();
        assert!(!r.pass);
        assert!((r.max_bar_residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn dangling_bar_is_structural() {
        let mut fw = triangle(2);
        fw.bars.push(Bar {
            a: JointId(0),
            b: JointId(7),
            length: 1.0,
        });
        assert!(matches!(check_consistency(&fw), Err(Error::Structural(_))));
    }

    #[test]
    fn pinned_triangle_rigid() {
        let fw = triangle(2);
        let r = rigidity_report(&fw, &fw.home_placement()).unwrap();
        assert_eq!(r.dof, 0);
        let free = triangle(0);
        let r = rigidity_report(&free, &free.home_placement()).unwrap();
        assert_eq!(r.dof, 3);
    }

    #[test]
    fn identity_motion_passes_and_pin_motion_fails() {
        let fw = triangle(2);
        let home = fw.home_placement();
        let mut path = MotionPath {
            samples: (0..10)
                .map(|i| MotionSample {
                    s: i as f64 / 9.0,
                    pos: home.clone(),
                    driver: None,
                })
                .collect(),
        };
        assert!(verify_motion(&fw, &path, TOL_MOTION, 1e-6).unwrap().pass);
        path.samples[4].pos[0].x += 0.01;
        let r = verify_motion(&fw, &path, TOL_MOTION, 1.0).unwrap();
        assert!(!r.pass);
        assert!(r.failures.iter().any(|f| f.starts_with("pins")));
        assert!(matches!(
            verify_motion(&fw, &MotionPath::default(), 1e-8, 1.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn path_round_trips() {
        let fw = triangle(2);
        let path = MotionPath {
            samples: vec![
                MotionSample {
                    s: 0.0,
                    pos: fw.home_placement(),
                    driver: Some(vec![0.25]),
                },
                MotionSample {
                    s: 1.0,
                    pos: fw.home_placement(),
                    driver: None,
                },
            ],
        };
        assert_eq!(MotionPath::from_json(&path.to_json().unwrap()).unwrap(), path);
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let back = MotionPath::read_csv(&buf[..]).unwrap();
        assert_eq!(back.samples.len(), 2);
        assert_eq!(back.samples[1].pos, path.samples[1].pos);
    }
}
