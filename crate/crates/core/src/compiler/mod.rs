//! Curve-to-linkage compilation: parametrized polynomial and rational
//! curves driven by a slider, and algebraic curves traced inside a disc.

mod algebraic;
pub mod chain;
pub(crate) mod curve;

pub use algebraic::{
    algebraic_consistency, compile_algebraic_trace, compile_algebraic_trace_seeded, curve_points, pipeline_values, trace_set_check, Closure, TraceSetReport,
};
pub use curve::{compile_poly_curve, compile_poly_curve_with, compile_rational_curve, Basis};

use crate::error::{Error, Result};
use crate::framework::{Framework, JointId, Placement};
use crate::geom::Vec2;
use crate::poly::{PolyCurve, RationalCurve};
use crate::program::{KinematicProgram, Step};
use crate::trigpoly::{RadiiChoice, TrigSum};
use serde::{Deserialize, Serialize};

/// Margin of the safe window (ε, 1 − ε)² curves are normalized into.
pub const WINDOW_EPS: f64 = 0.05;

/// Uniform scaling plus translation, p ↦ scale·p + offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
    pub offset: Vec2,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { scale: 1.0, offset: Vec2::ZERO };

    /// Maps the bounding box of `pts` into the safe window, centered.
    pub fn fit(pts: &[Vec2]) -> Result<Normalization> {
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in pts {
            if !p.is_finite() {
                return Err(Error::Range("curve takes non-finite values".into()));
            }
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y);
        let scale = if extent > 0.0 { (1.0 - 2.0 * WINDOW_EPS) / extent } else { 1.0 };
        let mid = (lo + hi) * 0.5;
        Ok(Normalization { scale, offset: Vec2::new(0.5, 0.5) - mid * scale })
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        p * self.scale + self.offset
    }

    pub fn invert(&self, p: Vec2) -> Vec2 {
        (p - self.offset) * (1.0 / self.scale)
    }
}

/// What the linkage was compiled from; used by the trace oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Poly { curve: PolyCurve },
    Rational { curve: RationalCurve },
    Algebraic { f: String, radii: RadiiChoice, trig: TrigSum },
    /// A sampled continuous curve (t, point), interpolated linearly.
    Sampled { samples: Vec<(f64, Vec2)> },
}

impl Target {
    /// Requested (un-normalized) position at driver `s`, for parametrized
    /// curves.
    pub fn expected(&self, s: f64) -> Option<Vec2> {
        match self {
            Target::Poly { curve } => Some(curve.eval(s)),
            Target::Rational { curve } => Some(curve.eval(s)),
            Target::Algebraic { .. } => None,
            Target::Sampled { samples } => Some(crate::kinematics::CurveRef::Sampled(samples).eval(s)),
        }
    }
}

/// Admissible driver values, one interval per driver coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverInfo {
    /// Role of the driven joint(s).
    pub role: String,
    pub ranges: Vec<(f64, f64)>,
}

impl DriverInfo {
    pub fn check(&self, v: &[f64], index: usize) -> Result<()> {
        if v.len() != self.ranges.len() {
            return Err(Error::Range(format!(
                "sample {index}: expected {} driver values, got {}",
                self.ranges.len(),
                v.len()
            )));
        }
        for (x, (lo, hi)) in v.iter().zip(&self.ranges) {
            let slack = 1e-12 * (hi - lo).abs().max(1.0);
            if !(*x >= lo - slack && *x <= hi + slack) {
                return Err(Error::Range(format!("sample {index}: driver value {x} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledLinkage {
    #[serde(flatten)]
    pub fw: Framework,
    #[serde(with = "steps_only")]
    pub program: KinematicProgram,
    pub normalization: Normalization,
    #[serde(rename = "A00", default, skip_serializing_if = "Option::is_none")]
    pub a00: Option<f64>,
    pub driver: DriverInfo,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure: Option<Closure>,
}

mod steps_only {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &KinematicProgram, s: S) -> std::result::Result<S::Ok, S::Error> {
        p.steps.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<KinematicProgram, D::Error> {
        let steps = Vec::<Step>::deserialize(d)?;
        let n_joints = steps.iter().flat_map(|s| s.outputs()).map(|j| j.0 + 1).max().unwrap_or(0);
        let driver_dim = steps
            .iter()
            .filter_map(|s| match s {
                Step::DriveLinear { index, .. } | Step::DrivePolar { index, .. } => Some(index + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Ok(KinematicProgram { steps, n_joints, driver_dim })
    }
}

impl CompiledLinkage {
    pub fn role(&self, name: &str) -> Result<JointId> {
        self.fw.label(name)
    }

    /// Placement for one driver vector, after a range check.
    pub fn eval(&self, driver: &[f64]) -> Result<Placement> {
        self.driver.check(driver, 0)?;
        self.program.eval_driven(driver)
    }

    /// Traced position in the requested (un-normalized) coordinates.
    pub fn traced(&self, placement: &Placement) -> Result<Vec2> {
        Ok(self.normalization.invert(placement[self.role("pC")?.0]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cl: CompiledLinkage = serde_json::from_str(s)?;
        cl.fw.validate()?;
        if cl.program.n_joints != cl.fw.joints.len() {
            return Err(Error::Structural(format!(
                "program places {} joints, framework has {}",
                cl.program.n_joints,
                cl.fw.joints.len()
            )));
        }
        cl.program.check_order()?;
        Ok(cl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_round_trip() {
        let pts = [Vec2::new(-3.0, 1.0), Vec2::new(5.0, 2.0)];
        let n = Normalization::fit(&pts).unwrap();
        let a = n.apply(pts[0]);
        let b = n.apply(pts[1]);
        assert!((a.x - 0.05).abs() < 1e-12 && (b.x - 0.95).abs() < 1e-12);
        assert!((a.y + b.y - 1.0).abs() < 1e-12);
        assert!(n.invert(a).dist(pts[0]) < 1e-12);
    }
}
