//! Building-block linkages: constructors, deterministic forward placement
//! and contract checks for every gadget kind.

pub mod parts;

use crate::error::{Error, Result};
use crate::framework::{Framework, JointId, Placement, VerificationReport};
use crate::geom::{line_distance, Vec2};
use crate::program::{Branch, Builder, KinematicProgram, Step};
use parts::Frame;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

/// Safety margin by which admissible ranges shrink from theoretical extremes.
pub const EPS_RANGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GadgetKind {
    /// Arms `l`, rhombus side `r`, pivot-to-hub distance `d`.
    Peaucellier { l: f64, r: f64, d: f64 },
    StrictPeaucellier { l: f64, r: f64, d: f64 },
    Lineariser { n: usize },
    /// `arm` is |AX|; the carried separation |AB| may range over [0, 2·arm].
    Translator { arm: f64 },
    Rotator { reach: f64, rho: f64 },
    Copier { reach: f64 },
    Multiplier { range: f64 },
    Divider { range: f64 },
    Power { k: u32, range: f64 },
    Scalar { c: f64, range: f64 },
    AngleAdder { rho: f64 },
    /// Reference arm `a`, mirror arm `b` < a.
    Reversor { a: f64, b: f64 },
    Multiplicator { a: f64, b: f64 },
}

impl GadgetKind {
    /// Kind with the default parameters used by the command line tool.
    pub fn from_name(name: &str) -> Option<GadgetKind> {
        use GadgetKind::*;
        Some(match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "peaucellier" => Peaucellier { l: 2.0, r: 1.0, d: 1.0 },
            "strictpeaucellier" => StrictPeaucellier { l: 2.0, r: 1.0, d: 1.0 },
            "lineariser" | "linearizer" => Lineariser { n: 2 },
            "translator" => Translator { arm: 1.0 },
            "rotator" => Rotator { reach: 1.0, rho: 0.5 },
            "copier" => Copier { reach: 1.0 },
            "multiplier" => Multiplier { range: 1.0 },
            "divider" => Divider { range: 1.0 },
            "power" => Power { k: 3, range: 1.0 },
            "scalar" => Scalar { c: 0.7, range: 1.0 },
            "angleadder" | "adder" => AngleAdder { rho: 1.0 },
            "reversor" => Reversor { a: 2.0, b: 1.0 },
            "multiplicator" => Multiplicator { a: 2.0, b: 1.0 },
            _ => return None,
        })
    }

    pub fn all_defaults() -> Vec<GadgetKind> {
        [
            "peaucellier",
            "strictpeaucellier",
            "lineariser",
            "translator",
            "rotator",
            "copier",
            "multiplier",
            "divider",
            "power",
            "scalar",
            "angleadder",
            "reversor",
            "multiplicator",
        ]
        .iter()
        .map(|n| GadgetKind::from_name(n).unwrap())
        .collect()
    }

    pub fn name(&self) -> &'static str {
        use GadgetKind::*;
        match self {
            Peaucellier { .. } => "peaucellier",
            StrictPeaucellier { .. } => "strict_peaucellier",
            Lineariser { .. } => "lineariser",
            Translator { .. } => "translator",
            Rotator { .. } => "rotator",
            Copier { .. } => "copier",
            Multiplier { .. } => "multiplier",
            Divider { .. } => "divider",
            Power { .. } => "power",
            Scalar { .. } => "scalar",
            AngleAdder { .. } => "angle_adder",
            Reversor { .. } => "reversor",
            Multiplicator { .. } => "multiplicator",
        }
    }

    fn validate(&self) -> Result<()> {
        use GadgetKind::*;
        let bad = |m: String| Err(Error::Argument(m));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Peaucellier { l, r, d } | StrictPeaucellier { l, r, d } => {
                if !(pos(r) && l > r && pos(d)) {
                    return bad(format!("peaucellier needs L > r > 0 and d > 0 (L={l}, r={r}, d={d})"));
                }
                if !(l - r < 2.0 * d && 2.0 * d <= l + r) {
                    return bad(format!("peaucellier needs L - r < 2d <= L + r (L={l}, r={r}, d={d})"));
                }
            }
            Lineariser { n } if n < 1 => return bad("lineariser needs n >= 1".into()),
            Translator { arm } if !pos(arm) => return bad(format!("translator arm {arm} must be positive")),
            Rotator { reach, rho } if !(pos(reach) && pos(rho)) => {
                return bad("rotator reach and rho must be positive".into())
            }
            Copier { reach } if !pos(reach) => return bad("copier reach must be positive".into()),
            Multiplier { range } | Divider { range } if !pos(range) => {
                return bad(format!("range {range} must be positive"))
            }
            Power { k, range } if k < 1 || !pos(range) => {
                return bad(format!("power needs k >= 1 and positive range (k={k})"))
            }
            Scalar { c, range } if !(pos(c) && pos(range)) => {
                return bad(format!("scalar needs c > 0 and positive range (c={c})"))
            }
            AngleAdder { rho } if !pos(rho) => return bad("angle adder rho must be positive".into()),
            Reversor { a, b } | Multiplicator { a, b } if !(pos(b) && a > b) => {
                return bad(format!("reversor arms need a > b > 0 (a={a}, b={b})"))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        let slack = 1e-9 * (self.hi - self.lo).abs().max(1.0);
        v >= self.lo - slack && v <= self.hi + slack
    }

    fn grid(&self, n: usize) -> Vec<f64> {
        if n <= 1 {
            return vec![0.5 * (self.lo + self.hi)];
        }
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// A scalar parameter of a gadget's input configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    /// Admissible interval, shrunk by the safety margin.
    pub range: Interval,
    /// Theoretical interval before shrinking.
    pub nominal: Interval,
}

fn shrunk(name: &str, lo: f64, hi: f64, shrink_lo: bool, shrink_hi: bool) -> ParamRange {
    let w = hi - lo;
    ParamRange {
        name: name.into(),
        range: Interval::new(
            if shrink_lo { lo + EPS_RANGE * w } else { lo },
            if shrink_hi { hi - EPS_RANGE * w } else { hi },
        ),
        nominal: Interval::new(lo, hi),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gadget {
    pub kind: GadgetKind,
    pub fw: Framework,
    pub program: KinematicProgram,
    /// Input and output roles; also present in `fw.labels`.
    pub interface: BTreeMap<String, JointId>,
    pub params: Vec<ParamRange>,
}

#[derive(Serialize, Deserialize)]
struct GadgetWire {
    #[serde(flatten)]
    fw: Framework,
    kind: GadgetKind,
    interface: BTreeMap<String, JointId>,
    ranges: BTreeMap<String, Interval>,
}

impl Gadget {
    pub fn to_json(&self) -> Result<String> {
        let wire = GadgetWire {
            fw: self.fw.clone(),
            kind: self.kind.clone(),
            interface: self.interface.clone(),
            ranges: self.params.iter().map(|p| (p.name.clone(), p.range)).collect(),
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    pub fn role(&self, name: &str) -> Result<JointId> {
        self.interface
            .get(name)
            .copied()
            .ok_or_else(|| Error::Structural(format!("gadget has no role {name:?}")))
    }

    pub fn range(&self, name: &str) -> Option<Interval> {
        self.params.iter().find(|p| p.name == name).map(|p| p.range)
    }

    pub fn nominal_range(&self, name: &str) -> Option<Interval> {
        self.params.iter().find(|p| p.name == name).map(|p| p.nominal)
    }

    /// Input positions for a parameter vector (one value per entry of `params`).
    pub fn inputs_for(&self, values: &[f64]) -> BTreeMap<String, Vec2> {
        inputs_for(&self.kind, values)
    }
}

type Inputs = BTreeMap<String, Vec2>;

fn ins(pairs: &[(&str, Vec2)]) -> Inputs {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn peaucellier_dims(l: f64, r: f64, d: f64) -> (f64, f64) {
    let k = l * l - r * r;
    (k, k / (2.0 * d))
}

/// Strict Peaucellier: tether anchor offset and arm, and the largest
/// admissible |q_y|.
fn strict_dims(l: f64, r: f64, d: f64) -> (f64, f64, f64) {
    let (_, h) = peaucellier_dims(l, r, d);
    let y_ext = ((l + r) * (l + r) - h * h).sqrt();
    let y_max = 0.9 * y_ext;
    let delta = 0.5 * r;
    let arm = 0.5 * (delta * delta + y_max * y_max).sqrt();
    (delta, arm, y_max)
}

/// Hub angle of the inverse point when the traced joint sits at height y.
fn hub_angle_for_y(l: f64, r: f64, d: f64, y: f64) -> f64 {
    let (k, h) = peaucellier_dims(l, r, d);
    let q = Vec2::new(h, y);
    let p = q * (k / q.norm2());
    (p - Vec2::new(d, 0.0)).angle()
}

fn param_specs(kind: &GadgetKind) -> Vec<ParamRange> {
    use GadgetKind::*;
    match *kind {
        Peaucellier { l, r, d } => {
            let amax = 2.0 * ((l - r) / (2.0 * d)).acos();
            vec![shrunk("angle", -amax, amax, true, true)]
        }
        StrictPeaucellier { l, r, d } => {
            let (_, _, y_max) = strict_dims(l, r, d);
            let a = hub_angle_for_y(l, r, d, y_max).abs();
            vec![shrunk("angle", -a, a, true, true)]
        }
        Lineariser { n } => (1..=n)
            .map(|i| shrunk(&format!("y{i}"), -parts::CELL_REACH, parts::CELL_REACH, true, true))
            .collect(),
        Translator { arm } => vec![
            shrunk("|AB|", 0.0, 2.0 * arm, false, true),
            shrunk("A'x", 0.2 * arm, arm, false, false),
            shrunk("A'y", -arm, arm, false, false),
        ],
        Rotator { reach, .. } => vec![
            shrunk("|AB|", 0.0, reach, true, true),
            shrunk("angle", 0.0, 2.0 * PI, false, false),
            shrunk("beta", 0.0, 2.0 * PI / 3.0, true, false),
        ],
        Copier { reach } => vec![
            shrunk("|AB|", 0.0, reach, true, true),
            shrunk("angle", 0.0, 2.0 * PI, false, false),
            shrunk("beta", 0.0, 2.0 * PI / 3.0, true, false),
        ],
        Multiplier { range } => vec![
            shrunk("|OA|", 0.0, range, false, true),
            shrunk("|OB|", 0.0, range, false, true),
        ],
        Divider { range } => vec![
            shrunk("|OC|", 0.0, range, false, true),
            shrunk("|OB|", 0.25 * range, range, false, true),
        ],
        Power { range, .. } | Scalar { range, .. } => vec![shrunk("|OA|", 0.0, range, false, true)],
        AngleAdder { .. } => vec![
            shrunk("theta", 0.05, FRAC_PI_2, false, false),
            shrunk("phi", 0.05, FRAC_PI_2, false, false),
        ],
        Reversor { .. } => vec![shrunk("alpha", 0.0, FRAC_PI_2, true, true)],
        Multiplicator { .. } => vec![
            shrunk("alpha", 0.0, FRAC_PI_4, true, true),
            shrunk("beta", 0.0, FRAC_PI_4, true, true),
        ],
    }
}

/// Extra joint constraints on parameter vectors beyond the box.
fn admissible(kind: &GadgetKind, values: &[f64]) -> Result<()> {
    if let GadgetKind::Multiplicator { .. } = kind {
        let (a, b) = (values[0], values[1]);
        if !(a < b - EPS_RANGE) {
            return Err(Error::Range(format!(
                "multiplicator needs 0 < alpha < beta < pi/4 (alpha={a}, beta={b})"
            )));
        }
    }
    Ok(())
}

fn home_params(kind: &GadgetKind, specs: &[ParamRange]) -> Vec<f64> {
    match kind {
        GadgetKind::Multiplicator { .. } => vec![0.25, 0.5],
        GadgetKind::Rotator { .. } | GadgetKind::Copier { .. } => {
            vec![0.5 * specs[0].range.hi, 0.3, 1.0]
        }
        _ => specs.iter().map(|p| 0.5 * (p.range.lo + p.range.hi)).collect(),
    }
}

fn inputs_for(kind: &GadgetKind, v: &[f64]) -> Inputs {
    use GadgetKind::*;
    match *kind {
        Peaucellier { d, .. } | StrictPeaucellier { d, .. } => {
            ins(&[("P", Vec2::new(d, 0.0) + Vec2::polar(d, v[0]))])
        }
        Lineariser { .. } => v
            .iter()
            .enumerate()
            .map(|(i, y)| (format!("q{}", i + 1), Vec2::new(1.5, *y)))
            .collect(),
        Translator { .. } => ins(&[
            ("A", Vec2::ZERO),
            ("B", Vec2::new(v[0], 0.0)),
            ("A'", Vec2::new(v[1], v[2])),
        ]),
        Rotator { reach, .. } => ins(&[
            ("B", Vec2::polar(v[0], v[1])),
            ("H", Vec2::polar(reach, v[1] + v[2])),
        ]),
        Copier { reach } => {
            let a2 = Vec2::new(0.5 * reach, -2.0 * reach);
            ins(&[
                ("A", Vec2::ZERO),
                ("B", Vec2::polar(v[0], v[1])),
                ("A'", a2),
                ("H", a2 + Vec2::polar(reach, v[1] + v[2])),
            ])
        }
        Multiplier { .. } => ins(&[("A", Vec2::new(v[0], 0.0)), ("B", Vec2::new(0.0, v[1]))]),
        Divider { .. } => ins(&[("C", Vec2::new(v[0], 0.0)), ("B", Vec2::new(0.0, v[1]))]),
        Power { .. } | Scalar { .. } => ins(&[("A", Vec2::new(v[0], 0.0))]),
        AngleAdder { rho } => ins(&[("B", Vec2::polar(rho, v[0])), ("A'", Vec2::polar(rho, v[1]))]),
        Reversor { b, .. } => ins(&[("C", Vec2::polar(b, v[0]))]),
        Multiplicator { a, .. } => ins(&[("A", Vec2::polar(a, v[0])), ("B", Vec2::polar(a, v[1]))]),
    }
}

fn get(inputs: &Inputs, role: &str) -> Result<Vec2> {
    inputs
        .get(role)
        .copied()
        .ok_or_else(|| Error::Argument(format!("missing input role {role:?}")))
}

fn on_circle(p: Vec2, c: Vec2, r: f64, what: &str) -> Result<f64> {
    let off = (p.dist(c) - r).abs();
    if off > 1e-9 * r.max(1.0) {
        return Err(Error::Range(format!("{what} is {off:e} off its circle")));
    }
    Ok((p - c).angle())
}

fn on_axis(v: f64, what: &str) -> Result<()> {
    if v.abs() > 1e-9 {
        return Err(Error::Range(format!("{what} is {v:e} off its axis")));
    }
    Ok(())
}

fn wrap_pos(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

/// Recovers the parameter vector from input positions, rejecting inputs
/// that do not lie on the configuration manifold the gadget expects.
fn params_of(kind: &GadgetKind, inputs: &Inputs) -> Result<Vec<f64>> {
    use GadgetKind::*;
    Ok(match *kind {
        Peaucellier { d, .. } | StrictPeaucellier { d, .. } => {
            vec![on_circle(get(inputs, "P")?, Vec2::new(d, 0.0), d, "P")?]
        }
        Lineariser { n } => (1..=n)
            .map(|i| {
                let q = get(inputs, &format!("q{i}"))?;
                on_axis(q.x - 1.5, &format!("q{i}"))?;
                Ok(q.y)
            })
            .collect::<Result<Vec<f64>>>()?,
        Translator { .. } => {
            let (a, b, a2) = (get(inputs, "A")?, get(inputs, "B")?, get(inputs, "A'")?);
            on_axis(a.norm(), "A")?;
            on_axis(b.y, "B")?;
            vec![b.x, a2.x, a2.y]
        }
        Rotator { reach, .. } => {
            let (b, h) = (get(inputs, "B")?, get(inputs, "H")?);
            on_circle(h, Vec2::ZERO, reach, "H")?;
            vec![b.norm(), wrap_pos(b.angle()), wrap_pos(h.angle() - b.angle())]
        }
        Copier { reach } => {
            let (a, b, a2, h) = (get(inputs, "A")?, get(inputs, "B")?, get(inputs, "A'")?, get(inputs, "H")?);
            on_axis(a.norm(), "A")?;
            on_axis(a2.dist(Vec2::new(0.5 * reach, -2.0 * reach)), "A'")?;
            on_circle(h, a2, reach, "H")?;
            vec![b.norm(), wrap_pos(b.angle()), wrap_pos((h - a2).angle() - b.angle())]
        }
        Multiplier { .. } => {
            let (a, b) = (get(inputs, "A")?, get(inputs, "B")?);
            on_axis(a.y, "A")?;
            on_axis(b.x, "B")?;
            vec![a.x, b.y]
        }
        Divider { .. } => {
            let (c, b) = (get(inputs, "C")?, get(inputs, "B")?);
            on_axis(c.y, "C")?;
            on_axis(b.x, "B")?;
            vec![c.x, b.y]
        }
        Power { .. } | Scalar { .. } => {
            let a = get(inputs, "A")?;
            on_axis(a.y, "A")?;
            vec![a.x]
        }
        AngleAdder { rho } => vec![
            on_circle(get(inputs, "B")?, Vec2::ZERO, rho, "B")?,
            on_circle(get(inputs, "A'")?, Vec2::ZERO, rho, "A'")?,
        ],
        Reversor { b, .. } => vec![on_circle(get(inputs, "C")?, Vec2::ZERO, b, "C")?],
        Multiplicator { a, .. } => vec![
            on_circle(get(inputs, "A")?, Vec2::ZERO, a, "A")?,
            on_circle(get(inputs, "B")?, Vec2::ZERO, a, "B")?,
        ],
    })
}

fn check_params(kind: &GadgetKind, specs: &[ParamRange], values: &[f64]) -> Result<()> {
    for (p, v) in specs.iter().zip(values) {
        if !p.range.contains(*v) {
            return Err(Error::Range(format!(
                "{} = {v} outside admissible [{}, {}]",
                p.name, p.range.lo, p.range.hi
            )));
        }
    }
    admissible(kind, values)
}

/// Cartesian grid over the admissible box, filtered by joint constraints.
fn param_grid(kind: &GadgetKind, specs: &[ParamRange], density: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![vec![]];
    for p in specs {
        let axis = p.range.grid(density);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut n = prefix.clone();
                    n.push(*v);
                    n
                })
            })
            .collect();
    }
    out.retain(|v| admissible(kind, v).is_ok());
    out
}

/// Builds the gadget's framework, program and interface.
pub fn build_gadget(kind: GadgetKind) -> Result<Gadget> {
    kind.validate()?;
    let specs = param_specs(&kind);
    let sizing_density = if specs.len() > 3 { 3 } else { 5 };
    let mut rows = vec![inputs_for(&kind, &home_params(&kind, &specs))];
    rows.extend(
        param_grid(&kind, &specs, sizing_density)
            .iter()
            .map(|v| inputs_for(&kind, v)),
    );
    let mut b = Builder::new(vec![], rows);
    construct(&kind, &mut b)?;
    let (fw, program) = b.finish();
    Ok(Gadget {
        interface: fw.labels.clone(),
        kind,
        fw,
        program,
        params: specs,
    })
}

fn construct(kind: &GadgetKind, b: &mut Builder) -> Result<()> {
    use GadgetKind::*;
    match *kind {
        Peaucellier { l, r, d } | StrictPeaucellier { l, r, d } => {
            let p1 = b.pin(Vec2::ZERO);
            let p2 = b.pin(Vec2::new(d, 0.0));
            let p = b.input("P")?;
            b.bar(p2, p)?;
            let arm_a = b.elbow(p1, p, l, r, Branch::Ccw)?;
            let arm_b = b.elbow(p1, p, l, r, Branch::Cw)?;
            let q = b.step(|j| Step::Translate { j, base: arm_a, from: p, to: arm_b })?;
            b.bar(arm_a, q)?;
            b.bar(arm_b, q)?;
            b.label("p1", p1);
            b.label("p2", p2);
            b.label("q", q);
            if let StrictPeaucellier { .. } = kind {
                let (_, h) = peaucellier_dims(l, r, d);
                let (delta, arm, _) = strict_dims(l, r, d);
                let (p3, t) = parts::tether(b, q, Vec2::new(h - delta, 0.0), arm)?;
                b.label("p3", p3);
                b.label("tether", t);
            }
        }
        Lineariser { n } => {
            let pivot = b.pin(Vec2::ZERO);
            let hub = b.pin(Vec2::new(1.0, 0.0));
            b.label("pivot", pivot);
            b.label("hub", hub);
            for i in 1..=n {
                let q = b.input(&format!("q{i}"))?;
                parts::peaucellier_cell(b, pivot, hub, q, 1.0)?;
            }
        }
        Translator { arm } => {
            let a = b.input("A")?;
            let bb = b.input("B")?;
            let a2 = b.input("A'")?;
            let out = parts::translator_with(b, a, bb, a2, arm, arm)?;
            b.label("B'", out);
        }
        Rotator { rho, .. } => {
            let pivot = b.pin(Vec2::ZERO);
            b.label("A", pivot);
            let bb = b.input("B")?;
            let h = b.input("H")?;
            let out = parts::rotator(b, pivot, bb, h, None, rho)?;
            b.label("B'", out);
        }
        Copier { reach } => {
            let a = b.input("A")?;
            let bb = b.input("B")?;
            let a2 = b.input("A'")?;
            let h = b.input("H")?;
            let moved = parts::translator(b, a, bb, a2)?;
            let out = parts::rotator(b, a2, moved, h, None, 0.5 * reach)?;
            b.label("B'", out);
        }
        Multiplier { .. } | Scalar { .. } => {
            let f = Frame::pinned(b, Vec2::ZERO);
            label_frame(b, &f);
            let a = b.input("A")?;
            let bj = match *kind {
                Scalar { c, .. } => b.fixed(Vec2::new(0.0, c)),
                _ => b.input("B")?,
            };
            b.label("B", bj);
            let (c, a2) = parts::multiplier(b, &f, a, bj)?;
            b.label("A'", a2);
            b.label("C", c);
        }
        Divider { .. } => {
            let f = Frame::pinned(b, Vec2::ZERO);
            label_frame(b, &f);
            let c = b.input("C")?;
            let bj = b.input("B")?;
            let a = parts::divider(b, &f, c, bj)?;
            b.label("A", a);
        }
        Power { k, .. } => {
            let f = Frame::pinned(b, Vec2::ZERO);
            label_frame(b, &f);
            let a = b.input("A")?;
            let mut c = a;
            if k > 1 {
                let v = parts::fixed_rotator(b, f.o, a, FRAC_PI_2, false)?;
                b.label("V", v);
                for _ in 1..k {
                    c = parts::multiplier(b, &f, c, v)?.0;
                }
            }
            b.label("C", c);
        }
        AngleAdder { rho } => {
            let o = b.pin(Vec2::ZERO);
            let a = b.pin(Vec2::new(rho, 0.0));
            b.label("O", o);
            b.label("A", a);
            let bb = b.input("B")?;
            let a2 = b.input("A'")?;
            b.bar(o, bb)?;
            b.bar(o, a2)?;
            let out = b.step(|j| Step::RotateLike { j, center: o, src: bb, from: a, to: a2 })?;
            b.bar(o, out)?;
            let moved = parts::translator(b, a, bb, a2)?;
            parts::rotator(b, a2, moved, out, Some(out), 0.5 * rho)?;
            b.label("B'", out);
        }
        Reversor { a, b: rb } => {
            let o = b.pin(Vec2::ZERO);
            let refj = b.pin(Vec2::new(a, 0.0));
            b.label("O", o);
            b.label("A", refj);
            let c = b.input("C")?;
            b.bar(o, c)?;
            let e = parts::reversor(b, o, refj, c, a, rb, None)?;
            b.label("E", e);
        }
        Multiplicator { a, b: rb } => {
            let o = b.pin(Vec2::ZERO);
            let xr = b.pin(Vec2::new(a, 0.0));
            b.label("O", o);
            b.label("X0", xr);
            let ra = b.input("A")?;
            let rbj = b.input("B")?;
            b.bar(o, ra)?;
            b.bar(o, rbj)?;
            let e = parts::multiplicator(b, o, ra, rbj, xr, a, rb)?;
            b.label("E", e);
        }
    }
    Ok(())
}

fn label_frame(b: &mut Builder, f: &Frame) {
    b.label("O", f.o);
    b.label("X", f.x);
    b.label("Y", f.y);
}

/// Places every joint of the gadget for the given input positions.
pub fn gadget_forward(g: &Gadget, inputs: &BTreeMap<String, Vec2>) -> Result<Placement> {
    let values = params_of(&g.kind, inputs)?;
    check_params(&g.kind, &g.params, &values)?;
    g.program.eval(&[], inputs)
}

fn angle_gap(v: Vec2, expected: f64) -> f64 {
    v.rotate(-expected).angle().abs()
}

/// Deviation of a placement from the kind's defining relation.
fn contract_deviation(g: &Gadget, pos: &Placement, v: &[f64]) -> Result<f64> {
    use GadgetKind::*;
    let at = |role: &str| -> Result<Vec2> { Ok(pos[g.role(role)?.0]) };
    Ok(match g.kind {
        Peaucellier { l, r, d } | StrictPeaucellier { l, r, d } => {
            let (k, h) = peaucellier_dims(l, r, d);
            let (p1, q, p) = (at("p1")?, at("q")?, at("P")?);
            let mut dev = (q.x - h).abs().max((p1.dist(q) * p1.dist(p) - k).abs());
            if let StrictPeaucellier { .. } = g.kind {
                let (_, arm, _) = strict_dims(l, r, d);
                dev = dev.max((q.dist(at("p3")?) - 2.0 * arm).max(0.0));
            }
            dev
        }
        Lineariser { n } => {
            let (pv, hub) = (at("pivot")?, at("hub")?);
            let u = (hub - pv).unit().unwrap();
            let a0 = pv + u * 1.5;
            let a1 = a0 + u.perp();
            (1..=n)
                .map(|i| at(&format!("q{i}")).map(|q| line_distance(q, a0, a1)))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max)
        }
        Translator { .. } => ((at("B'")? - at("A'")?) - (at("B")? - at("A")?)).norm(),
        Rotator { .. } => {
            let (a, bb, out, h) = (at("A")?, at("B")?, at("B'")?, at("H")?);
            let len = ((out - a).norm() - (bb - a).norm()).abs();
            len.max(line_distance(out, a, h)).max((out - a).dot(h - a).min(0.0).abs())
        }
        Copier { .. } => {
            let (a, bb, a2, out, h) = (at("A")?, at("B")?, at("A'")?, at("B'")?, at("H")?);
            let len = ((out - a2).norm() - (bb - a).norm()).abs();
            len.max(line_distance(out, a2, h)).max((out - a2).dot(h - a2).min(0.0).abs())
        }
        Multiplier { .. } | Scalar { .. } => {
            let (o, x, y) = (at("O")?, at("X")?, at("Y")?);
            let (a, bb, c, a2) = (at("A")?, at("B")?, at("C")?, at("A'")?);
            let want = match g.kind {
                Scalar { c, .. } => c * v[0],
                _ => v[0] * v[1],
            };
            let sign_ok = (c - o).norm() - want.abs();
            [
                sign_ok.abs(),
                (c.x - want).abs(),
                line_distance(a, o, x),
                line_distance(c, o, x),
                line_distance(bb, o, y),
                line_distance(c, bb, a2),
            ]
            .into_iter()
            .fold(0.0, f64::max)
        }
        Divider { .. } => {
            let a = at("A")?;
            (a.x - v[0] / v[1]).abs().max(a.y.abs())
        }
        Power { k, .. } => {
            let c = at("C")?;
            (c.x - v[0].powi(k as i32)).abs().max(c.y.abs())
        }
        AngleAdder { rho } => {
            let out = at("B'")? - at("O")?;
            (angle_gap(out, v[0] + v[1]) * rho).max((out.norm() - rho).abs())
        }
        Reversor { a, b } => {
            let e = at("E")?;
            (angle_gap(e, 2.0 * v[0]) * e.norm()).max((e.norm() - b * b / a).abs())
        }
        Multiplicator { a, b } => {
            let e = at("E")?;
            (angle_gap(e, v[0] + v[1]) * e.norm()).max((e.norm() - b * b / a).abs())
        }
    })
}

/// Sweeps the admissible input box on a grid, placing the gadget at every
/// point and measuring bar preservation and the contract. `max_trace_error`
/// carries the worst contract deviation.
pub fn contract_check(g: &Gadget, grid_density: usize, tol: f64) -> Result<VerificationReport> {
    let boxes: Vec<Interval> = g.params.iter().map(|p| p.range).collect();
    contract_check_on(g, &boxes, grid_density, tol)
}

/// Like [`contract_check`] on a caller-chosen sub-box of the admissible range.
pub fn contract_check_on(
    g: &Gadget,
    boxes: &[Interval],
    grid_density: usize,
    tol: f64,
) -> Result<VerificationReport> {
    if grid_density < 2 {
        return Err(Error::Argument("grid density must be at least 2".into()));
    }
    if boxes.len() != g.params.len() {
        return Err(Error::Argument(format!(
            "{} parameter boxes given for {} parameters",
            boxes.len(),
            g.params.len()
        )));
    }
    let specs: Vec<ParamRange> = g
        .params
        .iter()
        .zip(boxes)
        .map(|(p, b)| ParamRange { name: p.name.clone(), range: *b, nominal: p.nominal })
        .collect();
    let grid = param_grid(&g.kind, &specs, grid_density);
    let results: Vec<Result<(f64, f64)>> = grid
        .par_iter()
        .map(|v| {
            let pos = gadget_forward(g, &inputs_for(&g.kind, v))?;
            Ok((g.fw.bar_residual(&pos), contract_deviation(g, &pos, v)?))
        })
        .collect();
    let mut report = VerificationReport { pass: true, max_trace_error: Some(0.0), ..Default::default() };
    let mut dev: f64 = 0.0;
    for r in results {
        let (bars, d) = r?;
        report.max_bar_residual = report.max_bar_residual.max(bars);
        dev = dev.max(d);
    }
    report.max_trace_error = Some(dev);
    if !(report.max_bar_residual <= tol) {
        let m = report.max_bar_residual;
        report.fail(format!("bars: residual {m:e} exceeds {tol:e}"));
    }
    if !(dev <= tol) {
        report.fail(format!("contract: {} deviation {dev:e} exceeds {tol:e}", g.kind.name()));
    }
    Ok(report)
}

/// Number of grid points `contract_check` would visit.
pub fn grid_size(g: &Gadget, grid_density: usize) -> usize {
    param_grid(&g.kind, &g.params, grid_density).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_builds_consistently() {
        for kind in GadgetKind::all_defaults() {
            let g = build_gadget(kind.clone()).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));
            let r = crate::framework::check_consistency(&g.fw).unwrap();
            assert!(r.pass, "{}: {:?}", kind.name(), r);
            g.program.check_order().unwrap();
        }
    }

    #[test]
    fn contracts_hold_on_coarse_grids() {
        for kind in GadgetKind::all_defaults() {
            let g = build_gadget(kind.clone()).unwrap();
            let r = contract_check(&g, 6, 1e-9).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));
            assert!(r.pass, "{}: {:?}", kind.name(), r);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(matches!(
            build_gadget(GadgetKind::Peaucellier { l: 1.0, r: 2.0, d: 1.0 }),
            Err(Error::Argument(_))
        ));
        assert!(matches!(build_gadget(GadgetKind::Lineariser { n: 0 }), Err(Error::Argument(_))));
        assert!(matches!(build_gadget(GadgetKind::Scalar { c: -1.0, range: 1.0 }), Err(Error::Argument(_))));
    }
}
