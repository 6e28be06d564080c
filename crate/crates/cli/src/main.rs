//! `kempe`: compile curves into linkages, drive them, verify the motion and
//! render it.

use clap::{Args, Parser, Subcommand};
use kempe_core::approx::{build_tower_with, read_samples_csv, square_boundary, tower_trace_check, TowerOptions, DEGREE_CAP};
use kempe_core::compiler::{
    compile_algebraic_trace_seeded, compile_poly_curve_with, compile_rational_curve, trace_set_check, Basis,
    CompiledLinkage,
};
use kempe_core::error::Error;
use kempe_core::framework::{rigidity_report, verify_motion, Framework, MotionPath, TOL_MOTION};
use kempe_core::gadgets::{build_gadget, contract_check, grid_size, GadgetKind};
use kempe_core::geom::Vec2;
use kempe_core::kinematics::{
    default_schedule, linkage_trace_error, project_sample, simulate_schedule, step_bound, trace_error, CurveRef,
};
use kempe_core::poly::{BivariatePoly, Poly1, PolyCurve, RationalCurve};
use kempe_core::render::{render_svg, RenderOptions};
use kempe_core::trigpoly::{Disc, DEFAULT_SEED};
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kempe", version, about = "Compile plane curves into planar linkages and check their motion")]
struct Cli {
    /// Print reports as JSON on standard output.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for sampled certifications.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a curve into a linkage.
    #[command(subcommand)]
    Compile(CompileCmd),
    /// Build a finite tower of approximating stages for a sampled curve.
    Tower(TowerArgs),
    /// Drive a compiled linkage and record the motion.
    Simulate(SimulateArgs),
    /// Check a recorded motion against a linkage.
    Verify(VerifyArgs),
    /// Exercise a single building block.
    #[command(subcommand)]
    Gadget(GadgetCmd),
    /// Report infinitesimal degrees of freedom at the home placement.
    Dof {
        #[arg(long)]
        fw: PathBuf,
    },
    /// Draw a motion as SVG.
    Render(RenderArgs),
}

#[derive(Subcommand)]
enum CompileCmd {
    /// Polynomial curve (x(t), y(t)), t in [0, 1].
    Poly {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// monomial or centered.
        #[arg(long, default_value = "monomial")]
        basis: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rational curve with numerators and denominators in t.
    Rational {
        #[arg(long)]
        x_num: String,
        #[arg(long, default_value = "1")]
        x_den: String,
        #[arg(long)]
        y_num: String,
        #[arg(long, default_value = "1")]
        y_den: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Zero set of f(x, y) inside a disc.
    Algebraic {
        #[arg(long)]
        f: String,
        /// cx,cy,r
        #[arg(long)]
        disc: String,
        /// Also run the membership check with this many samples.
        #[arg(long, default_value_t = 0)]
        check: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct TowerArgs {
    /// CSV samples with header t,x,y.
    #[arg(long, conflicts_with = "square")]
    curve: Option<PathBuf>,
    /// Use the square-boundary demo curve sampled at this many points.
    #[arg(long)]
    square: Option<usize>,
    #[arg(long = "K")]
    k: usize,
    /// Tether arms are scale/(2k).
    #[arg(long, default_value_t = 1.0)]
    tether_scale: f64,
    #[arg(long, default_value_t = DEGREE_CAP)]
    degree_cap: usize,
    /// Also run the tether check with this many samples.
    #[arg(long, default_value_t = 0)]
    check: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    fw: PathBuf,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// CSV without header, one driver vector per row.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Output path; `.csv` writes CSV, anything else JSON. Standard output
    /// when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    fw: PathBuf,
    #[arg(long)]
    path: PathBuf,
    /// Reference samples (CSV t,x,y) for the traced joint instead of the
    /// linkage's own target.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    /// Trace tolerance; defaults to --tol.
    #[arg(long)]
    trace_tol: Option<f64>,
    /// Overrides the bound derived from the schedule.
    #[arg(long)]
    step_bound: Option<f64>,
    /// Also project this many samples with Newton and report the largest
    /// displacement.
    #[arg(long, default_value_t = 0)]
    newton: usize,
}

#[derive(Subcommand)]
enum GadgetCmd {
    /// Sweep the admissible input grid and check bars and contract.
    Test {
        kind: String,
        /// Parameter overrides as name=value.
        params: Vec<String>,
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    fw: PathBuf,
    #[arg(long)]
    path: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    animate: bool,
    #[arg(long, default_value_t = 60)]
    frames: usize,
}

/// Failure classes mapped onto exit codes.
enum Fail {
    /// Bad input: exit 2.
    Usage(String),
    /// Computation or verification failed: exit 1.
    Failed(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_) | Error::Parse { .. } | Error::Json(_) | Error::Csv(_) | Error::Io(_) => {
                Fail::Usage(e.to_string())
            }
            other => Fail::Failed(other.to_string()),
        }
    }
}

type Outcome = Result<bool, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail::Usage(msg.into())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn default_tol() -> Result<f64, Fail> {
    match std::env::var("KEMPE_TOL") {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|t| *t > 0.0)
            .ok_or_else(|| usage(format!("KEMPE_TOL={v:?} is not a positive number"))),
        Err(_) => Ok(TOL_MOTION),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn load_path(path: &Path) -> Result<MotionPath, Fail> {
    if is_csv(path) {
        let f = fs::File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Ok(MotionPath::read_csv(f)?)
    } else {
        Ok(MotionPath::from_json(&read(path)?)?)
    }
}

fn load_samples(path: &Path) -> Result<Vec<(f64, Vec2)>, Fail> {
    let f = fs::File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(read_samples_csv(f)?)
}

fn load_schedule(path: &Path) -> Result<Vec<Vec<f64>>, Fail> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .map_err(|_| usage(format!("{}: line {line}, column {}: {f:?} is not a number", path.display(), c + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(row);
    }
    Ok(out)
}

fn emit(json_mode: bool, value: Value, human: impl FnOnce() -> String) {
    if json_mode {
        println!("{}", serde_json::to_string_pretty(&value).expect("reports serialize"));
    } else {
        println!("{}", human());
    }
}

fn linkage_summary(cl: &CompiledLinkage) -> Value {
    json!({
        "joints": cl.fw.joints.len(),
        "bars": cl.fw.bars.len(),
        "max_valency": cl.fw.max_valency(),
        "normalization": cl.normalization,
        "driver": cl.driver,
    })
}

fn compile(cli: &Cli, cmd: &CompileCmd) -> Outcome {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let (cl, output, extra) = match cmd {
        CompileCmd::Poly { x, y, basis, output } => {
            let basis = match basis.as_str() {
                "monomial" => Basis::Monomial,
                "centered" => Basis::Centered,
                other => return Err(usage(format!("unknown basis {other:?}; use monomial or centered"))),
            };
            let curve = PolyCurve::parse(x, y)?;
            (compile_poly_curve_with(&curve, basis)?, output, json!({}))
        }
        CompileCmd::Rational { x_num, x_den, y_num, y_den, output } => {
            let curve = RationalCurve {
                x_num: Poly1::parse(x_num, 't')?,
                x_den: Poly1::parse(x_den, 't')?,
                y_num: Poly1::parse(y_num, 't')?,
                y_den: Poly1::parse(y_den, 't')?,
            };
            (compile_rational_curve(&curve)?, output, json!({}))
        }
        CompileCmd::Algebraic { f, disc, check, output } => {
            let parts: Vec<f64> = disc
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| usage(format!("--disc {disc:?}: expected cx,cy,r")))?;
            let [cx, cy, r] = parts[..] else {
                return Err(usage(format!("--disc {disc:?}: expected cx,cy,r")));
            };
            let f = BivariatePoly::parse(f)?;
            let disc = Disc { center: Vec2::new(cx, cy), radius: r };
            let cl = compile_algebraic_trace_seeded(&f, &disc, seed)?;
            let extra = if *check > 0 {
                let rep = trace_set_check(&cl, &f, *check, 1e-6, 1e-6, seed)?;
                json!({ "seed": seed, "trace_set": rep })
            } else {
                json!({ "seed": seed })
            };
            (cl, output, extra)
        }
    };
    write(output, &cl.to_json()?)?;
    let pass = extra.get("trace_set").map_or(true, |r| r["agreements"] == r["samples"]);
    let mut summary = linkage_summary(&cl);
    summary["output"] = json!(output);
    if let (Value::Object(s), Value::Object(e)) = (&mut summary, extra) {
        s.extend(e);
    }
    emit(cli.json, summary.clone(), || {
        let mut s = format!(
            "wrote {}: {} joints, {} bars, max valency {}",
            output.display(),
            summary["joints"],
            summary["bars"],
            summary["max_valency"]
        );
        if let Some(seed) = summary.get("seed") {
            s.push_str(&format!("\nseed: {seed}"));
        }
        if let Some(r) = summary.get("trace_set") {
            s.push_str(&format!("\nmembership agreement: {}/{}", r["agreements"], r["samples"]));
        }
        s
    });
    Ok(pass)
}

fn tower(cli: &Cli, a: &TowerArgs) -> Outcome {
    let samples = match (&a.curve, a.square) {
        (Some(p), None) => load_samples(p)?,
        (None, Some(n)) => square_boundary(n),
        _ => return Err(usage("give either --curve or --square")),
    };
    let opts = TowerOptions { tether_scale: a.tether_scale, degree_cap: a.degree_cap };
    let tw = build_tower_with(&samples, a.k, &opts)?;
    write(&a.output, &tw.to_json()?)?;
    let stages: Vec<Value> = tw
        .stages
        .iter()
        .map(|s| json!({"k": s.k, "degree": [s.fit.x.degree, s.fit.y.degree], "fit_error": [s.fit.x.error, s.fit.y.error]}))
        .collect();
    let mut summary = linkage_summary(&tw.linkage);
    summary["output"] = json!(a.output);
    summary["stages"] = json!(stages);
    let mut pass = true;
    if a.check > 0 {
        let rep = tower_trace_check(&tw, a.check)?;
        pass = rep.pass;
        summary["check"] = json!(rep);
    }
    emit(cli.json, summary.clone(), || {
        let mut s = format!(
            "wrote {}: K = {}, {} joints, {} bars, max valency {}",
            a.output.display(),
            a.k,
            summary["joints"],
            summary["bars"],
            summary["max_valency"]
        );
        for st in &tw.stages {
            s.push_str(&format!(
                "\n  stage {}: degrees ({}, {}), sampled fit error ({:.3e}, {:.3e})",
                st.k, st.fit.x.degree, st.fit.y.degree, st.fit.x.error, st.fit.y.error
            ));
        }
        if let Some(c) = summary.get("check") {
            s.push_str(&format!(
                "\ncomposite error ({:.4}, {:.4}) vs 1/K = {:.4} + slack {:.4}: {}",
                c["composite"][0].as_f64().unwrap_or(f64::NAN),
                c["composite"][1].as_f64().unwrap_or(f64::NAN),
                c["bound"].as_f64().unwrap_or(f64::NAN),
                c["slack"].as_f64().unwrap_or(f64::NAN),
                if pass { "PASS" } else { "FAIL" }
            ));
            for f in c["failures"].as_array().into_iter().flatten() {
                s.push_str(&format!("\n  {}", f.as_str().unwrap_or_default()));
            }
        }
        s
    });
    Ok(pass)
}

fn load_linkage(path: &Path) -> Result<CompiledLinkage, Fail> {
    Ok(CompiledLinkage::from_json(&read(path)?)?)
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Outcome {
    let cl = load_linkage(&a.fw)?;
    let schedule = match &a.schedule {
        Some(p) => load_schedule(p)?,
        None => default_schedule(&cl, a.samples)?,
    };
    if schedule.is_empty() {
        return Err(usage("the schedule is empty"));
    }
    let path = simulate_schedule(&cl, &schedule)?;
    let bound = step_bound(&cl, &schedule)?;
    match &a.output {
        Some(out) if is_csv(out) => {
            let f = fs::File::create(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
            path.write_csv(f)?;
        }
        Some(out) => write(out, &path.to_json()?)?,
        None => println!("{}", path.to_json()?),
    }
    if a.output.is_some() {
        let summary = json!({ "samples": schedule.len(), "step_bound": bound, "output": a.output });
        emit(cli.json, summary, || {
            format!("simulated {} samples, step bound {bound:.3e}", schedule.len())
        });
    }
    Ok(true)
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Outcome {
    let tol = match a.tol {
        Some(t) => t,
        None => default_tol()?,
    };
    let trace_tol = a.trace_tol.unwrap_or(tol);
    let cl = load_linkage(&a.fw)?;
    let path = load_path(&a.path)?;
    if path.samples.is_empty() {
        return Err(usage("the motion path has no samples"));
    }
    let bound = match a.step_bound {
        Some(b) => b,
        None => {
            let schedule: Vec<Vec<f64>> = if path.samples.iter().all(|m| m.driver.is_some()) {
                path.samples.iter().map(|m| m.driver.clone().unwrap()).collect()
            } else if cl.driver.ranges.len() == 1 {
                path.samples.iter().map(|m| vec![m.s]).collect()
            } else {
                return Err(usage("the path records no driver values; pass --step-bound"));
            };
            step_bound(&cl, &schedule)?
        }
    };
    let mut report = verify_motion(&cl.fw, &path, tol, bound)?;
    let err = match &a.curve {
        Some(p) => {
            let samples = load_samples(p)?;
            trace_error(&path, cl.role("pC")?, CurveRef::Sampled(&samples), &cl.normalization)?
        }
        None => linkage_trace_error(&cl, &path)?,
    };
    report.max_trace_error = Some(err);
    if !(err <= trace_tol) {
        report.fail(format!("trace: error {err:e} exceeds {trace_tol:e}"));
    }
    let mut newton = None;
    if a.newton > 0 {
        let picks = kempe_core::render::frame_indices(path.samples.len(), a.newton);
        let mut worst: f64 = 0.0;
        for i in picks {
            let v = path.samples[i]
                .driver
                .clone()
                .ok_or_else(|| usage("Newton projection needs recorded driver values"))?;
            worst = worst.max(project_sample(&cl, &v)?.displacement);
        }
        newton = Some(worst);
    }
    let value = json!({ "report": report, "step_bound": bound, "tol": tol, "trace_tol": trace_tol, "newton_displacement": newton });
    emit(cli.json, value, || {
        let mut s = format!(
            "bars {:.3e}, step {:.3e} (bound {bound:.3e}), trace {err:.3e}",
            report.max_bar_residual, report.max_step_displacement
        );
        if let Some(d) = newton {
            s.push_str(&format!(", newton displacement {d:.3e}"));
        }
        s.push_str(if report.pass { "\nPASS" } else { "\nFAIL" });
        for f in &report.failures {
            s.push_str(&format!("\n  {f}"));
        }
        s
    });
    Ok(report.pass)
}

/// Default parameters of `kind`, overridden by name=value pairs.
fn gadget_kind(kind: &str, params: &[String]) -> Result<GadgetKind, Fail> {
    let base = GadgetKind::from_name(kind).ok_or_else(|| usage(format!("unknown gadget kind {kind:?}")))?;
    let mut v = serde_json::to_value(&base).map_err(|e| usage(e.to_string()))?;
    for p in params {
        let (name, value) = p.split_once('=').ok_or_else(|| usage(format!("parameter {p:?}: expected name=value")))?;
        let slot = v
            .get_mut(name)
            .filter(|_| name != "kind")
            .ok_or_else(|| usage(format!("{kind} has no parameter {name:?}")))?;
        *slot = if let Ok(i) = value.parse::<i64>() {
            json!(i)
        } else {
            json!(value.parse::<f64>().map_err(|_| usage(format!("parameter {name}: {value:?} is not a number")))?)
        };
    }
    serde_json::from_value(v).map_err(|e| usage(format!("parameters for {kind}: {e}")))
}

fn gadget(cli: &Cli, cmd: &GadgetCmd) -> Outcome {
    let GadgetCmd::Test { kind, params, grid, tol } = cmd;
    let tol = match tol {
        Some(t) => *t,
        None => std::env::var("KEMPE_TOL").map_or(Ok(1e-9), |_| default_tol())?,
    };
    let k = gadget_kind(kind, params)?;
    let g = build_gadget(k.clone())?;
    let report = contract_check(&g, *grid, tol)?;
    let points = grid_size(&g, *grid);
    let dev = report.max_trace_error.unwrap_or(0.0);
    let value = json!({ "kind": k, "grid": grid, "points": points, "tol": tol, "deviation": dev, "report": report });
    emit(cli.json, value, || {
        let mut s = format!(
            "{} on {points} grid points: bar residual {:.3e}, contract deviation {dev:.3e} (tol {tol:e})\n{}",
            k.name(),
            report.max_bar_residual,
            if report.pass { "PASS" } else { "FAIL" }
        );
        for f in &report.failures {
            s.push_str(&format!("\n  {f}"));
        }
        s
    });
    Ok(report.pass)
}

fn dof(cli: &Cli, fw_path: &Path) -> Outcome {
    let fw = Framework::from_json(&read(fw_path)?)?;
    let rep = rigidity_report(&fw, &fw.home_placement())?;
    emit(cli.json, json!(rep), || format!("rank {}, dof {}", rep.rank, rep.dof));
    Ok(true)
}

fn render(cli: &Cli, a: &RenderArgs) -> Outcome {
    let fw = Framework::from_json(&read(&a.fw)?)?;
    let path = load_path(&a.path)?;
    let opts = RenderOptions {
        animate: a.animate,
        max_frames: a.frames,
        tracer: fw.label("pC").ok(),
        ..Default::default()
    };
    let svg = render_svg(&fw, &path, &opts)?;
    write(&a.output, &svg)?;
    emit(cli.json, json!({ "output": a.output, "animate": a.animate }), || format!("wrote {}", a.output.display()));
    Ok(true)
}

fn run(cli: &Cli) -> Outcome {
    match &cli.cmd {
        Cmd::Compile(c) => compile(cli, c),
        Cmd::Tower(a) => tower(cli, a),
        Cmd::Simulate(a) => simulate(cli, a),
        Cmd::Verify(a) => verify(cli, a),
        Cmd::Gadget(c) => gadget(cli, c),
        Cmd::Dof { fw } => dof(cli, fw),
        Cmd::Render(a) => render(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fail::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
