//! SVG output: framework snapshots along a motion path, optionally animated
//! with SVG timing.

use crate::error::{Error, Result};
use crate::framework::{Framework, JointId, MotionPath};
use crate::geom::Vec2;
use std::fmt::Write;

#[derive(Debug, Clone)]
pub struct RenderOptions {
    /// Show frames one after another instead of overlaying them.
    pub animate: bool,
    /// At most this many evenly chosen samples become frames.
    pub max_frames: usize,
    /// Seconds per frame when animating.
    pub frame_seconds: f64,
    /// Joint whose trace is drawn over the frames.
    pub tracer: Option<JointId>,
    /// Output width in pixels; the height follows the aspect ratio.
    pub width: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { animate: false, max_frames: 60, frame_seconds: 0.1, tracer: None, width: 800.0 }
    }
}

/// Indices of the samples drawn as frames.
pub fn frame_indices(n: usize, max_frames: usize) -> Vec<usize> {
    if n == 0 || max_frames == 0 {
        return Vec::new();
    }
    if n <= max_frames {
        return (0..n).collect();
    }
    if max_frames == 1 {
        return vec![0];
    }
    let mut v: Vec<usize> = (0..max_frames).map(|i| i * (n - 1) / (max_frames - 1)).collect();
    v.dedup();
    v
}

fn fmt_pt(out: &mut String, p: Vec2) {
    // y is flipped by the enclosing transform.
    let _ = write!(out, "{:.6},{:.6}", p.x, p.y);
}

/// Renders `path` over the bars of `fw`. Each frame is a `<g class="frame">`
/// holding one `<polyline>` per bar.
pub fn render_svg(fw: &Framework, path: &MotionPath, opts: &RenderOptions) -> Result<String> {
    let frames = frame_indices(path.samples.len(), opts.max_frames);
    if frames.is_empty() {
        return Err(Error::Argument("nothing to render: the motion path is empty".into()));
    }
    let n = fw.joints.len();
    for &i in &frames {
        if path.samples[i].pos.len() != n {
            return Err(Error::Structural(format!(
                "sample {i} places {} joints, framework has {n}",
                path.samples[i].pos.len()
            )));
        }
    }
    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &i in &frames {
        for p in &path.samples[i].pos {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
    }
    let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1e-9);
    let pad = 0.03 * extent;
    let (w, h) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let stroke = extent / 800.0;
    let height = opts.width * h / w;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.1}" height="{:.1}" viewBox="{:.6} {:.6} {:.6} {:.6}">"#,
        opts.width,
        height,
        lo.x - pad,
        -(hi.y + pad),
        w,
        h
    );
    let _ = writeln!(
        out,
        r#"<g transform="scale(1,-1)" fill="none" stroke-linecap="round" stroke-width="{stroke:.6}">"#
    );
    let opacity = if opts.animate { 1.0 } else { (3.0 / frames.len() as f64).clamp(0.05, 1.0) };
    for (f, &i) in frames.iter().enumerate() {
        let pos = &path.samples[i].pos;
        if opts.animate {
            let _ = writeln!(out, r#"<g class="frame" visibility="hidden" stroke="steelblue">"#);
            let _ = writeln!(
                out,
                r#"<set attributeName="visibility" to="visible" begin="{:.3}s" dur="{:.3}s"/>"#,
                f as f64 * opts.frame_seconds,
                opts.frame_seconds
            );
        } else {
            let _ = writeln!(out, r#"<g class="frame" stroke="steelblue" stroke-opacity="{opacity:.3}">"#);
        }
        for bar in &fw.bars {
            out.push_str(r#"<polyline points=""#);
            fmt_pt(&mut out, pos[bar.a.0]);
            out.push(' ');
            fmt_pt(&mut out, pos[bar.b.0]);
            out.push_str("\"/>\n");
        }
        out.push_str("</g>\n");
    }
    if let Some(t) = opts.tracer {
        if t.0 >= n {
            return Err(Error::Structural(format!("tracer joint {t} does not exist")));
        }
        out.push_str(r#"<polyline class="trace" stroke="crimson" points=""#);
        for (k, m) in path.samples.iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            fmt_pt(&mut out, m.pos[t.0]);
        }
        out.push_str("\"/>\n");
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_selection() {
        assert_eq!(frame_indices(5, 10), vec![0, 1, 2, 3, 4]);
        assert_eq!(frame_indices(101, 3), vec![0, 50, 100]);
        assert_eq!(frame_indices(7, 1), vec![0]);
        assert!(frame_indices(0, 3).is_empty());
    }
}
