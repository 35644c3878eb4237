//! SVG rendering of scenarios and planned paths.

use crate::geom::{frame, Configuration, ConvexPolygon, Vec2};
use crate::scenario::Scenario;
use crate::steer::Path;
use std::fmt::Write;

const PIXELS_PER_METER: f64 = 20.0;

/// What to draw on top of the scenario.
#[derive(Debug, Clone, Default)]
pub struct Drawing<'a> {
    pub entries: &'a [Configuration],
    pub goal: Option<Configuration>,
    pub unoptimized: Option<&'a Path>,
    pub path: Option<&'a Path>,
}

fn polygon(out: &mut String, pts: &[Vec2], style: &str) {
    let pts: Vec<String> = pts.iter().map(|p| format!("{:.4},{:.4}", p.x, p.y)).collect();
    let _ = writeln!(out, r#"  <polygon points="{}" {style}/>"#, pts.join(" "));
}

fn polyline(out: &mut String, path: &Path, style: &str) {
    let pts: Vec<String> = path.configs.iter().map(|c| format!("{:.4},{:.4}", c.x, c.y)).collect();
    let _ = writeln!(out, r#"  <polyline points="{}" fill="none" {style}/>"#, pts.join(" "));
}

/// Renders the scenario in world coordinates, y pointing up.
pub fn render(s: &Scenario, d: &Drawing) -> String {
    let b = &s.bounds;
    let (w, h) = (b.xmax - b.xmin, b.ymax - b.ymin);
    let k = PIXELS_PER_METER;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
        w * k,
        h * k,
        w * k,
        h * k
    );
    let _ = writeln!(
        out,
        r#"<g transform="matrix({k} 0 0 {} {} {})" stroke-width="0.05">"#,
        -k,
        -b.xmin * k,
        b.ymax * k
    );
    let car = |c: &Configuration| frame(c, &s.vehicle);
    let draw = |out: &mut String, p: &ConvexPolygon, style: &str| polygon(out, p.vertices(), style);
    for o in &s.obstacles {
        draw(&mut out, o, r##"fill="#333333" stroke="#333333""##);
    }
    draw(&mut out, &s.slot.rectangle(), r##"fill="none" stroke="#1f5fbf""##);
    for e in d.entries {
        draw(&mut out, &car(e), r##"fill="none" stroke="#f08c00""##);
    }
    if let Some(g) = d.goal {
        draw(&mut out, &car(&g), r##"fill="none" stroke="#2f9e44""##);
    }
    draw(&mut out, &car(&s.init), r##"fill="none" stroke="#e03131""##);
    if let Some(p) = d.unoptimized {
        polyline(&mut out, p, r##"stroke="#000000" stroke-dasharray="0.2 0.2""##);
    }
    if let Some(p) = d.path {
        polyline(&mut out, p, r##"stroke="#000000""##);
    }
    out.push_str("</g>\n</svg>\n");
    out
}
