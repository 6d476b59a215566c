use alloc::string::String;
use core::fmt::Write;

use super::{Ast, Shape2d};

/// Shortest decimal that parses back to the same value; `40.0` prints as
/// `40` and negative zero as `0`.
pub fn format_number(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    alloc::format!("{v}")
}

/// Canonical program text. `parse(&print(a))` reproduces `a` exactly.
pub fn print(ast: &Ast) -> String {
    let mut out = String::new();
    for step in &ast.steps {
        let _ = writeln!(
            out,
            "extrude plane={} z0={} h={} op={} {{",
            step.plane.as_str(),
            format_number(step.offset),
            format_number(step.height),
            step.combine.as_str()
        );
        for prim in &step.sketch {
            out.push_str(if prim.subtract { "  sub " } else { "  add " });
            match &prim.shape {
                Shape2d::Rect { cx, cy, w, h } => {
                    out.push_str("rect");
                    for v in [cx, cy, w, h] {
                        out.push(' ');
                        out.push_str(&format_number(*v));
                    }
                }
                Shape2d::Circle { cx, cy, r } => {
                    out.push_str("circle");
                    for v in [cx, cy, r] {
                        out.push(' ');
                        out.push_str(&format_number(*v));
                    }
                }
                Shape2d::Polygon(pts) => {
                    out.push_str("polygon");
                    for p in pts {
                        out.push(' ');
                        out.push_str(&format_number(p[0]));
                        out.push(' ');
                        out.push_str(&format_number(p[1]));
                    }
                }
            }
            out.push('\n');
        }
        out.push_str("}\n");
    }
    out
}
