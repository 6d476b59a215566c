//! A minimal sketch-extrude CAD language.
//!
//! A program is an ordered list of extrusions. Each extrusion draws a 2-D
//! sketch on one of the principal planes, sweeps it over `[z0, z0 + h]`
//! along the plane normal and merges it into the running solid with a
//! boolean. Solids are evaluated as signed distance fields and meshed on a
//! regular grid over the `[-100, 100]^3` domain.
//!
//! ```text
//! # comments run to end of line
//! extrude plane=XY z0=-20 h=40 op=new {
//!   add rect 0 0 40 40
//!   sub circle 0 0 10
//! }
//! extrude plane=XZ z0=-5 h=10 op=union {
//!   add polygon -30 0 30 0 0 50
//! }
//! ```
//!
//! The full grammar is in `docs/grammar.ebnf` at the repository root.

mod generate;
mod parse;
mod print;
mod render;
mod sdf;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{perturb_program, random_program};
pub use parse::parse;
pub use print::{format_number, print};
pub use render::{
    render_mesh, sample_field, DEFAULT_RESOLUTION, DOMAIN_HALF_EXTENT, MAX_RESOLUTION,
    MIN_RESOLUTION,
};
pub use sdf::{evaluate_sdf, CompiledSdf};

/// Smallest and largest coordinate literal.
pub const COORD_LIMIT: f64 = 100.0;
/// Largest width, height or extrusion length (the domain edge).
pub const SIZE_LIMIT: f64 = 200.0;
/// Largest circle radius.
pub const RADIUS_LIMIT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    XY,
    XZ,
    YZ,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::XY, Plane::XZ, Plane::YZ];

    pub fn as_str(self) -> &'static str {
        match self {
            Plane::XY => "XY",
            Plane::XZ => "XZ",
            Plane::YZ => "YZ",
        }
    }

    /// Axis indices `(u, v, normal)`.
    pub fn axes(self) -> (usize, usize, usize) {
        match self {
            Plane::XY => (0, 1, 2),
            Plane::XZ => (0, 2, 1),
            Plane::YZ => (1, 2, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    New,
    Union,
    Cut,
    Intersect,
}

impl Combine {
    pub fn as_str(self) -> &'static str {
        match self {
            Combine::New => "new",
            Combine::Union => "union",
            Combine::Cut => "cut",
            Combine::Intersect => "intersect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape2d {
    Rect { cx: f64, cy: f64, w: f64, h: f64 },
    Circle { cx: f64, cy: f64, r: f64 },
    Polygon(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub subtract: bool,
    pub shape: Shape2d,
}

impl Primitive {
    pub fn add(shape: Shape2d) -> Self {
        Self {
            subtract: false,
            shape,
        }
    }

    pub fn sub(shape: Shape2d) -> Self {
        Self {
            subtract: true,
            shape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrude {
    pub plane: Plane,
    /// Start of the slab along the plane normal.
    pub offset: f64,
    pub height: f64,
    pub combine: Combine,
    pub sketch: Vec<Primitive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ast {
    pub steps: Vec<Extrude>,
}

/// Source location, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("parse error at {span}: {message}")]
    Parse { span: Span, message: String },
    #[error("range error at {span}: {message}")]
    Range { span: Span, message: String },
    #[error("program yields a degenerate solid")]
    DegenerateSolid,
    #[error("render resolution {0} outside [32, 256]")]
    InvalidResolution(usize),
    #[error("generation exhausted its retry budget")]
    GenerationExhausted,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityReason {
    Ok,
    ParseError,
    RangeError,
    DegenerateSolid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub reason: ValidityReason,
    pub detail: String,
}

impl ValidityReport {
    pub fn ok() -> Self {
        Self {
            valid: true,
            reason: ValidityReason::Ok,
            detail: String::new(),
        }
    }

    pub fn from_error(e: &DslError) -> Self {
        use alloc::string::ToString;
        let reason = match e {
            DslError::Parse { .. } => ValidityReason::ParseError,
            DslError::Range { .. } => ValidityReason::RangeError,
            _ => ValidityReason::DegenerateSolid,
        };
        Self {
            valid: false,
            reason,
            detail: e.to_string(),
        }
    }
}

/// Classifies a program text: parses, validates and renders at `resolution`.
pub fn classify(text: &str, resolution: usize) -> ValidityReport {
    match parse(text).and_then(|ast| render_mesh(&ast, resolution)) {
        Ok(_) => ValidityReport::ok(),
        Err(e) => ValidityReport::from_error(&e),
    }
}

impl Ast {
    /// Checks the structural and range invariants. The parser calls this;
    /// hand-built ASTs should too.
    pub fn validate(&self) -> Result<(), DslError> {
        let span = Span::default();
        let range = |message: String| DslError::Range { span, message };
        if self.steps.is_empty() {
            return Err(DslError::Parse {
                span,
                message: "program has no steps".into(),
            });
        }
        for (i, step) in self.steps.iter().enumerate() {
            if (i == 0) != (step.combine == Combine::New) {
                return Err(DslError::Parse {
                    span,
                    message: alloc::format!("step {} has op={}", i + 1, step.combine.as_str()),
                });
            }
            check_coord(step.offset).map_err(range)?;
            check_size(step.height, SIZE_LIMIT).map_err(range)?;
            if step.sketch.is_empty() {
                return Err(DslError::Parse {
                    span,
                    message: "empty sketch".into(),
                });
            }
            for p in &step.sketch {
                check_shape(&p.shape).map_err(range)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn check_coord(v: f64) -> Result<(), String> {
    if v.is_finite() && (-COORD_LIMIT..=COORD_LIMIT).contains(&v) {
        Ok(())
    } else {
        Err(alloc::format!("coordinate {v} outside [-100, 100]"))
    }
}

pub(crate) fn check_size(v: f64, limit: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 && v <= limit {
        Ok(())
    } else {
        Err(alloc::format!("size {v} outside (0, {limit}]"))
    }
}

pub(crate) fn check_shape(shape: &Shape2d) -> Result<(), String> {
    match shape {
        Shape2d::Rect { cx, cy, w, h } => {
            check_coord(*cx)?;
            check_coord(*cy)?;
            check_size(*w, SIZE_LIMIT)?;
            check_size(*h, SIZE_LIMIT)
        }
        Shape2d::Circle { cx, cy, r } => {
            check_coord(*cx)?;
            check_coord(*cy)?;
            check_size(*r, RADIUS_LIMIT)
        }
        Shape2d::Polygon(pts) => {
            if pts.len() < 3 {
                return Err("polygon needs at least 3 vertices".into());
            }
            for p in pts {
                check_coord(p[0])?;
                check_coord(p[1])?;
            }
            if polygon_is_collinear(pts) {
                return Err("polygon vertices are collinear".into());
            }
            Ok(())
        }
    }
}

pub(crate) fn polygon_is_collinear(pts: &[[f64; 2]]) -> bool {
    let a = pts[0];
    let scale = pts
        .iter()
        .map(|p| crate::math::abs(p[0] - a[0]).max(crate::math::abs(p[1] - a[1])))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return true;
    }
    let tol = 1e-9 * scale * scale;
    pts.iter().enumerate().all(|(i, b)| {
        pts[i + 1..].iter().all(|c| {
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            crate::math::abs(cross) <= tol
        })
    })
}
