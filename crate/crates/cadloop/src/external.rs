//! Adapters that delegate rendering or surface reconstruction to a
//! subprocess.
//!
//! A command is a whitespace-separated program and arguments; the input and
//! output paths are appended. Exit status 0 means success and the output file
//! must then hold a mesh.

use std::path::Path;
use std::process::Command;

use cadloop_core::refine::{RenderError, Renderer};
use cadloop_core::scan::{ScanError, SurfaceReconstructor};
use cadloop_core::{PointSample, TriangleMesh};

use crate::meshio::{load_mesh, write_ply_points};

fn run(command: &str, input: &Path, output: &Path) -> Result<(), String> {
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or("empty command")?;
    let out = Command::new(program)
        .args(parts)
        .arg(input)
        .arg(output)
        .output()
        .map_err(|e| format!("cannot run `{program}`: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        let stderr = String::from_utf8_lossy(&out.stderr);
        Err(format!(
            "`{command}` exited with {}: {}",
            out.status,
            stderr.trim()
        ))
    }
}

/// Renders by running `command <program.txt> <out.ply>`.
///
/// Compilation only rejects empty text; anything else is left to the tool
/// and a tool failure counts as a render failure.
#[derive(Debug, Clone)]
pub struct ExternalRenderer {
    pub command: String,
}

impl Renderer for ExternalRenderer {
    fn compile(&self, program: &str) -> Result<(), RenderError> {
        if program.trim().is_empty() {
            Err(RenderError::Compile("empty program".into()))
        } else {
            Ok(())
        }
    }

    fn render(&self, program: &str) -> Result<TriangleMesh, RenderError> {
        let err = |e: String| RenderError::Render(e);
        let dir = tempfile::tempdir().map_err(|e| err(e.to_string()))?;
        let input = dir.path().join("program.txt");
        let output = dir.path().join("out.ply");
        std::fs::write(&input, program).map_err(|e| err(e.to_string()))?;
        run(&self.command, &input, &output).map_err(err)?;
        load_mesh(&output).map_err(|e| err(e.to_string()))
    }
}

/// Reconstructs by running `command <points.ply> <out.ply>` on an oriented
/// point set. The resolution is not passed on.
#[derive(Debug, Clone)]
pub struct ExternalReconstructor {
    pub command: String,
}

impl SurfaceReconstructor for ExternalReconstructor {
    fn reconstruct(
        &self,
        points: &[PointSample],
        _resolution: usize,
    ) -> Result<TriangleMesh, ScanError> {
        let err = |e: String| ScanError::ExternalTool(e);
        let dir = tempfile::tempdir().map_err(|e| err(e.to_string()))?;
        let input = dir.path().join("points.ply");
        let output = dir.path().join("out.ply");
        let mut w =
            std::io::BufWriter::new(std::fs::File::create(&input).map_err(|e| err(e.to_string()))?);
        write_ply_points(points, &mut w).map_err(|e| err(e.to_string()))?;
        std::io::Write::flush(&mut w).map_err(|e| err(e.to_string()))?;
        drop(w);
        run(&self.command, &input, &output).map_err(err)?;
        load_mesh(&output).map_err(|e| err(e.to_string()))
    }
}
