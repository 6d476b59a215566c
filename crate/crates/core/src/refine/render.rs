use alloc::string::{String, ToString};
use core::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::dsl::{parse, render_mesh, DslError, DEFAULT_RESOLUTION};
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("compile error: {0}")]
    Compile(String),
    #[error("render failed: {0}")]
    Render(String),
}

/// Turns program text into a surface. `compile` is checked first and a
/// program that does not compile is never rendered.
pub trait Renderer: Sync {
    fn compile(&self, program: &str) -> Result<(), RenderError>;
    fn render(&self, program: &str) -> Result<TriangleMesh, RenderError>;
}

/// The in-process DSL renderer.
#[derive(Debug, Clone, Copy)]
pub struct DslRenderer {
    pub resolution: usize,
}

impl Default for DslRenderer {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
        }
    }
}

fn render_error(e: DslError) -> RenderError {
    match e {
        DslError::Parse { .. } | DslError::Range { .. } => RenderError::Compile(e.to_string()),
        _ => RenderError::Render(e.to_string()),
    }
}

impl Renderer for DslRenderer {
    fn compile(&self, program: &str) -> Result<(), RenderError> {
        parse(program).map(|_| ()).map_err(render_error)
    }

    fn render(&self, program: &str) -> Result<TriangleMesh, RenderError> {
        let ast = parse(program).map_err(render_error)?;
        render_mesh(&ast, self.resolution).map_err(render_error)
    }
}

/// Wraps a renderer and counts `render` invocations.
#[derive(Debug, Default)]
pub struct CountingRenderer<R> {
    pub inner: R,
    renders: AtomicUsize,
}

impl<R: Renderer> CountingRenderer<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            renders: AtomicUsize::new(0),
        }
    }

    pub fn renders(&self) -> usize {
        self.renders.load(Ordering::SeqCst)
    }
}

impl<R: Renderer> Renderer for CountingRenderer<R> {
    fn compile(&self, program: &str) -> Result<(), RenderError> {
        self.inner.compile(program)
    }

    fn render(&self, program: &str) -> Result<TriangleMesh, RenderError> {
        self.renders.fetch_add(1, Ordering::SeqCst);
        self.inner.render(program)
    }
}
