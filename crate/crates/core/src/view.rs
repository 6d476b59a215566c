//! Multi-view depth encoding and the target/prediction color overlay.
//!
//! Each view is a parallel projection of the program domain onto a 238 x 238
//! tile. Intensity falls linearly from 1 at the near face of the domain slab
//! to 0 at the far face, so nearer surfaces are brighter; empty pixels are 0.
//! Views `-Z`, `+Y` and `+X` are mirrored left to right, then the tiles are
//! laid out in a 2-column, 4-row grid. The overlay puts the target in green
//! and the prediction in red, so agreement shows as yellow.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{self, Vec3};
use crate::mesh::raster2d::Tri2;
use crate::mesh::TriangleMesh;

pub const TILE: usize = 238;
pub const GRID_COLS: usize = 2;
pub const GRID_ROWS: usize = 4;
pub const GRID_WIDTH: usize = TILE * GRID_COLS;
pub const GRID_HEIGHT: usize = TILE * GRID_ROWS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViewTag {
    #[serde(rename = "+X")]
    PosX,
    #[serde(rename = "-X")]
    NegX,
    #[serde(rename = "+Y")]
    PosY,
    #[serde(rename = "-Y")]
    NegY,
    #[serde(rename = "+Z")]
    PosZ,
    #[serde(rename = "-Z")]
    NegZ,
    #[serde(rename = "ISO1")]
    Iso1,
    #[serde(rename = "ISO2")]
    Iso2,
}

impl ViewTag {
    pub const ALL: [ViewTag; 8] = [
        ViewTag::PosX,
        ViewTag::NegX,
        ViewTag::PosY,
        ViewTag::NegY,
        ViewTag::PosZ,
        ViewTag::NegZ,
        ViewTag::Iso1,
        ViewTag::Iso2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewTag::PosX => "+X",
            ViewTag::NegX => "-X",
            ViewTag::PosY => "+Y",
            ViewTag::NegY => "-Y",
            ViewTag::PosZ => "+Z",
            ViewTag::NegZ => "-Z",
            ViewTag::Iso1 => "ISO1",
            ViewTag::Iso2 => "ISO2",
        }
    }

    pub fn is_mirrored(self) -> bool {
        matches!(self, ViewTag::NegZ | ViewTag::PosY | ViewTag::PosX)
    }

    pub fn is_iso(self) -> bool {
        matches!(self, ViewTag::Iso1 | ViewTag::Iso2)
    }
}

impl fmt::Display for ViewTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ViewError {
    #[error("mesh leaves the view domain")]
    OutOfDomain,
    #[error("view {0} missing from grid")]
    MissingView(ViewTag),
    #[error("view {0} appears twice in grid")]
    DuplicateView(ViewTag),
    #[error("image dimensions do not match")]
    DimensionMismatch,
}

/// Projection basis of one view. `toward` points from the scene to the
/// camera; `right` and `up` span the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewBasis {
    pub toward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    /// Half size of the square window and of the depth slab.
    pub half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    /// Row-major tile order of the grid.
    pub order: [ViewTag; 8],
    pub iso_dirs: [Vec3; 2],
    /// Half extent of the cubic domain the meshes live in.
    pub half_extent: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        let s = 1.0 / math::sqrt(3.0);
        Self {
            order: ViewTag::ALL,
            iso_dirs: [Vec3::new(s, s, s), Vec3::new(-s, -s, s)],
            half_extent: 100.0,
        }
    }
}

impl ViewConfig {
    pub fn basis(&self, tag: ViewTag) -> ViewBasis {
        let h = self.half_extent;
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        let z = Vec3::new(0.0, 0.0, 1.0);
        let axis = |toward: Vec3, right: Vec3, up: Vec3| ViewBasis {
            toward,
            right,
            up,
            half: h,
        };
        match tag {
            ViewTag::PosX => axis(x, y, z),
            ViewTag::NegX => axis(-x, -y, z),
            ViewTag::PosY => axis(y, -x, z),
            ViewTag::NegY => axis(-y, x, z),
            ViewTag::PosZ => axis(z, x, y),
            ViewTag::NegZ => axis(-z, -x, y),
            ViewTag::Iso1 | ViewTag::Iso2 => {
                let d = self.iso_dirs[if tag == ViewTag::Iso1 { 0 } else { 1 }];
                let d = d.normalized().unwrap_or(z);
                let up = (z - d * d.dot(z)).normalized().unwrap_or(y);
                let right = up.cross(d);
                // Every point of the domain cube projects inside this window.
                ViewBasis {
                    toward: d,
                    right,
                    up,
                    half: h * math::sqrt(3.0),
                }
            }
        }
    }
}

/// Single-channel image, row-major, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub tag: Option<ViewTag>,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub fn blank(width: usize, height: usize, tag: Option<ViewTag>) -> Self {
        Self {
            width,
            height,
            tag,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x + self.width * y]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[x + self.width * y] = v;
    }
}

/// Orthographic depth view of `mesh` (program-domain coordinates).
pub fn render_depth_view(
    mesh: &TriangleMesh,
    tag: ViewTag,
    cfg: &ViewConfig,
) -> Result<DepthImage, ViewError> {
    let limit = cfg.half_extent * 1.01;
    if mesh
        .vertices()
        .iter()
        .any(|v| !v.is_finite() || math::abs(v.x).max(math::abs(v.y)).max(math::abs(v.z)) > limit)
    {
        return Err(ViewError::OutOfDomain);
    }
    let b = cfg.basis(tag);
    let size = TILE as f64;
    let project = |p: Vec3| -> ([f64; 2], f64) {
        let px = (p.dot(b.right) + b.half) / (2.0 * b.half) * size;
        let py = (b.half - p.dot(b.up)) / (2.0 * b.half) * size;
        let intensity = 0.5 + p.dot(b.toward) / (2.0 * b.half);
        ([px, py], intensity)
    };
    let projected: Vec<([f64; 2], f64)> = mesh.vertices().iter().map(|&v| project(v)).collect();
    let mut img = DepthImage::blank(TILE, TILE, Some(tag));
    for t in mesh.triangles() {
        let [(a, da), (bb, db), (c, dc)] = t.map(|i| projected[i as usize]);
        let Some(tri) = Tri2::new(a, bb, c) else {
            continue;
        };
        let (lo, hi) = tri.bounds();
        let x0 = math::ceil(lo[0] - 0.5).max(0.0);
        let x1 = math::floor(hi[0] - 0.5).min(size - 1.0);
        let y0 = math::ceil(lo[1] - 0.5).max(0.0);
        let y1 = math::floor(hi[1] - 0.5).min(size - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0 as usize..=y1 as usize {
            for x in x0 as usize..=x1 as usize {
                let q = [x as f64 + 0.5, y as f64 + 0.5];
                if let Some(w) = tri.cover(q) {
                    let d = math::clamp(w[0] * da + w[1] * db + w[2] * dc, 0.0, 1.0);
                    let slot = &mut img.data[x + TILE * y];
                    if d > *slot {
                        *slot = d;
                    }
                }
            }
        }
    }
    Ok(img)
}

/// Left-right reflection for the mirrored tags; identity otherwise.
pub fn mirror_if_needed(img: &DepthImage) -> DepthImage {
    if !img.tag.is_some_and(ViewTag::is_mirrored) {
        return img.clone();
    }
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            out.set(x, y, img.get(img.width - 1 - x, y));
        }
    }
    out
}

/// Tiles the eight views row-major in `cfg.order`.
pub fn assemble_grid(views: &[DepthImage], cfg: &ViewConfig) -> Result<DepthImage, ViewError> {
    let mut slots: [Option<&DepthImage>; 8] = [None; 8];
    for v in views {
        if v.width != TILE || v.height != TILE {
            return Err(ViewError::DimensionMismatch);
        }
        let Some(tag) = v.tag else {
            return Err(ViewError::DimensionMismatch);
        };
        let pos = cfg
            .order
            .iter()
            .position(|&t| t == tag)
            .ok_or(ViewError::DuplicateView(tag))?;
        if slots[pos].is_some() {
            return Err(ViewError::DuplicateView(tag));
        }
        slots[pos] = Some(v);
    }
    let mut out = DepthImage::blank(GRID_WIDTH, GRID_HEIGHT, None);
    for (pos, slot) in slots.iter().enumerate() {
        let tile = slot.ok_or(ViewError::MissingView(cfg.order[pos]))?;
        let (ox, oy) = ((pos % GRID_COLS) * TILE, (pos / GRID_COLS) * TILE);
        for y in 0..TILE {
            let row = &tile.data[y * TILE..(y + 1) * TILE];
            let start = ox + GRID_WIDTH * (oy + y);
            out.data[start..start + TILE].copy_from_slice(row);
        }
    }
    Ok(out)
}

/// Renders, mirrors and tiles all eight views of `mesh`.
pub fn encode_views(mesh: &TriangleMesh, cfg: &ViewConfig) -> Result<DepthImage, ViewError> {
    let render = |&tag: &ViewTag| render_depth_view(mesh, tag, cfg).map(|v| mirror_if_needed(&v));
    #[cfg(feature = "parallel")]
    let views: Result<Vec<DepthImage>, ViewError> = {
        use rayon::prelude::*;
        cfg.order.par_iter().map(render).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let views: Result<Vec<DepthImage>, ViewError> = cfg.order.iter().map(render).collect();
    assemble_grid(&views?, cfg)
}

/// RGB image with channels in `[0, 1]`; blue is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major `[r, g, b]`.
    pub pixels: Vec<[f64; 3]>,
}

impl OverlayImage {
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[x + self.width * y]
    }

    /// Interleaved 8-bit RGB, each channel quantized as `round(v * 255)`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|p| p.map(|c| math::round(math::clamp(c, 0.0, 1.0) * 255.0) as u8))
            .collect()
    }
}

/// Green from the target grid, red from the prediction grid (zero when
/// absent), blue zero.
pub fn compose_overlay(
    target: &DepthImage,
    prediction: Option<&DepthImage>,
) -> Result<OverlayImage, ViewError> {
    if let Some(p) = prediction {
        if p.width != target.width || p.height != target.height {
            return Err(ViewError::DimensionMismatch);
        }
    }
    let pixels = target
        .data
        .iter()
        .enumerate()
        .map(|(i, &g)| [prediction.map_or(0.0, |p| p.data[i]), g, 0.0])
        .collect();
    Ok(OverlayImage {
        width: target.width,
        height: target.height,
        pixels,
    })
}
