//! Virtual scanner.
//!
//! A scan samples the surface with normals, keeps what a handful of cameras
//! on a sphere around the part can see, rebuilds a surface from the merged
//! visible points and punches random holes into it. The result carries the
//! usual scanning artifacts: unseen regions, rounded edges and missing
//! patches.

mod camera;
mod holes;
mod hull;
mod reconstruct;
mod visibility;

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::{camera_trajectory, VirtualCamera};
pub use holes::punch_holes;
pub use hull::{convex_hull, ConvexHull, DegenerateHull};
pub use reconstruct::{
    reconstruct_surface, ImplicitReconstructor, SurfaceReconstructor, MIN_POINTS,
};
pub use visibility::visible_points;

use crate::math::{mix_seed, rng_from_seed};
use crate::mesh::{sample_surface, MeshError, PointSample, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("visibility hull is degenerate")]
    DegenerateHull,
    #[error("reconstruction needs at least {need} points, got {have}")]
    TooFewPoints { need: usize, have: usize },
    #[error("reconstructed field has no surface")]
    ReconstructionFailed,
    #[error("external reconstruction failed: {0}")]
    ExternalTool(String),
    #[error("every triangle was removed by holes")]
    EmptyAfterHoles,
    #[error("invalid scan configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

impl From<DegenerateHull> for ScanError {
    fn from(_: DegenerateHull) -> Self {
        ScanError::DegenerateHull
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub n_points: usize,
    pub n_views: usize,
    /// Camera distance in bounding-sphere radii.
    pub radius_factor: f64,
    /// Inclusive range the number of holes is drawn from.
    pub hole_count: (usize, usize),
    /// Inclusive range of hole radii as fractions of the bounding-box diagonal.
    pub hole_radius: (f64, f64),
    /// Reconstruction cells along the longest side.
    pub recon_resolution: usize,
    /// Exponent of the hidden-point-removal flip radius, `R = max_dist * 10^gamma`.
    pub hpr_gamma: f64,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            n_points: 100_000,
            n_views: 5,
            radius_factor: 2.5,
            hole_count: (1, 3),
            hole_radius: (0.02, 0.05),
            recon_resolution: 64,
            hpr_gamma: 2.0,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), ScanError> {
        let bad = |m: &str| Err(ScanError::InvalidConfig(m.into()));
        if self.n_points == 0 || self.n_views == 0 {
            return bad("n_points and n_views must be at least 1");
        }
        if !(self.radius_factor > 1.0) || !self.radius_factor.is_finite() {
            return bad("radius_factor must exceed 1");
        }
        if self.hole_count.0 > self.hole_count.1 {
            return bad("hole_count range is empty");
        }
        let (lo, hi) = self.hole_radius;
        if !(lo > 0.0 && lo <= hi && hi <= 0.2) {
            return bad("hole_radius fractions must lie in (0, 0.2]");
        }
        if !(8..=256).contains(&self.recon_resolution) {
            return bad("recon_resolution must lie in [8, 256]");
        }
        if !(self.hpr_gamma > 0.0) || !self.hpr_gamma.is_finite() {
            return bad("hpr_gamma must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Union of the visible samples, in sample order.
    pub merged_points: Vec<PointSample>,
    pub scan_mesh: TriangleMesh,
    pub per_view_counts: Vec<usize>,
    pub cameras: Vec<VirtualCamera>,
    pub holes: usize,
}

/// Runs the scanner with the built-in reconstruction.
pub fn simulate_scan(mesh: &TriangleMesh, cfg: &ScanConfig) -> Result<ScanResult, ScanError> {
    simulate_scan_with(mesh, cfg, &ImplicitReconstructor)
}

/// Runs the scanner with a caller-supplied reconstruction stage.
pub fn simulate_scan_with(
    mesh: &TriangleMesh,
    cfg: &ScanConfig,
    reconstructor: &dyn SurfaceReconstructor,
) -> Result<ScanResult, ScanError> {
    cfg.validate()?;
    let samples = sample_surface(mesh, cfg.n_points, mix_seed(&[cfg.seed, 1]))?;
    let cameras = camera_trajectory(
        &mesh.aabb(),
        cfg.n_views,
        cfg.radius_factor,
        mix_seed(&[cfg.seed, 2]),
    );
    let view = |cam: &VirtualCamera| visible_points(&samples, cam, cfg.hpr_gamma);
    #[cfg(feature = "parallel")]
    let views: Result<Vec<Vec<usize>>, DegenerateHull> = {
        use rayon::prelude::*;
        cameras.par_iter().map(view).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let views: Result<Vec<Vec<usize>>, DegenerateHull> = cameras.iter().map(view).collect();
    let views = views?;
    let mut seen = alloc::vec![false; samples.len()];
    for v in &views {
        for &i in v {
            seen[i] = true;
        }
    }
    let merged_points: Vec<PointSample> = samples
        .iter()
        .zip(&seen)
        .filter(|(_, &s)| s)
        .map(|(p, _)| *p)
        .collect();
    let surface = reconstructor.reconstruct(&merged_points, cfg.recon_resolution)?;
    let mut rng = rng_from_seed(mix_seed(&[cfg.seed, 3]));
    let holes = rng.random_range(cfg.hole_count.0..=cfg.hole_count.1);
    let scan_mesh = punch_holes(&surface, holes, cfg.hole_radius, mix_seed(&[cfg.seed, 4]))?;
    Ok(ScanResult {
        merged_points,
        scan_mesh,
        per_view_counts: views.iter().map(Vec::len).collect(),
        cameras,
        holes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::metrics::{MetricConfig, MetricTarget};

    fn small_cfg(seed: u64) -> ScanConfig {
        ScanConfig {
            n_points: 30_000,
            recon_resolution: 48,
            seed,
            ..ScanConfig::default()
        }
    }

    #[test]
    fn cube_scan_is_close_but_not_exact() {
        let cube = TriangleMesh::cuboid(Vec3::splat(-20.0), Vec3::splat(20.0));
        let r = simulate_scan(&cube, &small_cfg(1)).unwrap();
        assert_eq!(r.per_view_counts.len(), 5);
        assert!(r.merged_points.len() <= 30_000);
        assert!(r.scan_mesh.boundary_edge_count() > 0);
        let t = MetricTarget::new(&cube, MetricConfig::default()).unwrap();
        let cd = t.chamfer(&r.scan_mesh).unwrap();
        let iou = t.iou(&r.scan_mesh).unwrap();
        assert!(cd > 0.0);
        assert!(iou >= 70.0, "{iou}");
    }

    #[test]
    fn deterministic() {
        let s = TriangleMesh::uv_sphere(Vec3::ZERO, 30.0, 32, 16);
        let cfg = small_cfg(7);
        assert_eq!(
            simulate_scan(&s, &cfg).unwrap(),
            simulate_scan(&s, &cfg).unwrap()
        );
    }

    #[test]
    fn config_validation() {
        let cfg = ScanConfig {
            radius_factor: 1.0,
            ..ScanConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ScanConfig {
            hole_radius: (0.0, 0.1),
            ..ScanConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(ScanConfig::default().validate().is_ok());
    }
}
