//! Chamfer distance, volumetric IoU, invalid rate and their aggregation.
//!
//! Candidates are scored in the target's metric frame: the transform that
//! fits the target into `[0, 1]^3` is applied to both meshes. Chamfer
//! distance is the sum of the two mean squared nearest-neighbour distances
//! between 8192-point surface samples, reported times 10^3. IoU compares
//! 3-axis parity occupancies on a 64^3 grid over the bounding cube of both
//! meshes.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;
use crate::mesh::{
    sample_surface, voxelize_in, Aabb, Frame, KdTree, MeshError, NormalizationTransform,
    TriangleMesh,
};

pub const CD_POINTS: usize = 8192;
pub const CD_SCALE: f64 = 1e3;
pub const IOU_RESOLUTION: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("occupancy union is empty")]
    EmptyUnion,
    #[error("no reports to aggregate")]
    EmptyInput,
    #[error("point set is empty")]
    EmptyPointSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cd_times_1e3: Option<f64>,
    pub iou_percent: Option<f64>,
    pub valid: bool,
}

impl MetricReport {
    pub fn invalid() -> Self {
        Self {
            cd_times_1e3: None,
            iou_percent: None,
            valid: false,
        }
    }

    pub fn scored(cd: f64, iou: f64) -> Self {
        Self {
            cd_times_1e3: Some(cd),
            iou_percent: Some(iou),
            valid: true,
        }
    }

    /// The loop's discrepancy; absent for invalid candidates.
    pub fn discrepancy(&self) -> Option<f64> {
        self.cd_times_1e3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub median_cd: Option<f64>,
    pub mean_iou: Option<f64>,
    pub invalid_rate_percent: f64,
    pub total: usize,
    pub invalid: usize,
}

impl AggregateReport {
    /// Aligned plain-text table with CD, IoU and IR columns.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>, p: usize| match v {
            Some(v) => alloc::format!("{v:.p$}"),
            None => String::from("-"),
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>12} {:>10} {:>8} {:>7}",
            "CD(x1e3)", "IoU(%)", "IR(%)", "n"
        );
        let _ = writeln!(
            s,
            "{:>12} {:>10} {:>8.2} {:>7}",
            opt(self.median_cd, 4),
            opt(self.mean_iou, 2),
            self.invalid_rate_percent,
            self.total
        );
        s
    }
}

/// Median with the midpoint rule for even lengths. `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Median CD and mean IoU over valid reports; invalid rate over all.
pub fn aggregate(reports: &[MetricReport]) -> Result<AggregateReport, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let cds: Vec<f64> = reports.iter().filter_map(|r| r.cd_times_1e3).collect();
    let ious: Vec<f64> = reports.iter().filter_map(|r| r.iou_percent).collect();
    let invalid = reports.iter().filter(|r| !r.valid).count();
    Ok(AggregateReport {
        median_cd: median(&cds),
        mean_iou: if ious.is_empty() {
            None
        } else {
            Some(ious.iter().sum::<f64>() / ious.len() as f64)
        },
        invalid_rate_percent: 100.0 * invalid as f64 / reports.len() as f64,
        total: reports.len(),
        invalid,
    })
}

fn mean_nearest_sq(from: &[Vec3], to: &KdTree) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|&p| to.nearest(p).map_or(0.0, |(_, d2)| d2))
        .sum();
    sum / from.len() as f64
}

/// Chamfer distance between two point sets, times 10^3.
pub fn chamfer_points(a: &[Vec3], b: &[Vec3]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyPointSet);
    }
    Ok(chamfer_trees(a, &KdTree::new(a), b, &KdTree::new(b)))
}

fn chamfer_trees(a: &[Vec3], ta: &KdTree, b: &[Vec3], tb: &KdTree) -> f64 {
    (mean_nearest_sq(a, tb) + mean_nearest_sq(b, ta)) * CD_SCALE
}

fn positions(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Vec3>, MeshError> {
    Ok(sample_surface(mesh, n, seed)?
        .into_iter()
        .map(|s| s.position)
        .collect())
}

/// Chamfer distance between surface samples of two meshes already in the
/// metric frame; both are sampled with the same seed.
pub fn chamfer(
    a: &TriangleMesh,
    b: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<f64, MetricsError> {
    chamfer_points(&positions(a, n, seed)?, &positions(b, n, seed)?)
}

/// IoU in percent on a `resolution^3` grid over the bounding cube of `frame`.
pub fn volumetric_iou_in(
    a: &TriangleMesh,
    b: &TriangleMesh,
    frame: &Aabb,
    resolution: usize,
) -> Result<f64, MetricsError> {
    let ga = voxelize_in(a, frame, resolution)?;
    let gb = voxelize_in(b, frame, resolution)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in ga.cells.iter().zip(&gb.cells) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        return Err(MetricsError::EmptyUnion);
    }
    Ok(100.0 * inter as f64 / union as f64)
}

/// IoU in percent over the bounding cube of both meshes.
pub fn volumetric_iou(
    a: &TriangleMesh,
    b: &TriangleMesh,
    resolution: usize,
) -> Result<f64, MetricsError> {
    volumetric_iou_in(a, b, &a.aabb().union(&b.aabb()), resolution)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub cd_points: usize,
    pub iou_resolution: usize,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            cd_points: CD_POINTS,
            iou_resolution: IOU_RESOLUTION,
            seed: 0,
        }
    }
}

/// A target prepared for repeated scoring: its metric-frame transform,
/// samples and nearest-neighbour index are computed once.
#[derive(Debug, Clone)]
pub struct MetricTarget {
    transform: NormalizationTransform,
    mesh: TriangleMesh,
    samples: Vec<Vec3>,
    tree: KdTree,
    cfg: MetricConfig,
}

impl MetricTarget {
    pub fn new(target: &TriangleMesh, cfg: MetricConfig) -> Result<Self, MetricsError> {
        let transform = NormalizationTransform::for_aabb(&target.aabb(), Frame::UnitCube01)?;
        let mesh = target.transformed(&transform);
        let samples = positions(&mesh, cfg.cd_points, cfg.seed)?;
        let tree = KdTree::new(&samples);
        Ok(Self {
            transform,
            mesh,
            samples,
            tree,
            cfg,
        })
    }

    pub fn transform(&self) -> &NormalizationTransform {
        &self.transform
    }

    /// The target in the metric frame.
    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn config(&self) -> &MetricConfig {
        &self.cfg
    }

    /// Chamfer distance (times 10^3) of a candidate given in target units.
    pub fn chamfer(&self, candidate: &TriangleMesh) -> Result<f64, MetricsError> {
        let cand = candidate.transformed(&self.transform);
        let pts = positions(&cand, self.cfg.cd_points, self.cfg.seed)?;
        Ok(chamfer_trees(
            &self.samples,
            &self.tree,
            &pts,
            &KdTree::new(&pts),
        ))
    }

    /// IoU (percent) of a candidate given in target units.
    pub fn iou(&self, candidate: &TriangleMesh) -> Result<f64, MetricsError> {
        let cand = candidate.transformed(&self.transform);
        volumetric_iou(&self.mesh, &cand, self.cfg.iou_resolution)
    }

    /// Both metrics; any failure yields an invalid report.
    pub fn score(&self, candidate: &TriangleMesh) -> MetricReport {
        match (self.chamfer(candidate), self.iou(candidate)) {
            (Ok(cd), Ok(iou)) => MetricReport::scored(cd, iou),
            _ => MetricReport::invalid(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> TriangleMesh {
        TriangleMesh::cuboid(Vec3::ZERO, Vec3::splat(1.0))
    }

    #[test]
    fn two_point_sets() {
        let cd = chamfer_points(&[Vec3::ZERO], &[Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        assert_eq!(cd, 2000.0);
    }

    #[test]
    fn identical_meshes() {
        let c = unit_cube();
        assert_eq!(chamfer(&c, &c, 1024, 4).unwrap(), 0.0);
        assert_eq!(volumetric_iou(&c, &c, 64).unwrap(), 100.0);
        let t = MetricTarget::new(&c, MetricConfig::default()).unwrap();
        assert_eq!(t.score(&c), MetricReport::scored(0.0, 100.0));
    }

    #[test]
    fn shifted_boxes_in_doubled_frame() {
        let a = unit_cube();
        let b = TriangleMesh::cuboid(Vec3::splat(0.5), Vec3::splat(1.5));
        let frame = Aabb::new(Vec3::ZERO, Vec3::splat(2.0));
        let iou = volumetric_iou_in(&a, &b, &frame, 64).unwrap();
        assert!((iou - 100.0 / 15.0).abs() < 2.0, "{iou}");
    }

    #[test]
    fn empty_union() {
        let a = TriangleMesh::cuboid(Vec3::splat(5.0), Vec3::splat(6.0));
        let frame = Aabb::new(Vec3::ZERO, Vec3::splat(1.0));
        assert_eq!(
            volumetric_iou_in(&a, &a, &frame, 16),
            Err(MetricsError::EmptyUnion)
        );
    }

    #[test]
    fn aggregation() {
        let r = aggregate(&[
            MetricReport::scored(1.0, 50.0),
            MetricReport::scored(3.0, 70.0),
            MetricReport::invalid(),
        ])
        .unwrap();
        assert_eq!(r.median_cd, Some(2.0));
        assert_eq!(r.mean_iou, Some(60.0));
        assert!((r.invalid_rate_percent - 100.0 / 3.0).abs() < 1e-12);
        let r = aggregate(&[MetricReport::invalid(); 4]).unwrap();
        assert_eq!(
            (r.median_cd, r.mean_iou, r.invalid_rate_percent),
            (None, None, 100.0)
        );
        let r = aggregate(&[MetricReport::scored(0.7, 90.0); 3]).unwrap();
        assert_eq!((r.median_cd, r.invalid_rate_percent), (Some(0.7), 0.0));
        assert_eq!(aggregate(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn table_has_columns() {
        let r = aggregate(&[MetricReport::scored(1.0, 50.0)]).unwrap();
        let t = r.table();
        assert!(t.contains("CD(x1e3)") && t.contains("IoU(%)") && t.contains("IR(%)"));
    }
}
