//! The discrepancy cloud: 128 target points and 128 prediction points, each
//! carrying the offset to the nearest point of the other surface.
//!
//! Both meshes are given in the program domain `[-100, 100]^3` and scaled
//! by 1/100 into the common frame. Targets that do not come from a program
//! are fitted into the domain first (see [`crate::mesh::fit_to_program_domain`]),
//! which makes the 1/100 scale coincide with a `[-1, 1]^3` normalization.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{mix_seed, rng_from_seed, Vec3};
use crate::mesh::{
    sample_surface, Frame, MeshError, NormalizationTransform, SurfaceIndex, TriangleMesh,
};

pub const DENSE_SAMPLES: usize = 30_000;
pub const FEATURE_POINTS: usize = 128;

const MAGIC: &[u8; 5] = b"DCLD1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PcError {
    #[error("need {need} samples, have {have}")]
    InsufficientSamples { need: usize, have: usize },
    #[error("corrupt cloud payload: {0}")]
    CorruptPayload(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturePoint {
    pub position: Vec3,
    pub offset: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyCloud {
    pub target_points: Vec<FeaturePoint>,
    pub pred_points: Vec<FeaturePoint>,
}

fn common_frame() -> NormalizationTransform {
    NormalizationTransform {
        scale: 0.01,
        translation: Vec3::ZERO,
        frame: Frame::PredictionOver100,
    }
}

fn positions(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Vec3>, MeshError> {
    Ok(sample_surface(mesh, n, seed)?
        .into_iter()
        .map(|s| s.position)
        .collect())
}

/// `nearest(other, p) - p` for every sample.
pub fn cross_offsets(samples: &[Vec3], other: &SurfaceIndex) -> Vec<Vec3> {
    let one = |&p: &Vec3| other.nearest(p).point - p;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        samples.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    samples.iter().map(one).collect()
}

/// The `k` samples with the largest offsets, in descending offset length,
/// ties broken by ascending sample index.
pub fn select_top_k(
    samples: &[Vec3],
    offsets: &[Vec3],
    k: usize,
) -> Result<Vec<FeaturePoint>, PcError> {
    let n = samples.len().min(offsets.len());
    if n < k {
        return Err(PcError::InsufficientSamples { need: k, have: n });
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|i| (offsets[i].norm_squared(), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if k < n {
        order.select_nth_unstable_by(k, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    Ok(order
        .into_iter()
        .map(|(_, i)| FeaturePoint {
            position: samples[i],
            offset: offsets[i],
        })
        .collect())
}

/// Target-side state reused across every cloud built against one target:
/// the scaled mesh, its surface index and its dense samples.
#[derive(Debug, Clone)]
pub struct CloudTarget {
    index: SurfaceIndex,
    samples: Vec<Vec3>,
    mesh: TriangleMesh,
}

impl CloudTarget {
    /// `target` in program-domain coordinates.
    pub fn new(target: &TriangleMesh, seed: u64) -> Result<Self, PcError> {
        let mesh = target.transformed(&common_frame());
        let samples = positions(&mesh, DENSE_SAMPLES, seed)?;
        Ok(Self {
            index: SurfaceIndex::new(&mesh),
            samples,
            mesh,
        })
    }

    /// The target in the common frame.
    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Cloud against a previous render in program-domain coordinates.
    pub fn cloud(
        &self,
        prev_render: &TriangleMesh,
        seed: u64,
    ) -> Result<DiscrepancyCloud, PcError> {
        let pred = prev_render.transformed(&common_frame());
        let pred_samples = positions(&pred, DENSE_SAMPLES, seed)?;
        let pred_index = SurfaceIndex::new(&pred);
        #[cfg(feature = "parallel")]
        let (dp, dq) = rayon::join(
            || cross_offsets(&self.samples, &pred_index),
            || cross_offsets(&pred_samples, &self.index),
        );
        #[cfg(not(feature = "parallel"))]
        let (dp, dq) = (
            cross_offsets(&self.samples, &pred_index),
            cross_offsets(&pred_samples, &self.index),
        );
        Ok(DiscrepancyCloud {
            target_points: select_top_k(&self.samples, &dp, FEATURE_POINTS)?,
            pred_points: select_top_k(&pred_samples, &dq, FEATURE_POINTS)?,
        })
    }

    /// The null-prediction cloud used before any render exists: target
    /// samples `p` with offsets `-p`, and prediction points at the origin
    /// paired through a seeded permutation with offsets `p`.
    pub fn init_cloud(&self, seed: u64) -> Result<DiscrepancyCloud, PcError> {
        let p = positions(&self.mesh, FEATURE_POINTS, mix_seed(&[seed, 1]))?;
        let mut perm: Vec<usize> = (0..p.len()).collect();
        perm.shuffle(&mut rng_from_seed(mix_seed(&[seed, 2])));
        Ok(DiscrepancyCloud {
            target_points: p
                .iter()
                .map(|&q| FeaturePoint {
                    position: q,
                    offset: -q,
                })
                .collect(),
            pred_points: perm
                .iter()
                .map(|&j| FeaturePoint {
                    position: Vec3::ZERO,
                    offset: p[j],
                })
                .collect(),
        })
    }
}

/// Full cloud for a target and previous render, both in program-domain
/// coordinates. Deterministic in `seed`.
pub fn build_discrepancy_cloud(
    target: &TriangleMesh,
    prev_render: &TriangleMesh,
    seed: u64,
) -> Result<DiscrepancyCloud, PcError> {
    CloudTarget::new(target, mix_seed(&[seed, 0]))?.cloud(prev_render, mix_seed(&[seed, 1]))
}

/// Null-prediction cloud for the first step.
pub fn init_discrepancy_cloud(
    target: &TriangleMesh,
    seed: u64,
) -> Result<DiscrepancyCloud, PcError> {
    let mesh = target.transformed(&common_frame());
    CloudTarget {
        index: SurfaceIndex::new(&mesh),
        samples: Vec::new(),
        mesh,
    }
    .init_cloud(seed)
}

impl DiscrepancyCloud {
    /// Binary layout: `DCLD1`, target count and prediction count as u32 LE,
    /// then six f64 LE per point `(x, y, z, dx, dy, dz)`, target side first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.target_points.len() + self.pred_points.len();
        let mut out = Vec::with_capacity(13 + 48 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.target_points.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.pred_points.len() as u32).to_le_bytes());
        for fp in self.target_points.iter().chain(&self.pred_points) {
            for v in fp
                .position
                .to_array()
                .into_iter()
                .chain(fp.offset.to_array())
            {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PcError> {
        let corrupt = |m: &str| PcError::CorruptPayload(m.into());
        if bytes.len() < 13 || &bytes[..5] != MAGIC {
            return Err(corrupt("missing DCLD1 header"));
        }
        let count = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (nt, np) = (count(5), count(9));
        let expected = nt
            .checked_add(np)
            .and_then(|n| n.checked_mul(48))
            .and_then(|n| n.checked_add(13))
            .ok_or_else(|| corrupt("point counts overflow"))?;
        if bytes.len() != expected {
            return Err(corrupt("payload length does not match point counts"));
        }
        let mut points = bytes[13..].chunks_exact(48).map(|c| {
            let f = |i: usize| f64::from_le_bytes(c[8 * i..8 * i + 8].try_into().unwrap());
            FeaturePoint {
                position: Vec3::new(f(0), f(1), f(2)),
                offset: Vec3::new(f(3), f(4), f(5)),
            }
        });
        let target_points = points.by_ref().take(nt).collect();
        let pred_points = points.collect();
        Ok(Self {
            target_points,
            pred_points,
        })
    }
}
