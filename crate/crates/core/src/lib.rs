//! Closed-loop CAD reverse-engineering primitives.
//!
//! The crate is `no_std` + `alloc`. It covers the geometry kernel (meshes,
//! sampling, nearest-surface queries, voxelization, isosurfaces), a small
//! sketch-extrude CAD language, the two discrepancy encodings (multi-view
//! depth overlay and the cross-offset point cloud), a virtual scanner,
//! evaluation metrics, the editor refinement loop and curriculum rollouts.
//! File formats, the CLI and anything touching the network live in the
//! `cadloop` crate.
//!
//! Enable `std` to link the standard library and `parallel` to render and
//! score candidates of a refinement step on the rayon pool.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dsl;
pub mod math;
pub mod mesh;
pub mod metrics;
pub mod pointcloud;
pub mod refine;
pub mod rollout;
pub mod scan;
pub mod view;

pub use math::Vec3;
pub use mesh::{Aabb, Frame, NormalizationTransform, PointSample, TriangleMesh};
