use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::math::{self, rng_from_seed, Vec3};
use crate::mesh::Aabb;

const ELEVATION_DEG: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualCamera {
    pub position: Vec3,
    pub look_at: Vec3,
}

/// `n_views` cameras on a sphere of radius `radius_factor` times the
/// bounding-sphere radius of `aabb`. Azimuths are equally spaced from a
/// seeded phase; elevations alternate between +30 and -30 degrees starting
/// from a seeded sign.
pub fn camera_trajectory(
    aabb: &Aabb,
    n_views: usize,
    radius_factor: f64,
    seed: u64,
) -> Vec<VirtualCamera> {
    let center = aabb.center();
    let radius = radius_factor * 0.5 * aabb.diagonal();
    let mut rng = rng_from_seed(seed);
    let phase = rng.random_range(0.0..core::f64::consts::TAU);
    let first_up = rng.random_bool(0.5);
    let el = ELEVATION_DEG.to_radians();
    (0..n_views)
        .map(|i| {
            let az = phase + core::f64::consts::TAU * i as f64 / n_views as f64;
            let up = (i % 2 == 0) == first_up;
            let e = if up { el } else { -el };
            let dir = Vec3::new(
                math::cos(e) * math::cos(az),
                math::cos(e) * math::sin(az),
                math::sin(e),
            );
            VirtualCamera {
                position: center + dir * radius,
                look_at: center,
            }
        })
        .collect()
}
