// SPDX-License-Identifier: Apache-2.0

//! Reflection outlier removal.
//!
//! Multi-bounce reflections produce returns well below the true surface. Such
//! a point cannot have line of sight to the sensor: the known terrain rises
//! above the sensor-to-point ray somewhere along the way. The filter marches
//! the planar cell ray from the sensor to each point and flags the point once
//! a *trusted* cell's elevation exceeds the ray height at the traversed
//! segment's midpoint by more than the tolerance `o_t`.
//!
//! A cell is trusted when the confidence sum of its 5x5 neighborhood reaches
//! `o_minc`, which keeps freshly interpolated terrain from rejecting real
//! returns. With an untrusted (e.g. freshly initialized) map nothing is
//! filtered.

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::config::Config;
use crate::grid::GridMap;
use crate::ray;

/// Per-frame occlusion context: which cells may reject points, and the
/// highest trusted elevation (used to skip rays that can never be occluded).
pub(crate) struct TrustContext {
    trusted: Vec<bool>,
    max_trusted_elevation: f64,
}

impl TrustContext {
    /// Build from the persistent layers via a summed-area table: each cell's
    /// 5x5 confidence sum, compared against `o_minc`.
    pub(crate) fn build(map: &GridMap, cfg: &Config) -> Self {
        let dims = map.dims();
        let conf = map.confidence();
        let stride = dims + 1;
        let mut sat = vec![0.0f64; stride * stride];
        for i in 0..dims {
            for j in 0..dims {
                sat[(i + 1) * stride + (j + 1)] = conf[i * dims + j]
                    + sat[i * stride + (j + 1)]
                    + sat[(i + 1) * stride + j]
                    - sat[i * stride + j];
            }
        }
        let window = |i0: usize, i1: usize, j0: usize, j1: usize| {
            sat[(i1 + 1) * stride + (j1 + 1)] - sat[i0 * stride + (j1 + 1)]
                - sat[(i1 + 1) * stride + j0]
                + sat[i0 * stride + j0]
        };
        let elevation = map.elevation();
        let mut trusted = vec![false; dims * dims];
        let mut max_trusted_elevation = f64::NEG_INFINITY;
        for i in 0..dims {
            let i0 = i.saturating_sub(2);
            let i1 = (i + 2).min(dims - 1);
            for j in 0..dims {
                let j0 = j.saturating_sub(2);
                let j1 = (j + 2).min(dims - 1);
                if window(i0, i1, j0, j1) >= cfg.o_minc {
                    let idx = i * dims + j;
                    trusted[idx] = true;
                    max_trusted_elevation = max_trusted_elevation.max(elevation[idx]);
                }
            }
        }
        TrustContext {
            trusted,
            max_trusted_elevation,
        }
    }
}

/// Split a cloud into kept points and a per-point outlier mask (aligned with
/// the input; `true` marks an outlier).
pub fn filter_outliers(
    cloud: &PointCloud,
    map: &GridMap,
    cfg: &Config,
) -> (PointCloud, Vec<bool>) {
    let trust = TrustContext::build(map, cfg);
    let mask = occlusion_mask(cloud, map, cfg, &trust);
    let kept = PointCloud {
        points: cloud
            .points
            .iter()
            .zip(&mask)
            .filter_map(|(p, &out)| (!out).then_some(*p))
            .collect(),
        sensor_origin: cloud.sensor_origin,
        frame_id: cloud.frame_id,
    };
    (kept, mask)
}

pub(crate) fn occlusion_mask(
    cloud: &PointCloud,
    map: &GridMap,
    cfg: &Config,
    trust: &TrustContext,
) -> Vec<bool> {
    let origin = cloud.sensor_origin;
    cloud
        .points
        .par_iter()
        .map(|p| {
            // A ray whose lowest height clears every trusted elevation can
            // never be occluded; this skips the march for most real returns.
            if p.z.min(origin[2]) >= trust.max_trusted_elevation - cfg.o_t {
                return false;
            }
            let dz = p.z - origin[2];
            let mut was_inside = false;
            for rc in ray::traverse(map, [origin[0], origin[1]], [p.x, p.y]) {
                let Some(idx) = map.linear(rc.cell) else {
                    if was_inside {
                        break; // left the map for good
                    }
                    continue;
                };
                was_inside = true;
                if trust.trusted[idx] {
                    let z_ray = origin[2] + dz * rc.t_mid();
                    if map.elevation()[idx] - z_ray > cfg.o_t {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}
