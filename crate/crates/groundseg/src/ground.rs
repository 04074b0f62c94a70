// SPDX-License-Identifier: Apache-2.0

//! Ground cell classification and elevation fusion.
//!
//! A cell is classified using the z variance of its points: flat ground has
//! low dispersion, obstacle structure does not. The variance threshold scales
//! with planar distance to the sensor (measurements get noisier far out) and
//! is floored at `t_minv`. Sparse cells borrow the average variance of their
//! patch, and cells with fewer points than a fraction of the expected
//! per-cell return count are skipped entirely.
//!
//! For classified cells the current-frame ground elevation is the point count
//! weighted mean of patch minimum heights; it is blended into the persistent
//! elevation layer weighted by confidence. Obstacle cells may only lower the
//! stored elevation, never raise it.

use rayon::prelude::*;

use crate::config::Config;
use crate::grid::{CellClass, GridMap};
use crate::raster::CellStats;

/// Distance-scaled variance threshold with the `t_minv` floor.
pub fn variance_threshold(d: f64, cfg: &Config) -> f64 {
    (cfg.d_sf * d).max(cfg.t_minv)
}

/// Expected return count for a cell at planar distance `d`: the angular width
/// of the cell divided by the sensor's angular point distance. Defined as
/// infinite at `d = 0`.
pub fn expected_points(d: f64, cfg: &Config) -> f64 {
    debug_assert!(d >= 0.0);
    if d == 0.0 {
        f64::INFINITY
    } else {
        (cfg.resolution / d).atan().to_degrees() / cfg.d_pv
    }
}

/// Point count weighted mean of per-cell minimum heights over a patch.
/// Cells without points carry zero weight. `None` when no cell has points.
pub fn cell_ground_height(counts: &[f64], minima: &[f64]) -> Option<f64> {
    debug_assert_eq!(counts.len(), minima.len());
    let mut sum_p = 0.0;
    let mut sum_pm = 0.0;
    for (&p, &m) in counts.iter().zip(minima) {
        if p > 0.0 {
            sum_p += p;
            sum_pm += p * m;
        }
    }
    (sum_p > 0.0).then(|| sum_pm / sum_p)
}

/// Patch point count scaled to a confidence in `[0, 1]`.
pub fn cell_confidence(counts: &[f64], cfg: &Config) -> f64 {
    (counts.iter().sum::<f64>() / cfg.s).clamp(0.0, 1.0)
}

/// Current-frame estimate for one classified cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundEstimate {
    /// Current-frame ground elevation (patch count-weighted minima mean).
    pub h: f64,
    /// Current-frame confidence in `[0, 1]`.
    pub q: f64,
    pub is_ground: bool,
}

/// Patch side length for a cell at planar distance `d`.
fn patch_k(d: f64, cfg: &Config) -> i32 {
    if d < cfg.d_ps {
        3
    } else {
        5
    }
}

struct Geometry {
    dims: i32,
    resolution: f64,
    center: [f64; 2],
    half: i32,
}

impl Geometry {
    fn of(map: &GridMap) -> Self {
        Geometry {
            dims: map.dims() as i32,
            resolution: map.resolution(),
            center: map.center(),
            half: map.half(),
        }
    }

    fn planar_distance(&self, idx: usize, xy: [f64; 2]) -> f64 {
        let i = (idx as i32 / self.dims - self.half) as f64;
        let j = (idx as i32 % self.dims - self.half) as f64;
        let dx = self.center[0] + i * self.resolution - xy[0];
        let dy = self.center[1] + j * self.resolution - xy[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Visit the linear indices of the in-bounds `k`x`k` patch around `idx`.
    fn for_patch(&self, idx: usize, k: i32, mut f: impl FnMut(usize)) {
        let r = k / 2;
        let ci = idx as i32 / self.dims;
        let cj = idx as i32 % self.dims;
        let i0 = (ci - r).max(0);
        let i1 = (ci + r).min(self.dims - 1);
        let j0 = (cj - r).max(0);
        let j1 = (cj + r).min(self.dims - 1);
        for i in i0..=i1 {
            let row = i * self.dims;
            for j in j0..=j1 {
                f((row + j) as usize);
            }
        }
    }
}

/// Variance to test for a cell: its own when well populated, otherwise the
/// patch average over cells with at least two points. `None` when neither is
/// available.
fn tested_variance(
    geo: &Geometry,
    stats: &[CellStats],
    idx: usize,
    k: i32,
    cfg: &Config,
) -> Option<f64> {
    let s = &stats[idx];
    if s.count() >= cfg.v_np {
        return Some(s.variance());
    }
    let mut sum = 0.0;
    let mut n = 0u32;
    geo.for_patch(idx, k, |p| {
        if stats[p].count() >= 2 {
            sum += stats[p].variance();
            n += 1;
        }
    });
    (n > 0).then(|| sum / n as f64)
}

/// Classify every populated cell as ground or obstacle; cells failing the
/// expected point count gate stay [`CellClass::Unknown`].
pub fn classify_cells(map: &mut GridMap, sensor_xy: [f64; 2], cfg: &Config) {
    let geo = Geometry::of(map);
    let (stats, class) = map.stats_and_class_mut();
    class
        .par_iter_mut()
        .enumerate()
        .for_each(|(idx, out)| *out = classify_one(&geo, stats, idx, sensor_xy, cfg));
}

fn classify_one(
    geo: &Geometry,
    stats: &[CellStats],
    idx: usize,
    sensor_xy: [f64; 2],
    cfg: &Config,
) -> CellClass {
    let count = stats[idx].count();
    if count == 0 {
        return CellClass::Unknown;
    }
    let d = geo.planar_distance(idx, sensor_xy);
    if (count as f64) < cfg.g_minp * expected_points(d, cfg) {
        return CellClass::Unknown;
    }
    let k = patch_k(d, cfg);
    match tested_variance(geo, stats, idx, k, cfg) {
        Some(var) if var < variance_threshold(d, cfg) => CellClass::Ground,
        Some(_) => CellClass::Obstacle,
        None => CellClass::Unknown,
    }
}

/// Current-frame estimate for a cell that [`classify_cells`] classified.
pub fn ground_estimate(
    map: &GridMap,
    idx: usize,
    sensor_xy: [f64; 2],
    cfg: &Config,
) -> Option<GroundEstimate> {
    let geo = Geometry::of(map);
    let is_ground = match map.class()[idx] {
        CellClass::Ground => true,
        CellClass::Obstacle => false,
        CellClass::Unknown => return None,
    };
    let (h, sum_p) = patch_height(&geo, map.stats(), idx, sensor_xy, cfg)?;
    Some(GroundEstimate {
        h,
        q: (sum_p / cfg.s).clamp(0.0, 1.0),
        is_ground,
    })
}

/// Count-weighted minima mean and total count over the cell's patch.
fn patch_height(
    geo: &Geometry,
    stats: &[CellStats],
    idx: usize,
    sensor_xy: [f64; 2],
    cfg: &Config,
) -> Option<(f64, f64)> {
    let k = patch_k(geo.planar_distance(idx, sensor_xy), cfg);
    let mut sum_p = 0.0;
    let mut sum_pm = 0.0;
    geo.for_patch(idx, k, |p| {
        let c = stats[p].count();
        if c > 0 {
            sum_p += c as f64;
            sum_pm += c as f64 * stats[p].min_z();
        }
    });
    (sum_p > 0.0).then(|| (sum_pm / sum_p, sum_p))
}

/// Blend the current frame's estimates into the persistent elevation and
/// confidence layers.
///
/// Ground cells: confidence-weighted elevation update and halved-gain
/// confidence growth toward `q / 2`. Obstacle cells: the patch height may
/// only lower the stored elevation, bumping confidence by 0.1 up to at most
/// 0.5. Unclassified cells are untouched.
pub fn fuse(map: &mut GridMap, sensor_xy: [f64; 2], cfg: &Config) {
    let geo = Geometry::of(map);
    let (stats, class, elevation, confidence) = map.fuse_layers();
    elevation
        .par_iter_mut()
        .zip(confidence.par_iter_mut())
        .enumerate()
        .for_each(|(idx, (g, c))| {
            let is_ground = match class[idx] {
                CellClass::Ground => true,
                CellClass::Obstacle => false,
                CellClass::Unknown => return,
            };
            let Some((h, sum_p)) = patch_height(&geo, stats, idx, sensor_xy, cfg) else {
                return;
            };
            if is_ground {
                let q = (sum_p / cfg.s).clamp(0.0, 1.0);
                if q + *c > 0.0 {
                    *g = (q * h + *c * *g) / (q + *c);
                    *c = 0.5 * (q / 2.0 + *c);
                }
            } else if h < *g {
                *g = h;
                *c = (*c + 0.1).min(0.5);
            }
        });
}
