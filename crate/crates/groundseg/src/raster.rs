// SPDX-License-Identifier: Apache-2.0

//! Per-cell z statistics and single-pass rasterization.
//!
//! Statistics use Welford's online recurrence so variance comes out of one
//! pass over the points. Rasterization is deterministic under any worker
//! count: points are binned per cell in input order first, then each cell is
//! accumulated sequentially, so the floating-point operation order never
//! depends on scheduling.

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::grid::GridMap;

/// Running z statistics of one cell.
///
/// `count == 0` is the empty sentinel (`min_z = +inf`, `max_z = -inf`).
/// Variance is the population variance `m2 / count`, defined as 0 for a
/// single sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    count: u32,
    min_z: f64,
    max_z: f64,
    mean: f64,
    m2: f64,
}

impl CellStats {
    pub const EMPTY: CellStats = CellStats {
        count: 0,
        min_z: f64::INFINITY,
        max_z: f64::NEG_INFINITY,
        mean: 0.0,
        m2: 0.0,
    };

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn min_z(&self) -> f64 {
        self.min_z
    }

    pub fn max_z(&self) -> f64 {
        self.max_z
    }

    pub fn mean_z(&self) -> f64 {
        self.mean
    }

    /// Population variance; 0 until two samples arrive.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    /// Welford update with one sample.
    pub fn accumulate(&mut self, z: f64) {
        debug_assert!(z.is_finite());
        self.count += 1;
        let delta = z - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (z - self.mean);
        self.min_z = self.min_z.min(z);
        self.max_z = self.max_z.max(z);
    }

    /// Combine two disjoint sample sets (Chan's parallel formula). Exact on
    /// count/min/max, within floating rounding of sequential accumulation on
    /// mean and variance.
    pub fn merge(a: CellStats, b: CellStats) -> CellStats {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let na = a.count as f64;
        let nb = b.count as f64;
        let n = na + nb;
        let delta = b.mean - a.mean;
        CellStats {
            count: a.count + b.count,
            min_z: a.min_z.min(b.min_z),
            max_z: a.max_z.max(b.max_z),
            mean: a.mean + delta * (nb / n),
            m2: a.m2 + b.m2 + delta * delta * (na * nb / n),
        }
    }
}

impl Default for CellStats {
    fn default() -> Self {
        CellStats::EMPTY
    }
}

/// Rasterize an (already outlier-filtered) cloud into the map's per-frame
/// statistics layers. Returns the number of out-of-bounds points.
///
/// Every in-bounds point lands in exactly one cell; the persistent
/// observation counts used for density masking are bumped as a side effect.
pub fn rasterize(cloud: &PointCloud, map: &mut GridMap) -> usize {
    let dims = map.dims();
    let n_cells = dims * dims;

    // Bin in input order: counting sort of point z values by cell.
    let mut cell_of_point = vec![u32::MAX; cloud.len()];
    let mut counts = vec![0u32; n_cells];
    let mut out_of_bounds = 0usize;
    for (k, p) in cloud.points.iter().enumerate() {
        match map.linear(map.world_to_cell(p.x, p.y)) {
            Some(idx) => {
                cell_of_point[k] = idx as u32;
                counts[idx] += 1;
            }
            None => out_of_bounds += 1,
        }
    }

    let mut touched: Vec<u32> = Vec::new();
    let mut offsets = vec![0u32; n_cells];
    let mut running = 0u32;
    for idx in 0..n_cells {
        offsets[idx] = running;
        running += counts[idx];
        if counts[idx] > 0 {
            touched.push(idx as u32);
        }
    }
    let mut sorted_z = vec![0.0f64; running as usize];
    let mut cursor = offsets.clone();
    for (k, p) in cloud.points.iter().enumerate() {
        let cell = cell_of_point[k];
        if cell != u32::MAX {
            let slot = cursor[cell as usize];
            sorted_z[slot as usize] = p.z;
            cursor[cell as usize] = slot + 1;
        }
    }

    // Each touched cell is owned by exactly one task and accumulated in
    // input order, so the result is bitwise identical for any worker count.
    let per_cell: Vec<CellStats> = touched
        .par_iter()
        .map(|&idx| {
            let idx = idx as usize;
            let start = offsets[idx] as usize;
            let end = start + counts[idx] as usize;
            let mut stats = CellStats::EMPTY;
            for &z in &sorted_z[start..end] {
                stats.accumulate(z);
            }
            stats
        })
        .collect();

    let stats = map.stats_mut();
    for (&idx, cell_stats) in touched.iter().zip(&per_cell) {
        stats[idx as usize] = *cell_stats;
    }
    let obs = map.obs_count_mut();
    for &idx in &touched {
        obs[idx as usize] += counts[idx as usize] as u64;
    }
    out_of_bounds
}
