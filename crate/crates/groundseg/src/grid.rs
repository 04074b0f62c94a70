// SPDX-License-Identifier: Apache-2.0

//! Vehicle-centered multi-layer 2D grid map.
//!
//! The map is a square raster of odd side length so a unique center cell
//! exists. It carries two groups of layers:
//!
//! * **per-frame** — z statistics ([`CellStats`]) and the ground/obstacle
//!   classification, rebuilt from scratch every scan;
//! * **persistent** — ground elevation `g`, its confidence `c` in `[0, 1]`,
//!   and the accumulated observation count. These survive across frames and
//!   stay anchored to world coordinates when the map recenters under the
//!   moving vehicle.
//!
//! Cell `(i, j)` covers world x in `[cx + (i - h - 0.5)R, cx + (i - h + 0.5)R)`
//! where `h = dims / 2`, and likewise `j` along y.

use crate::error::{Error, Result};
use crate::raster::CellStats;

/// Integer cell coordinates. May lie outside the map; use
/// [`GridMap::linear`] to test containment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellIndex {
    pub i: i32,
    pub j: i32,
}

impl CellIndex {
    pub fn new(i: i32, j: i32) -> Self {
        CellIndex { i, j }
    }

    /// Chebyshev (ring) distance to another cell.
    pub fn ring_distance(&self, other: CellIndex) -> i32 {
        (self.i - other.i).abs().max((self.j - other.j).abs())
    }
}

/// Per-frame classification of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellClass {
    /// Not enough information this frame (no points or count gate failed).
    #[default]
    Unknown,
    /// Variance test passed: the cell holds only ground points.
    Ground,
    /// Variance test failed: the cell contains obstacle structure.
    Obstacle,
}

/// Layer selector for [`GridMap::patch_sums`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Count,
    MinZ,
    MeanZ,
    MaxZ,
    Variance,
    Elevation,
    Confidence,
}

#[derive(Debug, Clone)]
pub struct GridMap {
    resolution: f64,
    dims: usize,
    center: [f64; 2],
    stats: Vec<CellStats>,
    class: Vec<CellClass>,
    elevation: Vec<f64>,
    confidence: Vec<f64>,
    obs_count: Vec<u64>,
}

impl GridMap {
    /// Create a map centered at `center` with every cell's elevation set to
    /// `initial_elevation` (typically the vehicle's ground level) and zero
    /// confidence.
    pub fn new(
        resolution: f64,
        dims: usize,
        center: [f64; 2],
        initial_elevation: f64,
    ) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::Data(format!(
                "grid resolution must be > 0, got {resolution}"
            )));
        }
        if dims == 0 || dims % 2 == 0 {
            return Err(Error::Data(format!(
                "grid dims must be odd and positive, got {dims}"
            )));
        }
        if !initial_elevation.is_finite() {
            return Err(Error::Data("initial elevation must be finite".into()));
        }
        let n = dims * dims;
        Ok(GridMap {
            resolution,
            dims,
            center,
            stats: vec![CellStats::EMPTY; n],
            class: vec![CellClass::Unknown; n],
            elevation: vec![initial_elevation; n],
            confidence: vec![0.0; n],
            obs_count: vec![0; n],
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn cell_count(&self) -> usize {
        self.dims * self.dims
    }

    /// Half side length in cells; the center cell is `(half, half)`.
    pub fn half(&self) -> i32 {
        (self.dims / 2) as i32
    }

    /// World position to cell index. Out-of-bounds positions yield an index
    /// outside `[0, dims)`; they are representable but not addressable.
    pub fn world_to_cell(&self, x: f64, y: f64) -> CellIndex {
        let half = self.half() as f64;
        let i = ((x - self.center[0]) / self.resolution + half + 0.5).floor();
        let j = ((y - self.center[1]) / self.resolution + half + 0.5).floor();
        CellIndex {
            i: i as i32,
            j: j as i32,
        }
    }

    /// World coordinates of the cell center.
    pub fn cell_to_world(&self, cell: CellIndex) -> [f64; 2] {
        let half = self.half();
        [
            self.center[0] + (cell.i - half) as f64 * self.resolution,
            self.center[1] + (cell.j - half) as f64 * self.resolution,
        ]
    }

    pub fn in_bounds(&self, cell: CellIndex) -> bool {
        let n = self.dims as i32;
        cell.i >= 0 && cell.i < n && cell.j >= 0 && cell.j < n
    }

    /// Linear storage index, or `None` when out of bounds.
    #[inline]
    pub fn linear(&self, cell: CellIndex) -> Option<usize> {
        if self.in_bounds(cell) {
            Some(cell.i as usize * self.dims + cell.j as usize)
        } else {
            None
        }
    }

    pub fn cell_of_linear(&self, idx: usize) -> CellIndex {
        CellIndex {
            i: (idx / self.dims) as i32,
            j: (idx % self.dims) as i32,
        }
    }

    pub fn stats(&self) -> &[CellStats] {
        &self.stats
    }

    pub(crate) fn stats_mut(&mut self) -> &mut [CellStats] {
        &mut self.stats
    }

    pub fn class(&self) -> &[CellClass] {
        &self.class
    }

    /// Set the per-frame classification of one cell (map import, tests).
    pub fn set_class(&mut self, cell: CellIndex, class: CellClass) -> Result<()> {
        let idx = self
            .linear(cell)
            .ok_or_else(|| Error::Data(format!("cell ({}, {}) out of bounds", cell.i, cell.j)))?;
        self.class[idx] = class;
        Ok(())
    }

    pub fn elevation(&self) -> &[f64] {
        &self.elevation
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    pub fn obs_count(&self) -> &[u64] {
        &self.obs_count
    }

    /// Split borrow for the fusion/interpolation passes: read-only per-frame
    /// layers plus mutable persistent layers.
    pub(crate) fn fuse_layers(
        &mut self,
    ) -> (&[CellStats], &[CellClass], &mut [f64], &mut [f64]) {
        (
            &self.stats,
            &self.class,
            &mut self.elevation,
            &mut self.confidence,
        )
    }

    /// Split borrow for classification: read-only statistics plus the
    /// mutable classification layer.
    pub(crate) fn stats_and_class_mut(&mut self) -> (&[CellStats], &mut [CellClass]) {
        (&self.stats, &mut self.class)
    }

    pub(crate) fn obs_count_mut(&mut self) -> &mut [u64] {
        &mut self.obs_count
    }

    /// Set persistent elevation for one cell (map import, tests).
    pub fn set_elevation(&mut self, cell: CellIndex, g: f64) -> Result<()> {
        if !g.is_finite() {
            return Err(Error::Data(format!("elevation must be finite, got {g}")));
        }
        let idx = self
            .linear(cell)
            .ok_or_else(|| Error::Data(format!("cell ({}, {}) out of bounds", cell.i, cell.j)))?;
        self.elevation[idx] = g;
        Ok(())
    }

    /// Set persistent confidence for one cell (map import, tests).
    pub fn set_confidence(&mut self, cell: CellIndex, c: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Data(format!("confidence must be in [0, 1], got {c}")));
        }
        let idx = self
            .linear(cell)
            .ok_or_else(|| Error::Data(format!("cell ({}, {}) out of bounds", cell.i, cell.j)))?;
        self.confidence[idx] = c;
        Ok(())
    }

    /// Clear the per-frame layers (statistics and classification).
    pub fn clear_frame(&mut self) {
        self.stats.fill(CellStats::EMPTY);
        self.class.fill(CellClass::Unknown);
    }

    /// Move the map under the vehicle, keeping persistent layers anchored to
    /// world coordinates.
    ///
    /// The displacement is quantized to whole cells. Surviving cells keep
    /// their elevation, confidence and observation count; newly exposed cells
    /// start with zero confidence and inherit the elevation of the nearest
    /// previously-known cell against the shift direction. Any actual shift
    /// clears the per-frame layers; a zero shift leaves the map untouched.
    pub fn recenter(&mut self, new_center: [f64; 2]) {
        let limit = self.dims as f64;
        let di = ((new_center[0] - self.center[0]) / self.resolution)
            .round()
            .clamp(-limit, limit) as i32;
        let dj = ((new_center[1] - self.center[1]) / self.resolution)
            .round()
            .clamp(-limit, limit) as i32;
        if di == 0 && dj == 0 {
            return;
        }
        self.center[0] += di as f64 * self.resolution;
        self.center[1] += dj as f64 * self.resolution;

        let n = self.dims as i32;
        let clamp = |v: i32| v.clamp(0, n - 1) as usize;
        let old_elev = std::mem::take(&mut self.elevation);
        let old_conf = std::mem::take(&mut self.confidence);
        let old_obs = std::mem::take(&mut self.obs_count);

        let dims = self.dims;
        let mut elevation = Vec::with_capacity(dims * dims);
        let mut confidence = Vec::with_capacity(dims * dims);
        let mut obs_count = Vec::with_capacity(dims * dims);
        for i in 0..n {
            let oi = i + di;
            for j in 0..n {
                let oj = j + dj;
                if oi >= 0 && oi < n && oj >= 0 && oj < n {
                    let old = oi as usize * dims + oj as usize;
                    elevation.push(old_elev[old]);
                    confidence.push(old_conf[old]);
                    obs_count.push(old_obs[old]);
                } else {
                    // Fresh cell: nearest previously-known elevation, no trust.
                    let near = clamp(oi) * dims + clamp(oj);
                    elevation.push(old_elev[near]);
                    confidence.push(0.0);
                    obs_count.push(0);
                }
            }
        }
        self.elevation = elevation;
        self.confidence = confidence;
        self.obs_count = obs_count;
        self.clear_frame();
    }

    /// Sums of the selected layers over the `k`x`k` window centered at
    /// `center`, clipped at the map border. Returns the per-layer sums and
    /// the number of contributing (in-bounds) cells.
    ///
    /// For statistics layers, cells without points contribute zero.
    pub fn patch_sums(&self, center: CellIndex, k: usize, layers: &[Layer]) -> (Vec<f64>, usize) {
        assert!(k % 2 == 1, "patch size must be odd");
        let r = (k / 2) as i32;
        let mut sums = vec![0.0; layers.len()];
        let mut cells = 0usize;
        for i in center.i - r..=center.i + r {
            for j in center.j - r..=center.j + r {
                let Some(idx) = self.linear(CellIndex { i, j }) else {
                    continue;
                };
                cells += 1;
                for (slot, layer) in layers.iter().enumerate() {
                    sums[slot] += self.layer_value(idx, *layer);
                }
            }
        }
        (sums, cells)
    }

    fn layer_value(&self, idx: usize, layer: Layer) -> f64 {
        let s = &self.stats[idx];
        match layer {
            Layer::Count => s.count() as f64,
            Layer::MinZ if s.count() > 0 => s.min_z(),
            Layer::MeanZ if s.count() > 0 => s.mean_z(),
            Layer::MaxZ if s.count() > 0 => s.max_z(),
            Layer::MinZ | Layer::MeanZ | Layer::MaxZ => 0.0,
            Layer::Variance => s.variance(),
            Layer::Elevation => self.elevation[idx],
            Layer::Confidence => self.confidence[idx],
        }
    }

    /// Every in-bounds cell ordered by Chebyshev ring distance from `start`:
    /// ring 0, then ring 1, and so on, each ring walked in a fixed clockwise
    /// order and clipped at the borders.
    pub fn spiral_indices(&self, start: CellIndex) -> Vec<CellIndex> {
        debug_assert!(self.in_bounds(start), "spiral start must be in bounds");
        let n = self.dims as i32;
        let mut out = Vec::with_capacity(self.cell_count());
        if self.in_bounds(start) {
            out.push(start);
        }
        let max_r = [start.i, n - 1 - start.i, start.j, n - 1 - start.j]
            .into_iter()
            .max()
            .unwrap_or(0);
        let mut push = |out: &mut Vec<CellIndex>, i: i32, j: i32| {
            let cell = CellIndex { i, j };
            if self.in_bounds(cell) {
                out.push(cell);
            }
        };
        for r in 1..=max_r {
            let (top, bottom) = (start.i - r, start.i + r);
            let (left, right) = (start.j - r, start.j + r);
            for j in left..=right {
                push(&mut out, top, j);
            }
            for i in top + 1..=bottom {
                push(&mut out, i, right);
            }
            for j in (left..right).rev() {
                push(&mut out, bottom, j);
            }
            for i in (top + 1..bottom).rev() {
                push(&mut out, i, left);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn map(dims: usize) -> GridMap {
        GridMap::new(0.33, dims, [0.0, 0.0], 0.0).unwrap()
    }

    #[test]
    fn center_point_maps_to_center_cell() {
        let m = map(361);
        assert_eq!(m.world_to_cell(0.0, 0.0), CellIndex::new(180, 180));
    }

    #[test]
    fn quarter_cell_offset_rounds_to_nearest() {
        // x = R*3 + R/4 is closest to the cell 3 steps east of center.
        let m = map(361);
        let r = m.resolution();
        let cell = m.world_to_cell(r * 3.0 + r / 4.0, 0.0);
        assert_eq!(cell, CellIndex::new(183, 180));
    }

    #[test]
    fn beyond_half_extent_is_out_of_bounds() {
        let m = map(361);
        let edge = 361.0 * 0.33 / 2.0;
        let cell = m.world_to_cell(edge + 0.2, 0.0);
        assert!(!m.in_bounds(cell));
        assert!(m.linear(cell).is_none());
    }

    #[test]
    fn recenter_to_same_center_is_identity() {
        let mut m = map(5);
        m.set_elevation(CellIndex::new(1, 2), 3.5).unwrap();
        m.set_confidence(CellIndex::new(1, 2), 0.7).unwrap();
        let before = m.clone();
        m.recenter(m.center());
        assert_eq!(before.elevation(), m.elevation());
        assert_eq!(before.confidence(), m.confidence());
        assert_eq!(before.center(), m.center());
    }

    #[test]
    fn one_cell_east_shift_moves_data_west_and_exposes_east_column() {
        // Index bookkeeping oracle on a 5x5 toy map: fill g with a unique
        // value per cell, shift one cell east, check every world anchor.
        let mut m = map(5);
        for i in 0..5 {
            for j in 0..5 {
                m.set_elevation(CellIndex::new(i, j), (i * 10 + j) as f64)
                    .unwrap();
                m.set_confidence(CellIndex::new(i, j), 0.5).unwrap();
            }
        }
        let r = m.resolution();
        m.recenter([r, 0.0]);
        assert_eq!(m.center(), [r, 0.0]);
        for i in 0..4 {
            for j in 0..5 {
                // New cell (i, j) holds what was at (i + 1, j).
                let idx = m.linear(CellIndex::new(i, j)).unwrap();
                assert_eq!(m.elevation()[idx], ((i + 1) * 10 + j) as f64);
                assert_eq!(m.confidence()[idx], 0.5);
            }
        }
        // Easternmost column is fresh: zero confidence, elevation copied from
        // the nearest previously-known (old easternmost) column.
        for j in 0..5 {
            let idx = m.linear(CellIndex::new(4, j)).unwrap();
            assert_eq!(m.confidence()[idx], 0.0);
            assert_eq!(m.elevation()[idx], (4 * 10 + j) as f64);
        }
    }

    #[test]
    fn shift_beyond_dims_evicts_everything() {
        let mut m = map(5);
        for i in 0..5 {
            for j in 0..5 {
                m.set_confidence(CellIndex::new(i, j), 0.9).unwrap();
            }
        }
        m.recenter([100.0, 0.0]);
        assert!(m.confidence().iter().all(|&c| c == 0.0));
        assert!(m.elevation().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn patch_sums_uniform_interior() {
        let mut m = map(7);
        for i in 0..7 {
            for j in 0..7 {
                m.set_confidence(CellIndex::new(i, j), 0.25).unwrap();
            }
        }
        let (sums, cells) = m.patch_sums(CellIndex::new(3, 3), 3, &[Layer::Confidence]);
        assert_eq!(cells, 9);
        assert!((sums[0] - 9.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn patch_sums_clipped_at_corner() {
        let m = map(7);
        let (_, cells) = m.patch_sums(CellIndex::new(0, 0), 3, &[Layer::Count]);
        assert_eq!(cells, 4);
    }

    #[test]
    fn patch_sums_5x5_confidence_boundary() {
        // 25 cells at 0.05 sum to the o_minc threshold value 1.25.
        let mut m = map(5);
        for i in 0..5 {
            for j in 0..5 {
                m.set_confidence(CellIndex::new(i, j), 0.05).unwrap();
            }
        }
        let (sums, cells) = m.patch_sums(CellIndex::new(2, 2), 5, &[Layer::Confidence]);
        assert_eq!(cells, 25);
        assert!((sums[0] - 1.25).abs() / 1.25 < 1e-9);
    }

    #[test]
    fn spiral_single_cell_map() {
        let m = map(1);
        assert_eq!(m.spiral_indices(CellIndex::new(0, 0)), vec![CellIndex::new(0, 0)]);
    }

    #[test]
    fn spiral_3x3_from_center_is_ring0_then_ring1() {
        // Enumeration oracle: ring 0 is the start, ring 1 the other 8 cells.
        let m = map(3);
        let order = m.spiral_indices(CellIndex::new(1, 1));
        assert_eq!(order.len(), 9);
        assert_eq!(order[0], CellIndex::new(1, 1));
        let ring1: HashSet<_> = order[1..].iter().copied().collect();
        assert_eq!(ring1.len(), 8);
        for cell in &order[1..] {
            assert_eq!(cell.ring_distance(CellIndex::new(1, 1)), 1);
        }
    }

    #[test]
    fn spiral_5x5_from_corner_visits_all_with_rings_in_order() {
        let m = map(5);
        let start = CellIndex::new(0, 0);
        let order = m.spiral_indices(start);
        assert_eq!(order.len(), 25);
        let unique: HashSet<_> = order.iter().copied().collect();
        assert_eq!(unique.len(), 25);
        let mut last_ring = 0;
        for cell in &order {
            let ring = cell.ring_distance(start);
            assert!(ring >= last_ring, "ring order violated at {cell:?}");
            last_ring = ring;
        }
    }

    proptest! {
        #[test]
        fn world_cell_round_trip_within_half_resolution(
            x in -59.0f64..59.0,
            y in -59.0f64..59.0,
        ) {
            let m = map(361);
            let cell = m.world_to_cell(x, y);
            prop_assert!(m.in_bounds(cell));
            let [wx, wy] = m.cell_to_world(cell);
            prop_assert!((wx - x).abs() <= m.resolution() / 2.0 + 1e-12);
            prop_assert!((wy - y).abs() <= m.resolution() / 2.0 + 1e-12);
        }

        #[test]
        fn recenter_preserves_world_anchored_elevation(
            di in -6i32..6,
            dj in -6i32..6,
            seed in 0u64..1000,
        ) {
            let dims = 9usize;
            let mut m = GridMap::new(0.5, dims, [0.0, 0.0], 0.0).unwrap();
            // Deterministic pseudo-random fill keyed by cell.
            for i in 0..dims as i32 {
                for j in 0..dims as i32 {
                    let v = ((i as u64 * 31 + j as u64 * 17 + seed) % 97) as f64;
                    m.set_elevation(CellIndex::new(i, j), v).unwrap();
                    m.set_confidence(CellIndex::new(i, j), (v / 97.0).min(1.0)).unwrap();
                }
            }
            let before = m.clone();
            let shift = [di as f64 * 0.5, dj as f64 * 0.5];
            m.recenter(shift);

            // Idempotence: recentering again to the same center changes nothing.
            let snapshot = m.clone();
            m.recenter(shift);
            prop_assert_eq!(snapshot.elevation(), m.elevation());

            // Query by world coordinate on the overlap region.
            for i in 0..dims as i32 {
                for j in 0..dims as i32 {
                    let [wx, wy] = before.cell_to_world(CellIndex::new(i, j));
                    let new_cell = m.world_to_cell(wx, wy);
                    if let Some(new_idx) = m.linear(new_cell) {
                        let old_idx = before.linear(CellIndex::new(i, j)).unwrap();
                        prop_assert_eq!(before.elevation()[old_idx], m.elevation()[new_idx]);
                        prop_assert_eq!(before.confidence()[old_idx], m.confidence()[new_idx]);
                    }
                }
            }
        }

        #[test]
        fn spiral_is_a_permutation_of_all_cells(
            dims in prop::sample::select(vec![1usize, 3, 5, 9, 15]),
            si in 0i32..15,
            sj in 0i32..15,
        ) {
            let m = map(dims);
            let start = CellIndex::new(si.min(dims as i32 - 1), sj.min(dims as i32 - 1));
            let order = m.spiral_indices(start);
            prop_assert_eq!(order.len(), dims * dims);
            let unique: HashSet<_> = order.iter().copied().collect();
            prop_assert_eq!(unique.len(), dims * dims);
            prop_assert_eq!(order[0], start);
            let mut last = 0;
            for cell in &order {
                let ring = cell.ring_distance(start);
                prop_assert!(ring >= last);
                last = ring;
            }
        }
    }
}
