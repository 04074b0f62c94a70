// SPDX-License-Identifier: Apache-2.0

//! 2D grid segment traversal (Amanatides & Woo style cell stepping).
//!
//! Walks every cell a planar segment passes through, in order, yielding the
//! normalized parameter interval `[t_in, t_out] ⊆ [0, 1]` the segment spends
//! inside each cell. Used by the outlier filter to test line of sight against
//! the elevation map at exact cell granularity.

use crate::grid::{CellIndex, GridMap};

/// One visited cell with the segment parameter interval spent inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayCell {
    pub cell: CellIndex,
    pub t_in: f64,
    pub t_out: f64,
}

impl RayCell {
    pub fn t_mid(&self) -> f64 {
        0.5 * (self.t_in + self.t_out)
    }
}

/// Iterator over the cells crossed by the segment `from -> to`.
///
/// Cells are yielded in traversal order including out-of-bounds ones; the
/// caller decides how to treat them. Corner crossings may yield a zero-width
/// interval for the diagonal neighbor.
pub struct SegmentTraversal {
    cell: [i32; 2],
    step: [i32; 2],
    t_max: [f64; 2],
    t_delta: [f64; 2],
    t_prev: f64,
    done: bool,
}

/// Traverse the planar segment between two world positions across the map's
/// cell lattice.
pub fn traverse(map: &GridMap, from: [f64; 2], to: [f64; 2]) -> SegmentTraversal {
    let half = map.half() as f64;
    let res = map.resolution();
    let center = map.center();
    let grid = |p: [f64; 2]| {
        [
            (p[0] - center[0]) / res + half + 0.5,
            (p[1] - center[1]) / res + half + 0.5,
        ]
    };
    let u0 = grid(from);
    let u1 = grid(to);

    let mut cell = [0i32; 2];
    let mut step = [0i32; 2];
    let mut t_max = [f64::INFINITY; 2];
    let mut t_delta = [f64::INFINITY; 2];
    for axis in 0..2 {
        let start = u0[axis].floor();
        cell[axis] = start as i32;
        let d = u1[axis] - u0[axis];
        if d > 0.0 {
            step[axis] = 1;
            t_delta[axis] = 1.0 / d;
            t_max[axis] = (start + 1.0 - u0[axis]) / d;
        } else if d < 0.0 {
            step[axis] = -1;
            t_delta[axis] = -1.0 / d;
            t_max[axis] = (u0[axis] - start) / -d;
        }
    }
    SegmentTraversal {
        cell,
        step,
        t_max,
        t_delta,
        t_prev: 0.0,
        done: false,
    }
}

impl Iterator for SegmentTraversal {
    type Item = RayCell;

    fn next(&mut self) -> Option<RayCell> {
        if self.done {
            return None;
        }
        let cell = CellIndex::new(self.cell[0], self.cell[1]);
        let t_in = self.t_prev;
        let t_next = self.t_max[0].min(self.t_max[1]);
        if t_next >= 1.0 {
            self.done = true;
            return Some(RayCell {
                cell,
                t_in,
                t_out: 1.0,
            });
        }
        let axis = usize::from(self.t_max[1] < self.t_max[0]);
        self.cell[axis] += self.step[axis];
        self.t_max[axis] += self.t_delta[axis];
        self.t_prev = t_next;
        Some(RayCell {
            cell,
            t_in,
            t_out: t_next,
        })
    }
}
