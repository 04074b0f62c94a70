// SPDX-License-Identifier: Apache-2.0

//! Spiral terrain interpolation.
//!
//! Cells without a ground detection this frame receive a confidence-weighted
//! blend of their own stored elevation and the 3x3 neighborhood average,
//! visited spirally outward from the sensor and updated in place so inner
//! (better observed) cells feed the outer ones within the same pass. Their
//! confidence then decays by `1/theta`.
//!
//! This pass is strictly sequential: the in-place outward order is part of
//! the algorithm, not an implementation detail.

use crate::config::Config;
use crate::grid::{CellClass, CellIndex, GridMap};

/// Interpolate every cell not classified ground this frame, in `order`
/// (normally [`GridMap::spiral_indices`] from the sensor cell).
pub fn interpolate(map: &mut GridMap, order: &[CellIndex], cfg: &Config) {
    let dims = map.dims() as i32;
    let decay = cfg.theta;
    let (_, class, elevation, confidence) = map.fuse_layers();
    for cell in order {
        let idx = (cell.i * dims + cell.j) as usize;
        if class[idx] == CellClass::Ground {
            continue;
        }
        let c = confidence[idx];
        let mut sum_c = 0.0;
        let mut sum_cg = 0.0;
        let i0 = (cell.i - 1).max(0);
        let i1 = (cell.i + 1).min(dims - 1);
        let j0 = (cell.j - 1).max(0);
        let j1 = (cell.j + 1).min(dims - 1);
        for i in i0..=i1 {
            for j in j0..=j1 {
                let n = (i * dims + j) as usize;
                sum_c += confidence[n];
                sum_cg += confidence[n] * elevation[n];
            }
        }
        if sum_c > 0.0 {
            elevation[idx] = (1.0 - c) * (sum_cg / sum_c) + c * elevation[idx];
        }
        confidence[idx] = c - c / decay;
    }
}
