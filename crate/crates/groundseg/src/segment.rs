// SPDX-License-Identifier: Apache-2.0

//! Point cloud segmentation against the finished elevation map.
//!
//! A point's height above its cell's elevation is compared with `h_g` on
//! ground-classified cells and the stricter `h_o` everywhere else. Points at
//! or below the surface count as ground; points outside the map and rejected
//! outliers do not.

use rayon::prelude::*;

use crate::cloud::{PointCloud, PointLabel};
use crate::config::Config;
use crate::grid::{CellClass, GridMap};

/// Label every input point. `outlier_mask` must be positionally aligned with
/// the cloud; masked points come back as [`PointLabel::Outlier`]. Output
/// order is input order.
pub fn segment(
    cloud: &PointCloud,
    map: &GridMap,
    outlier_mask: &[bool],
    cfg: &Config,
) -> Vec<PointLabel> {
    assert_eq!(cloud.len(), outlier_mask.len());
    cloud
        .points
        .par_iter()
        .zip(outlier_mask.par_iter())
        .map(|(p, &masked)| {
            if masked {
                return PointLabel::Outlier;
            }
            let Some(idx) = map.linear(map.world_to_cell(p.x, p.y)) else {
                return PointLabel::NonGround;
            };
            let delta = p.z - map.elevation()[idx];
            let threshold = if map.class()[idx] == CellClass::Ground {
                cfg.h_g
            } else {
                cfg.h_o
            };
            if delta <= threshold {
                PointLabel::Ground
            } else {
                PointLabel::NonGround
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point;
    use crate::grid::CellIndex;
    use proptest::prelude::*;

    fn setup() -> (GridMap, Config) {
        let mut map = GridMap::new(0.5, 21, [0.0, 0.0], 1.0).unwrap();
        // Ground-classified cell around x = 2, obstacle cell around x = -2.
        let g = map.world_to_cell(2.0, 0.0);
        let o = map.world_to_cell(-2.0, 0.0);
        let gi = map.linear(g).unwrap();
        let oi = map.linear(o).unwrap();
        map.class_mut()[gi] = CellClass::Ground;
        map.class_mut()[oi] = CellClass::Obstacle;
        (map, Config::default())
    }

    fn point(x: f64, z: f64) -> Point {
        Point { x, y: 0.0, z, intensity: 0.0 }
    }

    fn run_one(map: &GridMap, cfg: &Config, p: Point) -> PointLabel {
        let cloud = PointCloud { points: vec![p], sensor_origin: [0.0; 3], frame_id: 0 };
        segment(&cloud, map, &[false], cfg)[0]
    }

    #[test]
    fn quarter_meter_over_ground_cell_is_ground() {
        let (map, cfg) = setup();
        assert_eq!(run_one(&map, &cfg, point(2.0, 1.25)), PointLabel::Ground);
    }

    #[test]
    fn quarter_meter_over_obstacle_cell_is_not() {
        let (map, cfg) = setup();
        assert_eq!(run_one(&map, &cfg, point(-2.0, 1.25)), PointLabel::NonGround);
    }

    #[test]
    fn point_exactly_at_elevation_is_ground_everywhere() {
        let (map, cfg) = setup();
        assert_eq!(run_one(&map, &cfg, point(2.0, 1.0)), PointLabel::Ground);
        assert_eq!(run_one(&map, &cfg, point(-2.0, 1.0)), PointLabel::Ground);
        // Unknown cell: the strict threshold applies but delta = 0 passes.
        assert_eq!(run_one(&map, &cfg, point(0.0, 1.0)), PointLabel::Ground);
    }

    #[test]
    fn below_surface_survivors_are_ground() {
        let (map, cfg) = setup();
        assert_eq!(run_one(&map, &cfg, point(-2.0, 0.4)), PointLabel::Ground);
    }

    #[test]
    fn out_of_map_and_masked_points() {
        let (map, cfg) = setup();
        assert_eq!(run_one(&map, &cfg, point(500.0, 0.0)), PointLabel::NonGround);
        let cloud = PointCloud {
            points: vec![point(2.0, 1.0)],
            sensor_origin: [0.0; 3],
            frame_id: 0,
        };
        assert_eq!(segment(&cloud, &map, &[true], &cfg)[0], PointLabel::Outlier);
    }

    proptest! {
        #[test]
        fn monotone_in_z_within_a_cell(
            z_lo in -3.0f64..3.0,
            dz in 0.0f64..3.0,
            ground_cell in prop::bool::ANY,
        ) {
            let (mut map, cfg) = setup();
            if !ground_cell {
                let idx = map.linear(CellIndex::new(10, 10)).unwrap();
                map.class_mut()[idx] = CellClass::Obstacle;
            } else {
                let idx = map.linear(CellIndex::new(10, 10)).unwrap();
                map.class_mut()[idx] = CellClass::Ground;
            }
            let lo = run_one(&map, &cfg, point(0.0, z_lo));
            let hi = run_one(&map, &cfg, point(0.0, z_lo + dz));
            // If the lower point is non-ground, everything above it is too.
            if lo == PointLabel::NonGround {
                prop_assert_eq!(hi, PointLabel::NonGround);
            }
        }

        #[test]
        fn label_count_matches_point_count(n in 0usize..200) {
            let (map, cfg) = setup();
            let cloud = PointCloud {
                points: (0..n).map(|k| point(k as f64 * 0.05 - 5.0, (k % 7) as f64 * 0.3)).collect(),
                sensor_origin: [0.0; 3],
                frame_id: 0,
            };
            let mask = vec![false; n];
            prop_assert_eq!(segment(&cloud, &map, &mask, &cfg).len(), n);
        }
    }
}
