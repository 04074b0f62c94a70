// SPDX-License-Identifier: Apache-2.0

//! Per-frame pipeline orchestration.
//!
//! Frames are processed strictly in order (the map is stateful across
//! frames); parallelism is intra-frame only, sized by
//! [`Config::worker_count`] and confined to a pool owned by the pipeline.
//! Every stage is deterministic for a fixed input regardless of the worker
//! count, so reruns produce byte-identical labels.

use std::time::Instant;

use crate::cloud::{PointCloud, PointLabel};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridMap};
use crate::{ground, interpolate, outlier, raster, segment};

/// Wall-clock milliseconds per stage of one frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub recenter_ms: f64,
    pub outlier_ms: f64,
    pub raster_ms: f64,
    pub classify_ms: f64,
    pub fuse_ms: f64,
    pub interpolate_ms: f64,
    pub segment_ms: f64,
    pub total_ms: f64,
}

/// Everything one frame produces.
#[derive(Debug, Clone)]
pub struct FrameResult {
    /// One label per input point, in input order.
    pub labels: Vec<PointLabel>,
    /// Outlier mask aligned with the input cloud.
    pub outlier_mask: Vec<bool>,
    /// Kept points that fell outside the map during rasterization.
    pub out_of_bounds: usize,
    pub timings: StageTimings,
}

pub struct Pipeline {
    cfg: Config,
    map: Option<GridMap>,
    pool: rayon::ThreadPool,
    // Spiral order cache; the start cell rarely changes between frames.
    spiral: Option<(CellIndex, Vec<CellIndex>)>,
}

impl Pipeline {
    pub fn new(cfg: Config) -> Result<Self> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.worker_count)
            .build()
            .map_err(|e| Error::Data(format!("failed to build worker pool: {e}")))?;
        Ok(Pipeline {
            cfg,
            map: None,
            pool,
            spiral: None,
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    /// The elevation map; `None` until the first frame arrives.
    pub fn map(&self) -> Option<&GridMap> {
        self.map.as_ref()
    }

    /// Run the full stage chain on one world-frame cloud:
    /// recenter, outlier filter, rasterize, classify, fuse, interpolate,
    /// segment.
    pub fn process_frame(&mut self, cloud: &PointCloud) -> Result<FrameResult> {
        let start_total = Instant::now();
        let origin = cloud.sensor_origin;
        let sensor_xy = [origin[0], origin[1]];

        let start = Instant::now();
        if self.map.is_none() {
            // First frame: every cell starts at the vehicle's ground level.
            self.map = Some(GridMap::new(
                self.cfg.resolution,
                self.cfg.dims,
                sensor_xy,
                origin[2] - self.cfg.sensor_height,
            )?);
        }
        let map = self.map.as_mut().unwrap();
        let center = map.center();
        if (sensor_xy[0] - center[0]).abs() >= self.cfg.resolution
            || (sensor_xy[1] - center[1]).abs() >= self.cfg.resolution
        {
            map.recenter(sensor_xy);
        }
        map.clear_frame();
        let recenter_ms = ms_since(start);

        let cfg = &self.cfg;
        let mut timings = StageTimings {
            recenter_ms,
            ..StageTimings::default()
        };

        let (labels, outlier_mask, out_of_bounds) = self.pool.install(|| {
            let start = Instant::now();
            let (kept, mask) = outlier::filter_outliers(cloud, map, cfg);
            timings.outlier_ms = ms_since(start);

            let start = Instant::now();
            let out_of_bounds = raster::rasterize(&kept, map);
            timings.raster_ms = ms_since(start);

            let start = Instant::now();
            ground::classify_cells(map, sensor_xy, cfg);
            timings.classify_ms = ms_since(start);

            let start = Instant::now();
            ground::fuse(map, sensor_xy, cfg);
            timings.fuse_ms = ms_since(start);

            let start = Instant::now();
            let sensor_cell = clamp_to_bounds(map, map.world_to_cell(sensor_xy[0], sensor_xy[1]));
            let cached = matches!(&self.spiral, Some((start, _)) if *start == sensor_cell);
            if !cached {
                self.spiral = Some((sensor_cell, map.spiral_indices(sensor_cell)));
            }
            let order = &self.spiral.as_ref().unwrap().1;
            interpolate::interpolate(map, order, cfg);
            timings.interpolate_ms = ms_since(start);

            let start = Instant::now();
            let labels = segment::segment(cloud, map, &mask, cfg);
            timings.segment_ms = ms_since(start);

            (labels, mask, out_of_bounds)
        });

        timings.total_ms = ms_since(start_total);
        Ok(FrameResult {
            labels,
            outlier_mask,
            out_of_bounds,
            timings,
        })
    }
}

fn clamp_to_bounds(map: &GridMap, cell: CellIndex) -> CellIndex {
    let n = map.dims() as i32;
    CellIndex::new(cell.i.clamp(0, n - 1), cell.j.clamp(0, n - 1))
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::poses::Pose;
    use crate::synth::{self, SceneSpec};

    fn small_scene() -> SceneSpec {
        SceneSpec::from_str(
            "seed = 11\nbeams = 16\nazimuth_step_deg = 2\nnoise_sigma = 0.01\n\
             box = 8 3 0 2 2 1.5\n",
        )
        .unwrap()
    }

    fn small_config() -> Config {
        Config {
            dims: 121,
            worker_count: 2,
            ..Config::default()
        }
    }

    #[test]
    fn frame_zero_labels_flat_ground() {
        let spec = small_scene();
        let pose = Pose {
            rotation: Pose::IDENTITY.rotation,
            translation: [0.0, 0.0, spec.sensor.mount_height],
        };
        let (cloud, truth) = synth::generate_scan(&spec, &pose, 0);
        let mut pipeline = Pipeline::new(small_config()).unwrap();
        let result = pipeline.process_frame(&cloud).unwrap();
        assert_eq!(result.labels.len(), cloud.len());
        // The initialized map sits at the vehicle's ground level, so frame 0
        // already separates flat ground from the box.
        let mut correct = 0;
        let mut total = 0;
        for (label, &t) in result.labels.iter().zip(&truth) {
            let expect_ground = t == synth::TRUTH_GROUND;
            total += 1;
            if (*label == PointLabel::Ground) == expect_ground {
                correct += 1;
            }
        }
        assert!(correct as f64 / total as f64 > 0.95, "{correct}/{total}");
    }

    #[test]
    fn map_follows_the_vehicle() {
        let spec = small_scene();
        let poses = synth::straight_trajectory(&spec, 12, 5.0, 0.1);
        let mut pipeline = Pipeline::new(small_config()).unwrap();
        for (k, pose) in poses.iter().enumerate() {
            let (cloud, _) = synth::generate_scan(&spec, pose, k as u64);
            pipeline.process_frame(&cloud).unwrap();
        }
        let center = pipeline.map().unwrap().center();
        let last = poses.last().unwrap().translation;
        assert!((center[0] - last[0]).abs() < pipeline.config().resolution + 1e-9);
        assert!((center[1] - last[1]).abs() < pipeline.config().resolution + 1e-9);
    }

    #[test]
    fn reruns_are_bitwise_identical_across_worker_counts() {
        let spec = small_scene();
        let poses = synth::straight_trajectory(&spec, 4, 5.0, 0.1);
        let scans: Vec<_> = poses
            .iter()
            .enumerate()
            .map(|(k, p)| synth::generate_scan(&spec, p, k as u64).0)
            .collect();
        let run = |workers: usize| -> Vec<Vec<PointLabel>> {
            let cfg = Config {
                worker_count: workers,
                ..small_config()
            };
            let mut pipeline = Pipeline::new(cfg).unwrap();
            scans
                .iter()
                .map(|cloud| pipeline.process_frame(cloud).unwrap().labels)
                .collect()
        };
        let once = run(1);
        assert_eq!(once, run(1));
        assert_eq!(once, run(4));
    }
}
