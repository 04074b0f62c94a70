// SPDX-License-Identifier: Apache-2.0

//! Point cloud containers.

use crate::io::poses::Pose;

/// One sensor return. Coordinates are meters; the frame depends on context:
/// raw scans are in the sensor frame, the pipeline operates on world-frame
/// clouds (see [`PointCloud::transformed`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

/// An ordered scan plus the world-frame sensor position it was taken from.
///
/// Point order is preserved through the whole pipeline: output label `k`
/// always refers to input point `k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub sensor_origin: [f64; 3],
    pub frame_id: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Map a sensor-frame cloud into the world frame. The sensor origin
    /// becomes the pose translation.
    pub fn transformed(&self, pose: &Pose) -> PointCloud {
        let points = self
            .points
            .iter()
            .map(|p| {
                let [x, y, z] = pose.apply([p.x, p.y, p.z]);
                Point {
                    x,
                    y,
                    z,
                    intensity: p.intensity,
                }
            })
            .collect();
        PointCloud {
            points,
            sensor_origin: pose.translation,
            frame_id: self.frame_id,
        }
    }
}

/// Per-point segmentation result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLabel {
    Ground,
    NonGround,
    Outlier,
}
