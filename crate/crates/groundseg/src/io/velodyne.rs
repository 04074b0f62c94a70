// SPDX-License-Identifier: Apache-2.0

//! Raw scan format: consecutive little-endian `f32` quadruples
//! `(x, y, z, intensity)`, 16 bytes per point.

use crate::cloud::{Point, PointCloud};
use crate::error::{Error, Result};

pub const RECORD_SIZE: usize = 16;

/// Decode a raw scan. Points with non-finite coordinates are dropped; the
/// second return value reports how many. Point order is preserved.
pub fn read_velodyne_bin(bytes: &[u8]) -> Result<(PointCloud, usize)> {
    if bytes.len() % RECORD_SIZE != 0 {
        return Err(Error::Format(format!(
            "scan length {} is not a multiple of {RECORD_SIZE}",
            bytes.len()
        )));
    }
    let mut points = Vec::with_capacity(bytes.len() / RECORD_SIZE);
    let mut dropped = 0usize;
    for rec in bytes.chunks_exact(RECORD_SIZE) {
        let f = |off: usize| f32::from_le_bytes(rec[off..off + 4].try_into().unwrap());
        let (x, y, z, intensity) = (f(0), f(4), f(8), f(12));
        if x.is_finite() && y.is_finite() && z.is_finite() {
            points.push(Point {
                x: x as f64,
                y: y as f64,
                z: z as f64,
                intensity: intensity as f64,
            });
        } else {
            dropped += 1;
        }
    }
    Ok((
        PointCloud {
            points,
            sensor_origin: [0.0; 3],
            frame_id: 0,
        },
        dropped,
    ))
}

/// Encode a cloud back into the raw record layout.
pub fn write_velodyne_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * RECORD_SIZE);
    for p in &cloud.points {
        out.extend_from_slice(&(p.x as f32).to_le_bytes());
        out.extend_from_slice(&(p.y as f32).to_le_bytes());
        out.extend_from_slice(&(p.z as f32).to_le_bytes());
        out.extend_from_slice(&(p.intensity as f32).to_le_bytes());
    }
    out
}
