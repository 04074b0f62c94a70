// SPDX-License-Identifier: Apache-2.0

//! Readers and writers for the dataset formats the pipeline consumes and
//! produces: raw `.bin` scans, `.label` files, pose chains, and elevation
//! map exports.

pub mod labels;
pub mod poses;
pub mod terrain;
pub mod velodyne;

pub use labels::{encode_point_labels, read_labels, write_labels};
pub use poses::{read_poses, Pose};
pub use terrain::TerrainSnapshot;
pub use velodyne::{read_velodyne_bin, write_velodyne_bin};
